#pragma once

// Everything except OpenCV-backed file I/O (pbts/io/image_io.hpp).

#include "pbts/colour_model.hpp"
#include "pbts/config.hpp"
#include "pbts/geometry.hpp"
#include "pbts/harness/export.hpp"
#include "pbts/harness/protocol.hpp"
#include "pbts/harness/sequence.hpp"
#include "pbts/harness/synthetic.hpp"
#include "pbts/image.hpp"
#include "pbts/localisation.hpp"
#include "pbts/placement.hpp"
#include "pbts/tracker.hpp"
