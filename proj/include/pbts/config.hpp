#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pbts/colour_model.hpp"
#include "pbts/geometry.hpp"
#include "pbts/placement.hpp"

namespace pbts {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each switch disables exactly one pipeline stage.
struct Ablation {
  bool no_local_opt = false;       // L = 0: global transforms only
  bool no_update = false;          // models frozen after frame 1
  bool no_segmentation = false;    // whole box treated as object
  bool uniform_placement = false;  // grid over the box, no superpixels
  bool default_mbd = false;        // b = 1/2

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct TrackerConfig {
  int num_patches = 35;   // P
  PatchSize patch{5, 5};  // w_x, w_y
  double radius = 20.0;   // R
  double mbd_exponent = 1.4;  // b
  double beta_c = 0.05;
  double beta_s = 1.7;
  double gamma = 0.25;
  int s_max = 10;
  int num_transforms = 1000;  // G
  int num_refined = 100;      // L
  int window = 5;             // W
  double expand = 0.2;
  MotionPriors priors;
  SegmenterConfig seg;
  Ablation ablation;
  double update_min_valid = 0.5;
  unsigned workers = 1;  // 0 = all hardware threads

  double effective_exponent() const noexcept { return ablation.default_mbd ? 0.5 : mbd_exponent; }
  int effective_refined() const noexcept {
    return ablation.no_local_opt ? 0 : std::min(num_refined, num_transforms);
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    require(num_patches >= 1, "P must be >= 1");
    require(patch.w >= 1 && patch.h >= 1, "patch size must be >= 1");
    require(radius > 0.0, "R must be > 0");
    require(mbd_exponent >= 0.0, "b must be >= 0");
    require(beta_c >= 0.0 && beta_c <= 1.0, "beta_c must lie in [0,1]");
    require(beta_s >= 0.0, "beta_s must be >= 0");
    require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0,1]");
    require(s_max >= 1, "S_max must be >= 1");
    require(num_transforms >= 1, "G must be >= 1");
    require(num_refined >= 0, "L must be >= 0");
    require(window >= 1 && window % 2 == 1, "W must be odd and >= 1");
    require(expand >= 0.0, "expand must be >= 0");
    require(priors.sigma_r > 0.0 && priors.sigma_s > 0.0 && priors.sigma_x > 0.0 &&
                priors.sigma_y > 0.0,
            "motion priors must be > 0");
    require(seg.rho_minus > 0.0 && seg.rho_minus <= 1.0 && seg.rho_plus >= 1.0,
            "need 0 < rho_minus <= 1 <= rho_plus");
    require(seg.tau > 0.0 && seg.tau < 1.0, "tau must lie in (0,1)");
    require(seg.lambda >= 0.0, "lambda must be >= 0");
    require(update_min_valid >= 0.0 && update_min_valid <= 1.0, "update_min_valid must lie in [0,1]");
  }

  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

// Evaluation protocol knobs that live in the same config file.
struct ProtocolConfig {
  int reinit_skip = 5;

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct Settings {
  TrackerConfig tracker;
  ProtocolConfig protocol;

  friend bool operator==(const Settings&, const Settings&) = default;
};

namespace detail {

template <class T>
void bind_number(std::map<std::string, std::function<void(std::string_view)>>& m, const char* key,
                 T& target) {
  m[key] = [&target, key](std::string_view v) {
    T value{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    bool ok = ec == std::errc{} && ptr == v.data() + v.size();
    if constexpr (std::is_floating_point_v<T>) ok = ok && std::isfinite(value);
    if (!ok) throw ConfigError(std::string("bad value for ") + key + ": '" + std::string(v) + "'");
    target = value;
  };
}

inline void bind_flag(std::map<std::string, std::function<void(std::string_view)>>& m, const char* key,
                      bool& target) {
  m[key] = [&target, key](std::string_view v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") {
      target = true;
    } else if (v == "0" || v == "false" || v == "no" || v == "off") {
      target = false;
    } else {
      throw ConfigError(std::string("bad boolean for ") + key + ": '" + std::string(v) + "'");
    }
  };
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::function<void(std::string_view)>> bindings(Settings& s) {
  std::map<std::string, std::function<void(std::string_view)>> m;
  auto& t = s.tracker;
  bind_number(m, "P", t.num_patches);
  bind_number(m, "patch_w", t.patch.w);
  bind_number(m, "patch_h", t.patch.h);
  bind_number(m, "R", t.radius);
  bind_number(m, "b", t.mbd_exponent);
  bind_number(m, "beta_c", t.beta_c);
  bind_number(m, "beta_s", t.beta_s);
  bind_number(m, "gamma", t.gamma);
  bind_number(m, "S_max", t.s_max);
  bind_number(m, "G", t.num_transforms);
  bind_number(m, "L", t.num_refined);
  bind_number(m, "W", t.window);
  bind_number(m, "expand", t.expand);
  bind_number(m, "sigma_r", t.priors.sigma_r);
  bind_number(m, "sigma_s", t.priors.sigma_s);
  bind_number(m, "sigma_x", t.priors.sigma_x);
  bind_number(m, "sigma_y", t.priors.sigma_y);
  bind_number(m, "rho_minus", t.seg.rho_minus);
  bind_number(m, "rho_plus", t.seg.rho_plus);
  bind_number(m, "tau", t.seg.tau);
  bind_number(m, "lambda", t.seg.lambda);
  bind_number(m, "update_min_valid", t.update_min_valid);
  bind_number(m, "workers", t.workers);
  bind_flag(m, "no_local_opt", t.ablation.no_local_opt);
  bind_flag(m, "no_update", t.ablation.no_update);
  bind_flag(m, "no_segmentation", t.ablation.no_segmentation);
  bind_flag(m, "uniform_placement", t.ablation.uniform_placement);
  bind_flag(m, "default_mbd", t.ablation.default_mbd);
  bind_number(m, "reinit_skip", s.protocol.reinit_skip);
  return m;
}

}  // namespace detail

// Parses `key = value` lines; `#` starts a comment. Keys not mentioned keep
// their defaults. Unknown keys are errors.
inline Settings parse_settings(std::string_view text) {
  Settings s;
  auto m = detail::bindings(s);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    const auto it = m.find(key);
    if (it == m.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  s.tracker.validate();
  if (s.protocol.reinit_skip < 1) throw ConfigError("invalid config: reinit_skip must be >= 1");
  return s;
}

inline std::string format_settings(const Settings& s) {
  std::ostringstream os;
  os.precision(17);
  const auto& t = s.tracker;
  os << "P = " << t.num_patches << "\npatch_w = " << t.patch.w << "\npatch_h = " << t.patch.h
     << "\nR = " << t.radius << "\nb = " << t.mbd_exponent << "\nbeta_c = " << t.beta_c
     << "\nbeta_s = " << t.beta_s << "\ngamma = " << t.gamma << "\nS_max = " << t.s_max
     << "\nG = " << t.num_transforms << "\nL = " << t.num_refined << "\nW = " << t.window
     << "\nexpand = " << t.expand << "\nsigma_r = " << t.priors.sigma_r
     << "\nsigma_s = " << t.priors.sigma_s << "\nsigma_x = " << t.priors.sigma_x
     << "\nsigma_y = " << t.priors.sigma_y << "\nrho_minus = " << t.seg.rho_minus
     << "\nrho_plus = " << t.seg.rho_plus << "\ntau = " << t.seg.tau << "\nlambda = " << t.seg.lambda
     << "\nupdate_min_valid = " << t.update_min_valid << "\nworkers = " << t.workers
     << "\nno_local_opt = " << t.ablation.no_local_opt << "\nno_update = " << t.ablation.no_update
     << "\nno_segmentation = " << t.ablation.no_segmentation
     << "\nuniform_placement = " << t.ablation.uniform_placement
     << "\ndefault_mbd = " << t.ablation.default_mbd << "\nreinit_skip = " << s.protocol.reinit_skip
     << "\n";
  return os.str();
}

// Comma-separated switch names, e.g. "no_update,default_mbd".
inline void apply_ablations(Ablation& a, std::string_view list) {
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const auto name = detail::trim(list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    pos = comma == std::string_view::npos ? list.size() + 1 : comma + 1;
    if (name.empty()) continue;
    if (name == "no_local_opt") a.no_local_opt = true;
    else if (name == "no_update") a.no_update = true;
    else if (name == "no_segmentation") a.no_segmentation = true;
    else if (name == "uniform_placement") a.uniform_placement = true;
    else if (name == "default_mbd") a.default_mbd = true;
    else throw ConfigError("unknown ablation switch '" + std::string(name) + "'");
  }
}

}  // namespace pbts
