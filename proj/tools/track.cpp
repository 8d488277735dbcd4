// track: run the tracker on image sequences, render synthetic sequences and
// recompute summaries from saved results.
//
// Exit codes: 0 ok, 1 run error, 2 config or parse error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pbts/io/image_io.hpp"
#include "pbts/pbts.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRunError = 1;
constexpr int kParseError = 2;

struct RunArgs {
  std::string seq, gt, config, mode = "supervised", out, ablate;
  std::uint64_t seed = 0;
  bool annotate = false;
  bool dump_init = false;
  int workers = -1;
};

int cmd_run(const RunArgs& a) {
  pbts::Settings settings;
  pbts::Mode mode;
  pbts::Sequence seq;
  try {
    if (!a.config.empty()) settings = pbts::parse_settings(pbts::read_text_file(a.config));
    if (!a.ablate.empty()) pbts::apply_ablations(settings.tracker.ablation, a.ablate);
    if (a.workers >= 0) settings.tracker.workers = static_cast<unsigned>(a.workers);
    settings.tracker.validate();
    if (a.mode == "supervised") mode = pbts::Mode::kSupervised;
    else if (a.mode == "onepass") mode = pbts::Mode::kOnePass;
    else throw pbts::ConfigError("unknown mode '" + a.mode + "'");
    seq = pbts::load_sequence(a.seq, a.gt, pbts::io::read_image);
  } catch (const std::exception& e) {
    std::cerr << "track run: " << e.what() << "\n";
    return kParseError;
  }

  try {
    const fs::path out = a.out;
    fs::create_directories(out);
    if (a.annotate) fs::create_directories(out / "annotated");
    if (a.dump_init) fs::create_directories(out / "debug");

    pbts::PbtsSequenceTracker tracker(settings.tracker, a.seed);
    if (a.dump_init) {
      tracker.on_init = [&](const pbts::InitTrace& trace, const pbts::Image& img, std::size_t frame) {
        const int w = img.width(), h = img.height();
        const std::string stem = "init_" + std::to_string(frame + 1);
        if (trace.mask)
          pbts::io::write_image(out / "debug" / (stem + "_mask.png"), pbts::io::mask_image(*trace.mask, w, h));
        if (trace.superpixels)
          pbts::io::write_image(out / "debug" / (stem + "_labels.png"),
                                pbts::io::label_image(*trace.superpixels, w, h));
      };
    }

    pbts::ProtocolOptions opt;
    opt.mode = mode;
    opt.reinit_skip = settings.protocol.reinit_skip;
    if (a.annotate) {
      opt.on_frame = [&](const pbts::FrameRecord& rec, const pbts::Image& img) {
        if (img.empty()) return;
        const auto annotated = pbts::io::annotate(img, rec.predicted, &seq.truth[rec.frame],
                                                  rec.status != pbts::FrameStatus::kInit);
        pbts::io::write_image(out / "annotated" / pbts::io::frame_file_name(rec.frame), annotated);
      };
    }
    const auto result = pbts::run_sequence(seq, tracker, opt);
    const auto summary = pbts::export_run(result, out, a.seed);
    std::cout << pbts::summary_json(summary).dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "track run: " << e.what() << "\n";
    return kRunError;
  }
  return kOk;
}

int cmd_synth(const std::string& spec, const std::string& out) {
  pbts::synth::Scenario s;
  try {
    s = pbts::synth::parse_scenario(pbts::read_text_file(spec));
  } catch (const std::exception& e) {
    std::cerr << "track synth: " << e.what() << "\n";
    return kParseError;
  }
  try {
    pbts::io::write_synthetic(s, out);
  } catch (const std::exception& e) {
    std::cerr << "track synth: " << e.what() << "\n";
    return kRunError;
  }
  std::cout << "wrote " << s.frames << " frames to " << out << "\n";
  return kOk;
}

int cmd_eval(const std::string& results) {
  try {
    const auto dirs = pbts::find_result_dirs(results);
    if (dirs.empty()) throw pbts::SequenceError("no frames.csv under " + results);
    std::vector<pbts::Summary> runs;
    nlohmann::ordered_json j;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& d : dirs) {
      runs.push_back(pbts::evaluate_result_dir(d));
      auto r = pbts::summary_json(runs.back());
      r["path"] = d.string();
      j["runs"].push_back(r);
    }
    j["mean"] = pbts::summary_json(pbts::average(runs));
    std::cout << j.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "track eval: " << e.what() << "\n";
    return kParseError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-based colour tracker: run, synthesise, evaluate"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Track a sequence and export results");
  run_cmd->add_option("--seq", run.seq, "Frame directory or manifest")->required();
  run_cmd->add_option("--gt", run.gt, "Ground-truth file")->required();
  run_cmd->add_option("--config", run.config, "key = value config file");
  run_cmd->add_option("--seed", run.seed, "Master seed");
  run_cmd->add_option("--mode", run.mode, "supervised or onepass");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_flag("--annotate", run.annotate, "Write annotated frames");
  run_cmd->add_option("--ablate", run.ablate, "Comma-separated ablation switches");
  run_cmd->add_flag("--dump-init", run.dump_init, "Write segmentation mask and superpixel labels at each init");
  run_cmd->add_option("--workers", run.workers, "Worker threads, 0 = all cores (overrides config)");

  std::string spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic sequence");
  synth_cmd->add_option("--spec", spec, "Scenario file")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  std::string results;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute summaries from frames.csv files");
  eval_cmd->add_option("--results", results, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParseError;
  }

  if (run_cmd->parsed()) return cmd_run(run);
  if (synth_cmd->parsed()) return cmd_synth(spec, synth_out);
  if (eval_cmd->parsed()) return cmd_eval(results);
  return kParseError;
}
