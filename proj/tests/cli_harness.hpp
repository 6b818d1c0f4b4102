#pragma once

// Runs the CLI in-process and drives every subcommand over a small scene.

#include <sstream>
#include <string>
#include <vector>

#include "motionstack/cli.hpp"
#include "oracles.hpp"

namespace harness {

using namespace motionstack;

struct CliResult {
  int code = -1;
  std::string out, err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "motionstack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

using Snapshot = std::map<std::string, std::vector<unsigned char>>;

inline Snapshot snapshot(const fs::path& root) {
  Snapshot out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = oracle::file_bytes(e.path());
  return out;
}

struct PipelineRun {
  std::vector<std::pair<std::string, CliResult>> steps;  // subcommand label, result
  bool ok() const {
    for (const auto& [name, r] : steps)
      if (r.code != 0) return false;
    return true;
  }
  std::string failures() const {
    std::string s;
    for (const auto& [name, r] : steps)
      if (r.code != 0) s += name + " -> " + std::to_string(r.code) + ": " + r.err;
    return s;
  }
};

// Every subcommand once, all outputs under `d`. The two inputs that no
// subcommand produces (conv weights, a float feature map) are written first.
inline PipelineRun run_pipeline(const fs::path& d) {
  const auto s = [&](const char* rel) { return (d / rel).string(); };
  PipelineRun run;
  const auto step = [&](const std::string& name, std::vector<std::string> args) {
    run.steps.emplace_back(name, run_cli(std::move(args)));
  };

  step("synth", {"synth", "--out", s("scene"), "--width", "96", "--height", "72", "--frames", "24", "--objects", "4",
                 "--switch", "0:10", "--switch", "2:15", "--seed", "3", "--background", "textured"});
  step("synth perturb", {"synth", "perturb", "--gt", s("scene/gt.jsonl"), "--out", s("dets.jsonl"), "--drop-rate", "0.1",
                         "--jitter", "1", "--fp-rate", "0.3", "--score-spread", "0.5", "--width", "96", "--height", "72",
                         "--seed", "2"});
  step("stack", {"stack", "--frames", s("scene/frames"), "--variant", "diff-seq", "--n", "3", "--out", s("stack"),
                 "--report", s("stack_report.json")});

  const auto weights = random_init_first_layer(8, 3, 3, 3, 17);
  write_conv_weights(weights, d / "conv.mten");
  step("surgery", {"surgery", "--weights", s("conv.mten"), "--mode", "replicate", "--n", "3", "--out", s("conv_rep.mten"),
                   "--report", s("surgery_report.json")});
  step("surgery random", {"surgery", "--weights", s("conv.mten"), "--mode", "random", "--n", "2", "--seed", "4", "--out",
                          s("conv_rand.mten")});
  step("eval", {"eval", "--dets", s("dets.jsonl"), "--gt", s("scene/gt.jsonl"), "--out", s("eval.json")});

  const auto frame = read_ppm(d / "scene" / "frames" / "frame_0000.ppm");
  const auto planar = to_planar(frame);
  std::vector<float> map(planar.u8().begin(), planar.u8().end());
  write_tensor(Tensor::f32({3, frame.height, frame.width}, std::move(map)), d / "map.mten");
  step("features", {"features", "--map", s("map.mten"), "--scale", "0.5", "--boxes", s("scene/gt.jsonl"), "--out",
                    s("feats.mten"), "--out-size", "4", "--report", s("features_report.json")});

  step("mine", {"mine", "--tracklets", s("scene/tracklets.json"), "--min-len", "8", "--per-anchor", "2", "--seed", "1",
                "--out", s("triplets.jsonl"), "--report", s("mine_report.json")});
  step("train", {"train", "--tracklets", s("scene/tracklets.json"), "--features", s("scene/features.mten"), "--triplets",
                 s("triplets.jsonl"), "--min-len", "8", "--epochs", "3", "--hidden", "32,16", "--init-seed", "2", "--seed",
                 "3", "--out", s("net/enc.json"), "--report", s("train_report.json")});
  step("reid", {"reid", "--tracklets", s("scene/tracklets.json"), "--features", s("scene/features.mten"), "--net",
                s("net/enc.json"), "--identity-map", s("scene/identity_map.json"), "--min-len", "8", "--out", s("reid.json")});
  step("project", {"project", "--tracklets", s("scene/tracklets.json"), "--features", s("scene/features.mten"), "--net",
                   s("net/enc.json"), "--out", s("proj.csv"), "--report", s("project_report.json")});
  return run;
}

}  // namespace harness
