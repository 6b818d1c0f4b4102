#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
// validation error, 3 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionstack/det_metrics.hpp"
#include "motionstack/error.hpp"
#include "motionstack/frame_pipeline.hpp"
#include "motionstack/metric_learning.hpp"
#include "motionstack/roi_features.hpp"
#include "motionstack/synth_scenes.hpp"
#include "motionstack/tensor_io.hpp"
#include "motionstack/tracklets.hpp"
#include "motionstack/weight_surgery.hpp"

namespace motionstack::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

inline nlohmann::json envelope(const std::string& command, nlohmann::json inputs, nlohmann::json results) {
  return {{"tool_version", kToolVersion}, {"command", command}, {"inputs", std::move(inputs)}, {"results", std::move(results)}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { detail::write_text(path, j.dump(2) + "\n"); }

inline void maybe_report(const std::string& path, const nlohmann::json& report) {
  if (!path.empty()) write_json(path, report);
}

inline std::string fmt_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "bad layer width '" + item + "'");
    }
  }
  return out;
}

// Embeddings of every frame of every tracklet, ascending (id, frame).
struct FrameEmbeddings {
  std::vector<FrameRef> refs;
  std::vector<Embedding<float>> vectors;
};

inline FrameEmbeddings embed_all(const EmbeddingNet<float>& net, const TrackletSet& set, const FeatureMatrix<float>& features) {
  FrameEmbeddings out;
  for (const auto& [id, t] : set) {
    for (std::int64_t f = t.start; f <= t.end; ++f) {
      out.refs.push_back({id, f});
      out.vectors.push_back(net.forward(features.row(feature_row(set, {id, f}))));
    }
  }
  return out;
}

inline std::vector<std::vector<Embedding<float>>> group_by_identity(const FrameEmbeddings& e, const IdentityMap& identities) {
  std::map<std::pair<int, TrackId>, std::vector<Embedding<float>>> grouped;  // (is_singleton, key)
  for (std::size_t i = 0; i < e.refs.size(); ++i) {
    const auto g = identities.group_of(e.refs[i].id);
    const auto key = g ? std::pair{0, static_cast<TrackId>(*g)} : std::pair{1, e.refs[i].id};
    grouped[key].push_back(e.vectors[i]);
  }
  std::vector<std::vector<Embedding<float>>> out;
  for (auto& [key, v] : grouped) out.push_back(std::move(v));
  return out;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"motionstack: temporal stacking, weight surgery, detection metrics and tracklet re-identification tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // stack
  std::string frames_dir, variant_name_arg = "rgb-seq", labels_dir, stack_out, stack_report;
  int stack_n = 1, stack_delta = 1;
  auto* stack = app.add_subcommand("stack", "Build channel-stacked inputs for every frame");
  stack->add_option("--frames", frames_dir, "Directory of P6 PPM frames")->required();
  stack->add_option("--variant", variant_name_arg, "rgb-seq | rgb-int | diff-seq | diff-int")
      ->check(CLI::IsMember({"rgb-seq", "rgb-int", "diff-seq", "diff-int"}));
  stack->add_option("--n", stack_n, "Frame count N for sequential variants")->check(CLI::PositiveNumber);
  stack->add_option("--delta", stack_delta, "Interval for interval variants")->check(CLI::PositiveNumber);
  stack->add_option("--labels", labels_dir, "Directory of per-frame label files (<frame stem>.txt)");
  stack->add_option("--out", stack_out, "Output directory for stacks and manifest.json")->required();
  stack->add_option("--report", stack_report, "Optional JSON report path");

  // surgery
  std::string weights_in, surgery_mode = "replicate", surgery_out, surgery_report;
  int surgery_n = 1;
  std::uint64_t surgery_seed = 0;
  auto* surgery = app.add_subcommand("surgery", "Adapt first-layer conv weights to 3N-channel inputs");
  surgery->add_option("--weights", weights_in, "Input weights (MTENSOR F32 [c_out,c_in,kh,kw])")->required();
  surgery->add_option("--mode", surgery_mode, "replicate | random")->check(CLI::IsMember({"replicate", "random"}));
  surgery->add_option("--n", surgery_n, "Number of stacked frames N")->check(CLI::PositiveNumber);
  surgery->add_option("--seed", surgery_seed, "Seed for random mode");
  surgery->add_option("--out", surgery_out, "Output weights path")->required();
  surgery->add_option("--report", surgery_report, "Optional JSON report path");

  // eval
  std::string dets_path, gt_path, eval_out;
  auto* eval = app.add_subcommand("eval", "Precision, recall, mAP@0.5 and mAP@0.5:0.95");
  eval->add_option("--dets", dets_path, "Detections JSON-lines")->required();
  eval->add_option("--gt", gt_path, "Ground truth JSON-lines")->required();
  eval->add_option("--out", eval_out, "Report JSON path")->required();

  // features
  std::string map_path, boxes_path, feats_out, feats_report;
  double map_scale = 1.0;
  std::size_t out_size = 7, sampling_ratio = 2;
  auto* features = app.add_subcommand("features", "RoIAlign + average pooling of boxes over a feature map");
  features->add_option("--map", map_path, "Feature map (MTENSOR F32 [C,H,W])")->required();
  features->add_option("--scale", map_scale, "Feature pixels per image pixel")->check(CLI::PositiveNumber);
  features->add_option("--boxes", boxes_path, "JSON-lines records with \"bbox\"")->required();
  features->add_option("--out", feats_out, "Output features (MTENSOR F32 [num_boxes, C])")->required();
  features->add_option("--out-size", out_size, "RoIAlign output height and width")->check(CLI::PositiveNumber);
  features->add_option("--sampling-ratio", sampling_ratio, "Samples per bin axis")->check(CLI::PositiveNumber);
  features->add_option("--report", feats_report, "Optional JSON report path");

  // mine
  std::string mine_tracklets, mine_out, mine_report;
  std::size_t mine_min_len = 16, mine_per_anchor = 4;
  std::uint64_t mine_seed = 0;
  auto* mine = app.add_subcommand("mine", "Mine triplets from tracklets");
  mine->add_option("--tracklets", mine_tracklets, "Tracklet JSON")->required();
  mine->add_option("--min-len", mine_min_len, "Minimum tracklet length in frames")->check(CLI::PositiveNumber);
  mine->add_option("--per-anchor", mine_per_anchor, "Triplets per anchor frame")->check(CLI::PositiveNumber);
  mine->add_option("--seed", mine_seed, "Sampling seed");
  mine->add_option("--out", mine_out, "Triplets JSON-lines")->required();
  mine->add_option("--report", mine_report, "Optional JSON report path");

  // train
  std::string train_tracklets, train_features, train_triplets, train_out, train_report, hidden_arg = "512,256";
  TrainConfig train_cfg;
  std::size_t train_min_len = 16;
  std::uint64_t init_seed = 0;
  bool normalize = false;
  auto* train_cmd = app.add_subcommand("train", "Train the MLP embedding with triplet loss");
  train_cmd->add_option("--tracklets", train_tracklets, "Tracklet JSON with feature_rows")->required();
  train_cmd->add_option("--features", train_features, "Feature matrix (MTENSOR F32 [T, D])")->required();
  train_cmd->add_option("--triplets", train_triplets, "Triplets JSON-lines (mined on the fly when omitted)");
  train_cmd->add_option("--min-len", train_min_len, "Minimum tracklet length when mining")->check(CLI::PositiveNumber);
  train_cmd->add_option("--per-anchor", train_cfg.triplets_per_anchor, "Triplets per anchor when mining")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--margin", train_cfg.margin, "Triplet margin")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_cfg.seed, "Shuffling and mining seed");
  train_cmd->add_option("--init-seed", init_seed, "Weight initialization seed");
  train_cmd->add_option("--hidden", hidden_arg, "Comma-separated hidden widths");
  train_cmd->add_flag("--normalize", normalize, "L2-normalize embeddings");
  train_cmd->add_option("--out", train_out, "Net manifest path (layer tensors are written beside it)")->required();
  train_cmd->add_option("--report", train_report, "Optional JSON report path");

  // reid
  std::string reid_tracklets, reid_features, reid_net, reid_identities, reid_out;
  double reid_threshold = 0.5;
  std::size_t reid_min_len = 16;
  auto* reid = app.add_subcommand("reid", "Tracklet centroids, merge proposals and separation metrics");
  reid->add_option("--tracklets", reid_tracklets, "Tracklet JSON with feature_rows")->required();
  reid->add_option("--features", reid_features, "Feature matrix (MTENSOR F32 [T, D])")->required();
  reid->add_option("--net", reid_net, "Trained net manifest")->required();
  reid->add_option("--identity-map", reid_identities, "Known identity groups, for scoring");
  reid->add_option("--threshold", reid_threshold, "Maximum centroid distance for a merge")->check(CLI::NonNegativeNumber);
  reid->add_option("--min-len", reid_min_len, "Minimum tracklet length")->check(CLI::PositiveNumber);
  reid->add_option("--out", reid_out, "Merges/report JSON path")->required();

  // project
  std::string proj_tracklets, proj_features, proj_net, proj_out, proj_report;
  std::size_t proj_min_len = 1;
  auto* project = app.add_subcommand("project", "2-D PCA projection of frame embeddings to CSV");
  project->add_option("--tracklets", proj_tracklets, "Tracklet JSON with feature_rows")->required();
  project->add_option("--features", proj_features, "Feature matrix (MTENSOR F32 [T, D])")->required();
  project->add_option("--net", proj_net, "Trained net manifest (raw features are projected when omitted)");
  project->add_option("--min-len", proj_min_len, "Minimum tracklet length")->check(CLI::PositiveNumber);
  project->add_option("--out", proj_out, "CSV path (id,frame,x,y)")->required();
  project->add_option("--report", proj_report, "Optional JSON report path");

  // synth
  SceneConfig scene_cfg;
  std::string synth_out, background = "flat";
  std::vector<std::string> switch_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene (or perturb ground truth via `synth perturb`)");
  synth->require_subcommand(0, 1);
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--width", scene_cfg.width, "Canvas width")->check(CLI::PositiveNumber);
  synth->add_option("--height", scene_cfg.height, "Canvas height")->check(CLI::PositiveNumber);
  synth->add_option("--frames", scene_cfg.num_frames, "Number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--objects", scene_cfg.num_objects, "Number of objects");
  synth->add_option("--radius-min", scene_cfg.radius_min, "Minimum blob radius")->check(CLI::PositiveNumber);
  synth->add_option("--radius-max", scene_cfg.radius_max, "Maximum blob radius")->check(CLI::PositiveNumber);
  synth->add_option("--speed-min", scene_cfg.speed_min, "Minimum speed, px/frame")->check(CLI::NonNegativeNumber);
  synth->add_option("--speed-max", scene_cfg.speed_max, "Maximum speed, px/frame")->check(CLI::NonNegativeNumber);
  synth->add_option("--switch", switch_args, "ID switch OBJECT:FRAME (repeatable)");
  synth->add_option("--seed", scene_cfg.seed, "Seed");
  synth->add_option("--background", background, "flat | textured")->check(CLI::IsMember({"flat", "textured"}));
  synth->add_option("--feature-dim", scene_cfg.feature_dim, "Feature dimension")->check(CLI::PositiveNumber);
  synth->add_option("--feature-noise", scene_cfg.feature_noise, "Feature noise sigma")->check(CLI::NonNegativeNumber);

  PerturbConfig perturb_cfg;
  std::string perturb_gt, perturb_out;
  auto* perturb = synth->add_subcommand("perturb", "Derive imperfect detections from ground truth");
  perturb->add_option("--gt", perturb_gt, "Ground truth JSON-lines")->required();
  perturb->add_option("--out", perturb_out, "Detections JSON-lines")->required();
  perturb->add_option("--drop-rate", perturb_cfg.drop_rate, "Probability of dropping each box")->check(CLI::Range(0.0, 1.0));
  perturb->add_option("--jitter", perturb_cfg.jitter_px, "Corner jitter in px")->check(CLI::NonNegativeNumber);
  perturb->add_option("--fp-rate", perturb_cfg.fp_rate, "False-positive chance per frame")->check(CLI::Range(0.0, 1.0));
  perturb->add_option("--score-spread", perturb_cfg.score_spread, "True scores in (1-spread, 1]")->check(CLI::Range(0.0, 1.0));
  perturb->add_option("--width", perturb_cfg.width, "Canvas width")->check(CLI::PositiveNumber);
  perturb->add_option("--height", perturb_cfg.height, "Canvas height")->check(CLI::PositiveNumber);
  perturb->add_option("--seed", perturb_cfg.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (stack->parsed()) {
      const auto variant = parse_variant(variant_name_arg);
      const bool sequential = variant == InputVariant::RgbSeq || variant == InputVariant::DiffSeq;
      const auto config = InputConfig::make(variant, sequential ? stack_n : stack_delta);
      if (config.outside_evaluated_range())
        err << "warning: " << variant_name(config.variant()) << " with n=" << config.n() << " delta=" << config.delta()
            << " is outside the evaluated range (n 1..10, delta 1..5)\n";
      const auto source = FrameSource::load_directory(frames_dir);
      const auto manifest = build_dataset(source, config, stack_out,
                                          labels_dir.empty() ? std::nullopt : std::optional<fs::path>(labels_dir));
      maybe_report(stack_report, envelope("stack",
                                          {{"frames", frames_dir}, {"labels", labels_dir}, {"out", stack_out}},
                                          {{"config", config.to_json()},
                                           {"channels", config.channels()},
                                           {"stacks", manifest.items.size()},
                                           {"outside_evaluated_range", config.outside_evaluated_range()}}));
      out << "stack: wrote " << manifest.items.size() << " " << variant_name(config.variant()) << " stacks of "
          << config.channels() << " channels to " << stack_out << "\n";
      return kOk;
    }

    if (surgery->parsed()) {
      require(surgery_n >= 1, ErrorCode::InvalidArgument, "--n must be >= 1");
      const auto w = read_conv_weights(weights_in);
      const auto result = surgery_mode == "replicate"
                              ? replicate_init(w, surgery_n)
                              : random_init_first_layer(w.c_out(), w.c_in() * static_cast<std::size_t>(surgery_n), w.kh(),
                                                        w.kw(), surgery_seed);
      write_conv_weights(result, surgery_out);
      maybe_report(surgery_report, envelope("surgery",
                                            {{"weights", weights_in}, {"mode", surgery_mode}, {"n", surgery_n},
                                             {"seed", surgery_seed}, {"out", surgery_out}},
                                            {{"input_shape", w.weight.shape()}, {"output_shape", result.weight.shape()},
                                             {"bias", result.bias.has_value()}}));
      out << "surgery: " << surgery_mode << " n=" << surgery_n << " [" << w.c_out() << "," << w.c_in() << "," << w.kh()
          << "," << w.kw() << "] -> [" << result.c_out() << "," << result.c_in() << "," << result.kh() << ","
          << result.kw() << "]\n";
      return kOk;
    }

    if (eval->parsed()) {
      const auto dets = read_detections(dets_path);
      const auto gts = read_ground_truth(gt_path);
      const auto report = evaluate(dets, gts);
      auto results = report.to_json();
      results["num_detections"] = dets.size();
      results["num_ground_truth"] = gts.size();
      write_json(eval_out, envelope("eval", {{"dets", dets_path}, {"gt", gt_path}}, results));
      out << "eval: P=" << fmt_double(report.precision, 4) << " R=" << fmt_double(report.recall, 4)
          << " mAP@0.5=" << fmt_double(report.map50, 4) << " mAP@0.5:0.95=" << fmt_double(report.map5095, 4) << "\n";
      return kOk;
    }

    if (features->parsed()) {
      const FeatureMap map(read_tensor(map_path), map_scale);
      const auto boxes = read_boxes(boxes_path);
      const RoiAlignParams params{out_size, out_size, sampling_ratio};
      const auto feats = extract_features(map, boxes, params);
      write_tensor(feats, feats_out);
      maybe_report(feats_report, envelope("features",
                                          {{"map", map_path}, {"scale", map_scale}, {"boxes", boxes_path}, {"out", feats_out},
                                           {"out_size", out_size}, {"sampling_ratio", sampling_ratio}},
                                          {{"num_boxes", boxes.size()}, {"channels", map.channels()}}));
      out << "features: " << boxes.size() << " boxes x " << map.channels() << " channels -> " << feats_out << "\n";
      return kOk;
    }

    if (mine->parsed()) {
      const auto all = read_tracklets(mine_tracklets);
      const auto set = filter_min_length(all, mine_min_len);
      const auto triplets = mine_triplets(set, mine_seed, mine_per_anchor);
      write_triplets(triplets, mine_out);
      maybe_report(mine_report, envelope("mine",
                                         {{"tracklets", mine_tracklets}, {"min_len", mine_min_len},
                                          {"per_anchor", mine_per_anchor}, {"seed", mine_seed}, {"out", mine_out}},
                                         {{"tracklets_total", all.size()}, {"tracklets_kept", set.size()},
                                          {"boxes_kept", set.box_count()}, {"triplets", triplets.size()}}));
      out << "mine: " << set.size() << "/" << all.size() << " tracklets kept, " << triplets.size() << " triplets\n";
      return kOk;
    }

    if (train_cmd->parsed()) {
      train_cfg.validate();
      const auto hidden = parse_size_list(hidden_arg);
      const auto set = filter_min_length(read_tracklets(train_tracklets), train_min_len);
      const auto feats = FeatureMatrix<float>::from_tensor(read_tensor(train_features));
      const auto triplets = train_triplets.empty() ? mine_triplets(set, train_cfg.seed, train_cfg.triplets_per_anchor)
                                                   : read_triplets(train_triplets);
      const auto rows = resolve_rows(set, triplets);
      auto net = EmbeddingNet<float>::create(feats.cols(), init_seed, hidden, normalize);
      const auto result = train(std::move(net), feats, rows, train_cfg);
      save_net(result.net, train_out);
      maybe_report(train_report,
                   envelope("train",
                            {{"tracklets", train_tracklets}, {"features", train_features}, {"triplets", train_triplets},
                             {"epochs", train_cfg.epochs}, {"lr", train_cfg.learning_rate}, {"batch", train_cfg.batch_size},
                             {"margin", train_cfg.margin}, {"seed", train_cfg.seed}, {"init_seed", init_seed},
                             {"hidden", hidden}, {"normalize", normalize}, {"out", train_out}},
                            {{"dims", result.net.dims()}, {"triplets", rows.size()}, {"loss_trace", result.loss_trace}}));
      out << "train: " << rows.size() << " triplets, loss " << fmt_double(result.loss_trace.front(), 4) << " -> "
          << fmt_double(result.loss_trace.back(), 4) << " over " << train_cfg.epochs << " epochs\n";
      return kOk;
    }

    if (reid->parsed()) {
      const auto set = filter_min_length(read_tracklets(reid_tracklets), reid_min_len);
      const auto feats = FeatureMatrix<float>::from_tensor(read_tensor(reid_features));
      const auto net = load_net(reid_net);
      const auto identities = reid_identities.empty() ? IdentityMap{} : read_identity_map(reid_identities);
      const auto centroids = tracklet_centroids(net, set, feats);
      const auto merges = propose_merges(centroids, set, reid_threshold);

      nlohmann::json results;
      results["threshold"] = reid_threshold;
      results["tracklets"] = set.ids();
      results["merges"] = nlohmann::json::array();
      for (const auto& m : merges) results["merges"].push_back({{"a", m.a}, {"b", m.b}, {"distance", m.distance}});

      const auto embedded = embed_all(net, set, feats);
      const auto groups = group_by_identity(embedded, identities);
      if (groups.size() >= 2) {
        const auto sep = separation_metrics(groups);
        results["separation"] = {{"intra_mean", sep.intra_mean}, {"inter_mean", sep.inter_mean}, {"ratio", sep.ratio}};
      }
      if (!reid_identities.empty()) {
        std::set<std::pair<TrackId, TrackId>> expected;
        for (const auto& [a, b] : identities.same_pairs())
          if (set.contains(a) && set.contains(b)) expected.insert({a, b});
        std::size_t true_pairs = 0;
        for (const auto& m : merges) true_pairs += expected.contains({m.a, m.b}) ? 1 : 0;
        results["scoring"] = {{"expected_pairs", expected.size()},
                              {"recovered_pairs", true_pairs},
                              {"false_pairs", merges.size() - true_pairs}};
      }
      write_json(reid_out, envelope("reid",
                                    {{"tracklets", reid_tracklets}, {"features", reid_features}, {"net", reid_net},
                                     {"identity_map", reid_identities}, {"threshold", reid_threshold},
                                     {"min_len", reid_min_len}},
                                    results));
      out << "reid: " << set.size() << " tracklets, " << merges.size() << " merge proposals\n";
      for (const auto& m : merges) out << "  " << m.a << " ~ " << m.b << "  d=" << fmt_double(m.distance, 4) << "\n";
      return kOk;
    }

    if (project->parsed()) {
      const auto set = filter_min_length(read_tracklets(proj_tracklets), proj_min_len);
      const auto feats = FeatureMatrix<float>::from_tensor(read_tensor(proj_features));
      FrameEmbeddings embedded;
      if (!proj_net.empty()) {
        embedded = embed_all(load_net(proj_net), set, feats);
      } else {
        for (const auto& [id, t] : set)
          for (std::int64_t f = t.start; f <= t.end; ++f) {
            const auto row = feats.row(feature_row(set, {id, f}));
            embedded.refs.push_back({id, f});
            embedded.vectors.emplace_back(row.begin(), row.end());
          }
      }
      const auto projection = pca_project_2d(embedded.vectors);
      std::string csv = "id,frame,x,y\n";
      for (std::size_t i = 0; i < embedded.refs.size(); ++i)
        csv += std::to_string(embedded.refs[i].id) + "," + std::to_string(embedded.refs[i].frame) + "," +
               fmt_double(projection.points[i][0], 9) + "," + fmt_double(projection.points[i][1], 9) + "\n";
      detail::write_text(proj_out, csv);
      maybe_report(proj_report, envelope("project",
                                         {{"tracklets", proj_tracklets}, {"features", proj_features}, {"net", proj_net},
                                          {"min_len", proj_min_len}, {"out", proj_out}},
                                         {{"points", embedded.refs.size()}, {"variances", projection.variances}}));
      out << "project: " << embedded.refs.size() << " points -> " << proj_out << "\n";
      return kOk;
    }

    if (synth->parsed()) {
      if (perturb->parsed()) {
        const auto gts = read_ground_truth(perturb_gt);
        const auto dets = perturb_detections(gts, perturb_cfg);
        write_detections(dets, perturb_out);
        out << "synth perturb: " << gts.size() << " ground-truth boxes -> " << dets.size() << " detections\n";
        return kOk;
      }
      if (synth_out.empty()) fail(ErrorCode::InvalidArgument, "synth requires --out");
      for (const auto& s : switch_args) {
        const auto colon = s.find(':');
        try {
          if (colon == std::string::npos) throw std::invalid_argument(s);
          std::size_t used_a = 0, used_b = 0;
          const auto obj = std::stoull(s.substr(0, colon), &used_a);
          const auto frame = std::stoll(s.substr(colon + 1), &used_b);
          if (used_a != colon || used_b != s.size() - colon - 1) throw std::invalid_argument(s);
          scene_cfg.id_switches.push_back({obj, frame});
        } catch (const std::exception&) {
          fail(ErrorCode::InvalidArgument, "--switch expects OBJECT:FRAME, got '" + s + "'");
        }
      }
      scene_cfg.background = background == "flat" ? Background::Flat : Background::Textured;
      const auto scene = generate_scene(scene_cfg);
      write_scene(scene, synth_out);
      out << "synth: " << scene.frames.size() << " frames, " << scene_cfg.num_objects << " objects, "
          << scene.tracklets.size() << " tracklets -> " << synth_out << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Usage: return kUsage;
      case ErrorKind::Validation: return kData;
      case ErrorKind::Io: return kIo;
    }
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace motionstack::cli
