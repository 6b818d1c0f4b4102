#pragma once

// Detection metrics: precision, recall, AP over IoU thresholds 0.50:0.05:0.95
// with 101-point interpolation, and their class means (mAP@0.5, mAP@0.5:0.95).

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionstack/error.hpp"
#include "motionstack/tensor_io.hpp"

namespace motionstack {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x2 > x1 && y2 > y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  std::int64_t frame = 0;
  Box box;
  double score = 0;
  int class_id = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruth {
  std::int64_t frame = 0;
  Box box;
  int class_id = 0;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

inline constexpr std::size_t kNumIouThresholds = 10;

// 0.50, 0.55, ..., 0.95, formed as k/100 so each is the nearest double.
inline double iou_threshold(std::size_t i) { return static_cast<double>(50 + 5 * i) / 100.0; }

// Score-descending order; ties by frame, then original position.
inline std::vector<std::size_t> detection_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].frame < dets[b].frame;
  });
  return order;
}

struct MatchResult {
  std::vector<bool> tp;                     // per detection, in the order given
  std::vector<std::optional<std::size_t>> matched_gt;
  std::map<std::int64_t, std::size_t> fn_per_frame;  // unmatched GT count per frame
};

// Greedy matching. `dets` must already be in descending-score order (see
// detection_order). Each detection takes the highest-IoU unmatched GT in the
// same frame and class with IoU >= thr; GT ties go to the lower GT index.
inline MatchResult match_greedy(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, double thr) {
  std::map<std::pair<std::int64_t, int>, std::vector<std::size_t>> gt_by_key;
  for (std::size_t g = 0; g < gts.size(); ++g) gt_by_key[{gts[g].frame, gts[g].class_id}].push_back(g);

  MatchResult result{std::vector<bool>(dets.size(), false), std::vector<std::optional<std::size_t>>(dets.size()), {}};
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const auto it = gt_by_key.find({dets[d].frame, dets[d].class_id});
    if (it == gt_by_key.end()) continue;
    std::optional<std::size_t> best;
    double best_iou = thr;
    for (auto g : it->second) {
      if (taken[g]) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v >= best_iou && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      taken[*best] = true;
      result.tp[d] = true;
      result.matched_gt[d] = best;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    auto& count = result.fn_per_frame[gts[g].frame];
    if (!taken[g]) ++count;
  }
  return result;
}

inline constexpr std::size_t kRecallPoints = 101;

// 101-point interpolated AP over TP flags in descending-score order.
// The precision envelope is made non-increasing from the right; at each recall
// level r = i/100 the first rank reaching recall >= r supplies the precision
// (0 when no rank reaches it). Recall comparisons are done in integers.
inline double average_precision(const std::vector<bool>& flags, std::size_t num_gt) {
  if (num_gt == 0 || flags.empty()) return 0.0;
  const std::size_t n = flags.size();
  std::vector<std::size_t> cum_tp(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += flags[i] ? 1 : 0;
    cum_tp[i] = tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  std::size_t rank = 0;
  for (std::size_t r = 0; r < kRecallPoints; ++r) {
    // recall(rank) >= r/100  <=>  100 * cum_tp >= r * num_gt
    while (rank < n && 100 * cum_tp[rank] < r * num_gt) ++rank;
    if (rank == n) break;
    sum += precision[rank];
  }
  return sum / static_cast<double>(kRecallPoints);
}

struct OperatingPoint {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double score_threshold = 0;
};

// Best-F1 point over confidence cut-offs (all detections with score >= s).
// Flags/scores in descending-score order. Ties in F1 keep the higher threshold.
inline OperatingPoint best_f1_point(const std::vector<bool>& flags, const std::vector<double>& scores,
                                    std::size_t num_gt) {
  OperatingPoint best;
  bool first = true;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i] ? 1 : 0;
    if (i + 1 < flags.size() && scores[i + 1] == scores[i]) continue;
    const double p = static_cast<double>(tp) / static_cast<double>(i + 1);
    const double r = num_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(num_gt);
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    if (first || f1 > best.f1) best = {p, r, f1, scores[i]};
    first = false;
  }
  return best;
}

struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double score_threshold = 0;
  std::array<double, kNumIouThresholds> ap_per_threshold{};
  double map50 = 0;
  double map5095 = 0;
  std::vector<int> classes;  // classes contributing to the means

  nlohmann::json to_json() const {
    nlohmann::json thresholds = nlohmann::json::array();
    for (std::size_t i = 0; i < kNumIouThresholds; ++i) thresholds.push_back(iou_threshold(i));
    return {{"precision", precision},
            {"recall", recall},
            {"f1", f1},
            {"score_threshold", score_threshold},
            {"iou_thresholds", thresholds},
            {"ap_per_threshold", ap_per_threshold},
            {"map50", map50},
            {"map5095", map5095},
            {"classes", classes}};
  }
};

// Per-class AP at every threshold, averaged over classes. A class with no GT
// but some detections scores AP 0; a class with neither is omitted. P/R come
// from the best-F1 point of the pooled IoU-0.5 curve.
inline EvalReport evaluate(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts) {
  std::set<int> class_ids;
  for (const auto& d : dets) class_ids.insert(d.class_id);
  for (const auto& g : gts) class_ids.insert(g.class_id);

  EvalReport report;
  report.classes.assign(class_ids.begin(), class_ids.end());

  const auto order = detection_order(dets);
  std::vector<Detection> sorted;
  sorted.reserve(dets.size());
  for (auto i : order) sorted.push_back(dets[i]);

  if (!class_ids.empty()) {
    for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
      const auto match = match_greedy(sorted, gts, iou_threshold(t));
      double total = 0.0;
      for (int cls : class_ids) {
        std::vector<bool> flags;
        for (std::size_t d = 0; d < sorted.size(); ++d)
          if (sorted[d].class_id == cls) flags.push_back(match.tp[d]);
        const auto num_gt = static_cast<std::size_t>(
            std::ranges::count_if(gts, [cls](const GroundTruth& g) { return g.class_id == cls; }));
        total += average_precision(flags, num_gt);
      }
      report.ap_per_threshold[t] = total / static_cast<double>(class_ids.size());
    }
  }
  report.map50 = report.ap_per_threshold[0];
  report.map5095 = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(), 0.0) /
                   static_cast<double>(kNumIouThresholds);

  const auto match50 = match_greedy(sorted, gts, iou_threshold(0));
  std::vector<double> scores;
  for (const auto& d : sorted) scores.push_back(d.score);
  const auto point = best_f1_point(match50.tp, scores, gts.size());
  report.precision = point.precision;
  report.recall = point.recall;
  report.f1 = point.f1;
  report.score_threshold = point.score_threshold;
  return report;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O: {"frame":int,"bbox":[x1,y1,x2,y2],"score":float,"class":int}
// (ground truth omits "score"; "class" defaults to 0).

namespace detail {

inline Box parse_bbox(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4 || !std::ranges::all_of(j, [](const auto& v) { return v.is_number(); }))
    fail(ErrorCode::BadRecord, where + ": bbox must be [x1,y1,x2,y2]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) fail(ErrorCode::BadRecord, where + ": bbox requires x2 > x1 and y2 > y1");
  return b;
}

template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BadRecord, where + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::BadRecord, where + ": expected a JSON object");
    fn(j, where);
  }
}

inline std::int64_t parse_frame(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("frame") || !j["frame"].is_number_integer()) fail(ErrorCode::BadRecord, where + ": missing integer frame");
  return j["frame"].get<std::int64_t>();
}

inline int parse_class(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("class")) return 0;
  if (!j["class"].is_number_integer()) fail(ErrorCode::BadRecord, where + ": class must be an integer");
  return j["class"].get<int>();
}

inline std::string format_jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

}  // namespace detail

inline std::vector<Detection> read_detections(const fs::path& path) {
  std::vector<Detection> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, const std::string& where) {
    if (!j.contains("bbox")) fail(ErrorCode::BadRecord, where + ": missing bbox");
    if (!j.contains("score") || !j["score"].is_number()) fail(ErrorCode::BadRecord, where + ": missing numeric score");
    const double score = j["score"].get<double>();
    if (!(score >= 0.0 && score <= 1.0)) fail(ErrorCode::BadRecord, where + ": score outside [0,1]");
    out.push_back({detail::parse_frame(j, where), detail::parse_bbox(j["bbox"], where), score, detail::parse_class(j, where)});
  });
  return out;
}

inline std::vector<GroundTruth> read_ground_truth(const fs::path& path) {
  std::vector<GroundTruth> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, const std::string& where) {
    if (!j.contains("bbox")) fail(ErrorCode::BadRecord, where + ": missing bbox");
    out.push_back({detail::parse_frame(j, where), detail::parse_bbox(j["bbox"], where), detail::parse_class(j, where)});
  });
  return out;
}

inline nlohmann::json bbox_json(const Box& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

inline void write_detections(const std::vector<Detection>& dets, const fs::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& d : dets)
    records.push_back({{"frame", d.frame}, {"bbox", bbox_json(d.box)}, {"score", d.score}, {"class", d.class_id}});
  detail::write_text(path, detail::format_jsonl(records));
}

inline void write_ground_truth(const std::vector<GroundTruth>& gts, const fs::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& g : gts) records.push_back({{"frame", g.frame}, {"bbox", bbox_json(g.box)}, {"class", g.class_id}});
  detail::write_text(path, detail::format_jsonl(records));
}

}  // namespace motionstack
