#pragma once

// Tracklets: contiguous per-ID frame intervals [start, end] with one box (and
// optionally one feature-matrix row) per frame.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionstack/det_metrics.hpp"
#include "motionstack/error.hpp"
#include "motionstack/tensor_io.hpp"

namespace motionstack {

using TrackId = std::int64_t;

struct Tracklet {
  TrackId id = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;  // inclusive
  std::vector<Box> boxes;
  std::optional<std::vector<std::size_t>> feature_rows;

  std::size_t length() const noexcept { return static_cast<std::size_t>(end - start + 1); }
  bool contains(std::int64_t frame) const noexcept { return frame >= start && frame <= end; }
  std::size_t offset(std::int64_t frame) const { return static_cast<std::size_t>(frame - start); }

  void validate() const {
    const std::string who = "tracklet " + std::to_string(id);
    require(end >= start, ErrorCode::BadRecord, who + ": end precedes start");
    require(boxes.size() == length(), ErrorCode::BadRecord,
            who + ": " + std::to_string(boxes.size()) + " boxes for " + std::to_string(length()) + " frames");
    if (feature_rows)
      require(feature_rows->size() == length(), ErrorCode::BadRecord, who + ": feature_rows length mismatch");
  }
};

// Closed intervals: sharing one frame counts as overlap.
inline bool temporal_overlap(const Tracklet& a, const Tracklet& b) { return a.start <= b.end && b.start <= a.end; }

class TrackletSet {
 public:
  TrackletSet() = default;

  explicit TrackletSet(std::vector<Tracklet> tracklets) {
    for (auto& t : tracklets) insert(std::move(t));
  }

  void insert(Tracklet t) {
    t.validate();
    const auto id = t.id;
    require(!by_id_.contains(id), ErrorCode::BadRecord, "duplicate tracklet id " + std::to_string(id));
    by_id_.emplace(id, std::move(t));
  }

  std::size_t size() const noexcept { return by_id_.size(); }
  bool empty() const noexcept { return by_id_.empty(); }
  bool contains(TrackId id) const { return by_id_.contains(id); }
  const Tracklet& at(TrackId id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) fail(ErrorCode::BadRecord, "unknown tracklet id " + std::to_string(id));
    return it->second;
  }

  // Ascending by id.
  auto begin() const { return by_id_.begin(); }
  auto end() const { return by_id_.end(); }

  std::vector<TrackId> ids() const {
    std::vector<TrackId> out;
    for (const auto& [id, t] : by_id_) out.push_back(id);
    return out;
  }

  // [first start, last end] across all tracklets; nullopt when empty.
  std::optional<std::pair<std::int64_t, std::int64_t>> frame_span() const {
    if (by_id_.empty()) return std::nullopt;
    std::int64_t lo = by_id_.begin()->second.start, hi = by_id_.begin()->second.end;
    for (const auto& [id, t] : by_id_) {
      lo = std::min(lo, t.start);
      hi = std::max(hi, t.end);
    }
    return std::pair{lo, hi};
  }

  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& [id, t] : by_id_) n += t.length();
    return n;
  }

 private:
  std::map<TrackId, Tracklet> by_id_;
};

inline TrackletSet filter_min_length(const TrackletSet& set, std::size_t min_len) {
  require(min_len >= 1, ErrorCode::InvalidArgument, "min_len must be >= 1");
  TrackletSet out;
  for (const auto& [id, t] : set)
    if (t.length() >= min_len) out.insert(t);
  return out;
}

using OverlapGraph = std::map<TrackId, std::set<TrackId>>;

// Symmetric, no self-edges; every id has an entry (possibly empty).
inline OverlapGraph overlap_graph(const TrackletSet& set) {
  OverlapGraph graph;
  for (const auto& [id, t] : set) graph[id];
  for (auto a = set.begin(); a != set.end(); ++a) {
    for (auto b = std::next(a); b != set.end(); ++b) {
      if (!temporal_overlap(a->second, b->second)) continue;
      graph[a->first].insert(b->first);
      graph[b->first].insert(a->first);
    }
  }
  return graph;
}

// Groups of ids known to be the same individual.
class IdentityMap {
 public:
  IdentityMap() = default;

  explicit IdentityMap(std::vector<std::vector<TrackId>> groups) : groups_(std::move(groups)) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      for (auto id : groups_[g]) {
        const auto [it, fresh] = group_of_.emplace(id, g);
        require(fresh, ErrorCode::BadRecord, "identity groups overlap at id " + std::to_string(id));
      }
    }
  }

  const std::vector<std::vector<TrackId>>& groups() const noexcept { return groups_; }

  std::optional<std::size_t> group_of(TrackId id) const {
    const auto it = group_of_.find(id);
    if (it == group_of_.end()) return std::nullopt;
    return it->second;
  }

  // Ids absent from every group are their own individual.
  bool same_individual(TrackId a, TrackId b) const {
    if (a == b) return true;
    const auto ga = group_of(a);
    return ga && ga == group_of(b);
  }

  // All unordered same-individual pairs (a < b) within groups.
  std::set<std::pair<TrackId, TrackId>> same_pairs() const {
    std::set<std::pair<TrackId, TrackId>> out;
    for (const auto& g : groups_)
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j) out.insert(std::minmax(g[i], g[j]));
    return out;
  }

 private:
  std::vector<std::vector<TrackId>> groups_;
  std::map<TrackId, std::size_t> group_of_;
};

// ---------------------------------------------------------------------------
// Files:
//   {"tracklets":[{"id":int,"start":int,"end":int,"boxes":[[x1,y1,x2,y2],...],
//                  "feature_rows":[int,...]?}]}
//   {"groups":[[1,17],[15,21],[6,22,23]]}

inline nlohmann::json tracklets_to_json(const TrackletSet& set) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, t] : set) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : t.boxes) boxes.push_back(bbox_json(b));
    nlohmann::json j{{"id", t.id}, {"start", t.start}, {"end", t.end}, {"boxes", boxes}};
    if (t.feature_rows) j["feature_rows"] = *t.feature_rows;
    arr.push_back(std::move(j));
  }
  return {{"tracklets", arr}};
}

inline TrackletSet tracklets_from_json(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object() || !j.contains("tracklets") || !j["tracklets"].is_array())
    fail(ErrorCode::BadRecord, origin + ": expected {\"tracklets\":[...]}");
  TrackletSet set;
  std::size_t k = 0;
  for (const auto& r : j["tracklets"]) {
    const std::string where = origin + ": tracklets[" + std::to_string(k++) + "]";
    if (!r.is_object()) fail(ErrorCode::BadRecord, where + ": expected an object");
    for (const char* key : {"id", "start", "end"})
      if (!r.contains(key) || !r[key].is_number_integer()) fail(ErrorCode::BadRecord, where + ": missing integer " + key);
    if (!r.contains("boxes") || !r["boxes"].is_array()) fail(ErrorCode::BadRecord, where + ": missing boxes");
    Tracklet t;
    t.id = r["id"].get<TrackId>();
    t.start = r["start"].get<std::int64_t>();
    t.end = r["end"].get<std::int64_t>();
    for (const auto& b : r["boxes"]) t.boxes.push_back(detail::parse_bbox(b, where));
    if (r.contains("feature_rows")) {
      if (!r["feature_rows"].is_array()) fail(ErrorCode::BadRecord, where + ": feature_rows must be an array");
      std::vector<std::size_t> rows;
      for (const auto& v : r["feature_rows"]) {
        if (!v.is_number_unsigned()) fail(ErrorCode::BadRecord, where + ": feature_rows must be nonnegative integers");
        rows.push_back(v.get<std::size_t>());
      }
      t.feature_rows = std::move(rows);
    }
    try {
      set.insert(std::move(t));
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
  return set;
}

inline void write_tracklets(const TrackletSet& set, const fs::path& path) {
  detail::write_text(path, tracklets_to_json(set).dump() + "\n");
}

inline nlohmann::json parse_json_file(const fs::path& path) {
  const auto text = detail::read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadRecord, path.string() + ": " + e.what());
  }
}

inline TrackletSet read_tracklets(const fs::path& path) { return tracklets_from_json(parse_json_file(path), path.string()); }

inline void write_identity_map(const IdentityMap& map, const fs::path& path) {
  detail::write_text(path, nlohmann::json{{"groups", map.groups()}}.dump() + "\n");
}

inline IdentityMap read_identity_map(const fs::path& path) {
  const auto j = parse_json_file(path);
  if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array())
    fail(ErrorCode::BadRecord, path.string() + ": expected {\"groups\":[[...]]}");
  std::vector<std::vector<TrackId>> groups;
  for (const auto& g : j["groups"]) {
    if (!g.is_array()) fail(ErrorCode::BadRecord, path.string() + ": each group must be an array of ids");
    std::vector<TrackId> ids;
    for (const auto& v : g) {
      if (!v.is_number_integer()) fail(ErrorCode::BadRecord, path.string() + ": ids must be integers");
      ids.push_back(v.get<TrackId>());
    }
    groups.push_back(std::move(ids));
  }
  try {
    return IdentityMap(std::move(groups));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace motionstack
