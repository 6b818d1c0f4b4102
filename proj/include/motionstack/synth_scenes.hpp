#pragma once

// Deterministic synthetic scenes: filled circles moving at constant velocity
// with wall bounce, per-frame ground truth, tracklets split at injected ID
// switches, and per-frame identity features (prototype + Gaussian noise).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionstack/det_metrics.hpp"
#include "motionstack/error.hpp"
#include "motionstack/metric_learning.hpp"
#include "motionstack/parallel.hpp"
#include "motionstack/random.hpp"
#include "motionstack/tensor_io.hpp"
#include "motionstack/tracklets.hpp"

namespace motionstack {

enum class Background { Flat, Textured };

struct IdSwitch {
  std::size_t object = 0;
  std::int64_t frame = 0;  // first frame carrying the new id
  friend auto operator<=>(const IdSwitch&, const IdSwitch&) = default;
};

struct SceneConfig {
  std::size_t width = 160;
  std::size_t height = 120;
  std::size_t num_frames = 100;
  std::size_t num_objects = 3;
  double radius_min = 6;
  double radius_max = 12;
  double speed_min = 0.5;  // px/frame
  double speed_max = 2.5;
  std::vector<IdSwitch> id_switches;
  std::uint64_t seed = 0;
  Background background = Background::Flat;
  std::size_t feature_dim = 32;
  double feature_noise = 0.05;  // per-coordinate sigma

  void validate() const {
    require(width > 0 && height > 0 && num_frames > 0, ErrorCode::InvalidArgument, "scene size and length must be positive");
    require(radius_min > 0 && radius_max >= radius_min, ErrorCode::InvalidArgument, "need 0 < radius_min <= radius_max");
    require(2 * radius_max < static_cast<double>(std::min(width, height)), ErrorCode::InvalidArgument,
            "objects must fit inside the canvas");
    require(speed_min >= 0 && speed_max >= speed_min, ErrorCode::InvalidArgument, "need 0 <= speed_min <= speed_max");
    require(speed_max < radius_min, ErrorCode::InvalidArgument, "speed_max must stay below radius_min");
    require(feature_dim >= 1 && feature_noise >= 0, ErrorCode::InvalidArgument, "bad feature settings");
    for (const auto& s : id_switches) {
      require(s.object < num_objects, ErrorCode::InvalidArgument, "id switch names object " + std::to_string(s.object));
      require(s.frame >= 1 && s.frame < static_cast<std::int64_t>(num_frames), ErrorCode::InvalidArgument,
              "id switch frame " + std::to_string(s.frame) + " out of range");
    }
    auto sorted = id_switches;
    std::ranges::sort(sorted);
    require(std::ranges::adjacent_find(sorted) == sorted.end(), ErrorCode::InvalidArgument, "duplicate id switch");
  }

  nlohmann::json to_json() const {
    nlohmann::json switches = nlohmann::json::array();
    for (const auto& s : id_switches) switches.push_back({s.object, s.frame});
    return {{"width", width},
            {"height", height},
            {"num_frames", num_frames},
            {"num_objects", num_objects},
            {"radius_min", radius_min},
            {"radius_max", radius_max},
            {"speed_min", speed_min},
            {"speed_max", speed_max},
            {"id_switches", switches},
            {"seed", seed},
            {"background", background == Background::Flat ? "flat" : "textured"},
            {"feature_dim", feature_dim},
            {"feature_noise", feature_noise}};
  }
};

struct SceneObject {
  double radius = 0;
  std::array<std::uint8_t, 3> color{};
  std::vector<std::array<double, 2>> centers;  // per frame
};

struct Scene {
  SceneConfig config;
  std::vector<SceneObject> objects;
  std::vector<ImageFrame> frames;
  std::vector<GroundTruth> ground_truth;  // frame-major, object order within a frame
  TrackletSet tracklets;
  IdentityMap identity_map;
  std::vector<std::size_t> tracklet_object;  // object of each tracklet, in ascending id order
  FeatureMatrix<float> features;
  std::vector<std::vector<double>> prototypes;

  Box box(std::size_t object, std::int64_t frame) const {
    const auto& o = objects[object];
    const auto [x, y] = o.centers[static_cast<std::size_t>(frame)];
    return {x - o.radius, y - o.radius, x + o.radius, y + o.radius};
  }
};

namespace detail {

inline void bounce(double& pos, double& vel, double radius, double extent) {
  pos += vel;
  if (pos - radius < 0) {
    pos = 2 * radius - pos;
    vel = -vel;
  } else if (pos + radius > extent) {
    pos = 2 * (extent - radius) - pos;
    vel = -vel;
  }
}

inline ImageFrame render_frame(const SceneConfig& cfg, const std::vector<SceneObject>& objects, std::size_t f) {
  ImageFrame frame{cfg.width, cfg.height, std::vector<std::uint8_t>(3 * cfg.width * cfg.height), static_cast<std::int64_t>(f)};
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      std::uint8_t v = 96;
      if (cfg.background == Background::Textured) v = ((x / 8 + y / 8) % 2 == 0) ? 80 : 112;
      for (std::size_t c = 0; c < 3; ++c) frame.pixels[3 * (y * cfg.width + x) + c] = v;
    }
  }
  for (const auto& o : objects) {
    const auto [cx, cy] = o.centers[f];
    const auto y_lo = static_cast<std::size_t>(std::max(0.0, std::floor(cy - o.radius)));
    const auto y_hi = std::min(cfg.height, static_cast<std::size_t>(std::ceil(cy + o.radius)) + 1);
    const auto x_lo = static_cast<std::size_t>(std::max(0.0, std::floor(cx - o.radius)));
    const auto x_hi = std::min(cfg.width, static_cast<std::size_t>(std::ceil(cx + o.radius)) + 1);
    for (std::size_t y = y_lo; y < y_hi; ++y) {
      for (std::size_t x = x_lo; x < x_hi; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        if (dx * dx + dy * dy > o.radius * o.radius) continue;
        for (std::size_t c = 0; c < 3; ++c) frame.pixels[3 * (y * cfg.width + x) + c] = o.color[c];
      }
    }
  }
  return frame;
}

}  // namespace detail

inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  const auto W = static_cast<double>(cfg.width);
  const auto H = static_cast<double>(cfg.height);

  for (std::size_t o = 0; o < cfg.num_objects; ++o) {
    Rng rng(derive_seed(cfg.seed, 1, o));
    SceneObject obj;
    obj.radius = uniform(rng, cfg.radius_min, cfg.radius_max);
    double x = uniform(rng, obj.radius, W - obj.radius);
    double y = uniform(rng, obj.radius, H - obj.radius);
    const double speed = uniform(rng, cfg.speed_min, cfg.speed_max);
    const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
    double vx = speed * std::cos(angle), vy = speed * std::sin(angle);
    for (auto& c : obj.color) c = static_cast<std::uint8_t>(128 + uniform_index(rng, 128));
    obj.centers.reserve(cfg.num_frames);
    for (std::size_t f = 0; f < cfg.num_frames; ++f) {
      if (f > 0) {
        detail::bounce(x, vx, obj.radius, W);
        detail::bounce(y, vy, obj.radius, H);
      }
      obj.centers.push_back({x, y});
    }
    scene.objects.push_back(std::move(obj));
  }

  scene.frames.resize(cfg.num_frames);
  parallel_for(cfg.num_frames, [&](std::size_t f) { scene.frames[f] = detail::render_frame(cfg, scene.objects, f); });

  for (std::size_t f = 0; f < cfg.num_frames; ++f)
    for (std::size_t o = 0; o < cfg.num_objects; ++o)
      scene.ground_truth.push_back({static_cast<std::int64_t>(f), scene.box(o, static_cast<std::int64_t>(f)), 0});

  // Object o starts with id o+1; every switch, in (frame, object) order, opens a fresh id.
  auto switches = cfg.id_switches;
  std::ranges::sort(switches, [](const IdSwitch& a, const IdSwitch& b) { return std::tie(a.frame, a.object) < std::tie(b.frame, b.object); });
  struct Segment {
    TrackId id;
    std::size_t object;
    std::int64_t start, end;
  };
  std::vector<Segment> segments;
  std::vector<std::vector<TrackId>> groups(cfg.num_objects);
  std::vector<std::int64_t> open_start(cfg.num_objects, 0);
  std::vector<TrackId> open_id(cfg.num_objects);
  for (std::size_t o = 0; o < cfg.num_objects; ++o) {
    open_id[o] = static_cast<TrackId>(o + 1);
    groups[o].push_back(open_id[o]);
  }
  TrackId next_id = static_cast<TrackId>(cfg.num_objects + 1);
  for (const auto& s : switches) {
    segments.push_back({open_id[s.object], s.object, open_start[s.object], s.frame - 1});
    open_id[s.object] = next_id++;
    open_start[s.object] = s.frame;
    groups[s.object].push_back(open_id[s.object]);
  }
  for (std::size_t o = 0; o < cfg.num_objects; ++o)
    segments.push_back({open_id[o], o, open_start[o], static_cast<std::int64_t>(cfg.num_frames) - 1});
  std::ranges::sort(segments, {}, &Segment::id);
  scene.identity_map = IdentityMap(groups);

  // Prototypes: unit Gaussian directions, scaled up if needed so every pair
  // is at least 10 sigma apart.
  const std::size_t D = cfg.feature_dim;
  for (std::size_t o = 0; o < cfg.num_objects; ++o) {
    Rng rng(derive_seed(cfg.seed, 2, o));
    std::vector<double> p(D);
    double norm = 0;
    for (auto& v : p) {
      v = gaussian(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : p) v /= norm > 0 ? norm : 1.0;
    scene.prototypes.push_back(std::move(p));
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < cfg.num_objects; ++a)
    for (std::size_t b = a + 1; b < cfg.num_objects; ++b) {
      double acc = 0;
      for (std::size_t i = 0; i < D; ++i) acc += std::pow(scene.prototypes[a][i] - scene.prototypes[b][i], 2);
      min_dist = std::min(min_dist, std::sqrt(acc));
    }
  const double needed = 10 * cfg.feature_noise;
  if (std::isfinite(min_dist) && min_dist < needed) {
    require(min_dist > 0, ErrorCode::InvalidArgument, "feature prototypes coincide");
    for (auto& p : scene.prototypes)
      for (auto& v : p) v *= needed / min_dist;
  }

  std::vector<float> rows;
  std::size_t row = 0;
  for (const auto& seg : segments) {
    Tracklet t{seg.id, seg.start, seg.end, {}, std::vector<std::size_t>{}};
    for (std::int64_t f = seg.start; f <= seg.end; ++f) {
      t.boxes.push_back(scene.box(seg.object, f));
      t.feature_rows->push_back(row++);
      Rng rng(derive_seed(derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(f)), seg.object));
      for (std::size_t i = 0; i < D; ++i)
        rows.push_back(static_cast<float>(scene.prototypes[seg.object][i] + cfg.feature_noise * gaussian(rng)));
    }
    scene.tracklets.insert(std::move(t));
    scene.tracklet_object.push_back(seg.object);
  }
  scene.features = FeatureMatrix<float>(row, D, std::move(rows));
  return scene;
}

inline std::string frame_file_name(std::int64_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "frame_" + digits + ".ppm";
}

// Layout: frames/frame_NNNN.ppm, gt.jsonl, tracklets.json, identity_map.json,
// features.mten, scene.json.
inline void write_scene(const Scene& scene, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + (out_dir / "frames").string() + ": " + ec.message());
  parallel_for(scene.frames.size(), [&](std::size_t f) {
    write_ppm(scene.frames[f], out_dir / "frames" / frame_file_name(scene.frames[f].frame_index));
  });
  write_ground_truth(scene.ground_truth, out_dir / "gt.jsonl");
  write_tracklets(scene.tracklets, out_dir / "tracklets.json");
  write_identity_map(scene.identity_map, out_dir / "identity_map.json");
  write_tensor(scene.features.to_tensor(), out_dir / "features.mten");
  detail::write_text(out_dir / "scene.json", scene.config.to_json().dump(2) + "\n");
}

struct PerturbConfig {
  double drop_rate = 0;
  double jitter_px = 0;
  double fp_rate = 0;       // chance of one false positive per frame
  double score_spread = 0;  // true scores are uniform in (1 - spread, 1]
  std::size_t width = 160;  // canvas for false-positive placement
  std::size_t height = 120;
  std::uint64_t seed = 0;

  void validate() const {
    for (double r : {drop_rate, fp_rate, score_spread})
      require(r >= 0 && r <= 1, ErrorCode::InvalidArgument, "rates must lie in [0,1]");
    require(jitter_px >= 0, ErrorCode::InvalidArgument, "jitter must be nonnegative");
    require(width >= 8 && height >= 8, ErrorCode::InvalidArgument, "canvas too small for false positives");
  }
};

// Every frame draws from its own stream, so results depend only on (seed, frame).
// False positives score strictly below the lowest kept true detection.
inline std::vector<Detection> perturb_detections(const std::vector<GroundTruth>& gts, const PerturbConfig& cfg) {
  cfg.validate();
  std::map<std::int64_t, std::vector<const GroundTruth*>> by_frame;
  for (const auto& g : gts) by_frame[g.frame].push_back(&g);

  std::vector<Detection> out;
  struct PendingFp {
    std::size_t slot;
    double u;
  };
  std::vector<PendingFp> fps;
  double min_true = 1.0;
  for (const auto& [frame, items] : by_frame) {
    Rng rng(derive_seed(cfg.seed, 4, static_cast<std::uint64_t>(frame)));
    for (const auto* g : items) {
      const bool drop = uniform01(rng) < cfg.drop_rate;
      Box b = g->box;
      b.x1 += uniform(rng, -cfg.jitter_px, cfg.jitter_px);
      b.y1 += uniform(rng, -cfg.jitter_px, cfg.jitter_px);
      b.x2 += uniform(rng, -cfg.jitter_px, cfg.jitter_px);
      b.y2 += uniform(rng, -cfg.jitter_px, cfg.jitter_px);
      const double score = 1.0 - cfg.score_spread * uniform01(rng);
      if (drop) continue;
      if (b.x2 - b.x1 < 1) b.x2 = b.x1 + 1;
      if (b.y2 - b.y1 < 1) b.y2 = b.y1 + 1;
      out.push_back({frame, b, score, g->class_id});
      min_true = std::min(min_true, score);
    }
    if (uniform01(rng) < cfg.fp_rate) {
      const double w = uniform(rng, 4.0, static_cast<double>(cfg.width) / 4);
      const double h = uniform(rng, 4.0, static_cast<double>(cfg.height) / 4);
      const double x = uniform(rng, 0.0, static_cast<double>(cfg.width) - w);
      const double y = uniform(rng, 0.0, static_cast<double>(cfg.height) - h);
      const int cls = items.front()->class_id;
      fps.push_back({out.size(), uniform01(rng)});
      out.push_back({frame, {x, y, x + w, y + h}, 0.0, cls});
    }
  }
  for (const auto& fp : fps) out[fp.slot].score = 0.5 * min_true * fp.u;
  return out;
}

}  // namespace motionstack
