#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "motionstack/det_metrics.hpp"
#include "motionstack/metric_learning.hpp"
#include "motionstack/roi_features.hpp"
#include "motionstack/weight_surgery.hpp"

namespace oracle {

using namespace motionstack;

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("motionstack_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Detection matching by exhaustive enumeration.
//
// Enumerates every injective assignment of detections (in score order) to
// eligible GTs (same frame and class, IoU >= thr) or to nothing, and keeps the
// one assignment in which every detection holds the best GT still free after
// all higher-ranked detections took theirs, and holds nothing only when no
// eligible GT is left.

inline std::vector<bool> brute_force_flags(const std::vector<Detection>& sorted_dets, const std::vector<GroundTruth>& gts,
                                           double thr) {
  const std::size_t n = sorted_dets.size();
  std::vector<std::vector<std::size_t>> eligible(n);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (gts[g].frame == sorted_dets[d].frame && gts[g].class_id == sorted_dets[d].class_id &&
          iou(sorted_dets[d].box, gts[g].box) >= thr)
        eligible[d].push_back(g);

  const auto consistent = [&](const std::vector<int>& assign) {
    std::set<std::size_t> used;
    for (std::size_t d = 0; d < n; ++d) {
      std::optional<std::size_t> best;
      double best_v = -1;
      for (auto g : eligible[d]) {
        if (used.contains(g)) continue;
        const double v = iou(sorted_dets[d].box, gts[g].box);
        if (v > best_v) {  // strict: the lowest index wins ties
          best_v = v;
          best = g;
        }
      }
      if (!best) {
        if (assign[d] != -1) return false;
      } else {
        if (assign[d] != static_cast<int>(*best)) return false;
        used.insert(*best);
      }
    }
    return true;
  };

  std::vector<std::vector<int>> found;
  std::vector<int> assign(n, -1);
  std::set<std::size_t> taken;
  std::function<void(std::size_t)> rec = [&](std::size_t d) {
    if (d == n) {
      if (consistent(assign)) found.push_back(assign);
      return;
    }
    assign[d] = -1;
    rec(d + 1);
    for (auto g : eligible[d]) {
      if (taken.contains(g)) continue;
      taken.insert(g);
      assign[d] = static_cast<int>(g);
      rec(d + 1);
      taken.erase(g);
    }
    assign[d] = -1;
  };
  rec(0);
  if (found.size() != 1) throw std::logic_error("matcher oracle found " + std::to_string(found.size()) + " assignments");
  std::vector<bool> flags(n);
  for (std::size_t d = 0; d < n; ++d) flags[d] = found[0][d] != -1;
  return flags;
}

// 101-point AP from the definition: at recall level i/100 the interpolated
// precision is the max precision over all ranks whose recall reaches the level,
// with every comparison done on exact integer ratios.
inline double ap_enumerated(const std::vector<bool>& flags, std::size_t num_gt) {
  if (num_gt == 0 || flags.empty()) return 0.0;
  std::vector<std::size_t> tp(flags.size());
  std::size_t run = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) tp[k] = run += flags[k];
  double sum = 0;
  for (std::size_t i = 0; i <= 100; ++i) {
    std::optional<std::pair<std::size_t, std::size_t>> best;  // tp / rank
    for (std::size_t k = 0; k < flags.size(); ++k) {
      if (tp[k] * 100 < i * num_gt) continue;
      const std::pair<std::size_t, std::size_t> p{tp[k], k + 1};
      if (!best || p.first * best->second > best->first * p.second) best = p;
    }
    if (best) sum += static_cast<double>(best->first) / static_cast<double>(best->second);
  }
  return sum / 101.0;
}

// Full evaluation built from the oracles above (per-class APs, class mean).
inline std::array<double, 10> ap_per_threshold_oracle(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts) {
  std::vector<Detection> sorted = dets;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    return a.score != b.score ? a.score > b.score : a.frame < b.frame;
  });
  std::set<int> classes;
  for (const auto& d : dets) classes.insert(d.class_id);
  for (const auto& g : gts) classes.insert(g.class_id);
  std::array<double, 10> out{};
  if (classes.empty()) return out;
  for (std::size_t t = 0; t < 10; ++t) {
    const double thr = static_cast<double>(50 + 5 * t) / 100.0;
    const auto flags = brute_force_flags(sorted, gts, thr);
    double total = 0;
    for (int c : classes) {
      std::vector<bool> f;
      for (std::size_t d = 0; d < sorted.size(); ++d)
        if (sorted[d].class_id == c) f.push_back(flags[d]);
      std::size_t ng = 0;
      for (const auto& g : gts) ng += g.class_id == c;
      total += ap_enumerated(f, ng);
    }
    out[t] = total / static_cast<double>(classes.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution: scatter formulation in double (each input sample pushes its
// contribution to every output it touches).

inline std::vector<double> conv_scatter(const Tensor& input, const ConvLayerWeights& w, std::size_t stride, std::size_t pad) {
  const auto C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const auto O = w.c_out(), KH = w.kh(), KW = w.kw();
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<double> out(O * OH * OW, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double v = input.f32()[(c * H + y) * W + x];
        for (std::size_t ky = 0; ky < KH; ++ky)
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const long py = static_cast<long>(y + pad) - static_cast<long>(ky);
            const long px = static_cast<long>(x + pad) - static_cast<long>(kx);
            if (py < 0 || px < 0 || py % static_cast<long>(stride) || px % static_cast<long>(stride)) continue;
            const auto oy = static_cast<std::size_t>(py) / stride, ox = static_cast<std::size_t>(px) / stride;
            if (oy >= OH || ox >= OW) continue;
            for (std::size_t o = 0; o < O; ++o)
              out[(o * OH + oy) * OW + ox] += v * w.weight.f32()[((o * C + c) * KH + ky) * KW + kx];
          }
      }
  if (w.bias)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < OH * OW; ++i) out[o * OH * OW + i] += w.bias->f32()[o];
  return out;
}

// ---------------------------------------------------------------------------
// Bilinear interpolation as a sum of tent kernels over every grid point.

inline std::vector<double> bilinear_tent(const Tensor& map, double x, double y) {
  const auto C = map.dim(0), H = map.dim(1), W = map.dim(2);
  x = std::min(std::max(x, 0.0), static_cast<double>(W - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(H - 1));
  std::vector<double> out(C, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double wy = std::max(0.0, 1.0 - std::abs(y - static_cast<double>(j)));
    if (wy == 0) continue;
    for (std::size_t i = 0; i < W; ++i) {
      const double wx = std::max(0.0, 1.0 - std::abs(x - static_cast<double>(i)));
      if (wx == 0) continue;
      for (std::size_t c = 0; c < C; ++c) out[c] += wx * wy * map.f32()[(c * H + j) * W + i];
    }
  }
  return out;
}

// Dense RoIAlign: every sample point listed explicitly, then bin means.
inline std::vector<double> roi_align_dense(const Tensor& map, double scale, const Box& box, std::size_t oh, std::size_t ow,
                                           std::size_t sr) {
  const auto C = map.dim(0);
  const double x1 = box.x1 * scale - 0.5, y1 = box.y1 * scale - 0.5;
  const double x2 = box.x2 * scale - 0.5, y2 = box.y2 * scale - 0.5;
  std::vector<double> out(C * oh * ow, 0.0);
  const std::size_t gx = ow * sr, gy = oh * sr;  // full sample grid
  for (std::size_t sy = 0; sy < gy; ++sy) {
    const double y = y1 + (static_cast<double>(sy) + 0.5) * (y2 - y1) / static_cast<double>(gy);
    for (std::size_t sx = 0; sx < gx; ++sx) {
      const double x = x1 + (static_cast<double>(sx) + 0.5) * (x2 - x1) / static_cast<double>(gx);
      const auto v = bilinear_tent(map, x, y);
      const std::size_t bin = (sy / sr) * ow + sx / sr;
      for (std::size_t c = 0; c < C; ++c) out[c * oh * ow + bin] += v[c] / static_cast<double>(sr * sr);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP forward with explicit dot products in double.

template <typename T>
std::vector<double> mlp_forward(const EmbeddingNet<T>& net, const std::vector<double>& x) {
  std::vector<double> act = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> next(layers[l].out);
    for (std::size_t o = 0; o < layers[l].out; ++o) {
      double s = static_cast<double>(layers[l].bias[o]);
      for (std::size_t i = 0; i < layers[l].in; ++i) s += static_cast<double>(layers[l].weight[o * layers[l].in + i]) * act[i];
      next[o] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
    }
    act = std::move(next);
  }
  if (net.normalize_output()) {
    double n = 0;
    for (double v : act) n += v * v;
    n = std::sqrt(n);
    for (double& v : act) v = n > 0 ? v / n : 0.0;
  }
  return act;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for symmetric matrices; returns (values, vectors
// as columns) sorted by descending value.

inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  for (auto k : order) {
    values.push_back(a[k][k]);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
    vectors.push_back(std::move(col));
  }
  return {values, vectors};
}

// ---------------------------------------------------------------------------
// Separation metrics by enumerating every labelled pair once.

struct Separation {
  double intra, inter, ratio;
};

inline Separation separation_pairs(const std::vector<std::vector<std::vector<double>>>& groups) {
  std::vector<std::pair<std::size_t, const std::vector<double>*>> pts;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& p : groups[g]) pts.push_back({g, &p});
  double intra = 0, inter = 0;
  std::size_t ni = 0, ne = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < pts[i].second->size(); ++k) d += std::pow((*pts[i].second)[k] - (*pts[j].second)[k], 2);
      d = std::sqrt(d);
      if (pts[i].first == pts[j].first) {
        intra += d;
        ++ni;
      } else {
        inter += d;
        ++ne;
      }
    }
  Separation s{ni ? intra / static_cast<double>(ni) : 0.0, ne ? inter / static_cast<double>(ne) : 0.0, 0.0};
  s.ratio = s.inter > 0 ? s.intra / s.inter : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Central finite differences of the mean batch loss, one parameter at a time.
//
// The loss is piecewise smooth: every hidden ReLU and every hinge is a kink.
// A coordinate whose +-eps stencil changes any of those on/off states is
// "straddling"; central differences there measure a mix of two pieces and are
// not a valid reference. Such coordinates are re-checked with the largest
// smaller step (eps/10, eps/100, ...) whose stencil stays on one piece.

struct GradCheck {
  std::size_t checked = 0;      // coordinates with |analytic| > floor
  std::size_t failures = 0;     // of those, relative error >= tol against a valid stencil
  std::size_t straddling = 0;   // checked coordinates whose eps stencil crossed a kink
  std::size_t literal_failures = 0;  // relative error >= tol at eps itself, kinks or not
  double max_rel_error = 0;     // over valid stencils
};

struct LossProbe {
  double loss = 0;
  std::vector<bool> pattern;  // ReLU and hinge on/off states
};

inline LossProbe probe_loss(const EmbeddingNet<double>& net, const FeatureMatrix<double>& features,
                            const std::vector<RowTriplet>& batch, double margin) {
  LossProbe out;
  const auto embed = [&](std::size_t row) {
    std::vector<double> act(features.row(row).begin(), features.row(row).end());
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<double> next(layers[l].out);
      for (std::size_t o = 0; o < layers[l].out; ++o) {
        double s = layers[l].bias[o];
        for (std::size_t i = 0; i < layers[l].in; ++i) s += layers[l].weight[o * layers[l].in + i] * act[i];
        if (l + 1 < layers.size()) {
          out.pattern.push_back(s > 0);
          s = std::max(0.0, s);
        }
        next[o] = s;
      }
      act = std::move(next);
    }
    if (net.normalize_output()) {
      double n = 0;
      for (double v : act) n += v * v;
      n = std::sqrt(n);
      for (double& v : act) v = n > 0 ? v / n : 0.0;
    }
    return act;
  };
  for (const auto& [a, p, q] : batch) {
    const auto ea = embed(a), ep = embed(p), en = embed(q);
    double dp = 0, dn = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
      dp += (ea[i] - ep[i]) * (ea[i] - ep[i]);
      dn += (ea[i] - en[i]) * (ea[i] - en[i]);
    }
    const double l = dp - dn + margin;
    out.pattern.push_back(l > 0);
    out.loss += std::max(0.0, l);
  }
  out.loss /= static_cast<double>(batch.size());
  return out;
}

inline GradCheck finite_difference_check(const EmbeddingNet<double>& net, const FeatureMatrix<double>& features,
                                         const std::vector<RowTriplet>& batch, double margin, double eps = 1e-3,
                                         double floor = 1e-6, double tol = 1e-4) {
  const auto analytic = backward<double>(net, features, batch, margin).grads;
  const auto base_pattern = probe_loss(net, features, batch, margin).pattern;
  GradCheck out;
  EmbeddingNet<double> probe = net;
  const auto rel_error = [](double fd, double g) { return std::abs(fd - g) / std::max(std::abs(fd), std::abs(g)); };
  const auto visit = [&](std::vector<double>& param, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      if (std::abs(grad[i]) <= floor) continue;
      ++out.checked;
      const double keep = param[i];
      bool first = true;
      for (double h = eps; h >= 1e-9; h /= 10) {
        param[i] = keep + h;
        const auto up = probe_loss(probe, features, batch, margin);
        param[i] = keep - h;
        const auto down = probe_loss(probe, features, batch, margin);
        param[i] = keep;
        const double rel = rel_error((up.loss - down.loss) / (2 * h), grad[i]);
        const bool valid = up.pattern == base_pattern && down.pattern == base_pattern;
        if (first) {
          if (!(rel < tol)) ++out.literal_failures;
          if (!valid) ++out.straddling;
          first = false;
        }
        if (!valid) continue;
        if (!(rel < tol)) ++out.failures;
        out.max_rel_error = std::max(out.max_rel_error, rel);
        break;
      }
    }
  };
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    visit(probe.layers()[l].weight, analytic.weight[l]);
    visit(probe.layers()[l].bias, analytic.bias[l]);
  }
  return out;
}

}  // namespace oracle
