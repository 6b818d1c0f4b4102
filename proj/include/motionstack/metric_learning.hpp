#pragma once

// Triplet-loss metric learning over tracklet features: triplet mining, an MLP
// encoder to 128-d with hand-written backprop, plain mini-batch SGD, and the
// embedding summaries used for re-identification.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "motionstack/error.hpp"
#include "motionstack/random.hpp"
#include "motionstack/tensor_io.hpp"
#include "motionstack/tracklets.hpp"

namespace motionstack {

inline constexpr std::size_t kEmbeddingDim = 128;

// ---------------------------------------------------------------------------
// Feature matrix: one row per (tracklet, frame), referenced by Tracklet::feature_rows.

template <typename T>
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorCode::DimensionMismatch, "feature matrix size mismatch");
  }

  static FeatureMatrix from_tensor(const Tensor& t) {
    require(t.dtype() == DType::F32 && t.rank() == 2, ErrorCode::DimensionMismatch, "features must be F32 [T, D]");
    const auto src = t.f32();
    return FeatureMatrix(t.dim(0), t.dim(1), std::vector<T>(src.begin(), src.end()));
  }

  Tensor to_tensor() const {
    return Tensor::f32({rows_, cols_}, std::vector<float>(data_.begin(), data_.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const T> row(std::size_t r) const {
    require(r < rows_, ErrorCode::BadRecord, "feature row " + std::to_string(r) + " out of range");
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Triplets

struct FrameRef {
  TrackId id = 0;
  std::int64_t frame = 0;
  friend auto operator<=>(const FrameRef&, const FrameRef&) = default;
};

struct Triplet {
  FrameRef anchor, positive, negative;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

using RowTriplet = std::array<std::size_t, 3>;

// For every anchor frame whose tracklet overlaps at least one tracklet with a
// different id, draws `per_anchor` triplets: the positive uniformly from the
// anchor's tracklet excluding the anchor frame (when it has >= 2 frames), the
// negative uniformly from all frames of the overlapping foreign tracklets.
// Anchors are visited by ascending (id, frame); one seeded stream drives all draws.
inline std::vector<Triplet> mine_triplets(const TrackletSet& set, std::uint64_t seed, std::size_t per_anchor) {
  require(per_anchor >= 1, ErrorCode::InvalidArgument, "triplets per anchor must be >= 1");
  std::vector<Triplet> out;
  const auto graph = overlap_graph(set);
  Rng rng(seed);

  for (const auto& [id, tracklet] : set) {
    // Negative pool: overlapping tracklets in id order, addressed by cumulative length.
    std::vector<const Tracklet*> pool;
    std::vector<std::size_t> cumulative;
    std::size_t total = 0;
    for (auto other : graph.at(id)) {
      const auto& t = set.at(other);
      if (t.id == id) continue;
      pool.push_back(&t);
      total += t.length();
      cumulative.push_back(total);
    }
    if (total == 0) continue;

    const std::size_t len = tracklet.length();
    for (std::int64_t frame = tracklet.start; frame <= tracklet.end; ++frame) {
      for (std::size_t k = 0; k < per_anchor; ++k) {
        std::int64_t pos_frame = frame;
        if (len >= 2) {
          auto pick = static_cast<std::int64_t>(uniform_index(rng, len - 1));
          if (tracklet.start + pick >= frame) ++pick;
          pos_frame = tracklet.start + pick;
        }
        const auto flat = uniform_index(rng, total);
        const auto slot = static_cast<std::size_t>(std::ranges::upper_bound(cumulative, flat) - cumulative.begin());
        const std::size_t before = slot == 0 ? 0 : cumulative[slot - 1];
        const auto* neg = pool[slot];
        out.push_back({{id, frame}, {id, pos_frame}, {neg->id, neg->start + static_cast<std::int64_t>(flat - before)}});
      }
    }
  }
  return out;
}

inline std::size_t feature_row(const TrackletSet& set, const FrameRef& ref) {
  const auto& t = set.at(ref.id);
  require(t.contains(ref.frame), ErrorCode::BadRecord,
          "frame " + std::to_string(ref.frame) + " outside tracklet " + std::to_string(ref.id));
  require(t.feature_rows.has_value(), ErrorCode::BadRecord, "tracklet " + std::to_string(ref.id) + " has no feature_rows");
  return (*t.feature_rows)[t.offset(ref.frame)];
}

inline std::vector<RowTriplet> resolve_rows(const TrackletSet& set, const std::vector<Triplet>& triplets) {
  std::vector<RowTriplet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets)
    out.push_back({feature_row(set, t.anchor), feature_row(set, t.positive), feature_row(set, t.negative)});
  return out;
}

inline void write_triplets(const std::vector<Triplet>& triplets, const fs::path& path) {
  std::string text;
  for (const auto& t : triplets) {
    const nlohmann::json j{{"a", {t.anchor.id, t.anchor.frame}},
                           {"p", {t.positive.id, t.positive.frame}},
                           {"n", {t.negative.id, t.negative.frame}}};
    text += j.dump() + "\n";
  }
  detail::write_text(path, text);
}

inline std::vector<Triplet> read_triplets(const fs::path& path) {
  std::vector<Triplet> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, const std::string& where) {
    const auto ref = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2 || !j[key][0].is_number_integer() ||
          !j[key][1].is_number_integer())
        fail(ErrorCode::BadRecord, where + ": \"" + key + "\" must be [id, frame]");
      return FrameRef{j[key][0].get<TrackId>(), j[key][1].get<std::int64_t>()};
    };
    out.push_back({ref("a"), ref("p"), ref("n")});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

template <typename T>
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<T> weight;  // [out, in], row-major
  std::vector<T> bias;    // [out]
};

// affine -> ReLU -> ... -> affine, output dimension 128. Optional L2
// normalization of the output (off by default).
template <typename T>
class EmbeddingNet {
 public:
  EmbeddingNet() = default;

  // Layers sized [d_in, hidden..., 128], weights and biases uniform in
  // +-1/sqrt(fan_in) from a seeded stream.
  static EmbeddingNet create(std::size_t d_in, std::uint64_t seed, std::vector<std::size_t> hidden = {512, 256},
                             bool normalize_output = false) {
    EmbeddingNet net = zeros(d_in, std::move(hidden), normalize_output);
    Rng rng(seed);
    for (auto& layer : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (auto& w : layer.weight) w = static_cast<T>(uniform(rng, -bound, bound));
      for (auto& b : layer.bias) b = static_cast<T>(uniform(rng, -bound, bound));
    }
    return net;
  }

  static EmbeddingNet zeros(std::size_t d_in, std::vector<std::size_t> hidden = {512, 256}, bool normalize_output = false) {
    require(d_in >= 1, ErrorCode::InvalidArgument, "input dimension must be >= 1");
    std::vector<std::size_t> dims{d_in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(kEmbeddingDim);
    for (auto d : dims) require(d >= 1, ErrorCode::InvalidArgument, "layer widths must be >= 1");
    EmbeddingNet net;
    net.normalize_output_ = normalize_output;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      net.layers_.push_back({dims[l], dims[l + 1], std::vector<T>(dims[l] * dims[l + 1], T(0)), std::vector<T>(dims[l + 1], T(0))});
    return net;
  }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> out{input_dim()};
    for (const auto& l : layers_) out.push_back(l.out);
    return out;
  }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  bool normalize_output() const noexcept { return normalize_output_; }
  std::vector<DenseLayer<T>>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const noexcept { return layers_; }

  // Pre-activations of every layer plus the input, kept for backprop.
  struct Trace {
    std::vector<std::vector<T>> inputs;  // input to each layer (post-ReLU of previous)
    std::vector<T> raw_output;           // last affine output
    std::vector<T> output;               // embedding
  };

  Trace trace(std::span<const T> x) const {
    require(x.size() == input_dim(), ErrorCode::DimensionMismatch,
            "feature has " + std::to_string(x.size()) + " dims, encoder expects " + std::to_string(input_dim()));
    Trace tr;
    std::vector<T> act(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      std::vector<T> next(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const T* w = layer.weight.data() + o * layer.in;
        T acc = layer.bias[o];
        for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * act[i];
        next[o] = acc;
      }
      tr.inputs.push_back(std::move(act));
      if (l + 1 < layers_.size())
        for (auto& v : next) v = v > T(0) ? v : T(0);
      act = std::move(next);
    }
    tr.raw_output = act;
    if (normalize_output_) {
      const T norm = std::sqrt(std::inner_product(act.begin(), act.end(), act.begin(), T(0)));
      for (auto& v : act) v = norm > T(0) ? v / norm : T(0);
    }
    tr.output = std::move(act);
    return tr;
  }

  std::vector<T> forward(std::span<const T> x) const { return trace(x).output; }

 private:
  std::vector<DenseLayer<T>> layers_;
  bool normalize_output_ = false;
};

template <typename T>
struct NetGradients {
  std::vector<std::vector<T>> weight;
  std::vector<std::vector<T>> bias;

  static NetGradients zeros_like(const EmbeddingNet<T>& net) {
    NetGradients g;
    for (const auto& l : net.layers()) {
      g.weight.emplace_back(l.weight.size(), T(0));
      g.bias.emplace_back(l.bias.size(), T(0));
    }
    return g;
  }
};

template <typename T>
T squared_distance(std::span<const T> a, std::span<const T> b) {
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

// max(0, |a-p|^2 - |a-n|^2 + margin)
template <typename T>
T triplet_loss(std::span<const T> ea, std::span<const T> ep, std::span<const T> en, T margin) {
  require(ea.size() == ep.size() && ea.size() == en.size(), ErrorCode::DimensionMismatch, "embedding sizes differ");
  return std::max(T(0), squared_distance(ea, ep) - squared_distance(ea, en) + margin);
}

namespace detail {

// Accumulates d(scale * loss)/d(params) for one sample given dL/d(embedding).
template <typename T>
void backprop_sample(const EmbeddingNet<T>& net, const typename EmbeddingNet<T>::Trace& tr, std::vector<T> grad,
                     NetGradients<T>& out) {
  if (net.normalize_output()) {
    const auto& y = tr.raw_output;
    const T norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), T(0)));
    if (norm <= T(0)) return;
    const T zg = std::inner_product(tr.output.begin(), tr.output.end(), grad.begin(), T(0));
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = (grad[i] - tr.output[i] * zg) / norm;
  }
  const auto& layers = net.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& x = tr.inputs[l];
    auto& gw = out.weight[l];
    auto& gb = out.bias[l];
    std::vector<T> gx(l > 0 ? layer.in : 0, T(0));
    for (std::size_t o = 0; o < layer.out; ++o) {
      const T g = grad[o];
      if (g == T(0)) continue;
      gb[o] += g;
      T* gw_row = gw.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) gw_row[i] += g * x[i];
      if (l > 0) {
        const T* w_row = layer.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) gx[i] += g * w_row[i];
      }
    }
    if (l == 0) break;
    // x is the ReLU output of the previous layer; the subgradient at 0 is 0.
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(x[i] > T(0))) gx[i] = T(0);
    grad = std::move(gx);
  }
}

}  // namespace detail

template <typename T>
struct BatchResult {
  T loss = T(0);  // mean over the batch
  NetGradients<T> grads;
};

template <typename T>
T batch_loss(const EmbeddingNet<T>& net, const FeatureMatrix<T>& features, std::span<const RowTriplet> batch, T margin) {
  if (batch.empty()) return T(0);
  T total = T(0);
  for (const auto& [a, p, n] : batch) {
    const auto ea = net.forward(features.row(a));
    const auto ep = net.forward(features.row(p));
    const auto en = net.forward(features.row(n));
    total += triplet_loss<T>(ea, ep, en, margin);
  }
  return total / static_cast<T>(batch.size());
}

// Mean triplet loss over the batch and its analytic gradient. Triplets with
// zero loss (hinge inactive, including exactly at 0) contribute nothing.
template <typename T>
BatchResult<T> backward(const EmbeddingNet<T>& net, const FeatureMatrix<T>& features, std::span<const RowTriplet> batch,
                        T margin) {
  BatchResult<T> result{T(0), NetGradients<T>::zeros_like(net)};
  if (batch.empty()) return result;
  const T scale = T(1) / static_cast<T>(batch.size());
  for (const auto& [a, p, n] : batch) {
    const auto ta = net.trace(features.row(a));
    const auto tp = net.trace(features.row(p));
    const auto tn = net.trace(features.row(n));
    const T loss = triplet_loss<T>(ta.output, tp.output, tn.output, margin);
    result.loss += loss;
    if (!(loss > T(0))) continue;
    const std::size_t d = ta.output.size();
    std::vector<T> ga(d), gp(d), gn(d);
    for (std::size_t i = 0; i < d; ++i) {
      ga[i] = scale * T(2) * (tn.output[i] - tp.output[i]);
      gp[i] = scale * T(-2) * (ta.output[i] - tp.output[i]);
      gn[i] = scale * T(2) * (ta.output[i] - tn.output[i]);
    }
    detail::backprop_sample(net, ta, std::move(ga), result.grads);
    detail::backprop_sample(net, tp, std::move(gp), result.grads);
    detail::backprop_sample(net, tn, std::move(gn), result.grads);
  }
  result.loss *= scale;
  return result;
}

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t triplets_per_anchor = 4;

  void validate() const {
    require(margin > 0, ErrorCode::InvalidArgument, "margin must be positive");
    require(learning_rate >= 0, ErrorCode::InvalidArgument, "learning rate must be nonnegative");
    require(epochs >= 1 && batch_size >= 1 && triplets_per_anchor >= 1, ErrorCode::InvalidArgument,
            "epochs, batch size and triplets per anchor must be positive");
  }
};

template <typename T>
struct TrainResult {
  EmbeddingNet<T> net;
  std::vector<double> loss_trace;  // mean per-triplet loss of each epoch, measured before each step
};

// Plain mini-batch gradient descent; the triplet order is reshuffled every
// epoch from a stream seeded by config.seed.
template <typename T>
TrainResult<T> train(EmbeddingNet<T> net, const FeatureMatrix<T>& features, const std::vector<RowTriplet>& triplets,
                     const TrainConfig& config) {
  config.validate();
  for (const auto& t : triplets)
    for (auto r : t) require(r < features.rows(), ErrorCode::BadRecord, "triplet references feature row " + std::to_string(r));

  TrainResult<T> result{std::move(net), {}};
  Rng rng(config.seed);
  std::vector<RowTriplet> order = triplets;
  const T lr = static_cast<T>(config.learning_rate);
  const T margin = static_cast<T>(config.margin);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const auto batch = std::span<const RowTriplet>(order).subspan(start, count);
      const auto step = backward(result.net, features, batch, margin);
      epoch_loss += static_cast<double>(step.loss) * static_cast<double>(count);
      auto& layers = result.net.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weight.size(); ++i) layers[l].weight[i] -= lr * step.grads.weight[l][i];
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= lr * step.grads.bias[l][i];
      }
    }
    result.loss_trace.push_back(order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Embedding summaries

template <typename T>
using Embedding = std::vector<T>;

// Mean frame embedding per tracklet.
template <typename T>
std::map<TrackId, Embedding<T>> tracklet_centroids(const EmbeddingNet<T>& net, const TrackletSet& set,
                                                   const FeatureMatrix<T>& features) {
  std::map<TrackId, Embedding<T>> out;
  for (const auto& [id, t] : set) {
    std::vector<double> sum(kEmbeddingDim, 0.0);
    for (std::int64_t f = t.start; f <= t.end; ++f) {
      const auto e = net.forward(features.row(feature_row(set, {id, f})));
      for (std::size_t i = 0; i < e.size(); ++i) sum[i] += static_cast<double>(e[i]);
    }
    Embedding<T> mean(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = static_cast<T>(sum[i] / static_cast<double>(t.length()));
    out.emplace(id, std::move(mean));
  }
  return out;
}

struct SeparationMetrics {
  double intra_mean = 0;
  double inter_mean = 0;
  double ratio = 0;
};

// Mean Euclidean distance over all same-identity pairs and over all
// cross-identity pairs; ratio = intra / inter (0 when inter is 0).
template <typename T>
SeparationMetrics separation_metrics(const std::vector<std::vector<Embedding<T>>>& groups) {
  require(groups.size() >= 2, ErrorCode::InvalidArgument, "separation metrics need at least two identities");
  const auto dist = [](const Embedding<T>& a, const Embedding<T>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& a = groups[g];
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j, ++n_intra) intra += dist(a[i], a[j]);
    for (std::size_t h = g + 1; h < groups.size(); ++h)
      for (const auto& x : a)
        for (const auto& y : groups[h]) {
          inter += dist(x, y);
          ++n_inter;
        }
  }
  SeparationMetrics m;
  m.intra_mean = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
  m.inter_mean = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
  m.ratio = m.inter_mean > 0 ? m.intra_mean / m.inter_mean : 0.0;
  return m;
}

struct MergeProposal {
  TrackId a = 0;  // a < b
  TrackId b = 0;
  double distance = 0;
};

// Same-individual candidates: centroid distance <= threshold and no temporal
// overlap. Sorted by distance, then ids.
template <typename T>
std::vector<MergeProposal> propose_merges(const std::map<TrackId, Embedding<T>>& centroids, const TrackletSet& set,
                                          double threshold) {
  std::vector<MergeProposal> out;
  for (auto a = centroids.begin(); a != centroids.end(); ++a) {
    for (auto b = std::next(a); b != centroids.end(); ++b) {
      if (temporal_overlap(set.at(a->first), set.at(b->first))) continue;
      double acc = 0.0;
      for (std::size_t i = 0; i < a->second.size(); ++i) {
        const double d = static_cast<double>(a->second[i]) - static_cast<double>(b->second[i]);
        acc += d * d;
      }
      const double distance = std::sqrt(acc);
      if (distance <= threshold) out.push_back({a->first, b->first, distance});
    }
  }
  std::ranges::sort(out, [](const MergeProposal& x, const MergeProposal& y) {
    return std::tie(x.distance, x.a, x.b) < std::tie(y.distance, y.a, y.b);
  });
  return out;
}

struct Projection2d {
  std::vector<std::array<double, 2>> points;
  std::array<std::vector<double>, 2> components;  // unit loadings
  std::array<double, 2> variances{};              // eigenvalues of the sample covariance
};

// Mean-centred projection onto the top-2 principal directions. Each
// component is signed so its largest-magnitude loading is positive.
template <typename T>
Projection2d pca_project_2d(const std::vector<Embedding<T>>& samples) {
  require(samples.size() >= 2, ErrorCode::InvalidArgument, "PCA needs at least two samples");
  const std::size_t n = samples.size();
  const std::size_t d = samples.front().size();
  require(d >= 1, ErrorCode::InvalidArgument, "PCA needs nonempty vectors");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    require(samples[i].size() == d, ErrorCode::DimensionMismatch, "PCA samples differ in dimension");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(samples[i][j]);
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

  Projection2d out;
  out.points.assign(n, {0.0, 0.0});
  const auto& vectors = solver.eigenvectors();
  const auto& values = solver.eigenvalues();  // ascending
  for (std::size_t k = 0; k < 2; ++k) {
    if (k >= d) {
      out.components[k].assign(d, 0.0);
      continue;
    }
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - k);
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components[k].assign(v.data(), v.data() + d);
    out.variances[k] = std::max(0.0, values(col));
    const Eigen::VectorXd proj = x * v;
    for (std::size_t i = 0; i < n; ++i) out.points[i][k] = proj(static_cast<Eigen::Index>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Net files: a JSON manifest plus one MTENSOR per weight and bias, named
// <stem>.layer<k>.weight.mten / <stem>.layer<k>.bias.mten beside the manifest.

inline void save_net(const EmbeddingNet<float>& net, const fs::path& manifest_path) {
  const auto dir = manifest_path.parent_path();
  const auto stem = manifest_path.stem().string();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  }
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const auto& l = net.layers()[k];
    const std::string w = stem + ".layer" + std::to_string(k) + ".weight.mten";
    const std::string b = stem + ".layer" + std::to_string(k) + ".bias.mten";
    write_tensor(Tensor::f32({l.out, l.in}, l.weight), dir / w);
    write_tensor(Tensor::f32({l.out}, l.bias), dir / b);
    layers.push_back({{"weight", w}, {"bias", b}});
  }
  const nlohmann::json manifest{{"dims", net.dims()}, {"activation", "relu"}, {"normalize_output", net.normalize_output()},
                                {"layers", layers}};
  detail::write_text(manifest_path, manifest.dump(2) + "\n");
}

inline EmbeddingNet<float> load_net(const fs::path& manifest_path) {
  const auto j = parse_json_file(manifest_path);
  const auto where = manifest_path.string();
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() < 2 || !j.contains("layers") ||
      j["layers"].size() + 1 != j["dims"].size())
    fail(ErrorCode::BadRecord, where + ": malformed net manifest");
  const auto dims = j["dims"].get<std::vector<std::size_t>>();
  if (dims.back() != kEmbeddingDim) fail(ErrorCode::BadRecord, where + ": output dimension must be 128");
  auto net = EmbeddingNet<float>::zeros(dims.front(), std::vector<std::size_t>(dims.begin() + 1, dims.end() - 1),
                                        j.value("normalize_output", false));
  const auto dir = manifest_path.parent_path();
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    auto& l = net.layers()[k];
    const auto w = read_tensor(dir / j["layers"][k].at("weight").get<std::string>());
    const auto b = read_tensor(dir / j["layers"][k].at("bias").get<std::string>());
    if (w.dtype() != DType::F32 || w.shape() != Shape{l.out, l.in} || b.dtype() != DType::F32 || b.shape() != Shape{l.out})
      fail(ErrorCode::DimensionMismatch, where + ": layer " + std::to_string(k) + " tensors do not match dims");
    l.weight.assign(w.f32().begin(), w.f32().end());
    l.bias.assign(b.f32().begin(), b.f32().end());
  }
  return net;
}

}  // namespace motionstack
