// Multimodal late-fusion classifier: three conv branches over current/vibration
// channels, a dense branch over characteristic-frequency amplitudes, a fused
// dense head, and the physics-consistency penalty.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/dataio.hpp"
#include "bfkit/dsp.hpp"
#include "bfkit/geometry.hpp"
#include "bfkit/nn.hpp"

namespace bfkit::model {

struct PhysicsFeatures {
  double a_bpfo = 0.0;  // raw envelope amplitude at the outer-race frequency
  double a_bpfi = 0.0;  // raw envelope amplitude at the inner-race frequency
  double norm_bpfo = 0.0;  // corpus-normalized to [0, 1]
  double norm_bpfi = 0.0;
};

// Per-feature normalization denominators (training-corpus maxima), persisted
// with the model so inference uses the same scale.
struct PhysicsNorm {
  double max_bpfo = 1.0;
  double max_bpfi = 1.0;

  void apply(PhysicsFeatures& f) const {
    f.norm_bpfo = std::clamp(f.a_bpfo / max_bpfo, 0.0, 1.0);
    f.norm_bpfi = std::clamp(f.a_bpfi / max_bpfi, 0.0, 1.0);
  }
};

inline PhysicsNorm compute_physics_norm(const std::vector<PhysicsFeatures>& feats,
                                        const std::vector<std::size_t>& train_idx) {
  if (train_idx.empty()) throw DataError("physics norm: empty training set");
  PhysicsNorm n;
  n.max_bpfo = 0.0;
  n.max_bpfi = 0.0;
  for (std::size_t i : train_idx) {
    n.max_bpfo = std::max(n.max_bpfo, feats.at(i).a_bpfo);
    n.max_bpfi = std::max(n.max_bpfi, feats.at(i).a_bpfi);
  }
  if (n.max_bpfo <= 0.0) n.max_bpfo = 1.0;
  if (n.max_bpfi <= 0.0) n.max_bpfi = 1.0;
  return n;
}

enum class PenaltyGating { HardArgmax, SoftProbability };

inline const char* gating_name(PenaltyGating g) {
  return g == PenaltyGating::HardArgmax ? "hard" : "soft";
}

inline PenaltyGating gating_from_name(const std::string& s) {
  if (s == "hard") return PenaltyGating::HardArgmax;
  if (s == "soft") return PenaltyGating::SoftProbability;
  throw ConfigError("unknown penalty gating '" + s + "' (want hard|soft)");
}

struct PhysicsLossConfig {
  double lambda = 1.0;
  double threshold_percentile = 10.0;
  double t_bpfo = 0.0;
  double t_bpfi = 0.0;
  PenaltyGating gating = PenaltyGating::SoftProbability;

  void validate() const {
    if (lambda < 0.0) throw ConfigError("physics loss: lambda must be nonnegative");
    if (!(threshold_percentile > 0.0 && threshold_percentile < 100.0))
      throw ConfigError("physics loss: threshold percentile must lie in (0, 100)");
    if (t_bpfo < 0.0 || t_bpfi < 0.0)
      throw ConfigError("physics loss: thresholds must be nonnegative");
  }
};

// Envelope amplitudes at the two characteristic frequencies of one segment.
inline PhysicsFeatures extract_physics_features(const dataio::SignalSegment& seg,
                                                const geometry::BearingGeometry& geom,
                                                const geometry::OperatingCondition& cond,
                                                const dsp::BandpassSpec& band) {
  seg.validate();
  const double fr = geometry::shaft_frequency(cond);
  dsp::TimeSeries ts;
  ts.sample_rate_hz = seg.sample_rate_hz;
  ts.samples.assign(seg.vibration.begin(), seg.vibration.end());
  const auto spec = dsp::envelope_spectrum(ts, band);
  const double f_o = geometry::bpfo(geom, fr);
  const double f_i = geometry::bpfi(geom, fr);
  PhysicsFeatures f;
  f.a_bpfo = dsp::amplitude_at(spec, f_o, dsp::default_tolerance(spec, f_o));
  f.a_bpfi = dsp::amplitude_at(spec, f_i, dsp::default_tolerance(spec, f_i));
  return f;
}

// Thresholds are the configured percentile of each fault class's own training
// amplitude distribution: T_bpfo from outer-fault segments' a_bpfo, T_bpfi
// from inner-fault segments' a_bpfi. A fault prediction whose amplitude falls
// below the typical range of that fault class is then flagged as implausible.
inline std::pair<double, double> compute_thresholds(
    const std::vector<PhysicsFeatures>& feats, const std::vector<int>& labels,
    const std::vector<std::size_t>& train_idx, double percentile) {
  std::vector<double> outer_amps, inner_amps;
  for (std::size_t i : train_idx) {
    if (labels.at(i) == static_cast<int>(dataio::FaultLabel::OuterFault))
      outer_amps.push_back(feats.at(i).a_bpfo);
    if (labels.at(i) == static_cast<int>(dataio::FaultLabel::InnerFault))
      inner_amps.push_back(feats.at(i).a_bpfi);
  }
  if (outer_amps.empty() || inner_amps.empty())
    throw DataError("thresholds: training split lacks fault-class segments");
  return {dsp::percentile_threshold(outer_amps, percentile),
          dsp::percentile_threshold(inner_amps, percentile)};
}

inline std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Piecewise penalty for a committed prediction: positive only when the
// predicted fault class's amplitude is below its threshold.
inline double physics_penalty(int predicted_class, const PhysicsFeatures& f,
                              const PhysicsLossConfig& cfg) {
  if (predicted_class == static_cast<int>(dataio::FaultLabel::OuterFault) &&
      f.a_bpfo < cfg.t_bpfo)
    return cfg.t_bpfo - f.a_bpfo;
  if (predicted_class == static_cast<int>(dataio::FaultLabel::InnerFault) &&
      f.a_bpfi < cfg.t_bpfi)
    return cfg.t_bpfi - f.a_bpfi;
  return 0.0;
}

// Probability-gated form: class probabilities weight the two hinge terms, so
// the penalty is differentiable through the softmax. HardArgmax reduces to
// the committed-prediction form.
inline double physics_penalty(const std::vector<double>& probs, const PhysicsFeatures& f,
                              const PhysicsLossConfig& cfg) {
  if (cfg.gating == PenaltyGating::HardArgmax)
    return physics_penalty(static_cast<int>(argmax_lowest(probs)), f, cfg);
  const double hinge_o = std::max(0.0, cfg.t_bpfo - f.a_bpfo);
  const double hinge_i = std::max(0.0, cfg.t_bpfi - f.a_bpfi);
  return probs[static_cast<std::size_t>(dataio::FaultLabel::OuterFault)] * hinge_o +
         probs[static_cast<std::size_t>(dataio::FaultLabel::InnerFault)] * hinge_i;
}

struct LossResult {
  double total = 0.0;
  double cross_entropy = 0.0;
  double penalty_mean = 0.0;
  nn::Tensor grad;  // [N, C], d total / d logits
};

// total = CE + lambda * mean(P_i). Soft gating adds penalty gradients through
// the softmax; hard gating contributes loss value only.
inline LossResult physics_informed_loss(const nn::Tensor& logits,
                                        const std::vector<int>& labels,
                                        const std::vector<PhysicsFeatures>& feats,
                                        const PhysicsLossConfig& cfg) {
  cfg.validate();
  auto ce = nn::softmax_cross_entropy(logits, labels);
  const std::size_t n = logits.shape[0];
  const std::size_t c = logits.shape[1];
  if (feats.size() != n)
    throw ShapeError("physics_informed_loss: batch " + std::to_string(n) + " vs " +
                     std::to_string(feats.size()) + " feature rows");

  LossResult out;
  out.cross_entropy = ce.loss;
  out.grad = std::move(ce.grad);

  const auto k_outer = static_cast<std::size_t>(dataio::FaultLabel::OuterFault);
  const auto k_inner = static_cast<std::size_t>(dataio::FaultLabel::InnerFault);
  double penalty_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(logits.data.begin() + static_cast<std::ptrdiff_t>(i * c),
                            logits.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    const auto probs = nn::softmax_vec(row);
    penalty_sum += physics_penalty(probs, feats[i], cfg);
    if (cfg.gating == PenaltyGating::SoftProbability && cfg.lambda > 0.0) {
      const double hinge_o = std::max(0.0, cfg.t_bpfo - feats[i].a_bpfo);
      const double hinge_i = std::max(0.0, cfg.t_bpfi - feats[i].a_bpfi);
      // d penalty / d logit_j through the softmax Jacobian
      const double dot = probs[k_outer] * hinge_o + probs[k_inner] * hinge_i;
      for (std::size_t j = 0; j < c; ++j) {
        double g = -dot * probs[j];
        if (j == k_outer) g += probs[k_outer] * hinge_o;
        if (j == k_inner) g += probs[k_inner] * hinge_i;
        out.grad.data[i * c + j] += cfg.lambda * g / static_cast<double>(n);
      }
    }
  }
  out.penalty_mean = penalty_sum / static_cast<double>(n);
  out.total = out.cross_entropy + cfg.lambda * out.penalty_mean;
  return out;
}

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

struct ArchConfig {
  std::size_t window_len = 2048;
  std::vector<nn::LayerSpec> signal_branch;   // topology shared by the three channel branches
  std::vector<nn::LayerSpec> physics_branch;  // over the two normalized amplitudes
  std::vector<nn::LayerSpec> head;            // over the fused vector; emits 3 logits
};

// Scaled-down reference topology; the full-size counterpart differs only in
// widths and comes from the config file.
inline ArchConfig default_desk_arch(std::size_t window_len) {
  using K = nn::LayerSpec::Kind;
  ArchConfig a;
  a.window_len = window_len;
  auto conv = [](std::size_t ch, std::size_t k, std::size_t s) {
    nn::LayerSpec l;
    l.kind = K::Conv1D;
    l.out_channels = ch;
    l.kernel = k;
    l.stride = s;
    return l;
  };
  auto pool = [](std::size_t p) {
    nn::LayerSpec l;
    l.kind = K::MaxPool1D;
    l.pool = p;
    return l;
  };
  auto dense = [](std::size_t u) {
    nn::LayerSpec l;
    l.kind = K::Dense;
    l.units = u;
    return l;
  };
  const nn::LayerSpec relu{};                       // Kind::ReLU is the default
  nn::LayerSpec flatten;
  flatten.kind = K::Flatten;

  a.signal_branch = {conv(8, 16, 2), relu, pool(4), conv(16, 8, 1),
                     relu,           pool(4), flatten, dense(32), relu};
  a.physics_branch = {dense(8), relu};
  a.head = {dense(64), relu, dense(3)};
  return a;
}

inline std::string layer_spec_str(const nn::LayerSpec& l) {
  using K = nn::LayerSpec::Kind;
  std::ostringstream os;
  switch (l.kind) {
    case K::Conv1D:
      os << "conv(c=" << l.out_channels << ",k=" << l.kernel << ",s=" << l.stride << ")";
      break;
    case K::MaxPool1D:
      os << "pool(" << l.pool << ")";
      break;
    case K::Dense:
      os << "dense(" << l.units << ")";
      break;
    case K::ReLU:
      os << "relu";
      break;
    case K::Flatten:
      os << "flatten";
      break;
    case K::Softmax:
      os << "softmax";
      break;
  }
  return os.str();
}

// Canonical text form; its hash guards checkpoint/model compatibility.
inline std::string canonical_arch_string(const ArchConfig& a) {
  std::ostringstream os;
  os << "window=" << a.window_len;
  auto stack = [&](const char* name, const std::vector<nn::LayerSpec>& specs) {
    os << ";" << name << "=";
    for (std::size_t i = 0; i < specs.size(); ++i)
      os << (i ? "," : "") << layer_spec_str(specs[i]);
  };
  stack("signal", a.signal_branch);
  stack("physics", a.physics_branch);
  stack("head", a.head);
  return os.str();
}

inline std::uint64_t arch_hash(const ArchConfig& a) {
  return fnv1a64(canonical_arch_string(a));
}

// Branch binding order (and so parameter naming and init-stream order) is
// fixed: current_a, current_b, vibration, physics, head.
class MultimodalNet {
 public:
  struct Input {
    nn::Tensor current_a;  // [1, W]
    nn::Tensor current_b;  // [1, W]
    nn::Tensor vibration;  // [1, W]
    nn::Tensor physics;    // [2]
  };

  MultimodalNet(ArchConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    if (cfg_.window_len < 2) throw ConfigError("model: window_len too small");
    if (cfg_.signal_branch.empty() || cfg_.head.empty())
      throw ConfigError("model: signal branch and head must be non-empty");
    Rng rng(init_seed);
    auto build = [&](nn::Sequential& seq, const std::vector<nn::LayerSpec>& specs,
                     const std::string& prefix, std::vector<std::size_t> in_shape) {
      for (const auto& s : specs) seq.add(nn::make_layer(s));
      const auto out = seq.bind(params_, prefix, std::move(in_shape), rng);
      if (out.size() != 1)
        throw ConfigError("model: branch '" + prefix + "' must end with a flat vector");
      return out[0];
    };
    width_a_ = build(branch_a_, cfg_.signal_branch, "current_a", {1, cfg_.window_len});
    width_b_ = build(branch_b_, cfg_.signal_branch, "current_b", {1, cfg_.window_len});
    width_v_ = build(branch_v_, cfg_.signal_branch, "vibration", {1, cfg_.window_len});
    width_p_ = build(branch_p_, cfg_.physics_branch, "physics", {2});
    fusion_width_ = width_a_ + width_b_ + width_v_ + width_p_;
    const auto head_out = build(head_, cfg_.head, "head", {fusion_width_});
    if (head_out != static_cast<std::size_t>(dataio::kNumClasses))
      throw ConfigError("model: head must emit " + std::to_string(dataio::kNumClasses) +
                        " logits, got " + std::to_string(head_out));
  }

  const ArchConfig& arch() const { return cfg_; }
  std::uint64_t hash() const { return arch_hash(cfg_); }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::size_t fusion_width() const { return fusion_width_; }

  static Input make_input(const dataio::SignalSegment& standardized,
                          const PhysicsFeatures& feats) {
    const std::size_t w = standardized.window_len();
    Input in;
    in.current_a = nn::Tensor::zeros({1, w});
    in.current_b = nn::Tensor::zeros({1, w});
    in.vibration = nn::Tensor::zeros({1, w});
    for (std::size_t i = 0; i < w; ++i) {
      in.current_a.data[i] = standardized.current_a[i];
      in.current_b.data[i] = standardized.current_b[i];
      in.vibration.data[i] = standardized.vibration[i];
    }
    in.physics = nn::Tensor{{2}, {feats.norm_bpfo, feats.norm_bpfi}};
    return in;
  }

  // Records activations for a following backward(); also caches the fused
  // vector for embedding export.
  nn::Tensor forward_logits(const Input& in) {
    const auto a = branch_a_.forward(in.current_a);
    const auto b = branch_b_.forward(in.current_b);
    const auto v = branch_v_.forward(in.vibration);
    const auto p = branch_p_.forward(in.physics);
    fused_ = nn::Tensor::zeros({fusion_width_});
    std::size_t off = 0;
    for (const auto* part : {&a, &b, &v, &p}) {
      std::copy(part->data.begin(), part->data.end(), fused_.data.begin() +
                static_cast<std::ptrdiff_t>(off));
      off += part->size();
    }
    return head_.forward(fused_);
  }

  void backward(const nn::Tensor& grad_logits) {
    const auto dfused = head_.backward(grad_logits);
    std::size_t off = 0;
    auto slice = [&](std::size_t w) {
      nn::Tensor t = nn::Tensor::zeros({w});
      std::copy(dfused.data.begin() + static_cast<std::ptrdiff_t>(off),
                dfused.data.begin() + static_cast<std::ptrdiff_t>(off + w),
                t.data.begin());
      off += w;
      return t;
    };
    branch_a_.backward(slice(width_a_));
    branch_b_.backward(slice(width_b_));
    branch_v_.backward(slice(width_v_));
    branch_p_.backward(slice(width_p_));
  }

  std::vector<double> forward_probs(const Input& in) {
    return nn::softmax_vec(forward_logits(in).data);
  }

  // Fused feature vector of the last forward pass.
  const nn::Tensor& fused_vector() const { return fused_; }

  std::vector<double> embed(const Input& in) {
    forward_logits(in);
    return fused_.data;
  }

 private:
  ArchConfig cfg_;
  nn::ParamStore params_;
  nn::Sequential branch_a_, branch_b_, branch_v_, branch_p_, head_;
  std::size_t width_a_ = 0, width_b_ = 0, width_v_ = 0, width_p_ = 0;
  std::size_t fusion_width_ = 0;
  nn::Tensor fused_;
};

// CSV of (segment id, label, condition, fused activation vector), one row per
// input, deterministic.
inline void export_embeddings(MultimodalNet& net,
                              const std::vector<MultimodalNet::Input>& inputs,
                              const std::vector<int>& labels,
                              const std::vector<std::string>& conditions,
                              const std::vector<std::size_t>& segment_ids,
                              const std::string& path) {
  if (inputs.size() != labels.size() || inputs.size() != conditions.size() ||
      inputs.size() != segment_ids.size())
    throw ShapeError("export_embeddings: input/metadata lengths differ");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open embeddings file for writing: " + path);
  out << "segment_id,label,condition";
  for (std::size_t d = 0; d < net.fusion_width(); ++d) out << ",e" << d;
  out << "\n";
  out.precision(10);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto emb = net.embed(inputs[i]);
    out << segment_ids[i] << ","
        << dataio::label_name(static_cast<dataio::FaultLabel>(labels[i])) << ","
        << conditions[i];
    for (double v : emb) out << "," << v;
    out << "\n";
  }
  if (!out) throw DataError("embedding write failed: " + path);
}

}  // namespace bfkit::model
