// Minimal deterministic NN engine: tensors, 1D conv/pool/dense layers with
// exact reverse-mode gradients, Adam, Xavier init, early stopping.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bfkit/common.hpp"

namespace bfkit::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    validate();
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return Tensor{std::move(s), std::vector<double>(n, 0.0)};
  }

  std::size_t size() const { return data.size(); }

  void validate() const {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor: zero dimension");
      n *= d;
    }
    if (n != data.size())
      throw ShapeError("tensor: shape/data mismatch (" + shape_str() + " vs " +
                       std::to_string(data.size()) + " values)");
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& want,
                          const std::string& where) {
  if (t.shape != want) {
    Tensor w;
    w.shape = want;
    throw ShapeError(where + ": got " + t.shape_str() + ", expected " + w.shape_str());
  }
}

// Xavier/Glorot uniform on [-sqrt(6/(fan_in+fan_out)), +..]. Dense weights are
// [out, in]; conv weights [C_out, C_in, K] use fan_in = C_in*K, fan_out = C_out*K.
inline Tensor xavier_init(const std::vector<std::size_t>& shape, Rng& rng) {
  std::size_t fan_in = 0, fan_out = 0;
  if (shape.size() == 2) {
    fan_out = shape[0];
    fan_in = shape[1];
  } else if (shape.size() == 3) {
    fan_out = shape[0] * shape[2];
    fan_in = shape[1] * shape[2];
  } else {
    throw ShapeError("xavier_init: expected rank-2 or rank-3 shape");
  }
  if (fan_in == 0 || fan_out == 0) throw ShapeError("xavier_init: zero fan");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (auto& x : t.data) x = rng.uniform(-bound, bound);
  return t;
}

inline Tensor xavier_init(const std::vector<std::size_t>& shape, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_init(shape, rng);
}

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  bool trainable = true;
};

// Named parameter tensors plus optimizer state. std::map keeps iteration
// order stable and deterministic.
class ParamStore {
 public:
  ParamEntry& create(const std::string& name, Tensor init) {
    if (entries_.count(name)) throw StateError("param store: duplicate tensor " + name);
    ParamEntry e;
    e.grad = Tensor::zeros(init.shape);
    e.m = Tensor::zeros(init.shape);
    e.v = Tensor::zeros(init.shape);
    e.value = std::move(init);
    return entries_.emplace(name, std::move(e)).first->second;
  }

  ParamEntry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StateError("param store: unknown tensor " + name);
    return it->second;
  }

  const ParamEntry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StateError("param store: unknown tensor " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  void zero_grads() {
    for (auto& [k, e] : entries_)
      std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
  }

  std::size_t trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& [k, e] : entries_)
      if (e.trainable) n += e.value.size();
    return n;
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [k, e] : entries_) n += e.value.size();
    return n;
  }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ParamEntry> entries_;
  std::uint64_t step_ = 0;

  friend void adam_step(ParamStore&, const struct AdamConfig&);
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on trainable tensors; frozen tensors (values and
// moments) stay bitwise-untouched. One step counter shared per store.
inline void adam_step(ParamStore& store, const AdamConfig& cfg) {
  store.step_ += 1;
  const double t = static_cast<double>(store.step_);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store) {
    if (e.grad.shape != e.value.shape)
      throw ShapeError("adam_step: grad " + e.grad.shape_str() + " vs value " +
                       e.value.shape_str() + " for " + name);
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad.data[i];
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m.data[i] / bc1;
      const double vhat = e.v.data[i] / bc2;
      e.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Layers. bind() validates shapes, creates parameters and returns the output
// shape; forward() caches whatever backward() needs.
// ---------------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual std::vector<std::size_t> bind(ParamStore& store, const std::string& prefix,
                                        const std::vector<std::size_t>& in_shape,
                                        Rng& rng) = 0;
  virtual Tensor forward(const Tensor& in) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

 protected:
  void require_forward(bool& flag) const {
    if (!flag) throw StateError(std::string(kind()) + ": backward before forward");
    flag = false;
  }
};

// Valid (no padding) cross-correlation over [C_in, L] maps.
class Conv1D : public Layer {
 public:
  Conv1D(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1)
      : c_out_(out_channels), k_(kernel), stride_(stride) {
    if (out_channels == 0 || kernel == 0 || stride == 0)
      throw ConfigError("conv1d: channels, kernel and stride must be positive");
  }

  const char* kind() const override { return "conv1d"; }

  std::vector<std::size_t> bind(ParamStore& store, const std::string& prefix,
                                const std::vector<std::size_t>& in_shape, Rng& rng) override {
    if (in_shape.size() != 2)
      throw ShapeError("conv1d: expected [channels, length] input, got rank " +
                       std::to_string(in_shape.size()));
    c_in_ = in_shape[0];
    l_in_ = in_shape[1];
    if (k_ > l_in_)
      throw ShapeError("conv1d: kernel " + std::to_string(k_) + " exceeds input length " +
                       std::to_string(l_in_));
    l_out_ = (l_in_ - k_) / stride_ + 1;
    w_ = &store.create(prefix + ".conv.w", xavier_init({c_out_, c_in_, k_}, rng));
    b_ = &store.create(prefix + ".conv.b", Tensor::zeros({c_out_}));
    return {c_out_, l_out_};
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, {c_in_, l_in_}, "conv1d");
    in_cache_ = in;
    Tensor out = Tensor::zeros({c_out_, l_out_});
    const auto& w = w_->value.data;
    for (std::size_t o = 0; o < c_out_; ++o) {
      for (std::size_t t = 0; t < l_out_; ++t) {
        double acc = b_->value.data[o];
        const std::size_t base = t * stride_;
        for (std::size_t ci = 0; ci < c_in_; ++ci) {
          const double* xs = &in.data[ci * l_in_ + base];
          const double* ws = &w[(o * c_in_ + ci) * k_];
          for (std::size_t k = 0; k < k_; ++k) acc += ws[k] * xs[k];
        }
        out.data[o * l_out_ + t] = acc;
      }
    }
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    require_shape(grad_out, {c_out_, l_out_}, "conv1d backward");
    Tensor grad_in = Tensor::zeros({c_in_, l_in_});
    const auto& w = w_->value.data;
    auto& dw = w_->grad.data;
    auto& db = b_->grad.data;
    for (std::size_t o = 0; o < c_out_; ++o) {
      for (std::size_t t = 0; t < l_out_; ++t) {
        const double g = grad_out.data[o * l_out_ + t];
        if (g == 0.0) continue;
        db[o] += g;
        const std::size_t base = t * stride_;
        for (std::size_t ci = 0; ci < c_in_; ++ci) {
          const double* xs = &in_cache_.data[ci * l_in_ + base];
          const double* ws = &w[(o * c_in_ + ci) * k_];
          double* dxs = &grad_in.data[ci * l_in_ + base];
          double* dws = &dw[(o * c_in_ + ci) * k_];
          for (std::size_t k = 0; k < k_; ++k) {
            dxs[k] += ws[k] * g;
            dws[k] += xs[k] * g;
          }
        }
      }
    }
    return grad_in;
  }

 private:
  std::size_t c_out_, k_, stride_;
  std::size_t c_in_ = 0, l_in_ = 0, l_out_ = 0;
  ParamEntry* w_ = nullptr;
  ParamEntry* b_ = nullptr;
  Tensor in_cache_;
  bool has_forward_ = false;
};

// Non-overlapping max pooling; ties resolve to the lowest index.
class MaxPool1D : public Layer {
 public:
  explicit MaxPool1D(std::size_t pool) : p_(pool) {
    if (pool < 2) throw ConfigError("maxpool1d: pool size must be at least 2");
  }

  const char* kind() const override { return "maxpool1d"; }

  std::vector<std::size_t> bind(ParamStore&, const std::string&,
                                const std::vector<std::size_t>& in_shape, Rng&) override {
    if (in_shape.size() != 2)
      throw ShapeError("maxpool1d: expected [channels, length] input");
    c_ = in_shape[0];
    l_in_ = in_shape[1];
    if (l_in_ < p_)
      throw ShapeError("maxpool1d: window " + std::to_string(p_) + " exceeds length " +
                       std::to_string(l_in_));
    l_out_ = l_in_ / p_;  // trailing remainder dropped
    return {c_, l_out_};
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, {c_, l_in_}, "maxpool1d");
    Tensor out = Tensor::zeros({c_, l_out_});
    argmax_.assign(c_ * l_out_, 0);
    for (std::size_t c = 0; c < c_; ++c) {
      for (std::size_t t = 0; t < l_out_; ++t) {
        const std::size_t base = c * l_in_ + t * p_;
        std::size_t best = base;
        for (std::size_t k = 1; k < p_; ++k)
          if (in.data[base + k] > in.data[best]) best = base + k;
        out.data[c * l_out_ + t] = in.data[best];
        argmax_[c * l_out_ + t] = best;
      }
    }
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    require_shape(grad_out, {c_, l_out_}, "maxpool1d backward");
    Tensor grad_in = Tensor::zeros({c_, l_in_});
    for (std::size_t i = 0; i < grad_out.size(); ++i)
      grad_in.data[argmax_[i]] += grad_out.data[i];
    return grad_in;
  }

 private:
  std::size_t p_;
  std::size_t c_ = 0, l_in_ = 0, l_out_ = 0;
  std::vector<std::size_t> argmax_;
  bool has_forward_ = false;
};

class Dense : public Layer {
 public:
  explicit Dense(std::size_t units) : units_(units) {
    if (units == 0) throw ConfigError("dense: units must be positive");
  }

  const char* kind() const override { return "dense"; }

  std::vector<std::size_t> bind(ParamStore& store, const std::string& prefix,
                                const std::vector<std::size_t>& in_shape, Rng& rng) override {
    if (in_shape.size() != 1)
      throw ShapeError("dense: expected flat input, got rank " +
                       std::to_string(in_shape.size()));
    in_ = in_shape[0];
    w_ = &store.create(prefix + ".dense.w", xavier_init({units_, in_}, rng));
    b_ = &store.create(prefix + ".dense.b", Tensor::zeros({units_}));
    return {units_};
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, {in_}, "dense");
    in_cache_ = in;
    Tensor out = Tensor::zeros({units_});
    const auto& w = w_->value.data;
    for (std::size_t o = 0; o < units_; ++o) {
      double acc = b_->value.data[o];
      const double* ws = &w[o * in_];
      for (std::size_t i = 0; i < in_; ++i) acc += ws[i] * in.data[i];
      out.data[o] = acc;
    }
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    require_shape(grad_out, {units_}, "dense backward");
    Tensor grad_in = Tensor::zeros({in_});
    const auto& w = w_->value.data;
    auto& dw = w_->grad.data;
    for (std::size_t o = 0; o < units_; ++o) {
      const double g = grad_out.data[o];
      b_->grad.data[o] += g;
      if (g == 0.0) continue;
      const double* ws = &w[o * in_];
      double* dws = &dw[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        grad_in.data[i] += ws[i] * g;
        dws[i] += in_cache_.data[i] * g;
      }
    }
    return grad_in;
  }

 private:
  std::size_t units_;
  std::size_t in_ = 0;
  ParamEntry* w_ = nullptr;
  ParamEntry* b_ = nullptr;
  Tensor in_cache_;
  bool has_forward_ = false;
};

class ReLU : public Layer {
 public:
  const char* kind() const override { return "relu"; }

  std::vector<std::size_t> bind(ParamStore&, const std::string&,
                                const std::vector<std::size_t>& in_shape, Rng&) override {
    shape_ = in_shape;
    return in_shape;
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, shape_, "relu");
    mask_.assign(in.size(), false);
    Tensor out = in;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out.data[i] > 0.0)
        mask_[i] = true;
      else
        out.data[i] = 0.0;
    }
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    require_shape(grad_out, shape_, "relu backward");
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i)
      if (!mask_[i]) grad_in.data[i] = 0.0;
    return grad_in;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<bool> mask_;
  bool has_forward_ = false;
};

class Flatten : public Layer {
 public:
  const char* kind() const override { return "flatten"; }

  std::vector<std::size_t> bind(ParamStore&, const std::string&,
                                const std::vector<std::size_t>& in_shape, Rng&) override {
    in_shape_ = in_shape;
    std::size_t n = 1;
    for (std::size_t d : in_shape) n *= d;
    return {n};
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, in_shape_, "flatten");
    Tensor out = in;
    out.shape = {in.size()};
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    Tensor grad_in = grad_out;
    grad_in.shape = in_shape_;
    grad_in.validate();
    return grad_in;
  }

 private:
  std::vector<std::size_t> in_shape_;
  bool has_forward_ = false;
};

inline std::vector<double> softmax_vec(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

class Softmax : public Layer {
 public:
  const char* kind() const override { return "softmax"; }

  std::vector<std::size_t> bind(ParamStore&, const std::string&,
                                const std::vector<std::size_t>& in_shape, Rng&) override {
    if (in_shape.size() != 1) throw ShapeError("softmax: expected flat input");
    n_ = in_shape[0];
    return in_shape;
  }

  Tensor forward(const Tensor& in) override {
    require_shape(in, {n_}, "softmax");
    Tensor out = in;
    out.data = softmax_vec(in.data);
    out_cache_ = out.data;
    has_forward_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_forward(has_forward_);
    require_shape(grad_out, {n_}, "softmax backward");
    double dot = 0.0;
    for (std::size_t i = 0; i < n_; ++i) dot += grad_out.data[i] * out_cache_[i];
    Tensor grad_in = Tensor::zeros({n_});
    for (std::size_t i = 0; i < n_; ++i)
      grad_in.data[i] = out_cache_[i] * (grad_out.data[i] - dot);
    return grad_in;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> out_cache_;
  bool has_forward_ = false;
};

// Layer description as read from the architecture config.
struct LayerSpec {
  enum class Kind { Conv1D, MaxPool1D, Dense, ReLU, Flatten, Softmax };
  Kind kind = Kind::ReLU;
  std::size_t out_channels = 0;  // conv
  std::size_t kernel = 0;        // conv
  std::size_t stride = 1;        // conv
  std::size_t pool = 0;          // maxpool
  std::size_t units = 0;         // dense
};

inline std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerSpec::Kind::Conv1D:
      return std::make_unique<Conv1D>(spec.out_channels, spec.kernel, spec.stride);
    case LayerSpec::Kind::MaxPool1D:
      return std::make_unique<MaxPool1D>(spec.pool);
    case LayerSpec::Kind::Dense:
      return std::make_unique<Dense>(spec.units);
    case LayerSpec::Kind::ReLU:
      return std::make_unique<ReLU>();
    case LayerSpec::Kind::Flatten:
      return std::make_unique<Flatten>();
    case LayerSpec::Kind::Softmax:
      return std::make_unique<Softmax>();
  }
  throw ConfigError("make_layer: unknown layer kind");
}

// Ordered layer stack; parameters are named "<prefix>.<index>.<kind>.<w|b>".
class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

  std::vector<std::size_t> bind(ParamStore& store, const std::string& prefix,
                                std::vector<std::size_t> shape, Rng& rng) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      shape = layers_[i]->bind(store, prefix + "." + std::to_string(i), shape, rng);
    return shape;
  }

  Tensor forward(Tensor x) {
    for (auto& l : layers_) x = l->forward(x);
    return x;
  }

  Tensor backward(Tensor g) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct CrossEntropy {
  double loss = 0.0;
  Tensor grad;  // [N, C], d loss / d logits
};

// Mean over the batch of -log softmax(logits)[label], stabilized by max
// subtraction; gradient rows are (softmax - onehot)/N.
inline CrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.shape.size() != 2)
    throw ShapeError("softmax_cross_entropy: expected [batch, classes] logits");
  const std::size_t n = logits.shape[0];
  const std::size_t c = logits.shape[1];
  if (labels.size() != n)
    throw ShapeError("softmax_cross_entropy: batch " + std::to_string(n) + " vs " +
                     std::to_string(labels.size()) + " labels");
  CrossEntropy out;
  out.grad = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw DataError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(c) + ")");
    std::vector<double> row(logits.data.begin() + static_cast<std::ptrdiff_t>(i * c),
                            logits.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    out.loss += log_z - row[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - log_z);
      out.grad.data[i * c + j] =
          (p - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0)) /
          static_cast<double>(n);
    }
  }
  out.loss /= static_cast<double>(n);
  return out;
}

// Stop when the best validation loss has not strictly improved for `patience`
// consecutive epochs. Epochs are 1-based; the epoch cap lives in the trainer.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stopping: patience must be at least 1");
  }

  // Returns true when training should stop after this epoch.
  bool observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      since_ = 0;
      return false;
    }
    ++since_;
    return since_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace bfkit::nn
