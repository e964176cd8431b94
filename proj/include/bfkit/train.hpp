// Mini-batch Adam training loop with early stopping on validation loss, plus
// the dataset preparation shared by training, evaluation, and transfer runs.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/dataio.hpp"
#include "bfkit/dsp.hpp"
#include "bfkit/eval.hpp"
#include "bfkit/geometry.hpp"
#include "bfkit/model.hpp"
#include "bfkit/nn.hpp"

namespace bfkit::train {

// Training-split statistics applied to every split: channel standardization,
// physics-amplitude scaling, and the penalty thresholds.
struct Normalization {
  dataio::StandardizeStats stats;
  model::PhysicsNorm norm;
  double t_bpfo = 0.0;
  double t_bpfi = 0.0;
};

inline std::vector<model::PhysicsFeatures> extract_all_features(
    const std::vector<dataio::SignalSegment>& segments,
    const geometry::BearingGeometry& geom, const dsp::BandpassSpec& band) {
  std::vector<model::PhysicsFeatures> out;
  out.reserve(segments.size());
  for (const auto& seg : segments)
    out.push_back(model::extract_physics_features(seg, geom, seg.condition, band));
  return out;
}

inline Normalization compute_normalization(const std::vector<dataio::SignalSegment>& segments,
                                           const std::vector<model::PhysicsFeatures>& raw_feats,
                                           const std::vector<int>& labels,
                                           const std::vector<std::size_t>& train_idx,
                                           double threshold_percentile) {
  Normalization nz;
  nz.stats = dataio::compute_standardize_stats(segments, train_idx);
  nz.norm = model::compute_physics_norm(raw_feats, train_idx);
  std::tie(nz.t_bpfo, nz.t_bpfi) =
      model::compute_thresholds(raw_feats, labels, train_idx, threshold_percentile);
  return nz;
}

// One split's worth of ready-to-feed samples. Segments are standardized;
// features carry both raw amplitudes (for the penalty) and normalized ones
// (for the physics branch input). ids index into the source corpus.
struct Dataset {
  std::vector<dataio::SignalSegment> segments;
  std::vector<model::PhysicsFeatures> features;
  std::vector<int> labels;
  std::vector<std::size_t> ids;

  std::size_t size() const { return segments.size(); }
};

inline Dataset make_dataset(const std::vector<dataio::SignalSegment>& segments,
                            const std::vector<model::PhysicsFeatures>& raw_feats,
                            const Normalization& nz, const std::vector<std::size_t>& indices) {
  if (segments.size() != raw_feats.size())
    throw ShapeError("make_dataset: segment/feature counts differ");
  Dataset ds;
  ds.segments.reserve(indices.size());
  for (std::size_t i : indices) {
    ds.segments.push_back(dataio::standardize(segments.at(i), nz.stats));
    auto f = raw_feats.at(i);
    nz.norm.apply(f);
    ds.features.push_back(f);
    ds.labels.push_back(static_cast<int>(segments.at(i).label));
    ds.ids.push_back(i);
  }
  return ds;
}

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  model::PhysicsLossConfig physics;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (patience == 0) throw ConfigError("train: patience must be positive");
    if (max_epochs == 0) throw ConfigError("train: max epochs must be positive");
    physics.validate();
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_cross_entropy = 0.0;
  double val_penalty = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;  // one entry per completed epoch
  std::size_t best_epoch = 0;     // 1-based
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
};

struct EvalResult {
  eval::ConfusionMatrix confusion{};
  std::vector<std::vector<double>> probabilities;
  std::vector<int> labels;
  double mean_total = 0.0;
  double mean_cross_entropy = 0.0;
  double mean_penalty = 0.0;
  double accuracy = 0.0;
  // fault predictions whose own characteristic amplitude sits below threshold
  std::size_t sub_threshold_events = 0;
};

inline EvalResult evaluate(model::MultimodalNet& net, const Dataset& ds,
                           const model::PhysicsLossConfig& physics) {
  if (ds.size() == 0) throw DataError("evaluate: empty dataset");
  EvalResult r;
  const auto k_outer = static_cast<int>(dataio::FaultLabel::OuterFault);
  const auto k_inner = static_cast<int>(dataio::FaultLabel::InnerFault);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto logits = net.forward_logits(model::MultimodalNet::make_input(ds.segments[i],
                                                                     ds.features[i]));
    logits.shape = {1, logits.size()};
    const auto loss = model::physics_informed_loss(logits, {ds.labels[i]}, {ds.features[i]},
                                                   physics);
    r.mean_total += loss.total;
    r.mean_cross_entropy += loss.cross_entropy;
    r.mean_penalty += loss.penalty_mean;

    const auto probs = nn::softmax_vec(logits.data);
    const int pred = static_cast<int>(model::argmax_lowest(probs));
    r.confusion.add(static_cast<std::size_t>(ds.labels[i]), static_cast<std::size_t>(pred));
    r.probabilities.push_back(probs);
    r.labels.push_back(ds.labels[i]);
    if (pred == k_outer && ds.features[i].a_bpfo < physics.t_bpfo) ++r.sub_threshold_events;
    if (pred == k_inner && ds.features[i].a_bpfi < physics.t_bpfi) ++r.sub_threshold_events;
  }
  const auto n = static_cast<double>(ds.size());
  r.mean_total /= n;
  r.mean_cross_entropy /= n;
  r.mean_penalty /= n;
  r.accuracy = static_cast<double>(r.confusion.correct()) / n;
  return r;
}

inline std::map<std::string, std::vector<double>> snapshot_values(const nn::ParamStore& store) {
  std::map<std::string, std::vector<double>> snap;
  for (const auto& [name, p] : store) snap[name] = p.value.data;
  return snap;
}

// Weight restore only: Adam moments and the step counter keep their final
// state, so a later resume continues from the restored point cleanly.
inline void restore_values(nn::ParamStore& store,
                           const std::map<std::string, std::vector<double>>& snap) {
  for (auto& [name, p] : store) p.value.data = snap.at(name);
}

// Shuffled mini-batch Adam with per-sample forward/backward accumulation.
// Early stopping watches total validation loss (cross-entropy plus weighted
// penalty); the best epoch's weights are restored before returning.
inline TrainResult fit(model::MultimodalNet& net, const Dataset& train_set,
                       const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0)
    throw DataError("fit: empty training or validation set");

  nn::AdamConfig adam;
  adam.lr = cfg.learning_rate;
  nn::EarlyStopper stopper(static_cast<int>(cfg.patience));
  TrainResult result;
  auto best_snapshot = snapshot_values(net.params());

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x45706f6368ULL + epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const auto batch_n = static_cast<double>(end - start);
      net.params().zero_grads();
      double batch_loss_sum = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        auto logits = net.forward_logits(
            model::MultimodalNet::make_input(train_set.segments[i], train_set.features[i]));
        logits.shape = {1, logits.size()};
        auto loss = model::physics_informed_loss(logits, {train_set.labels[i]},
                                                 {train_set.features[i]}, cfg.physics);
        batch_loss_sum += loss.total;
        auto g = loss.grad;
        g.shape = {g.size()};
        for (auto& v : g.data) v /= batch_n;
        net.backward(g);
      }
      if (!std::isfinite(batch_loss_sum))
        throw NumericError("fit: non-finite training loss at epoch " + std::to_string(epoch));
      nn::adam_step(net.params(), adam);
      epoch_loss_sum += batch_loss_sum;
    }

    const auto val = evaluate(net, val_set, cfg.physics);
    EpochStats es;
    es.train_loss = epoch_loss_sum / static_cast<double>(train_set.size());
    es.val_loss = val.mean_total;
    es.val_cross_entropy = val.mean_cross_entropy;
    es.val_penalty = val.mean_penalty;
    es.val_accuracy = val.accuracy;
    result.curve.push_back(es);
    result.epochs_run = epoch;
    if (!std::isfinite(val.mean_total))
      throw NumericError("fit: non-finite validation loss at epoch " + std::to_string(epoch));

    const bool was_best = val.mean_total < stopper.best_loss();
    const bool stop = stopper.observe(val.mean_total);
    if (was_best) best_snapshot = snapshot_values(net.params());
    if (stop) break;
  }

  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  restore_values(net.params(), best_snapshot);
  return result;
}

}  // namespace bfkit::train
