// Shared synthetic-corpus helpers for trainer and transfer tests: a small
// fast corpus (256-sample windows at 2048 Hz) plus matching architectures.
#pragma once

#include "bfkit/train.hpp"

namespace fixture {

using namespace bfkit;

inline const geometry::BearingGeometry kGeom{8, 6.75, 28.55, 0.0};
inline const dsp::BandpassSpec kBand{400.0, 900.0, 4};
inline constexpr std::size_t kWindow = 256;

inline geometry::OperatingCondition cond_rpm(double rpm, const std::string& label) {
  return {rpm, 0.7, 1000.0, label};
}

inline geometry::OperatingCondition source_condition() {
  return cond_rpm(1500.0, "N15_M07_F10");
}

inline std::vector<dataio::SignalSegment> tiny_corpus(
    std::size_t per_class, std::uint64_t seed,
    const geometry::OperatingCondition& cond = source_condition(), double snr_db = 10.0) {
  dataio::SynthesisSpec spec;
  spec.geom = kGeom;
  spec.condition = cond;
  spec.sample_rate_hz = 2048.0;
  spec.carrier_hz = 600.0;
  spec.snr_db = snr_db;
  // short bursts keep successive impacts from overlapping at this sample rate
  spec.impact_decay_s = 0.0008;
  std::vector<dataio::SignalSegment> all;
  for (auto label : {dataio::FaultLabel::Healthy, dataio::FaultLabel::InnerFault,
                     dataio::FaultLabel::OuterFault}) {
    spec.fault_class = label;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(label));
    auto part = dataio::synthesize(spec, per_class, kWindow);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

struct PreparedCorpus {
  std::vector<dataio::SignalSegment> segments;
  std::vector<model::PhysicsFeatures> features;
  std::vector<int> labels;
  dataio::DatasetSplit split;
  train::Normalization nz;
  train::Dataset train_ds, val_ds, test_ds;
};

inline PreparedCorpus prepare_tiny(std::size_t per_class, std::uint64_t seed,
                                   const geometry::OperatingCondition& cond =
                                       source_condition(),
                                   double snr_db = 10.0) {
  PreparedCorpus p;
  p.segments = tiny_corpus(per_class, seed, cond, snr_db);
  p.features = train::extract_all_features(p.segments, kGeom, kBand);
  for (const auto& s : p.segments) p.labels.push_back(static_cast<int>(s.label));
  p.split = dataio::make_split(dataio::labels_of(p.segments), {0.6, 0.2, 0.2},
                               derive_seed(seed, 99));
  p.nz = train::compute_normalization(p.segments, p.features, p.labels, p.split.train, 10.0);
  p.train_ds = train::make_dataset(p.segments, p.features, p.nz, p.split.train);
  p.val_ds = train::make_dataset(p.segments, p.features, p.nz, p.split.validation);
  p.test_ds = train::make_dataset(p.segments, p.features, p.nz, p.split.test);
  return p;
}

inline model::ArchConfig tiny_train_arch() {
  using K = nn::LayerSpec::Kind;
  model::ArchConfig a;
  a.window_len = kWindow;
  nn::LayerSpec conv;
  conv.kind = K::Conv1D;
  conv.out_channels = 4;
  conv.kernel = 8;
  conv.stride = 2;
  nn::LayerSpec relu;
  nn::LayerSpec pool;
  pool.kind = K::MaxPool1D;
  pool.pool = 4;
  nn::LayerSpec flat;
  flat.kind = K::Flatten;
  auto dense = [](std::size_t u) {
    nn::LayerSpec l;
    l.kind = K::Dense;
    l.units = u;
    return l;
  };
  a.signal_branch = {conv, relu, pool, flat, dense(8), relu};
  a.physics_branch = {dense(4), relu};
  a.head = {dense(16), relu, dense(3)};
  return a;
}

inline model::ArchConfig linear_head_arch() {
  auto a = tiny_train_arch();
  nn::LayerSpec d3;
  d3.kind = nn::LayerSpec::Kind::Dense;
  d3.units = 3;
  a.head = {d3};
  return a;
}

}  // namespace fixture
