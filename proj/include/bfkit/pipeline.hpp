// End-to-end runs: corpus acquisition, data preparation, training, and the
// run-directory layout shared by every CLI command.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <bfkit/bundle.hpp>
#include <bfkit/common.hpp>
#include <bfkit/config.hpp>
#include <bfkit/dataio.hpp>
#include <bfkit/eval.hpp>
#include <bfkit/model.hpp>
#include <bfkit/train.hpp>

namespace bfkit::pipeline {

// ---------------------------------------------------------------------------
// Seed fan-out. One master seed drives every randomized stage; the salts keep
// the streams decorrelated so changing e.g. the split never perturbs synthesis.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kSaltSynthesis = 0x436f7270ULL;
inline constexpr std::uint64_t kSaltSplit = 0x53706c69ULL;
inline constexpr std::uint64_t kSaltInit = 0x496e6974ULL;
inline constexpr std::uint64_t kSaltShuffle = 0x54726169ULL;

// ---------------------------------------------------------------------------
// Corpus acquisition
// ---------------------------------------------------------------------------

inline dataio::SynthesisSpec synthesis_spec(const config::RunConfig& cfg,
                                            dataio::FaultLabel fault,
                                            std::uint64_t base_seed) {
  dataio::SynthesisSpec spec;
  spec.fault_class = fault;
  spec.geom = cfg.geom;
  spec.condition = cfg.condition;
  spec.sample_rate_hz = cfg.sample_rate_hz;
  spec.carrier_hz = cfg.carrier_hz;
  spec.impact_decay_s = cfg.impact_decay_s;
  spec.snr_db = cfg.snr_db;
  spec.jitter_pct = cfg.jitter_pct;
  spec.mains_hz = cfg.mains_hz;
  spec.seed = derive_seed(base_seed, static_cast<std::uint64_t>(fault));
  return spec;
}

// cfg.per_class segments for each of the three classes, class-ordered.
// Stratified splitting downstream removes any ordering sensitivity.
inline std::vector<dataio::SignalSegment> synthesize_corpus(const config::RunConfig& cfg) {
  const std::uint64_t base = derive_seed(cfg.master_seed, kSaltSynthesis);
  std::vector<dataio::SignalSegment> corpus;
  corpus.reserve(cfg.per_class * dataio::kNumClasses);
  for (int c = 0; c < dataio::kNumClasses; ++c) {
    const auto spec = synthesis_spec(cfg, static_cast<dataio::FaultLabel>(c), base);
    auto batch = dataio::synthesize(spec, cfg.per_class, cfg.window);
    for (auto& seg : batch) corpus.push_back(std::move(seg));
  }
  return corpus;
}

// The segment file stores only the condition's label; speed/load/force come
// from the config so a run stays reproducible from its frozen config alone.
inline std::vector<dataio::SignalSegment> load_corpus(const config::RunConfig& cfg,
                                                      const std::string& path) {
  auto segments = dataio::read_segments(path);
  if (segments.empty()) throw DataError("segment file has no records: " + path);
  for (auto& seg : segments) {
    std::string stored = seg.condition.label;
    seg.condition = cfg.condition;
    if (!stored.empty()) seg.condition.label = stored;
  }
  return segments;
}

inline std::vector<dataio::SignalSegment> acquire_corpus(const config::RunConfig& cfg,
                                                         const std::string& path) {
  if (!path.empty()) return load_corpus(cfg, path);
  return synthesize_corpus(cfg);
}

// ---------------------------------------------------------------------------
// Data preparation: split, physics features, normalization, datasets.
// ---------------------------------------------------------------------------

struct PreparedData {
  std::vector<dataio::FaultLabel> labels;
  std::vector<int> int_labels;
  dataio::DatasetSplit split;
  std::vector<model::PhysicsFeatures> raw_features;
  train::Normalization nz;
  train::Dataset train_set;
  train::Dataset val_set;
  train::Dataset test_set;
};

inline std::vector<int> int_labels_of(const std::vector<dataio::FaultLabel>& labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<int>(labels[i]);
  return out;
}

// Normalization (and thus the physics thresholds) comes from the training
// split only; validation and test reuse it unchanged.
inline PreparedData prepare_data(const config::RunConfig& cfg,
                                 const std::vector<dataio::SignalSegment>& segments) {
  PreparedData d;
  d.labels = dataio::labels_of(segments);
  d.int_labels = int_labels_of(d.labels);
  d.split = dataio::make_split(d.labels, cfg.ratios, derive_seed(cfg.master_seed, kSaltSplit));
  d.raw_features = train::extract_all_features(segments, cfg.geom, cfg.band);
  d.nz = train::compute_normalization(segments, d.raw_features, d.int_labels, d.split.train,
                                      cfg.physics.threshold_percentile);
  d.train_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.train);
  if (!d.split.validation.empty())
    d.val_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.validation);
  d.test_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.test);
  return d;
}

// Reuses previously fitted normalization (e.g. a source-domain model applied
// zero-shot): same split machinery, no refitting of stats or thresholds.
inline PreparedData prepare_data_with(const config::RunConfig& cfg,
                                      const std::vector<dataio::SignalSegment>& segments,
                                      const train::Normalization& nz) {
  PreparedData d;
  d.labels = dataio::labels_of(segments);
  d.int_labels = int_labels_of(d.labels);
  d.split = dataio::make_split(d.labels, cfg.ratios, derive_seed(cfg.master_seed, kSaltSplit));
  d.raw_features = train::extract_all_features(segments, cfg.geom, cfg.band);
  d.nz = nz;
  d.train_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.train);
  if (!d.split.validation.empty())
    d.val_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.validation);
  d.test_set = train::make_dataset(segments, d.raw_features, d.nz, d.split.test);
  return d;
}

// ---------------------------------------------------------------------------
// Full training run
// ---------------------------------------------------------------------------

struct TestReport {
  train::EvalResult eval;
  eval::MetricsReport metrics;
  std::vector<double> auc;  // one-vs-rest per class
};

inline TestReport report_on(model::MultimodalNet& net, const train::Dataset& ds,
                            const model::PhysicsLossConfig& physics) {
  TestReport r{train::evaluate(net, ds, physics), {}, {}};
  r.metrics = eval::compute_metrics(r.eval.confusion);
  r.auc = eval::roc_auc(r.eval.probabilities, r.eval.labels);
  return r;
}

struct TrainOutcome {
  bundle::ModelBundle bundle;
  train::TrainResult training;
  TestReport test;
  std::size_t train_n = 0, val_n = 0, test_n = 0;
};

// split -> standardize -> physics features -> early-stopped fit -> test eval.
// With a resume checkpoint the stored normalization and thresholds are kept;
// zero additional epochs means evaluate-only, which replays the original
// test metrics exactly.
inline TrainOutcome run_training(const config::RunConfig& cfg,
                                 const std::string& resume_path = "") {
  const auto segments = acquire_corpus(cfg, cfg.data_path);

  std::optional<bundle::ModelBundle> resumed;
  if (!resume_path.empty()) resumed = bundle::load_bundle(resume_path);

  PreparedData data = resumed.has_value() ? prepare_data_with(cfg, segments, resumed->nz)
                                          : prepare_data(cfg, segments);

  model::PhysicsLossConfig physics = resumed.has_value() ? resumed->physics : cfg.physics;
  if (!resumed.has_value()) {
    physics.t_bpfo = data.nz.t_bpfo;
    physics.t_bpfi = data.nz.t_bpfi;
  }
  physics.validate();

  auto arch = cfg.resolve_arch();
  bundle::ModelBundle b = resumed.has_value()
                              ? std::move(*resumed)
                              : bundle::ModelBundle(arch, cfg.geom, cfg.band, data.nz, physics,
                                                    derive_seed(cfg.master_seed, kSaltInit));

  train::TrainConfig tcfg = cfg.trainer;
  tcfg.seed = derive_seed(cfg.master_seed, kSaltShuffle);
  tcfg.physics = physics;

  TrainOutcome out{std::move(b), train::TrainResult{}, TestReport{}, data.train_set.size(),
                   data.val_set.size(), data.test_set.size()};
  const bool evaluate_only = resumed.has_value() && cfg.trainer.max_epochs == 0;
  if (!evaluate_only)
    out.training = train::fit(out.bundle.net, data.train_set, data.val_set, tcfg);
  out.test = report_on(out.bundle.net, data.test_set, physics);
  return out;
}

// ---------------------------------------------------------------------------
// Run directories: <out_root>/<run_id>/ with config.frozen + reports.
// Append-only; an existing directory is refused unless forced.
// ---------------------------------------------------------------------------

inline std::filesystem::path make_run_dir(const std::string& out_root, const std::string& run_id,
                                          bool force) {
  if (run_id.empty()) throw ConfigError("run id must not be empty");
  if (run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos)
    throw ConfigError("run id must be a plain directory name: " + run_id);
  std::filesystem::path dir = std::filesystem::path(out_root) / run_id;
  if (std::filesystem::exists(dir)) {
    if (!force)
      throw StateError("run directory already exists (use --force to overwrite): " +
                       dir.string());
  } else {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
  return dir;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

inline void write_frozen_config(const std::filesystem::path& dir, const config::RunConfig& cfg) {
  write_text_file(dir / "config.frozen", config::to_json(cfg).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline config::json test_report_json(const TestReport& r) {
  config::json j;
  j["accuracy"] = r.eval.accuracy;
  j["macro_precision"] = r.metrics.macro_precision;
  j["macro_recall"] = r.metrics.macro_recall;
  j["macro_f1"] = r.metrics.macro_f1;
  j["auc"] = {{"healthy", r.auc.at(0)}, {"inner", r.auc.at(1)}, {"outer", r.auc.at(2)}};
  j["confusion"] = r.eval.confusion.counts;
  j["mean_total_loss"] = r.eval.mean_total;
  j["mean_cross_entropy"] = r.eval.mean_cross_entropy;
  j["mean_penalty"] = r.eval.mean_penalty;
  j["sub_threshold_events"] = r.eval.sub_threshold_events;
  j["n"] = r.eval.labels.size();
  return j;
}

inline config::json training_json(const train::TrainResult& t) {
  config::json j;
  j["epochs_run"] = t.epochs_run;
  j["best_epoch"] = t.best_epoch;
  j["best_val_loss"] = t.best_val_loss;
  return j;
}

inline std::string format_double(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string test_report_text(const TestReport& r) {
  const char* names[] = {"Healthy", "InnerFault", "OuterFault"};
  std::ostringstream os;
  os << "test accuracy        " << format_double(r.eval.accuracy) << "\n";
  os << "macro precision      " << format_double(r.metrics.macro_precision) << "\n";
  os << "macro recall         " << format_double(r.metrics.macro_recall) << "\n";
  os << "macro F1             " << format_double(r.metrics.macro_f1) << "\n";
  for (int c = 0; c < dataio::kNumClasses; ++c)
    os << "AUC " << names[c] << std::string(17 - std::string(names[c]).size(), ' ')
       << format_double(r.auc.at(c)) << "\n";
  os << "mean loss            " << format_double(r.eval.mean_total, 6) << " (ce "
     << format_double(r.eval.mean_cross_entropy, 6) << ", penalty "
     << format_double(r.eval.mean_penalty, 6) << ")\n";
  os << "sub-threshold events " << r.eval.sub_threshold_events << "\n";
  os << "confusion (rows = truth, cols = predicted)\n";
  for (int t = 0; t < dataio::kNumClasses; ++t) {
    os << "  " << names[t] << std::string(12 - std::string(names[t]).size(), ' ');
    for (int p = 0; p < dataio::kNumClasses; ++p)
      os << std::setw(6) << r.eval.confusion.counts[t][p];
    os << "\n";
  }
  return os.str();
}

inline void write_reports(const std::filesystem::path& dir, const config::json& report_json,
                          const std::string& report_text) {
  write_text_file(dir / "report.json", report_json.dump(2) + "\n");
  write_text_file(dir / "report.txt", report_text);
}

inline void write_training_curve_csv(const std::filesystem::path& path,
                                     const train::TrainResult& t) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,val_cross_entropy,val_penalty,val_accuracy\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < t.curve.size(); ++i) {
    const auto& e = t.curve[i];
    os << (i + 1) << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_cross_entropy
       << ',' << e.val_penalty << ',' << e.val_accuracy << "\n";
  }
  write_text_file(path, os.str());
}

}  // namespace bfkit::pipeline
