// Hyperparameter grid search: penalty weight x threshold percentile x split
// ratio, each cell resolved by stratified k-fold cross-validation.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <bfkit/common.hpp>
#include <bfkit/config.hpp>
#include <bfkit/dataio.hpp>
#include <bfkit/eval.hpp>
#include <bfkit/model.hpp>
#include <bfkit/pipeline.hpp>
#include <bfkit/train.hpp>

namespace bfkit::grid {

struct GridRow {
  std::size_t cell = 0;  // linear index in (split, lambda, percentile) order
  double train_frac = 0.0;
  double lambda = 0.0;
  double threshold_pct = 0.0;
  std::size_t best_fold = 0;  // 1-based
  double val_acc = 0.0;
  double test_acc = 0.0;
  double test_f1 = 0.0;
  std::array<double, 3> auc{};  // healthy, inner, outer
  double wall_s = 0.0;
  bool ok = false;
  std::string error;
};

namespace detail {

// Everything random in a cell derives from this one value, so results do not
// depend on scheduling or the number of workers.
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t cell) {
  return derive_seed(master, 0x4772696400ULL + cell);
}

}  // namespace detail

// One grid cell: two-way split, k-fold CV on the training side, best fold by
// validation accuracy (ties to the lowest fold), its model evaluated once on
// the held-out test side. Failures are recorded in the row, not thrown.
inline GridRow run_grid_cell(const config::RunConfig& cfg,
                             const std::vector<dataio::SignalSegment>& segments,
                             const std::vector<model::PhysicsFeatures>& raw_feats,
                             const std::vector<dataio::FaultLabel>& labels,
                             const std::vector<int>& int_labels, std::size_t split_i,
                             std::size_t lambda_i, std::size_t pct_i) {
  const std::size_t n_lambda = cfg.grid_lambdas.size();
  const std::size_t n_pct = cfg.grid_percentiles.size();

  GridRow row;
  row.cell = split_i * n_lambda * n_pct + lambda_i * n_pct + pct_i;
  row.train_frac = cfg.grid_train_fracs.at(split_i);
  row.lambda = cfg.grid_lambdas.at(lambda_i);
  row.threshold_pct = cfg.grid_percentiles.at(pct_i);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const std::uint64_t seed = detail::cell_seed(cfg.master_seed, row.cell);
    const std::array<double, 3> ratios = {row.train_frac, 0.0, 1.0 - row.train_frac};
    const auto split = dataio::make_split(labels, ratios, derive_seed(seed, 0));
    const auto folds =
        dataio::make_folds(split.train, labels, cfg.folds, derive_seed(seed, 1));

    std::optional<model::MultimodalNet> best_net;
    train::Normalization best_nz;
    model::PhysicsLossConfig best_physics;
    double best_val_acc = -1.0;

    for (std::size_t k = 0; k < folds.size(); ++k) {
      std::vector<std::size_t> fold_train;
      for (std::size_t j = 0; j < folds.size(); ++j)
        if (j != k) fold_train.insert(fold_train.end(), folds[j].begin(), folds[j].end());

      auto nz = train::compute_normalization(segments, raw_feats, int_labels, fold_train,
                                             row.threshold_pct);
      model::PhysicsLossConfig physics = cfg.physics;
      physics.lambda = row.lambda;
      physics.threshold_percentile = row.threshold_pct;
      physics.t_bpfo = nz.t_bpfo;
      physics.t_bpfi = nz.t_bpfi;

      const auto tr_ds = train::make_dataset(segments, raw_feats, nz, fold_train);
      const auto va_ds = train::make_dataset(segments, raw_feats, nz, folds[k]);

      model::MultimodalNet net(cfg.resolve_arch(), derive_seed(seed, 100 + k));
      train::TrainConfig tcfg = cfg.trainer;
      tcfg.seed = derive_seed(seed, 200 + k);
      tcfg.physics = physics;
      train::fit(net, tr_ds, va_ds, tcfg);

      const auto val_eval = train::evaluate(net, va_ds, physics);
      if (val_eval.accuracy > best_val_acc) {
        best_val_acc = val_eval.accuracy;
        best_net.emplace(std::move(net));
        best_nz = nz;
        best_physics = physics;
        row.best_fold = k + 1;
      }
    }

    const auto test_ds = train::make_dataset(segments, raw_feats, best_nz, split.test);
    const auto report = pipeline::report_on(*best_net, test_ds, best_physics);
    row.val_acc = best_val_acc;
    row.test_acc = report.eval.accuracy;
    row.test_f1 = report.metrics.macro_f1;
    for (int c = 0; c < dataio::kNumClasses; ++c) row.auc[c] = report.auc.at(c);
    row.ok = true;
  } catch (const Error& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

// All cells over the configured grid, at most `jobs` worker threads. Cell
// seeds are position-derived, so any worker count gives identical rows.
inline std::vector<GridRow> grid_search(const config::RunConfig& cfg,
                                        const std::vector<dataio::SignalSegment>& segments,
                                        std::size_t jobs = 1) {
  if (cfg.grid_lambdas.empty() || cfg.grid_percentiles.empty() || cfg.grid_train_fracs.empty())
    throw ConfigError("grid search: grid axes must be non-empty");
  if (cfg.folds < 2) throw ConfigError("grid search: need at least 2 folds");
  if (jobs == 0) throw ConfigError("grid search: jobs must be positive");

  const auto labels = dataio::labels_of(segments);
  const auto int_labels = pipeline::int_labels_of(labels);
  const auto raw_feats = train::extract_all_features(segments, cfg.geom, cfg.band);

  const std::size_t n_cells =
      cfg.grid_train_fracs.size() * cfg.grid_lambdas.size() * cfg.grid_percentiles.size();
  std::vector<GridRow> rows(n_cells);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    const std::size_t n_lambda = cfg.grid_lambdas.size();
    const std::size_t n_pct = cfg.grid_percentiles.size();
    while (true) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= n_cells) break;
      const std::size_t split_i = cell / (n_lambda * n_pct);
      const std::size_t lambda_i = (cell / n_pct) % n_lambda;
      const std::size_t pct_i = cell % n_pct;
      rows[cell] = run_grid_cell(cfg, segments, raw_feats, labels, int_labels, split_i,
                                 lambda_i, pct_i);
    }
  };

  const std::size_t n_workers = std::min(jobs, n_cells);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

// Rank: successful rows by test accuracy (descending), ties by cell order;
// failed cells sink to the bottom. Exact comparisons keep the order
// reproducible.
inline std::vector<GridRow> ranked(std::vector<GridRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.test_acc != b.test_acc) return a.test_acc > b.test_acc;
    return a.cell < b.cell;
  });
  return rows;
}

// Full-precision CSV; wall_s is timing-dependent and exempt from
// reproducibility comparisons.
inline std::string grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "split,lambda,threshold_pct,fold,val_acc,test_acc,test_f1,auc_healthy,auc_inner,"
        "auc_outer,wall_s\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.train_frac << ',' << r.lambda << ',' << r.threshold_pct << ',';
    if (r.ok) {
      os << r.best_fold << ',' << r.val_acc << ',' << r.test_acc << ',' << r.test_f1 << ','
         << r.auc[0] << ',' << r.auc[1] << ',' << r.auc[2] << ',';
    } else {
      os << "nan,nan,nan,nan,nan,nan,nan,";
    }
    os << r.wall_s << "\n";
  }
  return os.str();
}

}  // namespace bfkit::grid
