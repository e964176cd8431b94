// Classification metrics: confusion matrix, one-vs-rest precision/recall/F1,
// rank-based ROC AUC.
#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/dataio.hpp"

namespace bfkit::eval {

// Rows are true classes, columns predicted.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::size_t n_classes = dataio::kNumClasses)
      : counts(n_classes, std::vector<std::size_t>(n_classes, 0)) {}

  std::size_t n_classes() const { return counts.size(); }

  void add(std::size_t truth, std::size_t predicted) {
    if (truth >= n_classes() || predicted >= n_classes())
      throw DataError("confusion matrix: class index out of range");
    counts[truth][predicted]++;
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
  }

  std::size_t correct() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_classes(); ++i) t += counts[i][i];
    return t;
  }
};

struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero; affected metric is 0
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  bool any_degenerate = false;
};

// One-vs-rest metrics per class plus unweighted macro averages.
inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw DataError("compute_metrics: empty confusion matrix");
  const std::size_t n = cm.n_classes();

  MetricsReport rep;
  rep.accuracy = static_cast<double>(cm.correct()) / static_cast<double>(total);
  rep.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    ClassMetrics& m = rep.per_class[c];
    m.tp = cm.counts[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c) {
        m.fn += cm.counts[c][j];
        m.fp += cm.counts[j][c];
      }
    }
    m.tn = total - m.tp - m.fp - m.fn;
    if (m.tp + m.fp > 0)
      m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    else
      m.degenerate = true;
    if (m.tp + m.fn > 0)
      m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    else
      m.degenerate = true;
    if (m.precision + m.recall > 0.0)
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
      m.degenerate = true;
    rep.macro_precision += m.precision;
    rep.macro_recall += m.recall;
    rep.macro_f1 += m.f1;
    rep.any_degenerate = rep.any_degenerate || m.degenerate;
  }
  rep.macro_precision /= static_cast<double>(n);
  rep.macro_recall /= static_cast<double>(n);
  rep.macro_f1 /= static_cast<double>(n);
  return rep;
}

// Binary AUC via the rank-sum (Mann-Whitney) statistic; ties get averaged
// ranks, which matches trapezoidal integration of the ROC curve.
inline double roc_auc_binary(const std::vector<double>& scores,
                             const std::vector<bool>& is_positive) {
  if (scores.size() != is_positive.size())
    throw ShapeError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool b : is_positive) n_pos += b ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("roc_auc: need both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
    for (std::size_t k = i; k < j; ++k)
      if (is_positive[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Per-class one-vs-rest AUC from class probability rows.
inline std::vector<double> roc_auc(const std::vector<std::vector<double>>& probabilities,
                                   const std::vector<int>& labels) {
  if (probabilities.size() != labels.size())
    throw ShapeError("roc_auc: probabilities and labels differ in length");
  if (probabilities.empty()) throw DataError("roc_auc: empty input");
  const std::size_t n_classes = probabilities.front().size();
  std::vector<double> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> scores(probabilities.size());
    std::vector<bool> pos(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
      if (probabilities[i].size() != n_classes)
        throw ShapeError("roc_auc: ragged probability rows");
      scores[i] = probabilities[i][c];
      pos[i] = labels[i] == static_cast<int>(c);
    }
    out[c] = roc_auc_binary(scores, pos);
  }
  return out;
}

}  // namespace bfkit::eval
