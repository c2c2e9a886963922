#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wran/tensor.hpp"

namespace wran {

struct Prediction {
  std::size_t predicted = 0;
  double confidence = 0.0;
  std::size_t gold = 0;
};

// predicted = argmax (lowest index on ties); confidence = max non-NA
// probability. With `non_na_only` the prediction is the best non-NA class,
// which is the held-out ranking convention.
std::vector<Prediction> make_predictions(const Tensor& probs, std::span<const std::size_t> gold,
                                         bool non_na_only = false);

// Non-NA predictions sorted by confidence (stable), fraction correct in the
// top k. Throws ContractError when fewer than k non-NA predictions exist.
double precision_at_k(std::span<const Prediction> preds, std::size_t k);

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};
// Micro-averaged over non-NA classes when exclude_na, else over all classes.
// Zero denominators give 0.
F1Score f1_micro(std::span<const Prediction> preds, bool exclude_na = true);

// Fraction of binary decisions (score >= 0.5 means positive) matching 0/1 labels.
double triple_accuracy(std::span<const double> scores, std::span<const std::size_t> labels);

// Candidate ids in descending score order, stable on ties.
std::vector<std::size_t> rank_candidates(std::span<const double> scores);

struct RankingQuery {
  std::vector<std::size_t> ranked;      // candidate ids, best first
  std::size_t gold = 0;
  std::vector<std::size_t> known_true;  // removed ahead of the gold in the filtered setting
};

struct RankingMetrics {
  double mrr = 0.0;
  double mr = 0.0;
  std::vector<std::pair<std::size_t, double>> hits;  // (N, Hits@N)
};

// Throws ContractError when a query's gold is missing or the set is empty.
RankingMetrics mrr_mr_hits(std::span<const RankingQuery> queries, std::span<const std::size_t> ns,
                           bool filtered = true);
std::size_t gold_rank(const RankingQuery& q, bool filtered);

// (recall, precision) after each non-NA prediction in confidence order.
// Recall is relative to the number of non-NA gold labels.
std::vector<std::pair<double, double>> pr_curve(std::span<const Prediction> preds);

struct Metric {
  std::string name;
  double value;
};
// "metric,<name>,<value>" per line, values in shortest round-trip form.
void write_metrics(std::ostream& out, std::span<const Metric> metrics);
void write_pr_curve(std::ostream& out, std::span<const std::pair<double, double>> curve);

}  // namespace wran
