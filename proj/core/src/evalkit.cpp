#include "wran/evalkit.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "wran/encoders.hpp"
#include "wran/error.hpp"
#include "wran/format.hpp"

namespace wran {

std::vector<Prediction> make_predictions(const Tensor& probs, std::span<const std::size_t> gold,
                                         bool non_na_only) {
  if (probs.rows() != gold.size()) throw ShapeError("probabilities and gold labels differ in length");
  const std::size_t k = probs.cols();
  std::vector<Prediction> out;
  out.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto row = probs.row_view(i);
    std::size_t best = non_na_only && k > 1 ? 1 : 0;
    for (std::size_t c = best + 1; c < k; ++c)
      if (row[c] > row[best]) best = c;
    double conf = k > 1 ? *std::max_element(row.begin() + 1, row.end()) : row[0];
    out.push_back({best, conf, gold[i]});
  }
  return out;
}

double precision_at_k(std::span<const Prediction> preds, std::size_t k) {
  std::vector<const Prediction*> ranked;
  for (const auto& p : preds)
    if (p.predicted != kNaRelation) ranked.push_back(&p);
  if (k == 0 || ranked.size() < k)
    throw ContractError("precision_at_k needs at least k = " + std::to_string(k) + " non-NA predictions");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Prediction* a, const Prediction* b) { return a->confidence > b->confidence; });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < k; ++i) correct += ranked[i]->predicted == ranked[i]->gold;
  return static_cast<double>(correct) / static_cast<double>(k);
}

F1Score f1_micro(std::span<const Prediction> preds, bool exclude_na) {
  if (preds.empty()) throw ContractError("f1_micro on an empty prediction set");
  F1Score s;
  for (const auto& p : preds) {
    const bool pred_counts = !exclude_na || p.predicted != kNaRelation;
    const bool gold_counts = !exclude_na || p.gold != kNaRelation;
    if (p.predicted == p.gold) {
      if (gold_counts) ++s.tp;
    } else {
      if (pred_counts) ++s.fp;
      if (gold_counts) ++s.fn;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  s.precision = ratio(s.tp, s.tp + s.fp);
  s.recall = ratio(s.tp, s.tp + s.fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double triple_accuracy(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= 0.5) == (labels[i] != 0);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<std::size_t> rank_candidates(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::size_t gold_rank(const RankingQuery& q, bool filtered) {
  std::size_t rank = 1;
  for (std::size_t c : q.ranked) {
    if (c == q.gold) return rank;
    if (filtered && std::find(q.known_true.begin(), q.known_true.end(), c) != q.known_true.end()) continue;
    ++rank;
  }
  throw ContractError("gold candidate " + std::to_string(q.gold) + " missing from ranking");
}

RankingMetrics mrr_mr_hits(std::span<const RankingQuery> queries, std::span<const std::size_t> ns,
                           bool filtered) {
  if (queries.empty()) throw ContractError("mrr_mr_hits on an empty ranking set");
  RankingMetrics m;
  std::vector<std::size_t> hit(ns.size(), 0);
  for (const auto& q : queries) {
    const std::size_t r = gold_rank(q, filtered);
    m.mrr += 1.0 / static_cast<double>(r);
    m.mr += static_cast<double>(r);
    for (std::size_t j = 0; j < ns.size(); ++j) hit[j] += r <= ns[j];
  }
  const auto n = static_cast<double>(queries.size());
  m.mrr /= n;
  m.mr /= n;
  for (std::size_t j = 0; j < ns.size(); ++j) m.hits.emplace_back(ns[j], static_cast<double>(hit[j]) / n);
  return m;
}

std::vector<std::pair<double, double>> pr_curve(std::span<const Prediction> preds) {
  std::vector<const Prediction*> ranked;
  std::size_t positives = 0;
  for (const auto& p : preds) {
    positives += p.gold != kNaRelation;
    if (p.predicted != kNaRelation) ranked.push_back(&p);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Prediction* a, const Prediction* b) { return a->confidence > b->confidence; });
  std::vector<std::pair<double, double>> curve;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    correct += ranked[i]->predicted == ranked[i]->gold;
    const double recall = positives ? static_cast<double>(correct) / static_cast<double>(positives) : 0.0;
    curve.emplace_back(recall, static_cast<double>(correct) / static_cast<double>(i + 1));
  }
  return curve;
}

void write_metrics(std::ostream& out, std::span<const Metric> metrics) {
  for (const auto& m : metrics) out << "metric," << m.name << ',' << format_real(m.value) << '\n';
}

void write_pr_curve(std::ostream& out, std::span<const std::pair<double, double>> curve) {
  out << "recall,precision\n";
  for (const auto& [r, p] : curve) out << format_real(r) << ',' << format_real(p) << '\n';
}

}  // namespace wran
