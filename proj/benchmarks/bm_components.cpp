#include <benchmark/benchmark.h>

#include "wran/adversary.hpp"
#include "wran/datagen.hpp"
#include "wran/encoders.hpp"
#include "wran/evalkit.hpp"
#include "wran/theory_oracle.hpp"
#include "wran/weighting.hpp"

using namespace wran;

static void BM_PcnnEncodeBatch(benchmark::State& state) {
  CorpusSpec spec;
  spec.source_samples = 8;
  const Corpus c = gen_corpus(spec);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<SentenceInstance> batch(c.source.begin(), c.source.begin() + n);
  EncoderConfig e;
  e.arch = Architecture::kPcnn;
  e.word_dim = 16;
  e.channels = 16;
  e.max_len = spec.max_len;
  e.vocab_size = spec.vocab_size;
  InstanceEncoder enc(e, "fs.");
  RelationClassifier cls(e.feature_width(), spec.num_relations + 1, "c.");
  ParamStore ps;
  Rng rng(1);
  enc.init(ps, rng);
  cls.init(ps, rng);
  const auto labels = labels_of(std::span<const SentenceInstance>(batch));
  for (auto _ : state) {
    Tape tape;
    Var f = enc.encode_batch(tape, ps, std::span<const SentenceInstance>(batch));
    tape.backward(source_loss(tape, ps, cls, f, labels));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_PcnnEncodeBatch)->Arg(8)->Arg(32);

static void BM_WeightedAdvLoss(benchmark::State& state) {
  const std::size_t n = 32, width = 48;
  Discriminator d(width, "d.");
  ParamStore ps;
  Rng rng(2);
  d.init(ps, rng);
  Tensor s = Tensor::matrix(n, width), t = Tensor::matrix(n, width);
  for (double& v : s.data()) v = rng.uniform(-1, 1);
  for (double& v : t.data()) v = rng.uniform(-1, 1);
  const std::vector<double> w(n, 1.0);
  for (auto _ : state) {
    Tape tape;
    tape.backward(adv_loss(tape, ps, d, tape.constant(s), tape.grl(tape.input(t, true), 0.1), w));
  }
}
BENCHMARK(BM_WeightedAdvLoss);

static void BM_TotalWeights(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> inst(n), rel(9, 1.0 / 9.0);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst[i] = rng.uniform();
    labels[i] = rng.below(9);
  }
  for (auto _ : state) benchmark::DoNotOptimize(total_weights(0.4, inst, rel, labels));
}
BENCHMARK(BM_TotalWeights)->Arg(2000);

static void BM_MinimaxQuadrature(benchmark::State& state) {
  const Grid g;
  const Density1D ps = Density1D::gaussian(-1.0, 1.0), pt = Density1D::gaussian(1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(minimax_value(WeightField::constant(), ps, pt, g));
}
BENCHMARK(BM_MinimaxQuadrature);

static void BM_FilteredRanking(benchmark::State& state) {
  const std::size_t entities = 50, queries = 200;
  Rng rng(4);
  std::vector<RankingQuery> q(queries);
  for (auto& r : q) {
    std::vector<double> scores(entities);
    for (double& s : scores) s = rng.uniform();
    r.ranked = rank_candidates(scores);
    r.gold = rng.below(entities);
  }
  const std::vector<std::size_t> ns = {1, 3, 10};
  for (auto _ : state) benchmark::DoNotOptimize(mrr_mr_hits(q, ns));
}
BENCHMARK(BM_FilteredRanking);

BENCHMARK_MAIN();
