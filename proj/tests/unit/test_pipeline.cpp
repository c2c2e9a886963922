#include <cmath>
#include <sstream>

#include "doctest.h"
#include "wran/datagen.hpp"
#include "wran/error.hpp"
#include "wran/evalkit.hpp"
#include "wran/pipeline.hpp"

using namespace wran;

namespace {

EncoderConfig tiny_pcnn(const CorpusSpec& s) {
  EncoderConfig e;
  e.arch = Architecture::kPcnn;
  e.word_dim = 8;
  e.pos_dim = 2;
  e.channels = 6;
  e.max_len = s.max_len;
  e.vocab_size = s.vocab_size;
  e.dropout = 0.1;
  return e;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.learning_rate = 3e-3;
  t.target_lr = 2e-4;
  t.batch_size = 32;
  t.epochs_source = 3;
  t.epochs_weights = 2;
  t.epochs_adapt = 2;
  t.dropout = 0.1;
  t.sm_coeff = 0.1;
  return t;
}

struct Task {
  CorpusSpec spec;
  Corpus corpus;
};

Task small_task(std::vector<std::size_t> outliers = {}) {
  Task t;
  t.spec.num_relations = 4;
  t.spec.outlier_relations = std::move(outliers);
  t.spec.source_samples = 40;
  t.spec.target_samples = 40;
  t.corpus = gen_corpus(t.spec);
  return t;
}

double accuracy(const Tensor& probs, std::span<const SentenceInstance> data) {
  const auto gold = labels_of(data);
  std::size_t ok = 0;
  for (const auto& p : make_predictions(probs, gold)) ok += p.predicted == p.gold;
  return static_cast<double>(ok) / static_cast<double>(gold.size());
}

}  // namespace

TEST_CASE("schedule phi") {
  CHECK(schedule_phi(0.0, 0.1, 1.0) == 0.0);
  // Closed form evaluated at 30 digits: 0.0462117157260009758...
  CHECK(std::abs(schedule_phi(1.0, 0.1, 1.0) - 0.0462117157260009758) <= 1e-9);
  CHECK(schedule_phi(1.0, 0.1, 60.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_AS(schedule_phi(1.5, 0.1, 1.0), ContractError);
}

TEST_CASE("NA masking") {
  const std::vector<double> losses = {0.5, 1.5, 2.0, 4.0};
  auto run = [&](std::vector<std::size_t> labels) {
    Tape tape;
    Var l = tape.constant(Tensor({4, 1}, losses));
    return tape.value(masked_mean(tape, l, labels)).item();
  };
  CHECK(run({0, 0, 0, 0}) == 0.0);
  CHECK(run({1, 2, 3, 1}) == 2.0);
  // Oracle: delete the NA rows and average the rest.
  CHECK(run({1, 0, 2, 0}) == (0.5 + 2.0) / 2.0);

  Tape tape;
  ParamStore ps;
  ps.add("l", Tensor({4, 1}, losses));
  const std::vector<std::size_t> labels = {1, 0, 2, 0};
  Var masked = mask_na_loss(tape, tape.param(ps, "l"), labels);
  CHECK(tape.value(masked) == Tensor({4, 1}, std::vector<double>{0.5, 0, 2.0, 0}));
  tape.backward(tape.sum(masked));
  CHECK(ps.grad("l") == Tensor({4, 1}, std::vector<double>{1, 0, 1, 0}));
}

TEST_CASE("adam first step moves each entry by the learning rate") {
  ParamStore ps;
  ps.add("w", Tensor::row({1.0, -2.0, 0.5}));
  ps.grad("w") = Tensor::row({0.3, -4.0, 0.0});
  Adam adam(0.01);
  const std::vector<std::string> names = {"w"};
  adam.step(ps, names);
  CHECK(ps.value("w")[0] == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(ps.value("w")[1] == doctest::Approx(-1.99).epsilon(1e-9));
  CHECK(ps.value("w")[2] == 0.5);
}

TEST_CASE("stage 1 learns a separable two-relation toy set") {
  CorpusSpec s;
  s.num_relations = 2;
  s.source_samples = 100;
  const Corpus c = gen_corpus(s);
  TrainConfig cfg = quick_train();
  cfg.epochs_source = 30;
  Trainer<SentenceInstance> t(tiny_pcnn(s), 3, cfg);
  const double acc = t.stage1_pretrain_source(c.source);
  CHECK(acc > 0.95);
  CHECK(accuracy(t.predict_source_only(c.source), c.source) > 0.95);

  SUBCASE("zero epochs is near chance") {
    TrainConfig z = cfg;
    z.epochs_source = 0;
    Trainer<SentenceInstance> u(tiny_pcnn(s), 3, z);
    u.stage1_pretrain_source(c.source);
    CHECK(accuracy(u.predict_source_only(c.source), c.source) < 0.8);
  }
}

TEST_CASE("stages run in order and leave F_s and C untouched") {
  const Task task = small_task({2});
  const auto split = split_instances(std::span<const SentenceInstance>(task.corpus.target), 0.5, 3);
  Trainer<SentenceInstance> t(tiny_pcnn(task.spec), 5, quick_train());
  CHECK_THROWS_AS(t.stage2_relation_weights(split.first), ContractError);
  CHECK_THROWS_AS(t.stage4_adversarial_adapt(task.corpus.source, split.first), ContractError);

  t.stage1_pretrain_source(task.corpus.source);
  const Tensor probe = t.predict_source_only(split.second);
  CHECK_THROWS_AS(t.stage3_instance_weights(task.corpus.source, split.first), ContractError);
  CHECK_THROWS_AS(t.predict(split.second), ContractError);

  const auto& rel = t.stage2_relation_weights(split.first);
  double sum = 0.0;
  for (double v : rel) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  const WeightTable& table = t.stage3_instance_weights(task.corpus.source, split.first);
  CHECK(table.frozen());
  CHECK(table.instance_weights().size() == task.corpus.source.size());
  CHECK_THROWS_AS(t.state().weights.set_alpha(0.2), ContractError);
  double mean = 0.0;
  for (double v : table.total_weights()) mean += v;
  CHECK(std::abs(mean / static_cast<double>(table.total_weights().size()) - 1.0) <= 1e-12);

  CHECK_THROWS_AS(t.fine_tune(split.second), ContractError);
  t.stage4_adversarial_adapt(task.corpus.source, split.first);
  CHECK(t.predict_source_only(split.second) == probe);

  const auto& lambdas = t.state().lambdas;
  REQUIRE(!lambdas.empty());
  CHECK(lambdas.front() == 0.0);
  for (std::size_t i = 1; i < lambdas.size(); ++i) CHECK(lambdas[i] >= lambdas[i - 1]);
  for (double l : lambdas) CHECK(l <= quick_train().u);

  t.fine_tune(split.second);
  CHECK(t.state().has_target_head);
  CHECK(t.predict(split.second).rows() == split.second.size());
}

TEST_CASE("the pipeline is deterministic for a fixed seed") {
  const Task task = small_task();
  auto run = [&]() {
    Trainer<SentenceInstance> t(tiny_pcnn(task.spec), 5, quick_train());
    t.stage1_pretrain_source(task.corpus.source);
    t.stage2_relation_weights(task.corpus.target);
    t.stage3_instance_weights(task.corpus.source, task.corpus.target);
    t.stage4_adversarial_adapt(task.corpus.source, task.corpus.target);
    return t.predict(task.corpus.target);
  };
  CHECK(run() == run());
}

TEST_CASE("stage 3 on identical domains keeps instance weights near one half") {
  CorpusSpec s;
  s.num_relations = 4;
  s.source_samples = 60;
  const Corpus c = gen_corpus(s);
  const auto halves = split_instances(std::span<const SentenceInstance>(c.source), 0.5, 11);
  Trainer<SentenceInstance> t(tiny_pcnn(s), 5, quick_train());
  t.stage1_pretrain_source(halves.first);
  t.stage2_relation_weights(halves.second);
  const auto& w = t.stage3_instance_weights(halves.first, halves.second).instance_weights();
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  CHECK(mean >= 0.4);
  CHECK(mean <= 0.6);
}

TEST_CASE("planted outlier instances weigh less than the batch mean") {
  Task task = small_task({2});
  TrainConfig cfg = quick_train();
  cfg.epochs_weights = 10;
  Trainer<SentenceInstance> t(tiny_pcnn(task.spec), 5, cfg);
  t.stage1_pretrain_source(task.corpus.source);
  t.stage2_relation_weights(task.corpus.target);
  const WeightTable& table = t.stage3_instance_weights(task.corpus.source, task.corpus.target);
  double all = 0.0, outlier = 0.0;
  std::size_t n_out = 0;
  for (std::size_t i = 0; i < task.corpus.source.size(); ++i) {
    all += table.total_weights()[i];
    if (*task.corpus.source[i].relation == 2) {
      outlier += table.total_weights()[i];
      ++n_out;
    }
  }
  CHECK(outlier / static_cast<double>(n_out) < all / static_cast<double>(task.corpus.source.size()));
  const auto& rel = table.relation_weights();
  CHECK(rel[2] < rel[1]);
  CHECK(rel[2] < rel[3]);
}

TEST_CASE("checkpoint round trip and restore contracts") {
  const Task task = small_task();
  Trainer<SentenceInstance> t(tiny_pcnn(task.spec), 5, quick_train());
  t.stage1_pretrain_source(task.corpus.source);

  std::stringstream ss;
  write_params(ss, t.state().params);
  const ParamStore back = read_params(ss);
  CHECK(back == t.state().params);

  std::stringstream bad("NOTACKPT");
  CHECK_THROWS_AS(read_params(bad), Error);

  TrainState s = t.state();
  s.params = back;
  Trainer<SentenceInstance> r(tiny_pcnn(task.spec), 5, quick_train());
  r.restore(s);
  CHECK(r.predict_source_only(task.corpus.target) == t.predict_source_only(task.corpus.target));

  TrainState early = t.state();
  early.stage = Stage::kInstanceWeights;
  Trainer<SentenceInstance> q(tiny_pcnn(task.spec), 5, quick_train());
  CHECK_THROWS_AS(q.restore(early), ContractError);
}

TEST_CASE("train config validation and round trip") {
  TrainConfig t = quick_train();
  t.zeta = 0.123456789;
  const TrainConfig back = TrainConfig::from_keyvalues(t.to_keyvalues());
  CHECK(back.to_keyvalues().entries() == t.to_keyvalues().entries());
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ContractError);
}
