#include <cmath>
#include <vector>

#include "doctest.h"
#include "wran/encoders.hpp"
#include "wran/error.hpp"

using namespace wran;

namespace {

EncoderConfig sentence_config(Architecture arch, std::size_t channels = 4) {
  EncoderConfig e;
  e.arch = arch;
  e.word_dim = 3;
  e.pos_dim = 2;
  e.kernel = 3;
  e.channels = channels;
  e.max_len = 8;
  e.vocab_size = 20;
  e.dropout = 0.0;
  return e;
}

SentenceInstance sentence() {
  SentenceInstance s;
  s.tokens = {1, 2, 3, 4, 5, 6, 7};
  s.head = {1, 2};
  s.tail = {4, 5};
  s.relation = 1;
  return s;
}

}  // namespace

TEST_CASE("embedded rows are word_dim + 2 pos_dim wide") {
  EncoderConfig e = sentence_config(Architecture::kPcnn);
  e.word_dim = 300;
  e.pos_dim = 5;
  e.vocab_size = 10;
  CHECK(e.row_width() == 310);
  InstanceEncoder enc(e, "fs.");
  ParamStore ps;
  Rng rng(1);
  enc.init(ps, rng);
  Tape tape;
  const SentenceInstance s{{1, 2, 3}, {0, 1}, {2, 3}, 1};
  const Tensor& m = tape.value(enc.embed_sentence(tape, ps, s));
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 310);
}

TEST_CASE("position buckets center at zero and clip at max_len") {
  CHECK(position_bucket(0, 8) == 8);
  CHECK(position_bucket(3, 8) == 11);
  CHECK(position_bucket(-3, 8) == 5);
  CHECK(position_bucket(100, 8) == 16);
  CHECK(position_bucket(-100, 8) == 0);
  CHECK(position_bucket(8, 8) == 16);
}

TEST_CASE("cnn of an all-zero input with zero bias is the zero vector") {
  const EncoderConfig e = sentence_config(Architecture::kCnn);
  InstanceEncoder enc(e, "fs.");
  ParamStore ps;
  Rng rng(2);
  enc.init(ps, rng);
  Tape tape;
  Var x = tape.constant(Tensor::matrix(6, e.row_width(), 0.0));
  const Tensor& f = tape.value(enc.cnn_encode(tape, ps, x));
  CHECK(f.cols() == e.channels);
  for (double v : f.data()) CHECK(v == 0.0);
}

TEST_CASE("widths follow the channel count") {
  CHECK(sentence_config(Architecture::kCnn, 230).feature_width() == 230);
  CHECK(sentence_config(Architecture::kPcnn, 230).feature_width() == 690);
  for (std::size_t c : {1, 5, 16}) {
    CHECK(sentence_config(Architecture::kPcnn, c).feature_width() ==
          3 * sentence_config(Architecture::kCnn, c).feature_width());
  }
}

TEST_CASE("identity kernel over a one-hot sequence pools the hot value") {
  // One filter whose centre tap reads input column 0; relu keeps the value.
  EncoderConfig e = sentence_config(Architecture::kCnn, 1);
  e.activation = Activation::kRelu;
  e.word_dim = 1;
  e.pos_dim = 0;
  InstanceEncoder enc(e, "fs.");
  ParamStore ps;
  ps.add("fs.conv_w", Tensor({3, 1}, std::vector<double>{0.0, 1.0, 0.0}));
  ps.add("fs.conv_b", Tensor::matrix(1, 1, 0.0));
  const std::vector<double> seq = {0, 0, 0, 0.7, 0, 0};
  Tape tape;
  Var x = tape.constant(Tensor({seq.size(), 1}, seq));
  // Brute force: max over positions of the centre tap.
  double expect = 0.0;
  for (double v : seq) expect = std::max(expect, v);
  CHECK(tape.value(enc.cnn_encode(tape, ps, x)).item() == expect);
}

TEST_CASE("pcnn pools each segment separately") {
  EncoderConfig e = sentence_config(Architecture::kPcnn, 1);
  e.activation = Activation::kRelu;
  e.word_dim = 1;
  e.pos_dim = 0;
  InstanceEncoder enc(e, "fs.");
  ParamStore ps;
  ps.add("fs.conv_w", Tensor({3, 1}, std::vector<double>{0.0, 1.0, 0.0}));
  ps.add("fs.conv_b", Tensor::matrix(1, 1, 0.0));

  SUBCASE("conv output equal to the position index") {
    Tape tape;
    Var x = tape.constant(Tensor({7, 1}, std::vector<double>{0, 1, 2, 3, 4, 5, 6}));
    const Tensor& f = tape.value(enc.pcnn_encode(tape, ps, x, 2, 4));
    CHECK(f.cols() == 3);
    CHECK(f[0] == 2.0);
    CHECK(f[1] == 4.0);
    CHECK(f[2] == 6.0);
  }
  SUBCASE("constant conv output") {
    Tape tape;
    Var x = tape.constant(Tensor::matrix(7, 1, 0.25));
    const Tensor& f = tape.value(enc.pcnn_encode(tape, ps, x, 2, 4));
    for (double v : f.data()) CHECK(v == 0.25);
  }
}

TEST_CASE("triple encoder input width and identity hidden layer") {
  EncoderConfig e;
  e.arch = Architecture::kTriple;
  e.num_entities = 3;
  e.num_relations = 2;
  e.embed_dim = 2;
  e.hidden = 6;
  e.activation = Activation::kRelu;
  e.dropout = 0.0;
  InstanceEncoder enc(e, "fs.");
  ParamStore ps;
  ps.add("fs.entity", Tensor({3, 2}, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}));
  ps.add("fs.relation", Tensor({2, 2}, std::vector<double>{0.7, 0.8, 0.9, 1.0}));
  Tensor eye = Tensor::matrix(6, 6);
  for (std::size_t i = 0; i < 6; ++i) eye.at(i, i) = 1.0;
  ps.add("fs.hidden_w", eye);
  ps.add("fs.hidden_b", Tensor::matrix(1, 6));
  Tape tape;
  const Tensor& f = tape.value(enc.encode_triple(tape, ps, {2, 1, 0, std::nullopt, true}));
  // Oracle: concatenation [e_h, r, e_t].
  const std::vector<double> expect = {0.5, 0.6, 0.9, 1.0, 0.1, 0.2};
  REQUIRE(f.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(f[i] == expect[i]);

  SUBCASE("zero parameters give a zero feature") {
    ParamStore z;
    z.add("fs.entity", Tensor::matrix(3, 2));
    z.add("fs.relation", Tensor::matrix(2, 2));
    z.add("fs.hidden_w", Tensor::matrix(6, 6));
    z.add("fs.hidden_b", Tensor::matrix(1, 6));
    Tape t2;
    for (double v : t2.value(enc.encode_triple(t2, z, {0, 0, 1, std::nullopt, true})).data()) CHECK(v == 0.0);
  }
}

TEST_CASE("classifier outputs are probability vectors") {
  RelationClassifier c(4, 5, "c.");
  ParamStore ps;
  ps.add("c.w", Tensor::matrix(4, 5));
  ps.add("c.b", Tensor::matrix(1, 5));
  REQUIRE(c.param_names() == std::vector<std::string>{"c.w", "c.b"});
  Tensor f = Tensor::matrix(1, 4, 0.3);
  Tensor p = c.probabilities(ps, f);
  for (double v : p.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  ps.value("c.b") = Tensor::row({10, 0, 0, 0, 0});
  CHECK(c.probabilities(ps, f)[0] > 0.999);

  Rng rng(3);
  ParamStore r;
  c.init(r, rng);
  Tensor feats = Tensor::matrix(20, 4);
  for (double& v : feats.data()) v = rng.uniform(-3, 3);
  const Tensor probs = c.probabilities(r, feats);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (double v : probs.row_view(i)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("source loss edge cases") {
  RelationClassifier c(2, 4, "c.");
  ParamStore ps;
  ps.add("c.w", Tensor::matrix(2, 4));
  ps.add("c.b", Tensor::matrix(1, 4));
  Tensor f = Tensor::matrix(3, 2, 0.5);

  SUBCASE("uniform classifier gives ln K") {
    Tape tape;
    const std::vector<std::size_t> labels = {1, 2, 3};
    CHECK(tape.value(source_loss(tape, ps, c, tape.constant(f), labels)).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  SUBCASE("all-NA batch gives 0") {
    Tape tape;
    const std::vector<std::size_t> labels = {0, 0, 0};
    CHECK(tape.value(source_loss(tape, ps, c, tape.constant(f), labels)).item() == 0.0);
  }
  SUBCASE("a near-perfect classifier gives loss near 0") {
    ps.value("c.b") = Tensor::row({0, 60, 0, 0});
    Tape tape;
    const std::vector<std::size_t> labels = {1, 1, 1};
    CHECK(tape.value(source_loss(tape, ps, c, tape.constant(f), labels)).item() < 1e-20);
  }
}

TEST_CASE("source loss through the full encoder passes grad_check") {
  set_deterministic_mode(true);
  for (auto arch : {Architecture::kCnn, Architecture::kPcnn}) {
    const EncoderConfig e = sentence_config(arch);
    InstanceEncoder enc(e, "fs.");
    RelationClassifier c(e.feature_width(), 3, "c.");
    ParamStore ps;
    Rng rng(4);
    enc.init(ps, rng);
    c.init(ps, rng);
    std::vector<SentenceInstance> batch = {sentence(), sentence()};
    batch[1].tokens = {9, 8, 7, 6, 5, 4, 3};
    batch[1].relation = 2;
    const double err = grad_check(
        [&](Tape& tape, ParamStore& p) {
          Var f = enc.encode_batch(tape, p, std::span<const SentenceInstance>(batch));
          return source_loss(tape, p, c, f, labels_of(std::span<const SentenceInstance>(batch)));
        },
        ps, 1e-5);
    CHECK(err < 1e-4);
  }
  set_deterministic_mode(false);
}

TEST_CASE("source and target encoders do not alias") {
  const EncoderConfig e = sentence_config(Architecture::kPcnn);
  InstanceEncoder fs(e, "fs."), ft(e, "ft.");
  ParamStore ps;
  Rng rng(5);
  fs.init(ps, rng);
  ps.copy_prefix("fs.", "ft.");
  const std::vector<SentenceInstance> batch = {sentence()};
  const Tensor before = fs.features(ps, std::span<const SentenceInstance>(batch));
  for (const auto& n : ft.param_names())
    for (double& v : ps.value(n).data()) v += 0.5;
  CHECK(fs.features(ps, std::span<const SentenceInstance>(batch)) == before);
  CHECK(!(ft.features(ps, std::span<const SentenceInstance>(batch)) == before));
}

TEST_CASE("labels_of rejects unlabeled instances") {
  std::vector<SentenceInstance> batch = {sentence()};
  batch[0].relation.reset();
  CHECK_THROWS_AS(labels_of(std::span<const SentenceInstance>(batch)), ContractError);
  const std::vector<TripleInstance> triples = {{0, 0, 1, std::nullopt, true}, {1, 0, 0, std::nullopt, false}};
  CHECK(labels_of(std::span<const TripleInstance>(triples)) == std::vector<std::size_t>{1, 0});
}
