#include <cmath>
#include <vector>

#include "doctest.h"
#include "wran/adversary.hpp"
#include "wran/pipeline.hpp"

using namespace wran;

namespace {

// Discriminator on width-1 features whose logit equals `slope * x + shift`.
ParamStore linear_disc(double slope, double shift) {
  // hidden tanh is bypassed by a tiny first layer: tanh(eps x) / eps ~ x.
  const double eps = 1e-6;
  ParamStore ps;
  ps.add("d.w1", Tensor::matrix(1, 1, eps));
  ps.add("d.b1", Tensor::matrix(1, 1, 0.0));
  ps.add("d.w2", Tensor::matrix(1, 1, slope / eps));
  ps.add("d.b2", Tensor::matrix(1, 1, shift));
  return ps;
}

Tensor column(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n, 1}, std::move(v));
}

}  // namespace

TEST_CASE("zero discriminator outputs one half; logits clamp at 1e-7") {
  Discriminator d(1, "d.");
  ParamStore ps = linear_disc(0.0, 0.0);
  const double x = 0.3;
  CHECK(d.discriminate(ps, std::span(&x, 1)) == 0.5);
  ps.value("d.b2")[0] = 20.0;
  CHECK(d.discriminate(ps, std::span(&x, 1)) == 1.0 - kProbClamp);
  ps.value("d.b2")[0] = -20.0;
  CHECK(d.discriminate(ps, std::span(&x, 1)) == kProbClamp);
}

TEST_CASE("adv_loss hand evaluations") {
  SUBCASE("D = 0.5 everywhere, unit weights") {
    Tape tape;
    Var s = tape.constant(column({0.5, 0.5}));
    Var t = tape.constant(column({0.5, 0.5, 0.5}));
    CHECK(tape.value(adv_loss(tape, s, t)).item() == doctest::Approx(-std::log(4.0)).epsilon(1e-15));
  }
  SUBCASE("zero weights leave the target term") {
    Tape tape;
    Var s = tape.constant(column({0.9, 0.3}));
    Var t = tape.constant(column({0.2, 0.6}));
    const std::vector<double> w = {0.0, 0.0};
    const double target_term = 0.5 * (std::log(0.8) + std::log(0.4));
    CHECK(tape.value(adv_loss(tape, s, t, w)).item() == doctest::Approx(target_term).epsilon(1e-15));
  }
  SUBCASE("one source at D=0.8 with w=2, one target at D=0.8") {
    Tape tape;
    Var s = tape.constant(column({0.8}));
    Var t = tape.constant(column({0.8}));
    const std::vector<double> w = {2.0};
    CHECK(tape.value(adv_loss(tape, s, t, w)).item() ==
          doctest::Approx(2.0 * std::log(0.8) + std::log(0.2)).epsilon(1e-15));
  }
}

TEST_CASE("adv_loss batch form matches the tape form") {
  Discriminator d(3, "d.");
  ParamStore ps;
  Rng rng(7);
  d.init(ps, rng);
  AdvBatch b;
  b.source_features = Tensor::matrix(4, 3);
  b.target_features = Tensor::matrix(5, 3);
  for (double& v : b.source_features.data()) v = rng.uniform(-1, 1);
  for (double& v : b.target_features.data()) v = rng.uniform(-1, 1);
  b.source_weights = std::vector<double>{0.5, 1.5, 1.0, 1.0};
  Tape tape;
  Var l = adv_loss(tape, ps, d, tape.constant(b.source_features), tape.constant(b.target_features),
                   *b.source_weights);
  CHECK(adv_loss(ps, d, b) == tape.value(l).item());
}

TEST_CASE("mirrored batches swap the roles of the two terms") {
  // With D = sigmoid(x), mirroring the features (x -> -x) and swapping the
  // domains maps log D(s) to log(1 - D(t)) term by term.
  Discriminator d(1, "d.");
  ParamStore ps = linear_disc(1.0, 0.0);
  const Tensor a = column({0.4, -1.2, 2.0});
  const Tensor b = column({1.1, 0.3, -0.7});
  Tensor ma = a, mb = b;
  for (double& v : ma.data()) v = -v;
  for (double& v : mb.data()) v = -v;
  const double l1 = adv_loss(ps, d, {a, b, std::nullopt});
  const double l2 = adv_loss(ps, d, {mb, ma, std::nullopt});
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-9));
}

TEST_CASE("gradient ascent on D increases adv_loss on a separable batch") {
  Discriminator d(2, "d.");
  ParamStore ps;
  Rng rng(8);
  d.init(ps, rng);
  Tensor src = Tensor::matrix(10, 2), tgt = Tensor::matrix(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    src.at(i, 0) = 1.0 + 0.1 * rng.normal();
    src.at(i, 1) = rng.normal();
    tgt.at(i, 0) = -1.0 + 0.1 * rng.normal();
    tgt.at(i, 1) = rng.normal();
  }
  double prev = adv_loss(ps, d, {src, tgt, std::nullopt});
  for (int step = 0; step < 50; ++step) {
    ps.zero_grad();
    Tape tape;
    tape.backward(adv_loss(tape, ps, d, tape.constant(src), tape.constant(tgt)));
    for (const auto& n : d.param_names()) {
      auto& e = ps.entry(n);
      for (std::size_t k = 0; k < e.value.size(); ++k) e.value[k] += 0.01 * e.grad[k];
    }
    const double now = adv_loss(ps, d, {src, tgt, std::nullopt});
    CHECK(now > prev);
    prev = now;
  }
}

TEST_CASE("weighted adversarial loss passes grad_check for D and the encoder") {
  set_deterministic_mode(true);
  Discriminator d(3, "d.");
  ParamStore ps;
  Rng rng(9);
  d.init(ps, rng);
  ps.add_uniform("enc.w", {2, 3}, 0.8, rng);
  Tensor xs = Tensor::matrix(4, 2), xt = Tensor::matrix(3, 2);
  for (double& v : xs.data()) v = rng.uniform(-1, 1);
  for (double& v : xt.data()) v = rng.uniform(-1, 1);
  const std::vector<double> w = {0.4, 1.6, 0.8, 1.2};
  const double err = grad_check(
      [&](Tape& tape, ParamStore& p) {
        Var enc = tape.param(p, "enc.w");
        Var fs = tape.tanh(tape.matmul(tape.constant(xs), enc));
        Var ft = tape.grl(tape.tanh(tape.matmul(tape.constant(xt), enc)), 1.0);
        return adv_loss(tape, p, d, fs, ft, w);
      },
      ps, 1e-5);
  // Behind the GRL the analytic encoder gradient is the negated finite difference.
  const double err_d = grad_check(
      [&](Tape& tape, ParamStore& p) {
        Var enc = tape.param(p, "enc.w");
        Var fs = tape.tanh(tape.matmul(tape.constant(xs), enc));
        Var ft = tape.tanh(tape.matmul(tape.constant(xt), enc));
        return adv_loss(tape, p, d, fs, ft, w);
      },
      ps, 1e-5);
  CHECK(err_d < 1e-4);
  CHECK(err == doctest::Approx(1.0).epsilon(1e-6));
  set_deterministic_mode(false);
}

TEST_CASE("grl_wrap forward identity, backward -lambda") {
  for (double lambda : {0.0, 0.046212, 0.1}) {
    ParamStore ps;
    ps.add("x", Tensor::row({1, 2, 3}));
    Tape tape;
    Var y = grl_wrap(tape, tape.param(ps, "x"), lambda);
    CHECK(tape.value(y) == Tensor::row({1, 2, 3}));
    tape.backward(y, Tensor::row({1, 1, 1}));
    for (double g : ps.grad("x").data()) CHECK(g == -lambda * 1.0);
  }
}

TEST_CASE("one combined step moves D and the features in opposite directions") {
  // D descends -adv_loss and so raises it; the GRL turns the same backward
  // pass into a step that lowers it for the target features.
  Discriminator d(1, "d.");
  ParamStore ps;
  Rng rng(10);
  d.init(ps, rng);
  ps.add("ft", column({0.5, -0.2}));
  const Tensor src = column({1.0, 0.8});
  auto loss = [&](ParamStore& p) {
    return adv_loss(p, d, {src, p.value("ft"), std::nullopt});
  };
  Tape tape;
  Var ft = tape.grl(tape.param(ps, "ft"), 1.0);
  Var l = adv_loss(tape, ps, d, tape.constant(src), ft);
  tape.backward(tape.scale(l, -1.0));
  const double before = loss(ps);

  ParamStore d_step = ps;
  for (const auto& n : d.param_names())
    for (std::size_t k = 0; k < d_step.value(n).size(); ++k) d_step.value(n)[k] -= 1e-4 * ps.grad(n)[k];
  CHECK(loss(d_step) > before);

  ParamStore f_step = ps;
  for (std::size_t k = 0; k < 2; ++k) f_step.value("ft")[k] -= 1e-3 * ps.grad("ft")[k];
  CHECK(loss(f_step) < before);
}
