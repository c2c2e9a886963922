#include <cmath>
#include <sstream>

#include "doctest.h"
#include "wran/error.hpp"
#include "wran/theory_oracle.hpp"

using namespace wran;

// Reference values below were computed once with mpmath adaptive quadrature
// over the whole real line at 20+ digits and frozen here.
namespace oracle {
constexpr double kJsUnitGaussiansDistance2 = 0.3368308203468316120;
constexpr double kJsTilted = 0.0477121266716774;  // w = 1 + tanh(x)/2, N(0,1) vs N(0.5,1.5)
constexpr double kMinimaxTilted = -1.290870107776536;
constexpr double kMinimaxUniformGaussian = -1.1319952709568161;  // U(-1,1) vs N(0,1)
constexpr double kMinimaxMixture = -1.3032046664809091;  // .3 N(-2,.5) + .7 N(1,1) vs N(0,1.5)
}  // namespace oracle

namespace {

WeightField tilt() {
  return WeightField([](double x) { return 1.0 + 0.5 * std::tanh(x); });
}

Density1D mixture() {
  return Density1D::mixture({{0.3, Density1D::gaussian(-2.0, 0.5)}, {0.7, Density1D::gaussian(1.0, 1.0)}});
}

}  // namespace

TEST_CASE("densities integrate to one on the default grid") {
  const Grid g;
  for (const auto& d : {Density1D::gaussian(0.0, 1.0), Density1D::gaussian(3.0, 0.4),
                        Density1D::uniform(-1.0, 1.0), Density1D::uniform(-2.5, 0.5), mixture()}) {
    CHECK(std::abs(simpson(d.function(), g) - 1.0) <= 1e-6);
  }
  CHECK(Density1D::uniform(-1, 1).pdf(1.0) == 0.25);
  CHECK(Density1D::uniform(-1, 1).pdf(0.0) == 0.5);
  CHECK_THROWS_AS(Density1D::gaussian(0.0, 0.0), ContractError);
  CHECK_THROWS_AS(Density1D::uniform(1.0, 1.0), ContractError);
  CHECK_THROWS_AS((Grid{0.0, 1.0, 4}.validate()), ContractError);
}

TEST_CASE("sampling follows the density") {
  Rng rng(1);
  const Density1D m = mixture();
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += m.sample(rng);
  CHECK(mean / n == doctest::Approx(0.3 * -2.0 + 0.7 * 1.0).epsilon(0.05));
  const Density1D u = Density1D::uniform(2.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u.sample(rng);
    CHECK(x >= 2.0);
    CHECK(x < 3.0);
  }
}

TEST_CASE("optimal discriminator") {
  const Density1D n = Density1D::gaussian(0.0, 1.0);
  CHECK(optimal_discriminator(WeightField::constant(), n, n, 0.7) == 0.5);
  const WeightField three = WeightField::constant(3.0);
  CHECK(optimal_discriminator(three, n, n, -0.3) == 0.75);
  const Density1D far = Density1D::uniform(5.0, 6.0);
  CHECK(optimal_discriminator(WeightField::constant(), n, far, 0.0) == 1.0);
  CHECK_THROWS_AS(optimal_discriminator(WeightField::constant(), far, far, 0.0), ContractError);
}

TEST_CASE("weight fields normalize against the source density") {
  const Grid g;
  const Density1D ps = Density1D::gaussian(0.0, 1.0);
  const WeightField w = WeightField([](double x) { return std::exp(-x * x); });
  CHECK(std::abs(w.normalized(ps, g).mass(ps, g) - 1.0) <= 1e-12);
  CHECK(std::abs(tilt().mass(ps, g) - 1.0) <= 1e-12);  // tanh is odd
  const WeightField neg([](double) { return -1.0; });
  CHECK_THROWS_AS(neg(0.0), ContractError);
}

TEST_CASE("Jensen-Shannon divergence") {
  const Grid g;
  const Density1D a = Density1D::gaussian(-1.0, 1.0), b = Density1D::gaussian(1.0, 1.0);
  CHECK(js_divergence(a, a, g) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(js_divergence(a, b, g) - oracle::kJsUnitGaussiansDistance2) <= 1e-9);
  CHECK(std::abs(js_divergence(Density1D::uniform(-3, -1), Density1D::uniform(1, 3), g) - std::log(2.0)) <= 1e-12);

  const Density1D ps = Density1D::gaussian(0.0, 1.0), pt = Density1D::gaussian(0.5, 1.5);
  const WeightField w = tilt();
  CHECK(std::abs(js_divergence([&](double x) { return w(x) * ps.pdf(x); }, pt.function(), g) -
                 oracle::kJsTilted) <= 1e-9);

  SUBCASE("too little mass on the grid") {
    const Density1D wide = Density1D::gaussian(0.0, 4.0);
    CHECK_THROWS_AS(js_divergence(wide, a, g), ContractError);
  }
}

TEST_CASE("minimax value equals -log 4 + 2 JS") {
  const Grid g;
  struct Case {
    WeightField w;
    Density1D ps, pt;
  };
  const Density1D n01 = Density1D::gaussian(0.0, 1.0);
  const std::vector<Case> cases = {
      {WeightField::constant(), n01, n01},
      {WeightField::constant(), Density1D::gaussian(-1.0, 1.0), Density1D::gaussian(1.0, 1.0)},
      {tilt(), n01, Density1D::gaussian(0.5, 1.5)},
      {WeightField::constant(), Density1D::uniform(-1.0, 1.0), n01},
      {WeightField::constant(), mixture(), Density1D::gaussian(0.0, 1.5)},
      {WeightField::constant(), Density1D::uniform(-3.0, -1.0), Density1D::uniform(1.0, 3.0)},
  };
  for (const auto& c : cases) {
    const WeightField w = c.w.normalized(c.ps, g);
    CHECK(std::abs(minimax_value(w, c.ps, c.pt, g) - minimax_identity(w, c.ps, c.pt, g)) < 1e-6);
  }
  CHECK(std::abs(minimax_value(WeightField::constant(), n01, n01, g) + std::log(4.0)) <= 1e-6);
  CHECK(std::abs(minimax_value(WeightField::constant(), Density1D::uniform(-3, -1), Density1D::uniform(1, 3), g)) <= 1e-12);

  // Both sides against the independent high-precision values.
  CHECK(std::abs(minimax_value(tilt(), n01, Density1D::gaussian(0.5, 1.5), g) - oracle::kMinimaxTilted) <= 1e-9);
  CHECK(std::abs(minimax_identity(tilt(), n01, Density1D::gaussian(0.5, 1.5), g) - oracle::kMinimaxTilted) <= 1e-9);
  CHECK(std::abs(minimax_value(WeightField::constant(), Density1D::uniform(-1, 1), n01, g) -
                 oracle::kMinimaxUniformGaussian) <= 1e-9);
  CHECK(std::abs(minimax_value(WeightField::constant(), mixture(), Density1D::gaussian(0.0, 1.5), g) -
                 oracle::kMinimaxMixture) <= 1e-9);

  SUBCASE("unnormalized weights are rejected") {
    CHECK_THROWS_AS(minimax_value(WeightField::constant(2.0), n01, n01, g), ContractError);
  }
}

TEST_CASE("renormalizing the weight keeps the optimal discriminator's ordering") {
  const Grid g;
  const Density1D ps = Density1D::gaussian(0.0, 1.0), pt = Density1D::gaussian(1.0, 1.0);
  const WeightField raw([](double x) { return 2.0 + std::sin(x); });
  const WeightField w = raw.normalized(ps, g);
  double best_raw = -1.0, best_norm = -1.0, arg_raw = 0.0, arg_norm = 0.0;
  for (double x = -3.0; x <= 3.0; x += 0.01) {
    const double a = optimal_discriminator(raw, ps, pt, x), b = optimal_discriminator(w, ps, pt, x);
    if (a > best_raw) best_raw = a, arg_raw = x;
    if (b > best_norm) best_norm = b, arg_norm = x;
  }
  CHECK(arg_raw == arg_norm);
}

TEST_CASE("empirical check reports instead of throwing") {
  EmpiricalConfig cfg;
  cfg.samples = 2000;
  cfg.steps = 2;
  const auto r = empirical_check(WeightField::constant(), Density1D::gaussian(-1.5, 1.0),
                                 Density1D::gaussian(1.5, 1.0), cfg);
  CHECK(!r.converged);
  CHECK(r.grid_x.size() == cfg.central_points);
  CHECK(r.trained.size() == r.optimal.size());
  CHECK(std::isfinite(r.max_abs_error));

  std::ostringstream csv;
  write_curve_csv(csv, r);
  CHECK(csv.str().rfind("x,d_trained,d_star\n", 0) == 0);
  std::ostringstream rep;
  write_report(rep, r);
  CHECK(rep.str().find("converged=false") != std::string::npos);

  cfg.samples = 0;
  CHECK_THROWS_AS(empirical_check(WeightField::constant(), Density1D::gaussian(0, 1), Density1D::gaussian(0, 1), cfg),
                  ContractError);
}

TEST_CASE("empirical check is deterministic") {
  EmpiricalConfig cfg;
  cfg.samples = 1000;
  cfg.steps = 20;
  const auto a = empirical_check(WeightField::constant(), Density1D::gaussian(0, 1), Density1D::gaussian(1, 1), cfg);
  const auto b = empirical_check(WeightField::constant(), Density1D::gaussian(0, 1), Density1D::gaussian(1, 1), cfg);
  CHECK(a.trained == b.trained);
  CHECK(a.sample_loss == b.sample_loss);
}
