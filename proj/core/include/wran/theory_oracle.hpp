#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "wran/random.hpp"

namespace wran {

// Composite Simpson rule on [lo, hi] with an odd node count. Each node takes
// the mean of the integrand's left and right limits, so piecewise smooth
// integrands keep Simpson accuracy when their jumps sit on even nodes.
struct Grid {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t nodes = 4001;

  double step() const { return (hi - lo) / static_cast<double>(nodes - 1); }
  double at(std::size_t i) const { return lo + step() * static_cast<double>(i); }
  void validate() const;
};

using Function1D = std::function<double(double)>;

double simpson(const Function1D& f, const Grid& grid);

// Gaussian, uniform or finite mixture density on the real line. A uniform
// density takes half its height at the two endpoints.
class Density1D {
 public:
  enum class Kind { kGaussian, kUniform, kMixture };

  static Density1D gaussian(double mean, double sd);
  static Density1D uniform(double lo, double hi);
  // Component weights are normalized to sum to 1.
  static Density1D mixture(std::vector<std::pair<double, Density1D>> components);

  Kind kind() const { return kind_; }
  double pdf(double x) const;
  double sample(Rng& rng) const;
  Function1D function() const;

 private:
  Kind kind_ = Kind::kGaussian;
  double a_ = 0.0, b_ = 1.0;  // mean/sd or lo/hi
  std::vector<double> weights_;
  std::vector<Density1D> parts_;
};

// Nonnegative weight function over source inputs, times a scale factor.
class WeightField {
 public:
  WeightField() = default;
  explicit WeightField(Function1D w, double scale = 1.0);
  static WeightField constant(double c = 1.0);

  double operator()(double x) const;
  double scale() const { return scale_; }
  // Integral of w * p_s over the grid.
  double mass(const Density1D& ps, const Grid& grid) const;
  // Copy scaled so that the integral of w * p_s is 1.
  WeightField normalized(const Density1D& ps, const Grid& grid) const;

 private:
  Function1D w_ = [](double) { return 1.0; };
  double scale_ = 1.0;
};

// D*(x) = w p_s / (w p_s + p_t). Throws ContractError when both terms vanish.
double optimal_discriminator(const WeightField& w, const Density1D& ps, const Density1D& pt, double x);

// JS(p || q) with m = (p + q) / 2. Throws ContractError when either function
// has less than 1 - 1e-6 of its mass on the grid.
double js_divergence(const Function1D& p, const Function1D& q, const Grid& grid);
double js_divergence(const Density1D& p, const Density1D& q, const Grid& grid);

// Integral of w p_s log D* + p_t log(1 - D*). Requires |integral of w p_s - 1|
// <= 1e-6 (ContractError otherwise).
double minimax_value(const WeightField& w, const Density1D& ps, const Density1D& pt, const Grid& grid);
// -log 4 + 2 JS(w p_s || p_t).
double minimax_identity(const WeightField& w, const Density1D& ps, const Density1D& pt, const Grid& grid);

struct EmpiricalConfig {
  std::size_t samples = 10000;  // per domain
  std::size_t hidden = 16;
  std::size_t steps = 500;  // full-batch Adam steps
  double learning_rate = 0.02;
  std::uint64_t seed = 1;
  double central_lo = -2.0;
  double central_hi = 2.0;
  std::size_t central_points = 81;
  double plateau_tol = 1e-4;  // max loss change over the last tenth of training
};

struct EmpiricalReport {
  double max_abs_error = 0.0;     // max |D_trained - D*| on the central grid
  double trained_value = 0.0;     // minimax objective of D_trained by quadrature
  double identity_value = 0.0;    // -log 4 + 2 JS
  double loss_gap = 0.0;          // |trained_value - identity_value|
  double sample_loss = 0.0;       // final objective on the training samples
  bool converged = false;
  std::vector<double> grid_x, trained, optimal;  // central grid curve
};

// Samples both domains, trains a small discriminator (adversary module) on raw
// x with the weighted loss, and compares it with D*. Non-convergence is
// reported through `converged`.
EmpiricalReport empirical_check(const WeightField& w, const Density1D& ps, const Density1D& pt,
                                const EmpiricalConfig& cfg, const Grid& grid = {});

void write_report(std::ostream& out, const EmpiricalReport& r);
// "x,d_trained,d_star" rows.
void write_curve_csv(std::ostream& out, const EmpiricalReport& r);

}  // namespace wran
