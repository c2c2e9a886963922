#include "wran/theory_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "wran/adversary.hpp"
#include "wran/error.hpp"
#include "wran/format.hpp"
#include "wran/param_store.hpp"
#include "wran/pipeline.hpp"

namespace wran {
namespace {

constexpr double kCoverage = 1e-6;
// Nodes are evaluated just left and right of x (offset in units of the step)
// and averaged, so a jump sitting on a panel boundary integrates like two
// smooth pieces.
constexpr double kLimitOffset = 1e-7;

double simpson_values(std::span<const double> v, double h) {
  double s = v.front() + v.back();
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += (i % 2 ? 4.0 : 2.0) * v[i];
  return s * h / 3.0;
}

// p log(p / m) with the 0 log 0 = 0 convention.
double plogratio(double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; }

}  // namespace

void Grid::validate() const {
  if (!(hi > lo)) throw ContractError("grid needs hi > lo");
  if (nodes < 3 || nodes % 2 == 0) throw ContractError("Simpson grid needs an odd node count >= 3");
}

std::vector<double> node_values(const Function1D& f, const Grid& grid) {
  grid.validate();
  const double delta = grid.step() * kLimitOffset;
  std::vector<double> v(grid.nodes);
  for (std::size_t i = 0; i < grid.nodes; ++i) {
    const double x = grid.at(i);
    v[i] = 0.5 * (f(x - delta) + f(x + delta));
  }
  return v;
}

double simpson(const Function1D& f, const Grid& grid) { return simpson_values(node_values(f, grid), grid.step()); }

Density1D Density1D::gaussian(double mean, double sd) {
  if (!(sd > 0.0)) throw ContractError("gaussian sd must be positive");
  Density1D d;
  d.kind_ = Kind::kGaussian;
  d.a_ = mean;
  d.b_ = sd;
  return d;
}

Density1D Density1D::uniform(double lo, double hi) {
  if (!(hi > lo)) throw ContractError("uniform needs hi > lo");
  Density1D d;
  d.kind_ = Kind::kUniform;
  d.a_ = lo;
  d.b_ = hi;
  return d;
}

Density1D Density1D::mixture(std::vector<std::pair<double, Density1D>> components) {
  if (components.empty()) throw ContractError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& [w, _] : components) {
    if (!(w >= 0.0)) throw ContractError("mixture weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ContractError("mixture weights sum to zero");
  Density1D d;
  d.kind_ = Kind::kMixture;
  for (auto& [w, part] : components) {
    d.weights_.push_back(w / total);
    d.parts_.push_back(std::move(part));
  }
  return d;
}

double Density1D::pdf(double x) const {
  switch (kind_) {
    case Kind::kGaussian: {
      const double z = (x - a_) / b_;
      return std::exp(-0.5 * z * z) / (b_ * std::sqrt(2.0 * std::numbers::pi));
    }
    case Kind::kUniform: {
      const double h = 1.0 / (b_ - a_);
      if (x < a_ || x > b_) return 0.0;
      return (x == a_ || x == b_) ? 0.5 * h : h;
    }
    case Kind::kMixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < parts_.size(); ++i) s += weights_[i] * parts_[i].pdf(x);
      return s;
    }
  }
  return 0.0;
}

double Density1D::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::kGaussian: return a_ + b_ * rng.normal();
    case Kind::kUniform: return rng.uniform(a_, b_);
    case Kind::kMixture: {
      double u = rng.uniform();
      for (std::size_t i = 0; i + 1 < parts_.size(); ++i) {
        if (u < weights_[i]) return parts_[i].sample(rng);
        u -= weights_[i];
      }
      return parts_.back().sample(rng);
    }
  }
  return 0.0;
}

Function1D Density1D::function() const {
  return [d = *this](double x) { return d.pdf(x); };
}

WeightField::WeightField(Function1D w, double scale) : w_(std::move(w)), scale_(scale) {
  if (!(scale >= 0.0)) throw ContractError("weight scale must be nonnegative");
}

WeightField WeightField::constant(double c) {
  return WeightField([](double) { return 1.0; }, c);
}

double WeightField::operator()(double x) const {
  const double v = scale_ * w_(x);
  if (!(v >= 0.0)) throw ContractError("weight field is negative at " + format_real(x));
  return v;
}

double WeightField::mass(const Density1D& ps, const Grid& grid) const {
  return simpson([&](double x) { return (*this)(x) * ps.pdf(x); }, grid);
}

WeightField WeightField::normalized(const Density1D& ps, const Grid& grid) const {
  const double m = mass(ps, grid);
  if (!(m > 0.0)) throw ContractError("weight field has zero mass under p_s");
  return WeightField(w_, scale_ / m);
}

double optimal_discriminator(const WeightField& w, const Density1D& ps, const Density1D& pt, double x) {
  const double a = w(x) * ps.pdf(x);
  const double b = pt.pdf(x);
  if (a + b <= 0.0) throw ContractError("both densities vanish at " + format_real(x));
  return a / (a + b);
}

double js_divergence(const Function1D& p, const Function1D& q, const Grid& grid) {
  if (simpson(p, grid) < 1.0 - kCoverage || simpson(q, grid) < 1.0 - kCoverage)
    throw ContractError("grid covers less than 1 - 1e-6 of a density's mass");
  return simpson(
      [&](double x) {
        const double a = p(x), b = q(x);
        const double m = 0.5 * (a + b);
        return 0.5 * (plogratio(a, m) + plogratio(b, m));
      },
      grid);
}

double js_divergence(const Density1D& p, const Density1D& q, const Grid& grid) {
  return js_divergence(p.function(), q.function(), grid);
}

double minimax_value(const WeightField& w, const Density1D& ps, const Density1D& pt, const Grid& grid) {
  const double m = w.mass(ps, grid);
  if (std::abs(m - 1.0) > kCoverage)
    throw ContractError("weighted source density integrates to " + format_real(m) + ", not 1");
  return simpson(
      [&](double x) {
        const double a = w(x) * ps.pdf(x);
        const double b = pt.pdf(x);
        const double s = a + b;
        return plogratio(a, s) + plogratio(b, s);
      },
      grid);
}

double minimax_identity(const WeightField& w, const Density1D& ps, const Density1D& pt, const Grid& grid) {
  const double js = js_divergence([&](double x) { return w(x) * ps.pdf(x); }, pt.function(), grid);
  return -std::log(4.0) + 2.0 * js;
}

EmpiricalReport empirical_check(const WeightField& w_in, const Density1D& ps, const Density1D& pt,
                                const EmpiricalConfig& cfg, const Grid& grid) {
  if (cfg.samples == 0 || cfg.steps == 0 || cfg.hidden == 0 || cfg.central_points < 2)
    throw ContractError("empirical_check: empty configuration");
  if (!(cfg.central_hi > cfg.central_lo)) throw ContractError("empirical_check: empty central grid");
  const WeightField w = w_in.normalized(ps, grid);

  Rng root(cfg.seed);
  Rng src_rng = root.fork(1), tgt_rng = root.fork(2), init_rng = root.fork(3);
  Tensor xs = Tensor::matrix(cfg.samples, 1), xt = Tensor::matrix(cfg.samples, 1);
  std::vector<double> ws(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    xs[i] = ps.sample(src_rng);
    ws[i] = w(xs[i]);
    xt[i] = pt.sample(tgt_rng);
  }

  const Discriminator d(1, "theory.", cfg.hidden);
  ParamStore params;
  d.init(params, init_rng);
  const auto names = d.param_names();
  Adam opt(cfg.learning_rate);
  std::vector<double> history;
  history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tape tape;
    Var loss = adv_loss(tape, params, d, tape.constant(xs), tape.constant(xt), ws);
    history.push_back(tape.value(loss)[0]);
    params.zero_grad();
    tape.backward(tape.scale(loss, -1.0));
    opt.step(params, names);
  }

  EmpiricalReport r;
  {
    Tape tape;
    r.sample_loss = tape.value(adv_loss(tape, params, d, tape.constant(xs), tape.constant(xt), ws))[0];
  }
  const std::size_t tail = std::max<std::size_t>(1, cfg.steps / 10);
  double drift = 0.0;
  for (std::size_t i = cfg.steps - tail; i < cfg.steps; ++i) drift = std::max(drift, std::abs(history[i] - r.sample_loss));
  r.converged = std::isfinite(r.sample_loss) && drift <= cfg.plateau_tol;

  Tensor central = Tensor::matrix(cfg.central_points, 1);
  const double dx = (cfg.central_hi - cfg.central_lo) / static_cast<double>(cfg.central_points - 1);
  for (std::size_t i = 0; i < cfg.central_points; ++i) central[i] = cfg.central_lo + dx * static_cast<double>(i);
  const auto dc = d.discriminate_all(params, central);
  for (std::size_t i = 0; i < cfg.central_points; ++i) {
    const double star = optimal_discriminator(w, ps, pt, central[i]);
    r.grid_x.push_back(central[i]);
    r.trained.push_back(dc[i]);
    r.optimal.push_back(star);
    r.max_abs_error = std::max(r.max_abs_error, std::abs(dc[i] - star));
  }

  // Same node rule as simpson(): average of the two one-sided evaluations.
  const double delta = grid.step() * kLimitOffset;
  std::vector<double> integrand(grid.nodes, 0.0);
  for (double side : {-delta, delta}) {
    Tensor nodes = Tensor::matrix(grid.nodes, 1);
    for (std::size_t i = 0; i < grid.nodes; ++i) nodes[i] = grid.at(i) + side;
    const auto dn = d.discriminate_all(params, nodes);
    for (std::size_t i = 0; i < grid.nodes; ++i) {
      const double a = w(nodes[i]) * ps.pdf(nodes[i]);
      const double b = pt.pdf(nodes[i]);
      integrand[i] += 0.5 * (a * std::log(dn[i]) + b * std::log(1.0 - dn[i]));
    }
  }
  r.trained_value = simpson_values(integrand, grid.step());
  r.identity_value = minimax_identity(w, ps, pt, grid);
  r.loss_gap = std::abs(r.trained_value - r.identity_value);
  return r;
}

void write_report(std::ostream& out, const EmpiricalReport& r) {
  out << "max_abs_error=" << format_real(r.max_abs_error) << '\n'
      << "trained_value=" << format_real(r.trained_value) << '\n'
      << "identity_value=" << format_real(r.identity_value) << '\n'
      << "loss_gap=" << format_real(r.loss_gap) << '\n'
      << "sample_loss=" << format_real(r.sample_loss) << '\n'
      << "converged=" << (r.converged ? "true" : "false") << '\n';
}

void write_curve_csv(std::ostream& out, const EmpiricalReport& r) {
  out << "x,d_trained,d_star\n";
  for (std::size_t i = 0; i < r.grid_x.size(); ++i)
    out << format_real(r.grid_x[i]) << ',' << format_real(r.trained[i]) << ',' << format_real(r.optimal[i]) << '\n';
}

}  // namespace wran
