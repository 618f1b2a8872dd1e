#include "appg/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace appg {

SyncSystem make_sync_system(const DirectedGraph& g, const std::vector<double>& stepsizes) {
  const int n = g.size();
  if (static_cast<int>(stepsizes.size()) != n) throw std::invalid_argument("one stepsize per node");
  SyncSystem sys{Mat::Zero(n, n), Mat::Zero(n, n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    const auto& in = g.in_neighbors(i);
    for (int j : in) sys.a(i, j) = 1.0 / static_cast<double>(in.size());
    const auto& out = g.out_neighbors(i);
    for (int j : out) sys.b(j, i) = 1.0 / static_cast<double>(out.size());
    sys.gamma(i) = stepsizes[i];
  }
  return sys;
}

Mat stacked_gradient(const Objective& obj, const Mat& x) {
  Mat grad(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    grad.row(i) = obj.component_gradient(static_cast<int>(i), x.row(i).transpose()).transpose();
  }
  return grad;
}

SyncHistory sync_push_pull(const SyncSystem& sys, const Objective& obj, const Mat& x0, int steps,
                           SyncOptions options) {
  if (x0.rows() != sys.a.rows() || x0.cols() != obj.dim()) {
    throw std::invalid_argument("initial state has the wrong shape");
  }
  SyncHistory hist;
  Mat x = x0;
  Mat grad = stacked_gradient(obj, x);
  Mat y = grad;
  hist.x.push_back(x);
  hist.y.push_back(y);
  for (int k = 0; k < steps; ++k) {
    const bool raw = options.raw_initial_broadcast && k == 0;
    Mat x_next = raw ? Mat(sys.a * x) : Mat(sys.a * (x - sys.gamma.asDiagonal() * y));
    Mat grad_next = stacked_gradient(obj, x_next);
    y = sys.b * y + grad_next - grad;
    x = std::move(x_next);
    grad = std::move(grad_next);
    if (!x.allFinite() || !y.allFinite()) {
      throw std::runtime_error("sync push-pull diverged at step " + std::to_string(k + 1));
    }
    hist.x.push_back(x);
    hist.y.push_back(y);
  }
  return hist;
}

PerronResult perron_vectors(const SyncSystem& sys, int max_iterations) {
  const auto n = sys.a.rows();
  PerronResult out;
  const Mat at = sys.a.transpose();
  auto power = [&](const Mat& m, Vec& v) {
    v = Vec::Constant(n, 1.0 / static_cast<double>(n));
    for (int it = 1; it <= max_iterations; ++it) {
      Vec next = m * v;
      next /= next.sum();
      const double residual = (m * next - next).lpNorm<Eigen::Infinity>();
      v = std::move(next);
      if (residual <= 1e-12) return it;
    }
    throw std::runtime_error("power iteration did not converge; matrix is not primitive");
  };
  const int it_a = power(at, out.pi_a);
  const int it_b = power(sys.b, out.pi_b);
  out.iterations = std::max(it_a, it_b);
  out.rho = out.pi_a.dot(sys.gamma.asDiagonal() * out.pi_b);
  return out;
}

GdResult centralized_gd(const Objective& obj, const Vec& x0, double eta, int steps,
                        double grad_tol) {
  if (!(eta > 0.0)) throw std::invalid_argument("gd stepsize must be positive");
  if (eta >= 2.0 / obj.global_beta()) {
    throw std::invalid_argument("gd stepsize must be below 2 / beta");
  }
  GdResult out;
  Vec x = x0;
  Vec grad = obj.gradient(x);
  out.x.push_back(x);
  out.f.push_back(obj.value(x));
  for (int k = 0; k < steps && grad.norm() > grad_tol; ++k) {
    x -= eta * grad;
    grad = obj.gradient(x);
    if (!x.allFinite() || !grad.allFinite()) {
      throw std::runtime_error("gradient descent diverged at step " + std::to_string(k + 1));
    }
    out.x.push_back(x);
    out.f.push_back(obj.value(x));
  }
  out.final_grad_norm = grad.norm();
  return out;
}

void solve_reference_optimum(Objective& obj, const Vec& x0, double eta, int max_steps,
                             double grad_tol) {
  GdResult gd = centralized_gd(obj, x0, eta, max_steps, grad_tol);
  obj.set_f_star(gd.f.back(), gd.x.back());
}

ContractionCheck perturbed_gd_contraction_check(const Objective& obj, const Vec& x, double eta,
                                                const Vec& eps) {
  const auto& meta = obj.metadata();
  if (!meta.alpha || !meta.f_star) {
    throw std::invalid_argument("contraction check needs alpha and f_star metadata");
  }
  const double beta = obj.global_beta();
  if (!(eta > 0.0 && eta < 1.0 / (2.0 * beta))) {
    throw std::invalid_argument("eta must lie in (0, 1/(2 beta))");
  }
  ContractionCheck out;
  const Vec x_plus = x - eta * obj.gradient(x) + eps;
  out.sigma = 1.0 - *meta.alpha * eta * (1.0 - 2.0 * eta * beta);
  out.lhs = obj.value(x_plus) - *meta.f_star;
  out.rhs = out.sigma * (obj.value(x) - *meta.f_star) + (2.0 / eta + beta) * eps.squaredNorm();
  out.holds = out.lhs <= out.rhs + 1e-12 * (1.0 + std::abs(out.rhs));
  return out;
}

SimulationResult naive_async_baseline(const DirectedGraph& g, ObjectivePtr obj,
                                      const AsyncConfig& cfg, std::vector<double> stepsizes,
                                      std::vector<Vec> init, std::int64_t max_events,
                                      bool record_snapshots) {
  SimOptions options;
  options.rule = UpdateRule::kTrackingFree;
  options.record_snapshots = record_snapshots;
  return run_simulation(g, std::move(obj), cfg, std::move(stepsizes), std::move(init),
                        Horizon{max_events, std::nullopt}, options);
}

}  // namespace appg
