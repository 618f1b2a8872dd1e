#pragma once

#include <vector>

#include "appg/engine.hpp"
#include "appg/graph.hpp"
#include "appg/objective.hpp"

namespace appg {

// Weights produced by synchronous buffer averaging and summation: row i of A
// is uniform over in_neighbors(i), column i of B is uniform over
// out_neighbors(i).
struct SyncSystem {
  Mat a;
  Mat b;
  Vec gamma;  // diagonal of Gamma
};

SyncSystem make_sync_system(const DirectedGraph& g, const std::vector<double>& stepsizes);

struct SyncOptions {
  // The engine initializes by broadcasting the raw iterate, so in lockstep
  // the first averaging round sees X(0) rather than X(0) - Gamma Y(0).
  bool raw_initial_broadcast = false;
};

struct SyncHistory {
  std::vector<Mat> x;  // n x m, steps + 1 entries
  std::vector<Mat> y;
};

// X(k+1) = A (X(k) - Gamma Y(k)),  Y(k+1) = B Y(k) + grad(X(k+1)) - grad(X(k)),
// with Y(0) = grad(X(0)).
SyncHistory sync_push_pull(const SyncSystem& sys, const Objective& obj, const Mat& x0, int steps,
                           SyncOptions options = {});

// Rows are grad f_i(x_i).
Mat stacked_gradient(const Objective& obj, const Mat& x);

struct PerronResult {
  Vec pi_a;  // A^T pi_a = pi_a, sums to 1
  Vec pi_b;  // B pi_b = pi_b, sums to 1
  double rho = 0.0;  // pi_a^T Gamma pi_b
  int iterations = 0;
};

// Power iteration to a 1e-12 residual. Throws std::runtime_error when the
// iteration cap is reached (the matrices are then not primitive).
PerronResult perron_vectors(const SyncSystem& sys, int max_iterations = 1000000);

struct GdResult {
  std::vector<Vec> x;     // iterates, x.front() = x0
  std::vector<double> f;  // f(x_k)
  double final_grad_norm = 0.0;
};

// Plain gradient descent on f. Stops after `steps` iterations or when
// ||grad f|| <= grad_tol. Throws std::runtime_error on divergence.
GdResult centralized_gd(const Objective& obj, const Vec& x0, double eta, int steps,
                        double grad_tol = 0.0);

// Runs centralized GD to ||grad f|| <= grad_tol and stores f*, x* in the
// objective metadata.
void solve_reference_optimum(Objective& obj, const Vec& x0, double eta, int max_steps,
                             double grad_tol = 1e-10);

struct ContractionCheck {
  double lhs = 0.0;    // f(x+) - f*
  double rhs = 0.0;    // sigma (f(x) - f*) + (2/eta + beta) ||eps||^2
  double sigma = 0.0;  // 1 - alpha eta (1 - 2 eta beta)
  bool holds = false;
};

// Perturbed gradient step x+ = x - eta grad f(x) + eps against its PL
// contraction bound. beta is the smoothness of f itself.
ContractionCheck perturbed_gd_contraction_check(const Objective& obj, const Vec& x, double eta,
                                                const Vec& eps);

// Same engine and schedule as run_simulation, with the tracker removed.
SimulationResult naive_async_baseline(const DirectedGraph& g, ObjectivePtr obj,
                                      const AsyncConfig& cfg, std::vector<double> stepsizes,
                                      std::vector<Vec> init, std::int64_t max_events,
                                      bool record_snapshots = true);

}  // namespace appg
