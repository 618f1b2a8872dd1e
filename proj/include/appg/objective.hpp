#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace appg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Smoothness and optimality facts about f = sum_i f_i.
struct ObjectiveMetadata {
  double beta = 0.0;                 // Lipschitz constant of every grad f_i (may be an upper bound)
  std::optional<double> beta_sum;    // Lipschitz constant of grad f, when tighter than n * beta
  std::optional<double> alpha;       // Polyak-Lojasiewicz constant of f
  std::optional<double> f_star;
  std::optional<Vec> x_star;
};

// Sum-structured objective f(x) = sum_i f_i(x) over x in R^m. Instances are
// immutable and safe to evaluate from several threads.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int num_components() const = 0;
  virtual int dim() const = 0;
  virtual std::string family() const = 0;

  virtual double component_value(int i, const Vec& x) const = 0;
  virtual Vec component_gradient(int i, const Vec& x) const = 0;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  const ObjectiveMetadata& metadata() const { return meta_; }
  void set_f_star(double f_star, Vec x_star);

  // Lipschitz constant of grad f (falls back to n * beta).
  double global_beta() const;

 protected:
  ObjectiveMetadata meta_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// f_i(x) = 0.5 x^T Q_i x - b_i^T x.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(std::vector<Mat> q, std::vector<Vec> b);

  int num_components() const override { return static_cast<int>(q_.size()); }
  int dim() const override { return static_cast<int>(b_.front().size()); }
  std::string family() const override { return "quadratic"; }

  double component_value(int i, const Vec& x) const override;
  Vec component_gradient(int i, const Vec& x) const override;

  const Mat& q(int i) const { return q_[i]; }
  const Vec& b(int i) const { return b_[i]; }

 private:
  std::vector<Mat> q_;
  std::vector<Vec> b_;
};

// Random strongly convex quadratics. Each Q_i has spectrum spread over
// [1, condition] with a seeded random eigenbasis; b_i is standard normal.
std::shared_ptr<QuadraticObjective> make_quadratic(int n, int m, std::uint64_t seed,
                                                   double condition);

// f(x) = x^2 + 3 sin^2(x) split evenly across n nodes. Non-convex, PL.
class PlNonconvexObjective final : public Objective {
 public:
  explicit PlNonconvexObjective(int n);

  int num_components() const override { return n_; }
  int dim() const override { return 1; }
  std::string family() const override { return "pl_nonconvex"; }

  double component_value(int i, const Vec& x) const override;
  Vec component_gradient(int i, const Vec& x) const override;

  // Largest alpha verified on a dense grid of [-10, 10] is about 0.1755.
  static constexpr double kPlConstant = 0.17;

 private:
  int n_;
};

std::shared_ptr<PlNonconvexObjective> make_pl_nonconvex(int n);

struct PartitionedDataset;

// Regularized softmax cross-entropy. The decision variable is the
// n_features x n_classes weight matrix flattened row-major, so
// x[f * n_classes + c] is the weight of feature f for class c. Each node
// carries 1/n of the (reg/2)||X||_F^2 term.
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(std::shared_ptr<const PartitionedDataset> data, double reg);

  int num_components() const override;
  int dim() const override;
  std::string family() const override { return "logistic"; }

  double component_value(int i, const Vec& x) const override;
  Vec component_gradient(int i, const Vec& x) const override;

  double reg() const { return reg_; }

 private:
  std::shared_ptr<const PartitionedDataset> data_;
  double reg_;
};

std::shared_ptr<LogisticObjective> make_logistic(std::shared_ptr<const PartitionedDataset> data,
                                                 double reg, int n);

}  // namespace appg
