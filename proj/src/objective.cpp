#include "appg/objective.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "appg/dataset.hpp"

namespace appg {

double Objective::value(const Vec& x) const {
  double total = 0.0;
  for (int i = 0; i < num_components(); ++i) total += component_value(i, x);
  return total;
}

Vec Objective::gradient(const Vec& x) const {
  Vec total = Vec::Zero(dim());
  for (int i = 0; i < num_components(); ++i) total += component_gradient(i, x);
  return total;
}

void Objective::set_f_star(double f_star, Vec x_star) {
  meta_.f_star = f_star;
  meta_.x_star = std::move(x_star);
}

double Objective::global_beta() const {
  return meta_.beta_sum.value_or(meta_.beta * num_components());
}

// ---------------------------------------------------------------------------

QuadraticObjective::QuadraticObjective(std::vector<Mat> q, std::vector<Vec> b)
    : q_(std::move(q)), b_(std::move(b)) {
  if (q_.empty() || q_.size() != b_.size()) {
    throw std::invalid_argument("quadratic needs one (Q_i, b_i) pair per node");
  }
  const auto m = b_.front().size();
  Mat q_sum = Mat::Zero(m, m);
  Vec b_sum = Vec::Zero(m);
  double beta = 0.0;
  for (std::size_t i = 0; i < q_.size(); ++i) {
    if (q_[i].rows() != m || q_[i].cols() != m || b_[i].size() != m) {
      throw std::invalid_argument("quadratic component has inconsistent dimensions");
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(q_[i]);
    beta = std::max(beta, eig.eigenvalues().cwiseAbs().maxCoeff());
    q_sum += q_[i];
    b_sum += b_[i];
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig_sum(q_sum);
  meta_.beta = beta;
  meta_.beta_sum = eig_sum.eigenvalues().maxCoeff();
  const double lambda_min = eig_sum.eigenvalues().minCoeff();
  if (lambda_min > 0.0) {
    meta_.alpha = lambda_min;
    Vec x_star = q_sum.ldlt().solve(b_sum);
    meta_.f_star = 0.5 * x_star.dot(q_sum * x_star) - b_sum.dot(x_star);
    meta_.x_star = std::move(x_star);
  }
}

double QuadraticObjective::component_value(int i, const Vec& x) const {
  return 0.5 * x.dot(q_[i] * x) - b_[i].dot(x);
}

Vec QuadraticObjective::component_gradient(int i, const Vec& x) const {
  return q_[i] * x - b_[i];
}

std::shared_ptr<QuadraticObjective> make_quadratic(int n, int m, std::uint64_t seed,
                                                   double condition) {
  if (n < 1 || m < 1) throw std::invalid_argument("quadratic needs n >= 1 and m >= 1");
  if (!(condition >= 1.0)) throw std::invalid_argument("condition number must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Mat> qs;
  std::vector<Vec> bs;
  for (int i = 0; i < n; ++i) {
    Mat gauss(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) gauss(r, c) = normal(rng);
    Mat basis = Eigen::HouseholderQR<Mat>(gauss).householderQ();
    Vec spectrum(m);
    for (int d = 0; d < m; ++d) spectrum(d) = 1.0 + (condition - 1.0) * unit(rng);
    spectrum(0) = 1.0;
    spectrum(m - 1) = m > 1 ? condition : 1.0;
    Mat q = basis * spectrum.asDiagonal() * basis.transpose();
    qs.push_back(0.5 * (q + q.transpose()));
    Vec b(m);
    for (int d = 0; d < m; ++d) b(d) = normal(rng);
    bs.push_back(std::move(b));
  }
  return std::make_shared<QuadraticObjective>(std::move(qs), std::move(bs));
}

// ---------------------------------------------------------------------------

PlNonconvexObjective::PlNonconvexObjective(int n) : n_(n) {
  if (n < 1) throw std::invalid_argument("pl_nonconvex needs n >= 1");
  // f'' = 2 + 6 cos(2x) lies in [-4, 8].
  meta_.beta = 8.0 / n;
  meta_.beta_sum = 8.0;
  meta_.alpha = kPlConstant;
  meta_.f_star = 0.0;
  meta_.x_star = Vec::Zero(1);
}

double PlNonconvexObjective::component_value(int, const Vec& x) const {
  const double s = std::sin(x(0));
  return (x(0) * x(0) + 3.0 * s * s) / n_;
}

Vec PlNonconvexObjective::component_gradient(int, const Vec& x) const {
  Vec g(1);
  g(0) = (2.0 * x(0) + 3.0 * std::sin(2.0 * x(0))) / n_;
  return g;
}

std::shared_ptr<PlNonconvexObjective> make_pl_nonconvex(int n) {
  return std::make_shared<PlNonconvexObjective>(n);
}

// ---------------------------------------------------------------------------

LogisticObjective::LogisticObjective(std::shared_ptr<const PartitionedDataset> data, double reg)
    : data_(std::move(data)), reg_(reg) {
  if (!data_ || data_->num_parts() < 1) throw std::invalid_argument("logistic needs a partitioned dataset");
  if (reg < 0.0) throw std::invalid_argument("regularization must be nonnegative");
  const int n = data_->num_parts();
  // Hessian of softmax cross-entropy w.r.t. the logits is diag(p) - p p^T,
  // whose largest eigenvalue is at most 1/2. With ||S_i||_2 <= ||S_i||_F the
  // component bound is 0.5 ||S_i||_F^2 + reg / n.
  double beta = 0.0;
  for (const auto& [begin, end] : data_->partition) {
    const double frob2 = data_->features.middleRows(begin, end - begin).squaredNorm();
    beta = std::max(beta, 0.5 * frob2 + reg / n);
  }
  meta_.beta = beta;
  meta_.beta_sum = 0.5 * data_->features.squaredNorm() + reg;
  if (reg > 0.0) meta_.alpha = reg;
}

int LogisticObjective::num_components() const { return data_->num_parts(); }

int LogisticObjective::dim() const { return data_->num_features() * data_->num_classes(); }

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajorMat> as_weights(const Vec& x, int features, int classes) {
  return Eigen::Map<const RowMajorMat>(x.data(), features, classes);
}

}  // namespace

double LogisticObjective::component_value(int i, const Vec& x) const {
  const auto [begin, end] = data_->partition[i];
  const int nf = data_->num_features();
  const int nc = data_->num_classes();
  auto w = as_weights(x, nf, nc);
  double loss = 0.0;
  for (int r = begin; r < end; ++r) {
    Eigen::RowVectorXd logits = data_->features.row(r) * w;
    const double top = logits.maxCoeff();
    const double lse = top + std::log((logits.array() - top).exp().sum());
    loss += lse - logits(data_->label_index[r]);
  }
  return loss + 0.5 * reg_ / num_components() * x.squaredNorm();
}

Vec LogisticObjective::component_gradient(int i, const Vec& x) const {
  const auto [begin, end] = data_->partition[i];
  const int nf = data_->num_features();
  const int nc = data_->num_classes();
  auto w = as_weights(x, nf, nc);
  RowMajorMat grad = RowMajorMat::Zero(nf, nc);
  for (int r = begin; r < end; ++r) {
    Eigen::RowVectorXd logits = data_->features.row(r) * w;
    const double top = logits.maxCoeff();
    Eigen::RowVectorXd p = (logits.array() - top).exp();
    p /= p.sum();
    p -= data_->labels.row(r);
    grad.noalias() += data_->features.row(r).transpose() * p;
  }
  Vec out = Eigen::Map<const Vec>(grad.data(), static_cast<Eigen::Index>(nf) * nc);
  out += reg_ / num_components() * x;
  return out;
}

std::shared_ptr<LogisticObjective> make_logistic(std::shared_ptr<const PartitionedDataset> data,
                                                 double reg, int n) {
  if (!data || data->num_parts() != n) {
    throw std::invalid_argument("dataset partition count does not match node count " +
                                std::to_string(n));
  }
  return std::make_shared<LogisticObjective>(std::move(data), reg);
}

}  // namespace appg
