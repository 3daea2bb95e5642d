#include "elsm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace elsm {

namespace {

double sq_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    if (!std::isfinite(x))
      throw std::invalid_argument("kernel: non-finite input");
    s += x * x;
  }
  return s;
}

void check_scale(double s, const char* name) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw std::invalid_argument(std::string(name) +
                                " must be strictly positive");
}

}  // namespace

void HyperParams::validate() const {
  if (n == 0) throw std::invalid_argument("HyperParams: n must be positive");
  if (T == 0) throw std::invalid_argument("HyperParams: T must be positive");
  if (K == 0) throw std::invalid_argument("HyperParams: K must be positive");
  if (d == 0) throw std::invalid_argument("HyperParams: d must be positive");
  if (pi.size() != K)
    throw std::invalid_argument("HyperParams: pi must have length K");
  double sum = 0.0;
  for (double p : pi) {
    if (p < 0.0) throw std::invalid_argument("HyperParams: pi entry negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("HyperParams: pi must sum to 1");
  if (m_prior.size() != d)
    throw std::invalid_argument("HyperParams: m_prior must have length d");
  check_scale(s, "HyperParams: s");
  check_scale(s1, "HyperParams: s1");
  check_scale(s2, "HyperParams: s2");
  check_scale(s3, "HyperParams: s3");
  check_scale(s4, "HyperParams: s4");
}

void DynamicNetwork::validate() const {
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    const Tensor& a = snapshots[t];
    if (a.rank() != 2 || a.rows() != a.cols())
      throw std::invalid_argument("DynamicNetwork: snapshot " +
                                  std::to_string(t) + " is not square");
    if (a.rows() != n())
      throw std::invalid_argument("DynamicNetwork: inconsistent node counts");
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (a(i, i) != 0.0)
        throw std::invalid_argument("DynamicNetwork: nonzero diagonal");
      for (std::size_t j = 0; j < i; ++j) {
        double v = a(i, j);
        if (v != a(j, i))
          throw std::invalid_argument("DynamicNetwork: asymmetric snapshot");
        if (v < 0.0)
          throw std::invalid_argument("DynamicNetwork: negative entry");
        if (!weighted && v != 0.0 && v != 1.0)
          throw std::invalid_argument(
              "DynamicNetwork: non-binary entry in unweighted network");
        if (weighted && v != std::floor(v))
          throw std::invalid_argument(
              "DynamicNetwork: non-integer weight");
      }
    }
  }
}

double edge_kernel_f_sq(double sq_dist, double s2) {
  check_scale(s2, "s2");
  if (!std::isfinite(sq_dist))
    throw std::invalid_argument("edge_kernel_f: non-finite input");
  return 1.0 - std::tanh(sq_dist / (s2 * s2));
}

double edge_kernel_f(const std::vector<double>& diff, double s2) {
  return edge_kernel_f_sq(sq_norm(diff), s2);
}

double split_kernel_g_sq(double sq_dist, double s3) {
  check_scale(s3, "s3");
  if (!std::isfinite(sq_dist))
    throw std::invalid_argument("split_kernel_g: non-finite input");
  return 1.0 - std::tanh(sq_dist / (s3 * s3));
}

double split_kernel_g(const std::vector<double>& diff, double s3) {
  return split_kernel_g_sq(sq_norm(diff), s3);
}

double influence_kernel_l_sq(double sq_dist, double s4) {
  check_scale(s4, "s4");
  if (!std::isfinite(sq_dist))
    throw std::invalid_argument("influence_kernel_l: non-finite input");
  return std::exp(-sq_dist / (s4 * s4));
}

double influence_kernel_l(const std::vector<double>& diff, double s4) {
  return influence_kernel_l_sq(sq_norm(diff), s4);
}

std::vector<double> neighbor_mean(const Tensor& Z_prev, const Tensor& A_prev,
                                  std::size_t i, double s4) {
  if (Z_prev.rank() != 2 || A_prev.rank() != 2 ||
      A_prev.rows() != A_prev.cols() || A_prev.rows() != Z_prev.rows())
    throw std::invalid_argument("neighbor_mean: dimension mismatch");
  if (i >= Z_prev.rows())
    throw std::invalid_argument("neighbor_mean: node index out of range");
  std::size_t n = Z_prev.rows(), d = Z_prev.cols();

  std::vector<double> acc = Z_prev.row_vec(i);
  double denom = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    double a = A_prev(i, j);
    if (a == 0.0) continue;
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double diff = Z_prev(i, k) - Z_prev(j, k);
      sq += diff * diff;
    }
    double w = a * influence_kernel_l_sq(sq, s4);
    denom += w;
    for (std::size_t k = 0; k < d; ++k) acc[k] += w * Z_prev(j, k);
  }
  for (double& v : acc) v /= denom;
  return acc;
}

Tensor neighbor_mean_all(const Tensor& Z_prev, const Tensor& A_prev,
                         double s4) {
  Tensor out(Z_prev.rows(), Z_prev.cols());
  for (std::size_t i = 0; i < Z_prev.rows(); ++i) {
    auto row = neighbor_mean(Z_prev, A_prev, i, s4);
    for (std::size_t k = 0; k < Z_prev.cols(); ++k) out(i, k) = row[k];
  }
  return out;
}

}  // namespace elsm
