#include "dvrnn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dvrnn/error.hpp"

namespace dvrnn {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::unsupported_version: return "unsupported version";
    case ErrorCode::truncated: return "truncated file";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::vocab_mismatch: return "vocabulary mismatch";
    case ErrorCode::no_doc_vector: return "model has no document vector";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::diverged: return "training diverged";
    case ErrorCode::config: return "configuration error";
  }
  return "unknown error";
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "Rng::below: n must be positive");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : v) x /= total;
}

Vec softmax(const Vec& v) {
  Vec out = v;
  softmax_inplace(out);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec matvec(const Mat& a, std::span<const double> v) {
  Vec out(a.rows());
  matvec_accumulate(a, v, out);
  return out;
}

void matvec_accumulate(const Mat& a, std::span<const double> v, std::span<double> out) {
  if (a.cols() != v.size() || a.rows() != out.size()) {
    throw Error(ErrorCode::invalid_argument,
                "matvec: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " matrix with vector of length " + std::to_string(v.size()));
  }
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] += dot(a.row(r), v);
}

void matvec_transposed_accumulate(const Mat& a, std::span<const double> v,
                                  std::span<double> out) {
  if (a.rows() != v.size() || a.cols() != out.size()) {
    throw Error(ErrorCode::invalid_argument, "matvec_transposed: dimension mismatch");
  }
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(v[r], a.row(r), out);
}

void add_outer(Mat& a, double scale, std::span<const double> u, std::span<const double> v) {
  if (a.rows() != u.size() || a.cols() != v.size()) {
    throw Error(ErrorCode::invalid_argument, "add_outer: dimension mismatch");
  }
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(scale * u[r], v, a.row(r));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& theta, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "finite_diff_grad: eps must be > 0");
  Vec grad(theta.size());
  Vec probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + eps;
    const double up = f(probe);
    probe[i] = theta[i] - eps;
    const double down = f(probe);
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::non_finite,
                  "finite_diff_grad: objective not finite at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace dvrnn
