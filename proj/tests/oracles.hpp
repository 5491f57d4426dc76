#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dbnmix/tensor.hpp"

namespace oracle {

inline std::vector<std::vector<double>> to_rows(const dbnmix::Tensor& t) {
  std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t.data()[r * t.cols() + c];
  return out;
}

// Straight triple loop over nested vectors.
inline std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                               const std::vector<std::vector<double>>& b) {
  std::vector<std::vector<double>> out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

// Unstabilized textbook softmax of one row; fine for the moderate logits the tests use.
inline std::vector<double> softmax_row(const std::vector<double>& z, const std::vector<double>& temps) {
  std::vector<double> e(z.size());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    e[k] = std::exp(z[k] / temps[k]);
    total += e[k];
  }
  for (double& v : e) v /= total;
  return e;
}

inline double cross_entropy_row(const std::vector<double>& p, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += -y[k] * std::log(p[k]);
  return s;
}

// Batch-mean soft-label cross entropy of temperature-scaled softmax, one scalar loop.
inline double scaled_ce(const dbnmix::Tensor& z, const dbnmix::Tensor& y, const std::vector<double>& temps) {
  const auto zr = to_rows(z);
  const auto yr = to_rows(y);
  double s = 0.0;
  for (std::size_t b = 0; b < zr.size(); ++b) s += cross_entropy_row(softmax_row(zr[b], temps), yr[b]);
  return s / static_cast<double>(zr.size());
}

// Central difference of f with respect to every entry of `x` (restored afterwards).
inline std::vector<double> central_difference(std::span<double> x, const std::function<double()>& f,
                                              double step = 1e-5) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f();
    x[i] = saved - step;
    const double down = f();
    x[i] = saved;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
// dominating through cancellation noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Pearson statistic of observed counts against expected probabilities, and
// whether it stays below the chi-square critical value at significance `alpha`.
inline double chi_square_statistic(const std::vector<std::size_t>& observed, const std::vector<double>& probs) {
  std::size_t n = 0;
  for (auto o : observed) n += o;
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = probs[k] * static_cast<double>(n);
    stat += (static_cast<double>(observed[k]) - e) * (static_cast<double>(observed[k]) - e) / e;
  }
  return stat;
}

inline double chi_square_critical(std::size_t degrees_of_freedom, double alpha) {
  boost::math::chi_squared dist(static_cast<double>(degrees_of_freedom));
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

// |count/n - p| within `sigmas` binomial standard deviations.
inline bool within_binomial_sigma(std::size_t count, std::size_t n, double p, double sigmas = 3.0) {
  const double nn = static_cast<double>(n);
  const double sd = std::sqrt(p * (1.0 - p) / nn);
  return std::abs(static_cast<double>(count) / nn - p) <= sigmas * sd;
}

// Direct evaluation of the class-wise temperature formula for one class.
inline double temperature(double eta, double epsilon, double ratio_to_max, double max_ratio = 1.0) {
  const double b = epsilon * ratio_to_max + (1.0 - epsilon);
  const double b_max = epsilon * max_ratio + (1.0 - epsilon);
  return std::pow(b_max / b, 1.0 / eta);
}

}  // namespace oracle
