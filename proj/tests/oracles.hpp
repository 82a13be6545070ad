#pragma once

// Brute-force reference computations used to check the fast paths. Nothing
// here calls the library's FFT helpers.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;

/// Unitary DFT matrix, entries exp(-i 2 pi m k / K) / sqrt(K).
inline CMat dft_matrix(int K) {
  CMat f(K, K);
  for (int m = 0; m < K; ++m)
    for (int k = 0; k < K; ++k) f(m, k) = std::polar(1.0 / std::sqrt(double(K)), -2.0 * kPi * m * k / K);
  return f;
}

inline CMat basis_matrix(const CVec& b) {
  const CMat f = dft_matrix(static_cast<int>(b.size()));
  return f * b.asDiagonal() * f.adjoint();
}

/// h(k, l) taps to the K x K frequency matrix through the time-domain
/// convolution matrix: (Htilde x)(k) = sum_l h(k, l) x(k - l).
inline CMat channel_matrix(const CMat& taps) {
  const int K = static_cast<int>(taps.rows());
  CMat ht = CMat::Zero(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < taps.cols(); ++l) ht(k, ((k - l) % K + K) % K) += taps(k, l);
  const CMat f = dft_matrix(K);
  return f * ht * f.adjoint();
}

inline cplx cn(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  return {re, n(rng)};
}

inline CVec random_vector(std::mt19937_64& rng, int n) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = cn(rng);
  return v;
}

/// Gaussian tail probability.
inline double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double rel_fro(const CMat& a, const CMat& b) { return (a - b).norm() / b.norm(); }

}  // namespace oracle
