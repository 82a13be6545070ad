#pragma once

// Shared numeric vocabulary: complex vectors/matrices and DFT helpers.
//
// DFT convention used throughout the library:
//   dft(x)[m]  = sum_k x[k] exp(-i 2 pi m k / K)          (unscaled)
//   idft(X)[k] = (1/K) sum_m X[m] exp(+i 2 pi m k / K)
// The unitary matrix F has entries exp(-i 2 pi m k / K) / sqrt(K), so
// F v = dft(v) / sqrt(K) and F^H v = sqrt(K) idft(v).

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace posce {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Thrown for contract violations on inputs (bad sizes, out-of-range indices).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace detail

inline CVec dft(const CVec& x) {
  CVec out(x.size());
  if (x.size() == 0) return out;
  detail::fft_engine().fwd(out.data(), x.data(), x.size());
  return out;
}

inline CVec idft(const CVec& x) {
  CVec out(x.size());
  if (x.size() == 0) return out;
  detail::fft_engine().inv(out.data(), x.data(), x.size());
  return out;
}

/// Applies F diag(phase) F^H to v in O(K log K). The result is the circular
/// convolution of v with dft(phase)/K.
inline CVec apply_circulant(const CVec& phase, const CVec& v) {
  detail::require(phase.size() == v.size(), "apply_circulant: dimension mismatch");
  return dft(phase.cwiseProduct(idft(v)));
}

/// First column of the circulant F diag(phase) F^H.
inline CVec circulant_column(const CVec& phase) {
  return dft(phase) / static_cast<double>(phase.size());
}

/// Dense K x K circulant with the given first column.
inline CMat circulant_matrix(const CVec& column) {
  const Eigen::Index K = column.size();
  CMat m(K, K);
  for (Eigen::Index n = 0; n < K; ++n)
    for (Eigen::Index r = 0; r < K; ++r) m(r, n) = column((r - n + K) % K);
  return m;
}

/// Picks entries of v at the given indices.
inline CVec gather(const CVec& v, const std::vector<int>& indices) {
  CVec out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(indices[i]);
  return out;
}

inline double power(const CVec& v) { return v.squaredNorm(); }

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace posce
