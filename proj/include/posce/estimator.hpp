#pragma once

// Pilot-domain sparse recovery of the delay coefficients c*_t. The joint
// system over all cells is block diagonal, so each block is solved on its own.

#include "posce/bem.hpp"
#include "posce/channel.hpp"
#include "posce/core.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace posce {

struct MeasurementSystem {
  std::vector<CMat> blocks;  // diag(x_t(w_t)) F_L(w_t, :), P_t x L
  std::vector<CVec> observations;
  std::vector<std::vector<int>> patterns;

  std::size_t num_blocks() const { return blocks.size(); }
  Eigen::Index L() const { return blocks.empty() ? 0 : blocks.front().cols(); }

  /// The block-diagonal joint matrix Psi.
  CMat joint_matrix() const {
    Eigen::Index rows = 0, cols = 0;
    for (const CMat& b : blocks) rows += b.rows(), cols += b.cols();
    CMat psi = CMat::Zero(rows, cols);
    Eigen::Index r = 0, c = 0;
    for (const CMat& b : blocks) {
      psi.block(r, c, b.rows(), b.cols()) = b;
      r += b.rows();
      c += b.cols();
    }
    return psi;
  }

  CVec joint_observation() const {
    Eigen::Index rows = 0;
    for (const CVec& y : observations) rows += y.size();
    CVec out(rows);
    Eigen::Index r = 0;
    for (const CVec& y : observations) {
      out.segment(r, y.size()) = y;
      r += y.size();
    }
    return out;
  }

  Eigen::Index total_pilots() const {
    Eigen::Index n = 0;
    for (const CVec& y : observations) n += y.size();
    return n;
  }
};

inline CMat measurement_block(const CVec& symbols, const std::vector<int>& pattern, const PartialFourier& fl) {
  CMat block = fl.rows(pattern);
  for (std::size_t i = 0; i < pattern.size(); ++i) block.row(static_cast<Eigen::Index>(i)) *= symbols(pattern[i]);
  return block;
}

/// One block per cell. `observations` are the eliminated K-vectors; only their
/// pilot rows are kept.
inline MeasurementSystem build_measurement(const std::vector<CVec>& symbols,
                                           const std::vector<std::vector<int>>& patterns,
                                           const PartialFourier& fl, const std::vector<CVec>& observations) {
  if (symbols.size() != patterns.size() || symbols.size() != observations.size())
    throw Error("build_measurement: dimension mismatch");
  MeasurementSystem sys;
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    if (symbols[t].size() != fl.K() || observations[t].size() != fl.K())
      throw Error("build_measurement: dimension mismatch");
    for (int w : patterns[t])
      if (w < 0 || w >= fl.K()) throw Error("build_measurement: pilot index out of range");
    sys.blocks.push_back(measurement_block(symbols[t], patterns[t], fl));
    sys.observations.push_back(gather(observations[t], patterns[t]));
    sys.patterns.push_back(patterns[t]);
  }
  return sys;
}

struct SolverMeta {
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = true;
  bool low_confidence = false;
  bool ill_conditioned = false;
  bool polished = false;
};

struct EstimateResult {
  std::vector<CVec> coefficients;
  std::vector<std::vector<int>> supports;
  std::vector<SolverMeta> meta;

  bool any_warning() const {
    for (const SolverMeta& m : meta)
      if (!m.converged || m.ill_conditioned) return true;
    return false;
  }
};

namespace detail {

inline std::vector<int> support_of(const CVec& c, double rel_threshold = 0.0) {
  const double cutoff = rel_threshold * (c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
  std::vector<int> s;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (std::abs(c(i)) > cutoff && c(i) != cplx(0.0, 0.0)) s.push_back(static_cast<int>(i));
  return s;
}

inline CMat columns(const CMat& a, const std::vector<int>& idx) {
  CMat out(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = a.col(idx[j]);
  return out;
}

template <class BlockSolver>
EstimateResult solve_blocks(const MeasurementSystem& sys, BlockSolver&& solve) {
  EstimateResult out;
  for (std::size_t t = 0; t < sys.num_blocks(); ++t) {
    detail::require(sys.blocks[t].rows() == sys.observations[t].size(), "solver: block/observation mismatch");
    SolverMeta meta;
    CVec c = solve(t, sys.blocks[t], sys.observations[t], meta);
    meta.residual_norm = (sys.observations[t] - sys.blocks[t] * c).norm();
    out.supports.push_back(support_of(c));
    out.coefficients.push_back(std::move(c));
    out.meta.push_back(meta);
  }
  return out;
}

}  // namespace detail

inline constexpr double kConditionLimit = 1e12;

/// Minimum-norm least squares per block. Flags blocks whose nonzero singular
/// spectrum spans more than 1e12 or that are column-rank deficient.
inline EstimateResult solve_ls(const MeasurementSystem& sys) {
  return detail::solve_blocks(sys, [](std::size_t, const CMat& a, const CVec& y, SolverMeta& meta) {
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(a);
    Eigen::BDCSVD<CMat> svd(a);
    const RVec& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    const double smin = s.size() ? s(s.size() - 1) : 0.0;
    meta.ill_conditioned = cod.rank() < a.cols() || smin <= 0.0 || smax / smin > kConditionLimit;
    meta.iterations = 1;
    return CVec(cod.solve(y));
  });
}

struct OmpOptions {
  int sparsity = 8;
  double residual_tol = -1.0;  // >= 0 switches to residual stopping, sparsity becomes a cap
};

/// Greedy selection on normalized correlations (first maximum wins), with the
/// residual kept orthogonal to the chosen atoms, then a QR fit on the support.
inline CVec omp_block(const CMat& a, const CVec& y, const OmpOptions& opt, SolverMeta& meta) {
  const Eigen::Index P = a.rows(), L = a.cols();
  detail::require(opt.sparsity >= 0 && opt.sparsity <= L, "solve_omp: sparsity must be in [0, L]");
  const bool tol_mode = opt.residual_tol >= 0.0;
  const int cap = static_cast<int>(std::min<Eigen::Index>(opt.sparsity, std::min(P, L)));
  const double y_norm = y.norm();

  RVec col_norm = a.colwise().norm().transpose();
  std::vector<char> chosen(static_cast<std::size_t>(L), 0);
  std::vector<int> support;
  CMat basis(P, 0);
  CVec r = y;

  while (static_cast<int>(support.size()) < cap) {
    if (tol_mode && r.norm() <= opt.residual_tol) break;
    if (r.norm() <= 1e-13 * y_norm || y_norm == 0.0) break;
    const CVec corr = a.adjoint() * r;
    int best = -1;
    double best_val = -1.0;
    for (Eigen::Index j = 0; j < L; ++j) {
      if (chosen[static_cast<std::size_t>(j)] || col_norm(j) == 0.0) continue;
      const double v = std::abs(corr(j)) / col_norm(j);
      if (v > best_val) best_val = v, best = static_cast<int>(j);
    }
    if (best < 0) break;
    chosen[static_cast<std::size_t>(best)] = 1;
    support.push_back(best);

    // Twice-iterated Gram-Schmidt against the current orthonormal basis.
    CVec q = a.col(best);
    for (int pass = 0; pass < 2; ++pass) q -= basis * (basis.adjoint() * q);
    const double qn = q.norm();
    if (qn <= 1e-14 * col_norm(best)) break;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = q / qn;
    r = y - basis * (basis.adjoint() * y);
    ++meta.iterations;
  }

  CVec c = CVec::Zero(L);
  if (!support.empty()) {
    std::sort(support.begin(), support.end());
    const CMat sub = detail::columns(a, support);
    const CVec coef = sub.colPivHouseholderQr().solve(y);
    for (std::size_t i = 0; i < support.size(); ++i) c(support[i]) = coef(static_cast<Eigen::Index>(i));
  }
  const double explained = y.squaredNorm() - (y - a * c).squaredNorm();
  meta.low_confidence = (y_norm > 0.0 && explained < 0.5 * y.squaredNorm()) ||
                        (tol_mode && (y - a * c).norm() > opt.residual_tol);
  return c;
}

inline EstimateResult solve_omp(const MeasurementSystem& sys, const OmpOptions& opt = {}) {
  return detail::solve_blocks(sys, [&](std::size_t, const CMat& a, const CVec& y, SolverMeta& meta) {
    return omp_block(a, y, opt, meta);
  });
}

struct BpdnOptions {
  double epsilon = 0.0;  // total over all blocks; block t gets eps * sqrt(P_t / sum P)
  int max_iterations = 20000;
  double tolerance = 1e-8;
  bool polish = true;
  int polish_every = 25;
};

/// sqrt(P) sigma sqrt(1 + 2 sqrt(2) / sqrt(P)) for P pilot observations.
inline double default_bpdn_epsilon(double total_pilots, double sigma) {
  return std::sqrt(total_pilots) * sigma * std::sqrt(1.0 + 2.0 * std::sqrt(2.0) / std::sqrt(total_pilots));
}

namespace detail {

inline CVec soft_threshold(const CVec& v, double t) {
  CVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v(i));
    out(i) = m > t ? v(i) * ((m - t) / m) : cplx(0.0, 0.0);
  }
  return out;
}

// Exact minimizer of ||c||_1 with ||A_S c - y|| = eps on a fixed support,
// provided the sign pattern is self-consistent and the off-support optimality
// condition |a_j^H r| <= mu holds.
inline bool bpdn_polish(const CMat& a, const CVec& y, double eps, const CVec& start, double threshold, CVec& out) {
  std::vector<int> s = support_of(start, threshold);
  if (s.empty()) return false;
  const CMat as = columns(a, s);
  if (static_cast<Eigen::Index>(s.size()) > a.rows()) return false;
  const CMat gram = as.adjoint() * as;
  Eigen::LDLT<CMat> ldlt(gram);
  if (ldlt.info() != Eigen::Success) return false;
  const CVec ls = ldlt.solve(as.adjoint() * y);
  const double r0 = (y - as * ls).squaredNorm();
  if (eps * eps < r0) return false;

  CVec u(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const cplx v = start(s[i]);
    u(static_cast<Eigen::Index>(i)) = v / std::abs(v);
  }
  CVec c;
  double mu = 0.0;
  for (int it = 0; it < 50; ++it) {
    const CVec minv_u = ldlt.solve(u);
    const double vn = (as * minv_u).squaredNorm();
    if (vn <= 0.0) return false;
    mu = std::sqrt((eps * eps - r0) / vn);
    c = ls - mu * minv_u;
    CVec next(u.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (std::abs(c(i)) == 0.0) return false;
      next(i) = c(i) / std::abs(c(i));
    }
    const double change = (next - u).cwiseAbs().maxCoeff();
    u = next;
    if (change < 1e-13) break;
  }
  // c must keep the phases it was built with.
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (std::abs(c(i) / std::abs(c(i)) - u(i)) > 1e-9) return false;

  CVec full = CVec::Zero(a.cols());
  for (std::size_t i = 0; i < s.size(); ++i) full(s[i]) = c(static_cast<Eigen::Index>(i));
  const CVec r = y - a * full;
  const CVec corr = a.adjoint() * r;
  std::vector<char> on(static_cast<std::size_t>(a.cols()), 0);
  for (int j : s) on[static_cast<std::size_t>(j)] = 1;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (!on[static_cast<std::size_t>(j)] && std::abs(corr(j)) > mu * (1.0 + 1e-6)) return false;
  out = full;
  return true;
}

}  // namespace detail

/// min ||c||_1 subject to ||A c - y|| <= eps_t per block, by a primal-dual
/// (Chambolle-Pock) iteration. Every `polish_every` steps the current support
/// is handed to an exact solve; if that point passes the optimality check it is
/// the minimizer and the iteration stops.
inline CVec bpdn_block(const CMat& a, const CVec& y, double eps, const BpdnOptions& opt, SolverMeta& meta) {
  detail::require(eps >= 0.0, "solve_bpdn: epsilon must be non-negative");
  const Eigen::Index L = a.cols();
  if (y.norm() <= eps) {
    meta.iterations = 0;
    return CVec::Zero(L);
  }
  const double op_norm = Eigen::BDCSVD<CMat>(a).singularValues()(0);
  detail::require(op_norm > 0.0, "solve_bpdn: zero measurement block");
  const double step = 0.99 / op_norm;

  auto try_polish = [&](const CVec& x, CVec& out) {
    if (!opt.polish) return false;
    for (double threshold : {1e-2, 1e-4, 1e-6}) {
      CVec candidate;
      if (detail::bpdn_polish(a, y, eps, x, threshold, candidate)) {
        out = candidate;
        return true;
      }
    }
    return false;
  };

  CVec x = CVec::Zero(L), x_bar = x, z = CVec::Zero(a.rows());
  double prev_obj = 0.0;
  meta.converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const CVec v = z + step * (a * x_bar) - step * y;
    const double vn = v.norm();
    z = vn > 0.0 ? CVec(v * std::max(0.0, 1.0 - step * eps / vn)) : CVec(v);
    const CVec x_next = detail::soft_threshold(x - step * (a.adjoint() * z), step);
    x_bar = 2.0 * x_next - x;
    x = x_next;
    const double obj = x.cwiseAbs().sum();
    const double feas = (a * x - y).norm();
    if (it > 10 && std::abs(obj - prev_obj) <= opt.tolerance * std::max(obj, 1e-300) &&
        feas <= eps * (1.0 + 1e-6) + 1e-12) {
      meta.converged = true;
      ++it;
      break;
    }
    prev_obj = obj;
    if (opt.polish_every > 0 && (it + 1) % opt.polish_every == 0) {
      CVec polished;
      if (try_polish(x, polished)) {
        meta.iterations = it + 1;
        meta.polished = true;
        meta.converged = true;
        return polished;
      }
    }
  }
  meta.iterations = it;
  CVec polished;
  if (try_polish(x, polished)) {
    meta.polished = true;
    meta.converged = true;
    return polished;
  }
  return x;
}

inline EstimateResult solve_bpdn(const MeasurementSystem& sys, const BpdnOptions& opt) {
  detail::require(opt.epsilon >= 0.0, "solve_bpdn: epsilon must be non-negative");
  const double total = static_cast<double>(sys.total_pilots());
  return detail::solve_blocks(sys, [&](std::size_t, const CMat& a, const CVec& y, SolverMeta& meta) {
    const double eps = total > 0.0 ? opt.epsilon * std::sqrt(a.rows() / total) : 0.0;
    return bpdn_block(a, y, eps, opt, meta);
  });
}

/// Least squares restricted to a known support (the genie bound).
inline CVec oracle_support_ls(const CMat& a, const CVec& y, const std::vector<int>& support) {
  CVec c = CVec::Zero(a.cols());
  if (support.empty()) return c;
  const CVec coef = detail::columns(a, support).colPivHouseholderQr().solve(y);
  for (std::size_t i = 0; i < support.size(); ++i) c(support[i]) = coef(static_cast<Eigen::Index>(i));
  return c;
}

/// H_hat = D_{q*} diag(F_L c_hat), dense.
inline FreqChannel reconstruct_one(const CVec& coefficients, const FreqBasis& basis, int q_star,
                                   const PartialFourier& fl) {
  detail::require(q_star >= 0 && q_star <= basis.Q(), "reconstruct: dominant index out of range");
  const CVec response = fl.response(coefficients);
  CMat h = basis.d_matrices[static_cast<std::size_t>(q_star)];
  for (Eigen::Index n = 0; n < h.cols(); ++n) h.col(n) *= response(n);
  return FreqChannel(std::move(h));
}

inline std::vector<FreqChannel> reconstruct(const EstimateResult& result, const FreqBasis& basis,
                                            const std::vector<int>& q_stars, const PartialFourier& fl) {
  detail::require(q_stars.size() == result.coefficients.size(), "reconstruct: one index per block");
  std::vector<FreqChannel> out;
  for (std::size_t t = 0; t < q_stars.size(); ++t)
    out.push_back(reconstruct_one(result.coefficients[t], basis, q_stars[t], fl));
  return out;
}

/// Same estimate in factored form, O(K log K) to apply.
inline FactoredChannel reconstruct_factored(const CVec& coefficients, const BasisSet& basis, int q_star,
                                            const PartialFourier& fl) {
  detail::require(q_star >= 0 && q_star <= basis.config.Q, "reconstruct: dominant index out of range");
  return {basis.vectors[static_cast<std::size_t>(q_star)], fl.response(coefficients)};
}

/// (1 / (I K^2)) sum ||H - H_hat||_F^2.
inline double mse(const std::vector<FreqChannel>& truth, const std::vector<FreqChannel>& estimate, int trials) {
  detail::require(truth.size() == estimate.size(), "mse: shape mismatch");
  detail::require(trials >= 1, "mse: trials must be positive");
  double total = 0.0;
  double K = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    detail::require(truth[i].K() == estimate[i].K(), "mse: shape mismatch");
    total += (truth[i].matrix() - estimate[i].matrix()).squaredNorm();
    K = truth[i].K();
  }
  return truth.empty() ? 0.0 : total / (trials * K * K);
}

}  // namespace posce
