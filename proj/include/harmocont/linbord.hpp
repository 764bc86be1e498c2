#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <complex>
#include <string>
#include <vector>

#include "dynsys.hpp"
#include "errors.hpp"

namespace harmocont {

namespace linbord_defaults {
/// Pivots smaller than this times the largest column norm of A count as zero.
inline constexpr double singular_pivot_ratio = 1e-14;
}

/// Dense LU with partial pivoting and an explicit singularity test. Value object.
class LuFactorization {
public:
    explicit LuFactorization(const Matrix& a) {
        if (a.rows() != a.cols())
            throw ContractViolation("lu: matrix is " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ", expected square");
        n_ = a.rows();
        if (n_ == 0) return;
        const double scale = a.colwise().norm().maxCoeff();
        lu_.compute(a);
        const auto& packed = lu_.matrixLU();
        const double threshold = linbord_defaults::singular_pivot_ratio * scale;
        for (Eigen::Index i = 0; i < n_; ++i) {
            const double piv = std::abs(packed(i, i));
            if (!(piv > threshold) || scale == 0.0)
                throw SingularMatrixError(static_cast<std::size_t>(i), piv);
        }
    }

    Eigen::Index size() const { return n_; }

    Vector solve(const ConstVecRef& b) const {
        if (b.size() != n_)
            throw ContractViolation("lu: right-hand side has " + std::to_string(b.size()) +
                                    " entries, expected " + std::to_string(n_));
        if (n_ == 0) return Vector(0);
        return lu_.solve(b);
    }

    Matrix solve(const Matrix& b) const {
        if (b.rows() != n_) throw ContractViolation("lu: right-hand side row count mismatch");
        if (n_ == 0) return Matrix(0, b.cols());
        return lu_.solve(b);
    }

private:
    Eigen::Index n_ = 0;
    Eigen::PartialPivLU<Matrix> lu_;
};

inline Vector lu_solve(const Matrix& a, const ConstVecRef& b) { return LuFactorization(a).solve(b); }

/// [ core         border_cols ] [x]   [rhs.head(N)]
/// [ border_rows  corner      ] [y] = [rhs.tail(m)]
struct BorderedSystem {
    Matrix core;         // N x N
    Matrix border_cols;  // N x m
    Matrix border_rows;  // m' x N
    Matrix corner;       // m' x m
    Vector rhs;          // N + m'

    Eigen::Index core_size() const { return core.rows(); }
    Eigen::Index extra_cols() const { return std::max(border_cols.cols(), corner.cols()); }
    Eigen::Index extra_rows() const { return std::max(border_rows.rows(), corner.rows()); }

    void check() const {
        const auto N = core.rows();
        if (core.cols() != N) throw ContractViolation("bordered: core block is not square");
        const auto m = extra_cols(), mr = extra_rows();
        if (m != mr)
            throw ContractViolation("bordered: " + std::to_string(m) + " border columns but " +
                                    std::to_string(mr) + " border rows");
        if ((m > 0 && N > 0 && (border_cols.rows() != N || border_cols.cols() != m)) ||
            (m > 0 && N > 0 && (border_rows.cols() != N || border_rows.rows() != m)) ||
            (m > 0 && (corner.rows() != m || corner.cols() != m)))
            throw ContractViolation("bordered: block shapes are inconsistent");
        if (rhs.size() != N + m) throw ContractViolation("bordered: right-hand side size mismatch");
    }

    Matrix assemble() const {
        check();
        const auto N = core.rows(), m = extra_cols();
        Matrix full = Matrix::Zero(N + m, N + m);
        full.topLeftCorner(N, N) = core;
        if (m > 0) {
            if (N > 0) {
                full.topRightCorner(N, m) = border_cols;
                full.bottomLeftCorner(m, N) = border_rows;
            }
            full.bottomRightCorner(m, m) = corner;
        }
        return full;
    }
};

/// Direct solve of the assembled system; robust when the core block alone is singular
/// (as it is for autonomous periodic problems), which rules out plain block elimination.
inline Vector solve_bordered(const BorderedSystem& sys) { return lu_solve(sys.assemble(), sys.rhs); }

// ---------------------------------------------------------------------------
// Sparse path used by the collocation Newton solver.

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

class SparseFactorization {
public:
    explicit SparseFactorization(const SparseMatrix& a) {
        if (a.rows() != a.cols()) throw ContractViolation("sparse lu: matrix is not square");
        lu_.analyzePattern(a);
        lu_.factorize(a);
        if (lu_.info() != Eigen::Success) throw SingularMatrixError(singular_column(), 0.0);
    }

    Vector solve(const ConstVecRef& b) const {
        Vector x = lu_.solve(Vector(b));
        if (!x.allFinite()) throw SingularMatrixError(0, 0.0);
        return x;
    }

private:
    // Eigen reports "... ZERO COLUMN AT k" for structurally or numerically zero pivots.
    std::size_t singular_column() const {
        const std::string msg = lu_.lastErrorMessage();
        const auto pos = msg.find_last_of(' ');
        if (pos == std::string::npos) return 0;
        try {
            return static_cast<std::size_t>(std::stoul(msg.substr(pos + 1)));
        } catch (const std::exception&) {
            return 0;
        }
    }

    mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

// ---------------------------------------------------------------------------
// Eigenvalues of small dense matrices.

/// Eigenvalues sorted by descending real part, ties by descending imaginary part.
struct Spectrum {
    std::vector<std::complex<double>> values;

    std::size_t size() const { return values.size(); }
    const std::complex<double>& operator[](std::size_t i) const { return values[i]; }
};

namespace detail {
inline void sort_spectrum(std::vector<std::complex<double>>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}
}  // namespace detail

/// Hessenberg reduction followed by shifted QR (Eigen's real Schur decomposition).
inline Spectrum eigenvalues(const Matrix& a) {
    if (a.rows() != a.cols()) throw ContractViolation("eigenvalues: matrix is not square");
    Spectrum s;
    if (a.rows() == 0) return s;
    if (!a.allFinite()) throw NumericalFailure("eigenvalues: matrix has non-finite entries");
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw NumericalFailure("eigenvalues: QR iteration did not converge");
    const auto ev = solver.eigenvalues();
    s.values.assign(ev.data(), ev.data() + ev.size());
    detail::sort_spectrum(s.values);
    return s;
}

/// Unit-norm eigenvector of `a` for the eigenvalue closest to `lambda`.
inline Eigen::VectorXcd eigenvector_near(const Matrix& a, std::complex<double> lambda) {
    Eigen::EigenSolver<Matrix> solver(a, true);
    if (solver.info() != Eigen::Success)
        throw NumericalFailure("eigenvector: QR iteration did not converge");
    const auto ev = solver.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (std::abs(ev[i] - lambda) < std::abs(ev[best] - lambda)) best = i;
    Eigen::VectorXcd q = solver.eigenvectors().col(best);
    return q / q.norm();
}

}  // namespace harmocont
