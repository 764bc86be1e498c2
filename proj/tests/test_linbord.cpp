#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "harmocont/linbord.hpp"
#include "harmocont/models.hpp"

using namespace harmocont;

namespace {

Matrix random_matrix(std::mt19937& rng, int rows, int cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    return a;
}

// Roots of the characteristic polynomial by Durand-Kerner; coefficients from the
// Faddeev-LeVerrier recursion. Independent of the Hessenberg/QR path.
std::vector<std::complex<double>> charpoly_roots(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<double> c(n + 1);  // monic: lambda^n + c[1] lambda^(n-1) + ... + c[n]
    c[0] = 1.0;
    Matrix M = Matrix::Zero(n, n);
    const Matrix I = Matrix::Identity(n, n);
    for (int k = 1; k <= n; ++k) {
        M = a * M + c[k - 1] * I;
        c[k] = -(a * M).trace() / k;
    }
    auto poly = [&](std::complex<double> z) {
        std::complex<double> s = 1.0;
        for (int k = 1; k <= n; ++k) s = s * z + c[k];
        return s;
    };
    std::vector<std::complex<double>> z(n);
    for (int i = 0; i < n; ++i) z[i] = std::pow(std::complex<double>(0.4, 0.9), i) * (1.0 + a.norm());
    for (int it = 0; it < 2000; ++it) {
        for (int i = 0; i < n; ++i) {
            std::complex<double> den = 1.0;
            for (int j = 0; j < n; ++j)
                if (j != i) den *= z[i] - z[j];
            z[i] -= poly(z[i]) / den;
        }
    }
    return z;
}

}  // namespace

TEST(LuSolve, Identity) {
    Vector b(3);
    b << 1.5, -2, 7;
    EXPECT_EQ(lu_solve(Matrix::Identity(3, 3), b), b);
}

TEST(LuSolve, Diagonal) {
    Matrix a(2, 2);
    a << 2, 0, 0, 4;
    Vector b(2);
    b << 2, 8;
    const Vector x = lu_solve(a, b);
    EXPECT_DOUBLE_EQ(x[0], 1.0);
    EXPECT_DOUBLE_EQ(x[1], 2.0);
}

TEST(LuSolve, RandomResidual) {
    std::mt19937 rng(1);
    const Matrix a = random_matrix(rng, 50, 50) + 10.0 * Matrix::Identity(50, 50);
    const Vector b = random_matrix(rng, 50, 1);
    const Vector x = lu_solve(a, b);
    EXPECT_LT((a * x - b).norm() / b.norm(), 1e-12);
}

TEST(LuSolve, SingularReportsPivot) {
    Matrix a(3, 3);
    a << 1, 2, 3, 2, 4, 6, 1, 0, 1;
    try {
        lu_solve(a, Vector::Ones(3));
        FAIL() << "expected a singularity error";
    } catch (const SingularMatrixError& e) {
        EXPECT_EQ(e.pivot_index(), 2u);
    }
}

TEST(LuSolve, ShapeChecks) {
    EXPECT_THROW(lu_solve(Matrix::Identity(3, 2), Vector::Ones(3)), ContractViolation);
    EXPECT_THROW(lu_solve(Matrix::Identity(3, 3), Vector::Ones(2)), ContractViolation);
}

TEST(SolveBordered, DecoupledBlocks) {
    std::mt19937 rng(2);
    BorderedSystem s;
    s.core = random_matrix(rng, 6, 6) + 5.0 * Matrix::Identity(6, 6);
    s.border_cols = Matrix::Zero(6, 2);
    s.border_rows = Matrix::Zero(2, 6);
    s.corner = Matrix::Identity(2, 2);
    const Vector b = random_matrix(rng, 6, 1);
    Vector c(2);
    c << 3, -4;
    s.rhs.resize(8);
    s.rhs << b, c;
    const Vector x = solve_bordered(s);
    EXPECT_LT((x.head(6) - lu_solve(s.core, b)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_DOUBLE_EQ(x[6], 3);
    EXPECT_DOUBLE_EQ(x[7], -4);
}

TEST(SolveBordered, PureCorner) {
    BorderedSystem s;
    s.core = Matrix(0, 0);
    s.corner = Matrix(2, 2);
    s.corner << 2, 1, 1, 3;
    s.rhs = Vector(2);
    s.rhs << 3, 4;
    const Vector x = solve_bordered(s);
    EXPECT_LT((x - lu_solve(s.corner, s.rhs)).norm(), 1e-15);
}

TEST(SolveBordered, MismatchedBordersRejected) {
    BorderedSystem s;
    s.core = Matrix::Identity(3, 3);
    s.border_cols = Matrix::Zero(3, 2);
    s.border_rows = Matrix::Zero(1, 3);
    s.corner = Matrix::Identity(1, 2);
    s.rhs = Vector::Zero(4);
    EXPECT_THROW(solve_bordered(s), ContractViolation);
}

// Block elimination with a nonsingular core as the second, independent route.
TEST(SolveBordered, MatchesBlockEliminationOnRandomInstances) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int N = 5 + trial % 20, m = 1 + trial % 3;
        BorderedSystem s;
        s.core = random_matrix(rng, N, N) + 4.0 * Matrix::Identity(N, N);
        s.border_cols = random_matrix(rng, N, m);
        s.border_rows = random_matrix(rng, m, N);
        s.corner = random_matrix(rng, m, m) + 3.0 * Matrix::Identity(m, m);
        s.rhs = random_matrix(rng, N + m, 1);
        const Vector x = solve_bordered(s);

        const Matrix Ainv_B = s.core.fullPivLu().solve(s.border_cols);
        const Vector Ainv_f = s.core.fullPivLu().solve(s.rhs.head(N));
        const Matrix schur = s.corner - s.border_rows * Ainv_B;
        const Vector y = schur.fullPivLu().solve(s.rhs.tail(m) - s.border_rows * Ainv_f);
        const Vector xc = Ainv_f - Ainv_B * y;
        Vector ref(N + m);
        ref << xc, y;
        EXPECT_LT((x - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Eigenvalues, Diagonal) {
    const Spectrum s = eigenvalues(Vector::LinSpaced(3, 1, 3).asDiagonal().toDenseMatrix());
    ASSERT_EQ(s.size(), 3u);
    EXPECT_NEAR(s[0].real(), 3, 1e-14);
    EXPECT_NEAR(s[1].real(), 2, 1e-14);
    EXPECT_NEAR(s[2].real(), 1, 1e-14);
}

TEST(Eigenvalues, RotationGenerator) {
    Matrix a(2, 2);
    a << 0, -1.7, 1.7, 0;
    const Spectrum s = eigenvalues(a);
    EXPECT_NEAR(s[0].imag(), 1.7, 1e-14);
    EXPECT_NEAR(s[1].imag(), -1.7, 1e-14);
    EXPECT_NEAR(s[0].real(), 0, 1e-14);
}

TEST(Eigenvalues, ColpittsAtHopf) {
    const DynSystem sys = models::colpitts_system();
    Vector p = sys.default_params();
    p[models::colpitts_index::G] = 1.0;
    const Matrix J = jacobian_x(sys, Vector::Zero(3), 0.0, p);
    const Spectrum s = eigenvalues(J);
    int real_negative = 0, pair = 0;
    for (const auto& z : s.values) {
        if (std::abs(z.imag()) < 1e-12 && z.real() < 0) ++real_negative;
        if (std::abs(z.imag()) > 1e-6 && std::abs(z.real()) < 1e-8) ++pair;
    }
    EXPECT_EQ(real_negative, 1);
    EXPECT_EQ(pair, 2);
    const auto roots = charpoly_roots(J);
    for (const auto& z : s.values) {
        double best = 1e300;
        for (const auto& r : roots) best = std::min(best, std::abs(r - z));
        EXPECT_LT(best, 1e-9);
    }
}

TEST(Eigenvalues, NonFiniteInputFails) {
    Matrix a = Matrix::Identity(2, 2);
    a(0, 1) = std::nan("");
    EXPECT_THROW(eigenvalues(a), NumericalFailure);
}

TEST(Eigenvalues, TraceDeterminantAndOracleOnRandomMatrices) {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 9;
        const Matrix a = random_matrix(rng, n, n);
        const Spectrum s = eigenvalues(a);
        std::complex<double> sum = 0.0, prod = 1.0;
        for (const auto& z : s.values) {
            sum += z;
            prod *= z;
        }
        const double det = a.determinant();
        EXPECT_LT(std::abs(sum - a.trace()), 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff() * n));
        EXPECT_LT(std::abs(prod - det), 1e-8 * std::max(1.0, std::abs(det)));
        for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s[i - 1].real(), s[i].real());
        // Conjugate pairs.
        for (const auto& z : s.values) {
            double best = 1e300;
            for (const auto& w : s.values) best = std::min(best, std::abs(std::conj(z) - w));
            EXPECT_LT(best, 1e-10 * std::max(1.0, std::abs(z)));
        }
        const auto roots = charpoly_roots(a);
        for (const auto& z : s.values) {
            double best = 1e300;
            for (const auto& r : roots) best = std::min(best, std::abs(r - z));
            EXPECT_LT(best, 1e-6 * std::max(1.0, std::abs(z)));
        }
    }
}
