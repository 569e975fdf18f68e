#include "lqot/linsys.hpp"

#include "lqot/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lqot {

Matrix LinearQuadraticSystem::input_gram() const {
    return B * U.llt().solve(B.transpose());
}

LinearQuadraticSystem validate_system(const Matrix& A, const Matrix& B, const Matrix& W,
                                      const Matrix& U) {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    if (A.cols() != n) {
        fail(ErrorCode::ShapeMismatch, "A must be square");
    }
    if (B.rows() != n) {
        fail(ErrorCode::ShapeMismatch, "B must have as many rows as A");
    }
    if (W.rows() != n || W.cols() != n) {
        fail(ErrorCode::ShapeMismatch, "W must be n x n");
    }
    if (U.rows() != m || U.cols() != m) {
        fail(ErrorCode::ShapeMismatch, "U must be m x m");
    }
    if (n < 1 || m < 1) {
        fail(ErrorCode::ShapeMismatch, "state and control dimensions must be positive");
    }

    if (!is_symmetric(W, tol::psd)) {
        fail(ErrorCode::NonSymmetric, "W is not symmetric");
    }
    if (!is_symmetric(U, tol::psd)) {
        fail(ErrorCode::NonSymmetric, "U is not symmetric");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> ew(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
    const double w_scale = std::max(1.0, ew.eigenvalues().cwiseAbs().maxCoeff());
    if (ew.eigenvalues().minCoeff() < -tol::psd * w_scale) {
        fail(ErrorCode::NotPositiveSemidefinite, "W has a negative eigenvalue");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eu(0.5 * (U + U.transpose()), Eigen::EigenvaluesOnly);
    const double u_scale = std::max(1.0, eu.eigenvalues().cwiseAbs().maxCoeff());
    if (eu.eigenvalues().minCoeff() <= tol::pd * u_scale) {
        fail(ErrorCode::NotPositiveDefinite, "U is not positive definite");
    }

    LinearQuadraticSystem sys;
    sys.A = A;
    sys.B = B;
    sys.W = 0.5 * (W + W.transpose());
    sys.U = 0.5 * (U + U.transpose());
    sys.n = n;
    sys.m = m;
    return sys;
}

namespace {

// Kalman matrix [B, AB, ..., A^{n-1}B], n x (n m).
Matrix kalman_matrix(const Matrix& A, const Matrix& B) {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    Matrix K(n, n * m);
    Matrix block = B;
    for (int k = 0; k < n; ++k) {
        K.middleCols(k * m, m) = block;
        block = A * block;
    }
    return K;
}

// Deterministic sign convention: the largest-magnitude entry of each column is
// made positive (smallest row index on ties).
void fix_column_signs(Matrix& Q) {
    for (int j = 0; j < Q.cols(); ++j) {
        int imax = 0;
        double best = 0.0;
        for (int i = 0; i < Q.rows(); ++i) {
            if (std::abs(Q(i, j)) > best) {
                best = std::abs(Q(i, j));
                imax = i;
            }
        }
        if (Q(imax, j) < 0.0) {
            Q.col(j) = -Q.col(j);
        }
    }
}

ControllabilityReport analyze(const Matrix& A, const Matrix& B, bool want_blocks) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || B.rows() != n) {
        fail(ErrorCode::ShapeMismatch, "controllability analysis needs A n x n and B n x m");
    }

    ControllabilityReport rep;
    rep.n = n;

    const Matrix K = kalman_matrix(A, B);
    Eigen::JacobiSVD<Matrix> svd(K, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;

    int d = 0;
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol::rank * smax && sv(i) > 0.0) {
            ++d;
        }
    }
    rep.d = d;
    rep.is_controllable = (d == n);

    Matrix U_full = svd.matrixU();
    fix_column_signs(U_full);
    rep.V_basis = U_full.leftCols(d);

    if (rep.is_controllable || !want_blocks) {
        rep.P = Matrix::Identity(n, n);
        return rep;
    }

    // New coordinates P x put V first; P orthogonal so P^{-1} = P^T.
    rep.P = U_full.transpose();
    const Matrix At = rep.P * A * rep.P.transpose();
    const Matrix Bt = rep.P * B;
    rep.A1 = At.topLeftCorner(d, d);
    rep.A3 = At.topRightCorner(d, n - d);
    rep.A2 = At.bottomRightCorner(n - d, n - d);
    rep.B1 = Bt.topRows(d);
    return rep;
}

} // namespace

ControllabilityReport controllability_subspace(const Matrix& A, const Matrix& B) {
    return analyze(A, B, /*want_blocks=*/false);
}

ControllabilityReport kalman_decomposition(const Matrix& A, const Matrix& B) {
    return analyze(A, B, /*want_blocks=*/true);
}

bool reachable_target(const Matrix& A, const ControllabilityReport& report, const Vector& x,
                      const Vector& y) {
    if (report.is_controllable) {
        return true;
    }
    const Vector r = matrix_exponential(A) * x - y;
    Vector perp = r;
    if (report.d > 0) {
        perp -= report.V_basis * (report.V_basis.transpose() * r);
    }
    return perp.norm() <= tol::reach * (1.0 + r.norm());
}

} // namespace lqot
