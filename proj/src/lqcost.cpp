#include "lqot/lqcost.hpp"

#include "lqot/errors.hpp"

#include <cmath>

namespace lqot {

Matrix hamiltonian_matrix(const LinearQuadraticSystem& sys) {
    const int n = sys.n;
    Matrix M(2 * n, 2 * n);
    M.topLeftCorner(n, n) = sys.A;
    M.topRightCorner(n, n) = sys.input_gram();
    M.bottomLeftCorner(n, n) = sys.W;
    M.bottomRightCorner(n, n) = -sys.A.transpose();
    return M;
}

FundamentalBlocks fundamental_solution(const LinearQuadraticSystem& sys, double t) {
    const int n = sys.n;
    const Matrix R = matrix_exponential(hamiltonian_matrix(sys), t);
    FundamentalBlocks blk;
    blk.R1 = R.topLeftCorner(n, n);
    blk.R2 = R.topRightCorner(n, n);
    blk.R3 = R.bottomLeftCorner(n, n);
    blk.R4 = R.bottomRightCorner(n, n);
    return blk;
}

CostModel cost_matrices(const LinearQuadraticSystem& sys) {
    const int n = sys.n;
    const auto rank_report = controllability_subspace(sys.A, sys.B);
    if (!rank_report.is_controllable) {
        fail(ErrorCode::NotControllable,
             "controllability rank is " + std::to_string(rank_report.d) + " < n = " +
                 std::to_string(n));
    }

    const Matrix M = hamiltonian_matrix(sys);
    const Matrix S = sys.input_gram();

    // Integrands of Q1, Q2, C stacked into one 3n x n quadrature pass.
    auto integrand = [&](double t) -> Matrix {
        const Matrix R = matrix_exponential(M, t);
        const Matrix R1 = R.topLeftCorner(n, n);
        const Matrix R2 = R.topRightCorner(n, n);
        const Matrix R3 = R.bottomLeftCorner(n, n);
        const Matrix R4 = R.bottomRightCorner(n, n);
        Matrix out(3 * n, n);
        out.topRows(n) = R1.transpose() * sys.W * R1 + R3.transpose() * S * R3;
        out.middleRows(n, n) = R2.transpose() * sys.W * R2 + R4.transpose() * S * R4;
        out.bottomRows(n) = R1.transpose() * sys.W * R2 + R3.transpose() * S * R4;
        return out;
    };
    const Matrix stacked = integrate_matrix(integrand, 0.0, 1.0);

    CostModel model;
    model.n = n;
    model.Q1 = stacked.topRows(n);
    model.Q2 = stacked.middleRows(n, n);
    model.C = stacked.bottomRows(n);

    const FundamentalBlocks blk = fundamental_solution(sys, 1.0);
    model.R1 = blk.R1;
    model.R2 = blk.R2;
    model.R3 = blk.R3;
    model.R4 = blk.R4;

    model.cond_R2 = cond_2norm(model.R2);
    if (!(model.cond_R2 < tol::cond_limit)) {
        fail(ErrorCode::IllConditioned,
             "cond(R2(1)) = " + std::to_string(model.cond_R2) + " exceeds 1e12");
    }

    Eigen::PartialPivLU<Matrix> lu(model.R2);
    const Matrix E = lu.solve(Matrix::Identity(n, n));
    model.E = E;
    model.D = lu.solve(model.R1);
    model.F = E.transpose() * model.Q2 * E;

    // Stationarity relations the closed form must satisfy. Their evaluation
    // cancels terms of size ~ |R1||E||Q2|, so residuals are measured against
    // that magnitude, not against the (possibly tiny) results.
    const double relation_scale = model.R1.norm() * E.norm() * model.Q2.norm();
    const Matrix C_expected =
        -Matrix::Identity(n, n) + model.R1.transpose() * E.transpose() * model.Q2;
    if (rel_err(model.C, C_expected, relation_scale) > 1e-9) {
        fail(ErrorCode::ConsistencyFailure, "C relation residual exceeds 1e-9");
    }
    const Matrix Q1_expected = model.C * model.D;
    if (rel_err(model.Q1, Q1_expected, relation_scale) > 1e-9) {
        fail(ErrorCode::ConsistencyFailure, "Q1 relation residual exceeds 1e-9");
    }

    const double sym_tol =
        std::max(1e-10, 50.0 * std::numeric_limits<double>::epsilon() * model.cond_R2);
    if (!is_symmetric(model.D, sym_tol) || !is_symmetric(model.F, sym_tol)) {
        fail(ErrorCode::ConsistencyFailure, "D or F lost symmetry");
    }
    model.D = 0.5 * (model.D + model.D.transpose());
    model.F = 0.5 * (model.F + model.F.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> ed(model.D, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> ef(model.F, Eigen::EigenvaluesOnly);
    if (ed.eigenvalues().minCoeff() <= 0.0 || ef.eigenvalues().minCoeff() <= 0.0) {
        fail(ErrorCode::ConsistencyFailure, "D or F is not positive definite");
    }
    return model;
}

double eval_cost(const CostModel& model, const Vector& x, const Vector& y) {
    if (x.size() != model.n || y.size() != model.n) {
        fail(ErrorCode::ShapeMismatch, "eval_cost arguments must be n-vectors");
    }
    const double value = 0.5 * quadratic_form(x, model.D, x) - quadratic_form(x, model.E, y) +
                         0.5 * quadratic_form(y, model.F, y);
    const double floor = -1e-12 * (1.0 + x.squaredNorm() + y.squaredNorm());
    if (value < 0.0 && value >= floor) {
        return 0.0;
    }
    return value;
}

Vector initial_adjoint(const CostModel& model, const Vector& x, const Vector& y) {
    const Vector rhs = y - model.R1 * x;
    const Vector p = model.R2.partialPivLu().solve(rhs);
    const double residual = (model.R2 * p - rhs).norm();
    if (residual > 1e-10 * (1.0 + x.norm() + y.norm() + model.R2.norm() * p.norm())) {
        fail(ErrorCode::IllConditioned, "adjoint solve residual " + std::to_string(residual));
    }
    return p;
}

namespace {

// Composite quadrature on a uniform grid: Simpson pairs, with a 3/8 tail when
// the interval count is odd.
double composite_simpson(const std::vector<double>& f, double h) {
    const int N = static_cast<int>(f.size()) - 1;
    double total = 0.0;
    int even_end = N;
    if (N % 2 == 1) {
        even_end = N - 3; // leave three intervals for the 3/8 rule
    }
    for (int i = 0; i + 2 <= even_end; i += 2) {
        total += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
    }
    if (N % 2 == 1) {
        const int s = even_end;
        total += 3.0 * h / 8.0 * (f[s] + 3.0 * f[s + 1] + 3.0 * f[s + 2] + f[s + 3]);
    }
    return total;
}

} // namespace

OptimalTrajectory optimal_trajectory(const LinearQuadraticSystem& sys, const CostModel& model,
                                     const Vector& x, const Vector& y, int N) {
    if (N < 2) {
        fail(ErrorCode::PreconditionViolated, "trajectory needs at least 2 intervals");
    }
    const int n = sys.n;
    const Matrix M = hamiltonian_matrix(sys);
    const Matrix Uinv_Bt = sys.U.llt().solve(sys.B.transpose());

    const Vector p0 = initial_adjoint(model, x, y);
    Vector z0(2 * n);
    z0 << x, p0;

    OptimalTrajectory traj;
    traj.times = Vector::LinSpaced(N + 1, 0.0, 1.0);
    traj.states.reserve(N + 1);
    traj.adjoints.reserve(N + 1);
    traj.controls.reserve(N + 1);

    std::vector<double> lagrangian(N + 1);
    for (int i = 0; i <= N; ++i) {
        const Vector z = matrix_exponential(M, traj.times(i)) * z0;
        const Vector xi = z.head(n);
        const Vector pi = z.tail(n);
        const Vector ui = Uinv_Bt * pi;
        lagrangian[i] = 0.5 * xi.dot(sys.W * xi) + 0.5 * ui.dot(sys.U * ui);
        traj.states.push_back(xi);
        traj.adjoints.push_back(pi);
        traj.controls.push_back(ui);
    }
    traj.running_cost = composite_simpson(lagrangian, 1.0 / N);
    return traj;
}

double grammian_cost(const LinearQuadraticSystem& sys, const Vector& x, const Vector& y) {
    if (sys.W.norm() != 0.0) {
        fail(ErrorCode::PreconditionViolated, "grammian_cost requires W = 0");
    }
    const auto rank_report = controllability_subspace(sys.A, sys.B);
    if (!rank_report.is_controllable) {
        fail(ErrorCode::NotControllable, "grammian_cost requires a controllable system");
    }
    const Matrix S = sys.input_gram();
    const Matrix gram = integrate_matrix(
        [&](double t) -> Matrix {
            const Matrix e = matrix_exponential(sys.A, t);
            return e * S * e.transpose();
        },
        0.0, 1.0);
    const Vector r = y - matrix_exponential(sys.A) * x;
    const double value = 0.5 * r.dot(gram.llt().solve(r));
    return std::max(value, 0.0);
}

} // namespace lqot
