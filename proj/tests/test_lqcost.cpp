#include "lqot/errors.hpp"
#include "lqot/lqcost.hpp"
#include "lqot/oracle.hpp"

#include "test_support.hpp"

#include <doctest.h>

using lqot::Error;
using lqot::Matrix;
using lqot::Vector;

namespace {

lqot::LinearQuadraticSystem euclidean(int n) {
    return lqot::validate_system(Matrix::Zero(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n),
                                 Matrix::Identity(n, n));
}

lqot::LinearQuadraticSystem double_integrator() {
    Matrix A(2, 2), B(2, 1), U(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    U << 1;
    return lqot::validate_system(A, B, Matrix::Zero(2, 2), U);
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("hamiltonian_matrix assembles the state-adjoint generator") {
    Matrix one(1, 1);
    one << 1;
    SUBCASE("W = 0") {
        const auto sys = lqot::validate_system(Matrix::Zero(1, 1), one, Matrix::Zero(1, 1), one);
        Matrix expected(2, 2);
        expected << 0, 1, 0, 0;
        CHECK((lqot::hamiltonian_matrix(sys) - expected).norm() == 0.0);
    }
    SUBCASE("W = 1") {
        const auto sys = lqot::validate_system(Matrix::Zero(1, 1), one, one, one);
        Matrix expected(2, 2);
        expected << 0, 1, 1, 0;
        CHECK((lqot::hamiltonian_matrix(sys) - expected).norm() == 0.0);
    }
    SUBCASE("J M is symmetric for random systems") {
        std::mt19937_64 rng(404);
        for (int i = 0; i < 10; ++i) {
            const auto sys = testsup::random_controllable(rng);
            const Matrix M = lqot::hamiltonian_matrix(sys);
            Matrix J = Matrix::Zero(2 * sys.n, 2 * sys.n);
            J.topRightCorner(sys.n, sys.n) = Matrix::Identity(sys.n, sys.n);
            J.bottomLeftCorner(sys.n, sys.n) = -Matrix::Identity(sys.n, sys.n);
            const Matrix JM = J * M;
            CHECK((JM - JM.transpose()).norm() <= 1e-12 * std::max(1.0, JM.norm()));
        }
    }
}

TEST_CASE("fundamental_solution matches the closed forms") {
    SUBCASE("initial condition") {
        const auto blk = lqot::fundamental_solution(euclidean(2), 0.0);
        CHECK((blk.R1 - Matrix::Identity(2, 2)).norm() == 0.0);
        CHECK(blk.R2.norm() == 0.0);
        CHECK(blk.R3.norm() == 0.0);
        CHECK((blk.R4 - Matrix::Identity(2, 2)).norm() == 0.0);
    }
    SUBCASE("Euclidean flow is a shear") {
        const auto blk = lqot::fundamental_solution(euclidean(3), 0.7);
        CHECK((blk.R1 - Matrix::Identity(3, 3)).norm() < 1e-14);
        CHECK((blk.R2 - 0.7 * Matrix::Identity(3, 3)).norm() < 1e-14);
        CHECK(blk.R3.norm() < 1e-14);
    }
    SUBCASE("A = 0, B = U = I, W SPD gives the cosh/sinh blocks") {
        std::mt19937_64 rng(17);
        for (int n : {1, 3}) {
            const Matrix W = testsup::random_spd(rng, n, 1.0);
            const auto sys = lqot::validate_system(Matrix::Zero(n, n), Matrix::Identity(n, n), W,
                                                   Matrix::Identity(n, n));
            for (double t : {0.3, 1.0}) {
                const auto blk = lqot::fundamental_solution(sys, t);
                CHECK((blk.R1 - testsup::cosh_sqrt_series(W, t)).norm() < 1e-10);
                CHECK((blk.R2 - testsup::sinh_sqrt_series(W, t)).norm() < 1e-10);
                CHECK((blk.R3 - W * testsup::sinh_sqrt_series(W, t)).norm() < 1e-10);
                CHECK((blk.R4 - testsup::cosh_sqrt_series(W, t)).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("cost_matrices golden values") {
    SUBCASE("Euclidean recovery") {
        for (int n : {1, 2, 4}) {
            const auto model = lqot::cost_matrices(euclidean(n));
            CHECK((model.D - Matrix::Identity(n, n)).norm() < 1e-12);
            CHECK((model.E - Matrix::Identity(n, n)).norm() < 1e-12);
            CHECK((model.F - Matrix::Identity(n, n)).norm() < 1e-12);
        }
    }
    SUBCASE("scalar system with W = 1") {
        Matrix one(1, 1);
        one << 1;
        const auto sys = lqot::validate_system(Matrix::Zero(1, 1), one, one, one);
        const auto model = lqot::cost_matrices(sys);
        CHECK(model.D(0, 0) == doctest::Approx(std::cosh(1.0) / std::sinh(1.0)).epsilon(1e-12));
        CHECK(model.E(0, 0) == doctest::Approx(1.0 / std::sinh(1.0)).epsilon(1e-12));
        CHECK(model.F(0, 0) == doctest::Approx(std::cosh(1.0) / std::sinh(1.0)).epsilon(1e-12));
    }
    SUBCASE("zero input map is rejected") {
        const auto sys = lqot::validate_system(Matrix::Zero(2, 2), Matrix::Zero(2, 1),
                                               Matrix::Zero(2, 2), Matrix::Identity(1, 1));
        CHECK_THROWS_WITH_AS(lqot::cost_matrices(sys), doctest::Contains("NotControllable"),
                             Error);
    }
}

TEST_CASE("eval_cost on pinned examples") {
    SUBCASE("origin") {
        const auto model = lqot::cost_matrices(euclidean(2));
        CHECK(lqot::eval_cost(model, Vector::Zero(2), Vector::Zero(2)) == 0.0);
    }
    SUBCASE("Euclidean half squared distance") {
        const auto model = lqot::cost_matrices(euclidean(2));
        CHECK(lqot::eval_cost(model, vec2(1, 0), vec2(0, 1)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("double integrator rest-to-rest") {
        // Variational oracle: u(t) = 6 - 12t steers (0,0) to (1,0) with cost
        // (1/2) int u^2 = 6; min_cost_piecewise approaches it from above.
        const auto sys = double_integrator();
        const auto model = lqot::cost_matrices(sys);
        const double c = lqot::eval_cost(model, vec2(0, 0), vec2(1, 0));
        CHECK(c == doctest::Approx(6.0).epsilon(1e-10));
        const double oracle = lqot::min_cost_piecewise(sys, vec2(0, 0), vec2(1, 0), 64).cost;
        CHECK(oracle >= c - 1e-8);
        CHECK(oracle <= c * (1.0 + 1e-3));
    }
}

TEST_CASE("initial_adjoint solves the endpoint equation") {
    const auto model = lqot::cost_matrices(euclidean(2));
    CHECK(lqot::initial_adjoint(model, Vector::Zero(2), Vector::Zero(2)).norm() == 0.0);
    CHECK((lqot::initial_adjoint(model, vec2(1, 0), vec2(0, 1)) - vec2(-1, 1)).norm() < 1e-14);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 10; ++i) {
        const auto sys = testsup::random_controllable(rng);
        const auto m = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);
        const Vector p = lqot::initial_adjoint(m, x, y);
        CHECK((m.R1 * x + m.R2 * p - y).norm() <=
              1e-10 * (1.0 + y.norm() + m.R2.norm() * p.norm()));
    }
}

TEST_CASE("optimal_trajectory reconstruction") {
    SUBCASE("zero endpoints give the zero path") {
        const auto sys = euclidean(2);
        const auto model = lqot::cost_matrices(sys);
        const auto traj = lqot::optimal_trajectory(sys, model, Vector::Zero(2), Vector::Zero(2), 8);
        CHECK(traj.running_cost == doctest::Approx(0.0));
        for (const auto& s : traj.states) {
            CHECK(s.norm() == 0.0);
        }
    }
    SUBCASE("double integrator control matches the variational solution") {
        const auto sys = double_integrator();
        const auto model = lqot::cost_matrices(sys);
        const auto traj = lqot::optimal_trajectory(sys, model, vec2(0, 0), vec2(1, 0), 2000);
        double worst = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double t = traj.times(i);
            worst = std::max(worst, std::abs(traj.controls[i](0) - (6.0 - 12.0 * t)));
        }
        CHECK(worst <= 1e-6);
        CHECK(traj.running_cost == doctest::Approx(6.0).epsilon(1e-8));
        CHECK((traj.states.front() - vec2(0, 0)).norm() < 1e-12);
        CHECK((traj.states.back() - vec2(1, 0)).norm() < 1e-9);
    }
    SUBCASE("Euclidean model moves on a straight line at constant control") {
        const auto sys = euclidean(2);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = vec2(0.2, -0.4), y = vec2(-1.0, 0.5);
        const auto traj = lqot::optimal_trajectory(sys, model, x, y, 64);
        for (int i = 0; i <= 64; ++i) {
            const double t = traj.times(i);
            CHECK((traj.states[i] - (x + t * (y - x))).norm() < 1e-12);
            CHECK((traj.controls[i] - (y - x)).norm() < 1e-12);
        }
    }
    SUBCASE("samples follow the fundamental flow") {
        std::mt19937_64 rng(21);
        const auto sys = testsup::random_controllable(rng);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);
        const auto traj = lqot::optimal_trajectory(sys, model, x, y, 32);
        const Vector p0 = lqot::initial_adjoint(model, x, y);
        const Matrix UinvBt = sys.U.llt().solve(sys.B.transpose());
        for (int i = 0; i <= 32; ++i) {
            const auto blk = lqot::fundamental_solution(sys, traj.times(i));
            CHECK((traj.states[i] - (blk.R1 * x + blk.R2 * p0)).norm() < 1e-9);
            CHECK((traj.adjoints[i] - (blk.R3 * x + blk.R4 * p0)).norm() < 1e-9);
            CHECK((traj.controls[i] - UinvBt * traj.adjoints[i]).norm() < 1e-12);
        }
    }
}

TEST_CASE("grammian_cost agrees with the closed form when W = 0") {
    SUBCASE("Euclidean") {
        std::mt19937_64 rng(3);
        const auto sys = euclidean(3);
        const Vector x = testsup::random_vector(rng, 3);
        const Vector y = testsup::random_vector(rng, 3);
        CHECK(lqot::grammian_cost(sys, x, y) ==
              doctest::Approx(0.5 * (y - x).squaredNorm()).epsilon(1e-12));
        CHECK(lqot::grammian_cost(sys, x, x) == doctest::Approx(0.0));
    }
    SUBCASE("double integrator") {
        CHECK(lqot::grammian_cost(double_integrator(), vec2(0, 0), vec2(1, 0)) ==
              doctest::Approx(6.0).epsilon(1e-9));
    }
    SUBCASE("requires W = 0") {
        Matrix one(1, 1);
        one << 1;
        const auto sys = lqot::validate_system(Matrix::Zero(1, 1), one, one, one);
        CHECK_THROWS_WITH_AS(lqot::grammian_cost(sys, Vector::Zero(1), Vector::Zero(1)),
                             doctest::Contains("PreconditionViolated"), Error);
    }
}

TEST_CASE("fundamental solution is symplectic") {
    std::mt19937_64 rng(55);
    for (int i = 0; i < 12; ++i) {
        const auto sys = testsup::random_controllable(rng, 5, 3);
        const int n = sys.n;
        Matrix J = Matrix::Zero(2 * n, 2 * n);
        J.topRightCorner(n, n) = Matrix::Identity(n, n);
        J.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
        for (double t : {0.25, 0.5, 0.75, 1.0}) {
            const Matrix R = lqot::matrix_exponential(lqot::hamiltonian_matrix(sys), t);
            CHECK((R.transpose() * J * R - J).norm() <= 1e-10);
        }
    }
}

TEST_CASE("triple consistency: closed form, trajectory quadrature, Grammian") {
    std::mt19937_64 rng(808);
    for (int i = 0; i < 12; ++i) {
        const bool zero_W = (i % 2 == 0);
        const auto sys = testsup::random_controllable(rng, 4, 3, zero_W);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);
        const double c = lqot::eval_cost(model, x, y);

        const auto traj = lqot::optimal_trajectory(sys, model, x, y, 4096);
        CHECK(std::abs(traj.running_cost - c) <= 1e-6 * std::max(1.0, std::abs(c)));

        if (zero_W) {
            const double g = lqot::grammian_cost(sys, x, y);
            CHECK(std::abs(g - c) <= 1e-8 * std::max(1.0, std::abs(c)));
        }
    }
}

TEST_CASE("piecewise-control suboptimality envelope") {
    std::mt19937_64 rng(606);
    for (int i = 0; i < 5; ++i) {
        const auto sys = testsup::random_controllable(rng, 3, 2);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);
        const double c = lqot::eval_cost(model, x, y);

        double prev = std::numeric_limits<double>::infinity();
        for (int K : {4, 16, 64}) {
            const double value = lqot::min_cost_piecewise(sys, x, y, K).cost;
            CHECK(value >= c - 1e-8);
            CHECK(value <= prev + 1e-9);
            prev = value;
        }
    }
}

TEST_CASE("adjoint is the negative x-gradient of the cost") {
    std::mt19937_64 rng(909);
    for (int i = 0; i < 10; ++i) {
        const auto sys = testsup::random_controllable(rng);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);

        const Vector p0 = lqot::initial_adjoint(model, x, y);
        const Vector grad = model.D * x - model.E * y;
        CHECK((grad + p0).norm() <= 1e-9 * (1.0 + p0.norm()));

        // Central differences of eval_cost confirm the analytic gradient.
        const double h = 1e-5;
        for (int k = 0; k < sys.n; ++k) {
            Vector xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            const double fd =
                (lqot::eval_cost(model, xp, y) - lqot::eval_cost(model, xm, y)) / (2.0 * h);
            CHECK(std::abs(fd - grad(k)) <= 1e-6 * (1.0 + std::abs(grad(k))));
        }
    }
}

TEST_CASE("D and F stay positive definite across random instances") {
    std::mt19937_64 rng(111);
    for (int i = 0; i < 20; ++i) {
        const auto sys = testsup::random_controllable(rng);
        const auto model = lqot::cost_matrices(sys);
        Eigen::SelfAdjointEigenSolver<Matrix> ed(model.D, Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Matrix> ef(model.F, Eigen::EigenvaluesOnly);
        CHECK(ed.eigenvalues().minCoeff() > 0.0);
        CHECK(ef.eigenvalues().minCoeff() > 0.0);
    }
}
