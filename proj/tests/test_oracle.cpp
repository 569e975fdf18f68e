#include "lqot/errors.hpp"
#include "lqot/oracle.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using lqot::Error;
using lqot::Matrix;
using lqot::Vector;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

lqot::DiscreteMeasure uniform_atoms(int N, int dim, std::mt19937_64& rng) {
    std::vector<Vector> pts;
    for (int i = 0; i < N; ++i) {
        pts.push_back(testsup::random_vector(rng, dim));
    }
    return lqot::make_measure(std::move(pts), std::vector<double>(N, 1.0));
}

} // namespace

TEST_CASE("min_cost_piecewise basics") {
    SUBCASE("zero endpoints cost nothing") {
        std::mt19937_64 rng(12);
        const auto sys = testsup::random_controllable(rng);
        const auto res = lqot::min_cost_piecewise(sys, Vector::Zero(sys.n), Vector::Zero(sys.n), 4);
        CHECK(std::abs(res.cost) <= 1e-12);
        for (const auto& u : res.control.values) {
            CHECK(u.norm() <= 1e-9);
        }
    }
    SUBCASE("double integrator converges from above, monotonically") {
        Matrix A(2, 2), B(2, 1), U(1, 1);
        A << 0, 1, 0, 0;
        B << 0, 1;
        U << 1;
        const auto sys = lqot::validate_system(A, B, Matrix::Zero(2, 2), U);
        double prev = std::numeric_limits<double>::infinity();
        for (int K : {4, 8, 16, 32, 64}) {
            const double value = lqot::min_cost_piecewise(sys, vec2(0, 0), vec2(1, 0), K).cost;
            CHECK(value >= 6.0 - 1e-9);
            CHECK(value <= prev + 1e-12);
            prev = value;
        }
        // The exact K-piece optimum is 6/(1 - K^{-2}); the 1e-3 gap bound is
        // relative (absolute would be unattainable at K = 64).
        CHECK((prev - 6.0) / 6.0 <= 1e-3);
        CHECK(prev == doctest::Approx(6.0 / (1.0 - 1.0 / 4096.0)).epsilon(1e-9));
    }
    SUBCASE("Euclidean cost is attained by one constant piece") {
        const auto sys = lqot::validate_system(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                                               Matrix::Zero(2, 2), Matrix::Identity(2, 2));
        const Vector x = vec2(0.3, -0.2), y = vec2(-1.0, 0.7);
        const auto res = lqot::min_cost_piecewise(sys, x, y, 1);
        CHECK(res.cost == doctest::Approx(0.5 * (y - x).squaredNorm()).epsilon(1e-12));
        CHECK((res.control.values[0] - (y - x)).norm() <= 1e-10);
    }
    SUBCASE("off-fiber endpoints are rejected") {
        Matrix B(2, 1);
        B << 1, 0;
        const auto sys = lqot::validate_system(Matrix::Identity(2, 2), B, Matrix::Zero(2, 2),
                                               Matrix::Identity(1, 1));
        CHECK_THROWS_WITH_AS(lqot::min_cost_piecewise(sys, vec2(0, 1), vec2(0, 0), 8),
                             doctest::Contains("UnreachableEndpoint"), Error);
        // On-fiber target stays solvable despite the rank-deficient constraint.
        const auto res = lqot::min_cost_piecewise(sys, vec2(0, 1), vec2(0.5, std::exp(1.0)), 8);
        CHECK(res.cost >= 0.0);
    }
}

TEST_CASE("enumerate_ot reference solutions") {
    std::mt19937_64 rng(321);
    SUBCASE("single coupling") {
        const auto mu = uniform_atoms(1, 2, rng);
        const auto nu = uniform_atoms(1, 2, rng);
        Matrix C(1, 1);
        C << 0.37;
        const auto plan = lqot::enumerate_ot(C, mu, nu);
        REQUIRE(plan.couplings.size() == 1);
        CHECK(plan.total_cost == doctest::Approx(0.37));
    }
    SUBCASE("3x3 uniform equals the best of 6 permutations") {
        const auto mu = uniform_atoms(3, 2, rng);
        const auto nu = uniform_atoms(3, 2, rng);
        const Matrix C = testsup::random_matrix(rng, 3, 3, 1.0).cwiseAbs();
        const auto plan = lqot::enumerate_ot(C, mu, nu);

        std::vector<int> perm = {0, 1, 2};
        double best = std::numeric_limits<double>::infinity();
        do {
            double v = 0.0;
            for (int i = 0; i < 3; ++i) {
                v += C(i, perm[i]) / 3.0;
            }
            best = std::min(best, v);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(plan.total_cost == doctest::Approx(best).epsilon(1e-14));
    }
    SUBCASE("diagonal optimum") {
        const auto mu = uniform_atoms(2, 1, rng);
        const auto nu = uniform_atoms(2, 1, rng);
        Matrix C(2, 2);
        C << 0, 1, 1, 0;
        const auto plan = lqot::enumerate_ot(C, mu, nu);
        CHECK(plan.total_cost == doctest::Approx(0.0));
        CHECK(plan.couplings[0].j == 0);
        CHECK(plan.couplings[1].j == 1);
    }
    SUBCASE("vertex enumeration agrees with the permutation path") {
        const auto mu = uniform_atoms(4, 2, rng);
        const auto nu = uniform_atoms(4, 2, rng);
        const Matrix C = testsup::random_matrix(rng, 4, 4, 1.0).cwiseAbs();
        const auto by_perm = lqot::enumerate_ot(C, mu, nu);

        // Perturb weights infinitesimally off uniform to force the vertex path.
        std::vector<double> w = {0.25 + 1e-13, 0.25 - 1e-13, 0.25, 0.25};
        const auto mu2 = lqot::make_measure(mu.points, w);
        const auto by_vertex = lqot::enumerate_ot(C, mu2, nu);
        CHECK(std::abs(by_perm.total_cost - by_vertex.total_cost) <= 1e-9);
    }
    SUBCASE("the 8+8 permutation bound agrees with the solver") {
        const auto mu = uniform_atoms(8, 2, rng);
        const auto nu = uniform_atoms(8, 2, rng);
        const Matrix C = testsup::random_matrix(rng, 8, 8, 1.0).cwiseAbs();
        const auto ref = lqot::enumerate_ot(C, mu, nu);
        const auto sol = lqot::solve_discrete_ot(C, mu, nu);
        CHECK(std::abs(ref.total_cost - sol.plan.total_cost) <= 1e-9);
    }
    SUBCASE("size bounds are enforced") {
        const auto mu = uniform_atoms(9, 1, rng);
        const auto nu = uniform_atoms(9, 1, rng);
        const Matrix C = Matrix::Zero(9, 9);
        CHECK_THROWS_WITH_AS(lqot::enumerate_ot(C, mu, nu), doctest::Contains("TooLarge"), Error);
    }
}

TEST_CASE("piecewise oracle keeps the closed form as a lower bound") {
    std::mt19937_64 rng(555);
    for (int i = 0; i < 6; ++i) {
        const auto sys = testsup::random_controllable(rng, 3, 2);
        const auto model = lqot::cost_matrices(sys);
        const Vector x = testsup::random_vector(rng, sys.n);
        const Vector y = testsup::random_vector(rng, sys.n);
        const double c = lqot::eval_cost(model, x, y);
        for (int K : {4, 8, 16, 32, 64}) {
            CHECK(lqot::min_cost_piecewise(sys, x, y, K).cost >= c - 1e-8);
        }
    }
}
