// Compares the OpenMP cost-matrix kernel against the serial reference on a
// double-integrator cost, and times the exact OT solve on the result.

#include "lqot/lqcost.hpp"
#include "lqot/transport.hpp"

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <functional>

namespace {

double seconds(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    int n_atoms = 512;
    int reps = 3;
    std::uint64_t seed = 20240901;
    CLI::App app{"cost-matrix kernel benchmark (serial vs OpenMP)"};
    app.add_option("--n", n_atoms, "atoms per marginal");
    app.add_option("--reps", reps, "repetitions (best time wins)");
    app.add_option("--seed", seed, "sampling seed");
    CLI11_PARSE(app, argc, argv);

    using lqot::Matrix;
    using lqot::Vector;

    Matrix A(2, 2), B(2, 1), W(2, 2), U(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    W.setZero();
    U << 1;
    const auto sys = lqot::validate_system(A, B, W, U);
    const auto model = lqot::cost_matrices(sys);
    const auto cost = [&](const Vector& x, const Vector& y) {
        return lqot::eval_cost(model, x, y);
    };

    const std::vector<std::pair<double, double>> box = {{0.0, 1.0}, {0.0, 1.0}};
    const auto uniform = [](const Vector&) { return 1.0; };
    const auto mu = lqot::sample_box(uniform, box, n_atoms, seed);
    const auto nu = lqot::sample_box(uniform, box, n_atoms, seed + 1);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("cost matrix: %d x %d entries\n", mu.size(), nu.size());

    Matrix serial, parallel;
    const double t_serial = seconds([&] { serial = lqot::cost_matrix_serial(cost, mu, nu); }, reps);
    const double t_parallel = seconds([&] { parallel = lqot::cost_matrix(cost, mu, nu); }, reps);
    const bool identical = (serial == parallel);

    std::printf("serial   : %9.4f ms\n", 1e3 * t_serial);
    std::printf("parallel : %9.4f ms   (speedup %.2fx)\n", 1e3 * t_parallel,
                t_serial / t_parallel);
    std::printf("bitwise identical: %s\n", identical ? "yes" : "NO");

    const double t_solve =
        seconds([&] { (void)lqot::solve_discrete_ot(parallel, mu, nu); }, 1);
    std::printf("exact OT solve: %9.4f ms\n", 1e3 * t_solve);

    return identical ? 0 : 1;
}
