#pragma once

#include "lqot/lqcost.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace lqot {

// Weighted point cloud; weights normalized to total mass 1 and coincident
// points merged on construction.
struct DiscreteMeasure {
    std::vector<Vector> points;
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
};

DiscreteMeasure make_measure(std::vector<Vector> points, std::vector<double> weights);

// N i.i.d. draws from density (up to normalization) on the axis-aligned box,
// by rejection sampling; uniform weights 1/N. Deterministic for a fixed seed.
DiscreteMeasure sample_box(const std::function<double(const Vector&)>& density,
                           const std::vector<std::pair<double, double>>& box, int N,
                           std::uint64_t seed);

// Image measure under x -> M x + b; duplicates merged.
DiscreteMeasure pushforward(const DiscreteMeasure& mu, const Matrix& M, const Vector& b);

struct Coupling {
    int i = 0;
    int j = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<Coupling> couplings; // positive masses only
    double total_cost = 0.0;
    bool is_map = false; // every source atom ships to a single target
};

// Kantorovich potentials at the atoms: psi per source, psi_c per target, with
// psi_c(j) - psi(i) <= c(i,j) everywhere and equality on the plan support.
struct DualPotentials {
    std::vector<double> psi;
    std::vector<double> psi_c;
};

struct OTSolution {
    TransportPlan plan;
    DualPotentials duals;
};

// Dense matrix of pairwise costs; throws NonFiniteCost on any non-finite
// entry. OpenMP-parallel over entries when enabled; bitwise identical to the
// serial reference below.
Matrix cost_matrix(const std::function<double(const Vector&, const Vector&)>& cost,
                   const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Plain-loop reference kernel, kept for testing the parallel path against.
Matrix cost_matrix_serial(const std::function<double(const Vector&, const Vector&)>& cost,
                          const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Exact optimal transport between the marginals under the given cost matrix:
// transportation-tree simplex with deterministic (lexicographic) tie-breaking,
// dual potentials read off the final basis, psi normalized to 0 at source 0.
OTSolution solve_discrete_ot(const Matrix& cost, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu);

// Quadratic reduction of a controllable-case cost: the plan under c coincides with the
// plan under 1/2 |x - y_hat|^2 against mu1_hat = (y -> E y)# mu1, because the
// difference splits into marginal-only terms f_i + g_j.
struct ReductionCertificate {
    DiscreteMeasure mu1_hat;
    std::vector<double> f; // per source atom
    std::vector<double> g; // per target atom
    double max_split_residual = 0.0;
};

ReductionCertificate quadratic_reduction(const CostModel& model, const DiscreteMeasure& mu0,
                                         const DiscreteMeasure& mu1);

// Cyclical-monotonicity certificate of a plan's support under the pairing
// <x, E y>: exhaustive cycles up to length 4 (capped for very large supports)
// plus seeded random longer cycles.
struct MonotonicityReport {
    double min_cycle_slack = 0.0;
    bool pass = false;
    long cycles_checked = 0;
    bool exhaustive = true; // false when the length-4 enumeration was sampled
};

MonotonicityReport cyclical_monotonicity_check(const TransportPlan& plan,
                                               const DiscreteMeasure& mu,
                                               const DiscreteMeasure& nu, const Matrix& E,
                                               std::uint64_t seed = 0x719e35cd0a1bull,
                                               int random_cycles = 10000);

// The deterministic map underlying a plan, when each source ships to exactly
// one target; throws NotDeterministic listing the split sources otherwise.
std::vector<std::pair<int, int>> plan_to_map(const TransportPlan& plan);

// Diagnostic c-transform of the discrete potential, evaluated anywhere:
// psi^c(y) = min_i (psi(i) + c(x_i, y)). At target atoms of an optimal
// solution this reproduces psi_c; off the atoms it extends the potential.
double dual_ctransform(const DualPotentials& duals, const DiscreteMeasure& mu,
                       const std::function<double(const Vector&, const Vector&)>& cost,
                       const Vector& y);

} // namespace lqot
