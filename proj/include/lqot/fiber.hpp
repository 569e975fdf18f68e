#pragma once

#include "lqot/lqcost.hpp"
#include "lqot/transport.hpp"

#include <vector>

namespace lqot {

// Dynamics of a non-controllable system in Kalman coordinates: the x2 block
// evolves autonomously as e^{tA2} x2 and couples into the controllable block
// through G(t) = e^{tA1} int_0^t e^{-sA1} A3 e^{sA2} ds.
struct FiberDynamics {
    int d = 0;  // controllable dimension
    int nd = 0; // n - d
    Matrix A1, A2, A3, B1;
    Matrix W1, W2, W3; // blocks of P W P^T
    Matrix A2_exp;     // e^{A2}

    // G(t) by quadrature of the defining integral.
    Matrix G(double t) const;
};

FiberDynamics fiber_dynamics(const LinearQuadraticSystem& sys, const ControllabilityReport& report);

struct ForcedSample {
    double t = 0.0;
    Vector z; // zbar_{x2}(t)
    Vector p; // pbar_{x2}(t)
};

// Particular solution of the forced fiber Hamiltonian system with zero initial
// data, sampled on a uniform grid, by variation of constants with the 2d
// fundamental solution (forcing integrated by the module quadrature rule).
std::vector<ForcedSample> forced_hamiltonian_solution(const LinearQuadraticSystem& sys,
                                                      const FiberDynamics& dyn, const Vector& x2,
                                                      int samples = 17);

// Per-fiber affine cost data: for targets on the image fiber,
//   c((x1,x2),(y1,e^{A2}x2)) = 1/2 <x1,D x1> - <x1,E zeta> + 1/2 <zeta,F zeta>
//                              + <E zeta, w> + k + l_int
// with zeta = y1 - G(1)x2 - zbar(1) and D,E,F from the reduced model.
struct FiberCostModel {
    Vector x2;
    CostModel reduced; // D, E, F and R blocks of the 2d fundamental solution
    Vector z_bar1;     // zbar_{x2}(1)
    Vector w, v;       // affine duality data; v = R1(1)^T (R2(1)^{-1})^T w
    double k = 0.0;
    double l_int = 0.0; // int_0^1 l(t;x2) dt
    Vector G1x2;        // G(1) x2
};

FiberCostModel fiber_cost_model(const LinearQuadraticSystem& sys,
                                const ControllabilityReport& report, const Vector& x2);

double eval_fiber_cost(const FiberCostModel& fcm, const Vector& x1, const Vector& y1);

struct CompatibilityReport {
    bool compatible = false;
    double discrepancy = 0.0; // total-variation distance between fiber-label masses
};

// Tests (pi2)# mu1 = (e^{A2} o pi2)# mu0 on measures given in Kalman
// coordinates, with fiber labels clustered at the roundoff radius.
CompatibilityReport compatibility_check(const DiscreteMeasure& mu0_k,
                                        const DiscreteMeasure& mu1_k,
                                        const ControllabilityReport& report, double tol);

struct Fiber {
    Vector label;              // x2 value (mass-weighted cluster mean)
    DiscreteMeasure measure;   // x1 parts, normalized to mass 1
    std::vector<int> atom_indices;
    double weight = 0.0;       // original fiber mass
};

// Groups atoms by x2 cluster; fibers ordered lexicographically by label.
std::vector<Fiber> disintegrate(const DiscreteMeasure& mu_k, const ControllabilityReport& report);

struct FiberSummary {
    Vector label;
    double weight = 0.0;
    double cost = 0.0;
    int source_atoms = 0;
    int target_atoms = 0;
};

struct NoncontrollableSolution {
    TransportPlan plan;
    std::vector<FiberSummary> fibers; // empty in the d = 0 case
    double compat_discrepancy = 0.0;
    int d = 0;
};

// Full non-controllable pipeline: Kalman transform, compatibility, per-fiber
// discrete OT under the fiber cost, deterministic assembly. For d = 0 the only
// finite-cost map is x -> e^A x, verified atom by atom. Throws
// IncompatibleMarginals when no finite-cost transport exists.
NoncontrollableSolution solve_noncontrollable(const LinearQuadraticSystem& sys,
                                              const DiscreteMeasure& mu0,
                                              const DiscreteMeasure& mu1,
                                              double compat_tol = 1e-9);

// Clustering radius for fiber labels of the given magnitude.
double fiber_radius(double label_scale);

} // namespace lqot
