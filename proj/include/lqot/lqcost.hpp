#pragma once

#include "lqot/linsys.hpp"

#include <vector>

namespace lqot {

// Exact cost of steering between states over horizon 1, in closed form:
//   c(x, y) = 1/2 <x, D x> - <x, E y> + 1/2 <y, F y>
// with D, F symmetric positive definite and E invertible. The R blocks are
// the fundamental solution at t = 1; Q1, Q2, C are the time integrals the
// closed form is assembled from.
struct CostModel {
    int n = 0;
    Matrix D, E, F;
    Matrix R1, R2, R3, R4;
    Matrix Q1, Q2, C;
    double cond_R2 = 0.0;
    static constexpr double horizon = 1.0;
};

// M = [[A, B U^{-1} B^T], [W, -A^T]], the generator of the state-adjoint flow.
Matrix hamiltonian_matrix(const LinearQuadraticSystem& sys);

struct FundamentalBlocks {
    Matrix R1, R2, R3, R4;
};

// R(t) = e^{tM} partitioned into n x n blocks; R(0) = I.
FundamentalBlocks fundamental_solution(const LinearQuadraticSystem& sys, double t);

// Synthesizes the cost model for a controllable system. Throws NotControllable,
// IllConditioned (cond R2(1) > 1e12) or ConsistencyFailure (internal relations
// violated).
CostModel cost_matrices(const LinearQuadraticSystem& sys);

// The quadratic form above, clamped to 0 within roundoff of the origin.
double eval_cost(const CostModel& model, const Vector& x, const Vector& y);

// p0 = R2(1)^{-1} (y - R1(1) x); the adjoint launching the optimal trajectory.
Vector initial_adjoint(const CostModel& model, const Vector& x, const Vector& y);

struct OptimalTrajectory {
    Vector times;                  // N+1 samples of [0, 1]
    std::vector<Vector> states;    // x(t_i)
    std::vector<Vector> adjoints;  // p(t_i)
    std::vector<Vector> controls;  // u(t_i) = U^{-1} B^T p(t_i)
    double running_cost = 0.0;     // composite-Simpson quadrature of L along the path
};

// Reconstructs the optimal state/adjoint/control samples on a uniform grid of
// N intervals and integrates the Lagrangian along them.
OptimalTrajectory optimal_trajectory(const LinearQuadraticSystem& sys, const CostModel& model,
                                     const Vector& x, const Vector& y, int N);

// W = 0 specialization via the controllability Grammian
//   Gc = int_0^1 e^{tA} B U^{-1} B^T e^{tA^T} dt,
//   c(x,y) = 1/2 <y - e^A x, Gc^{-1} (y - e^A x)>.
// Throws PreconditionViolated when W != 0.
double grammian_cost(const LinearQuadraticSystem& sys, const Vector& x, const Vector& y);

} // namespace lqot
