#pragma once

#include "lqot/numerics.hpp"

namespace lqot {

// Control system xdot = A x + B u with running cost
// L(x,u) = 1/2 <x, W x> + 1/2 <u, U u> over the fixed horizon [0, 1].
// W symmetric non-negative, U symmetric positive definite.
struct LinearQuadraticSystem {
    Matrix A; // n x n drift
    Matrix B; // n x m input
    Matrix W; // n x n state weight
    Matrix U; // m x m control weight
    int n = 0;
    int m = 0;

    // B U^{-1} B^T, the control part of the Hamiltonian.
    Matrix input_gram() const;
};

// Checks the shape/symmetry/definiteness hypotheses and returns the validated
// system; throws a typed Error naming the violated hypothesis otherwise.
LinearQuadraticSystem validate_system(const Matrix& A, const Matrix& B, const Matrix& W,
                                      const Matrix& U);

// Controllability subspace V = Span{B, AB, ..., A^{n-1}B} and, when d < n, the
// orthogonal change of coordinates splitting the state into a controllable
// block and an autonomously evolving one.
struct ControllabilityReport {
    int n = 0;
    int d = 0;              // dim V
    bool is_controllable = false;
    Matrix V_basis;         // n x d, orthonormal columns spanning V
    Matrix P;               // orthogonal; new coordinates are P x, P A P^T block-triangular
    Matrix A1;              // d x d
    Matrix A2;              // (n-d) x (n-d)
    Matrix A3;              // d x (n-d)
    Matrix B1;              // d x m
};

// Rank part only: d, V_basis, is_controllable (P = I, no blocks).
ControllabilityReport controllability_subspace(const Matrix& A, const Matrix& B);

// Full report including P and the transformed blocks. For d = n the transform
// is the identity and the block fields stay empty.
ControllabilityReport kalman_decomposition(const Matrix& A, const Matrix& B);

// True iff y is reachable from x in time 1, i.e. e^A x - y lies in V.
bool reachable_target(const Matrix& A, const ControllabilityReport& report, const Vector& x,
                      const Vector& y);

namespace tol {
inline constexpr double rank = 1e-10;        // relative SVD cutoff for numerical rank
inline constexpr double psd = 1e-10;         // relative eigenvalue slack for W >= 0
inline constexpr double pd = 1e-12;          // relative eigenvalue floor for U > 0
inline constexpr double decomp = 1e-10;      // block-triangularity residual
inline constexpr double reach = 1e-9;        // fiber membership slack
inline constexpr double cond_limit = 1e12;   // conditioning flag for R2(1)
} // namespace tol

} // namespace lqot
