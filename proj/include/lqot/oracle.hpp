#pragma once

#include "lqot/linsys.hpp"
#include "lqot/transport.hpp"

#include <vector>

namespace lqot {

// Constant control per subinterval of length 1/K.
struct PiecewiseControl {
    int K = 0;
    std::vector<Vector> values; // K controls in R^m
};

struct PiecewiseResult {
    double cost = 0.0;
    PiecewiseControl control;
};

// Minimum of the exact quadratic cost over piecewise-constant controls with K
// pieces, subject to the affine endpoint constraint x(1) = y. Per-piece state
// propagation and the per-piece cost quadratic form both come from augmented
// matrix exponentials, so the only error source is the KKT solve (residual
// checked to 1e-10). Throws UnreachableEndpoint when y is not reachable with
// K pieces.
PiecewiseResult min_cost_piecewise(const LinearQuadraticSystem& sys, const Vector& x,
                                   const Vector& y, int K);

// Exact reference at tiny scale: the global minimum over all couplings.
// Uniform equal-count marginals (<= 8 atoms) are solved by permutation
// enumeration; arbitrary marginals (<= 5 atoms per side) by enumerating the
// spanning-tree vertices of the transport polytope. Throws TooLarge beyond
// those bounds.
TransportPlan enumerate_ot(const Matrix& cost, const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu);

} // namespace lqot
