#pragma once

#include "lqot/errors.hpp"
#include "lqot/fiber.hpp"
#include "lqot/linsys.hpp"
#include "lqot/lqcost.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testsup {

using lqot::Matrix;
using lqot::Vector;

inline double urand(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return lo + (hi - lo) * lqot::uniform01(rng);
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            M(i, j) = scale * urand(rng);
        }
    }
    return M;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = scale * urand(rng);
    }
    return v;
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double scale = 1.0) {
    const Matrix G = random_matrix(rng, n, n, 1.0);
    return scale * (G.transpose() * G / n + 0.2 * Matrix::Identity(n, n));
}

inline Matrix random_psd(std::mt19937_64& rng, int n, double scale = 1.0) {
    const Matrix G = random_matrix(rng, n, n, 1.0);
    return scale * (G.transpose() * G / n);
}

inline Matrix random_orthogonal(std::mt19937_64& rng, int n) {
    const Matrix G = random_matrix(rng, n, n, 1.0);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        if (R(j, j) < 0.0) {
            Q.col(j) = -Q.col(j);
        }
    }
    return Q;
}

// Random controllable system with a Hamiltonian of norm at most 10. Instances
// with cond(R2(1)) beyond 1e6 are redrawn: past that, eps * cond exceeds the
// 1e-8 agreement tolerances the corpus is meant to certify, for any correct
// implementation.
inline lqot::LinearQuadraticSystem random_controllable(std::mt19937_64& rng, int n_max = 4,
                                                       int m_max = 3, bool zero_W = false) {
    while (true) {
        const int n = 1 + static_cast<int>(lqot::uniform01(rng) * n_max);
        const int m = 1 + static_cast<int>(lqot::uniform01(rng) * m_max);
        const Matrix A = random_matrix(rng, n, n, 1.0);
        const Matrix B = random_matrix(rng, n, m, 1.0);
        const Matrix W = zero_W ? Matrix::Zero(n, n) : random_psd(rng, n, 0.8);
        const Matrix U = random_spd(rng, m, 1.0);
        try {
            const auto sys = lqot::validate_system(A, B, W, U);
            if (!lqot::controllability_subspace(A, B).is_controllable) {
                continue;
            }
            if (lqot::hamiltonian_matrix(sys).operatorNorm() > 10.0) {
                continue;
            }
            if (lqot::cond_2norm(lqot::fundamental_solution(sys, 1.0).R2) > 1e6) {
                continue;
            }
            return sys;
        } catch (const lqot::Error&) {
            continue;
        }
    }
}

// Non-controllable system assembled from blocks, optionally rotated out of the
// axis-aligned Kalman frame by a random orthogonal change of coordinates.
struct BlockSystem {
    lqot::LinearQuadraticSystem sys;
    Matrix A1, A2, A3, B1;
    int d = 0;
    int nd = 0;
    Matrix Q; // coordinates: assembled system = Q^T [[A1,A3],[0,A2]] Q etc.
};

inline BlockSystem random_block_system(std::mt19937_64& rng, int d, int nd, bool rotate,
                                       bool zero_W = false) {
    BlockSystem out;
    out.d = d;
    out.nd = nd;
    const int n = d + nd;
    while (true) {
        out.A1 = random_matrix(rng, d, d, 0.8);
        out.A2 = random_matrix(rng, nd, nd, 0.8);
        out.A3 = random_matrix(rng, d, nd, 0.8);
        const int m = d; // square controllable pair keeps the oracle simple
        out.B1 = random_matrix(rng, d, m, 1.0) + Matrix::Identity(d, m);
        if (!lqot::controllability_subspace(out.A1, out.B1).is_controllable) {
            continue;
        }
        Matrix A = Matrix::Zero(n, n);
        A.topLeftCorner(d, d) = out.A1;
        A.topRightCorner(d, nd) = out.A3;
        A.bottomRightCorner(nd, nd) = out.A2;
        Matrix B = Matrix::Zero(n, m);
        B.topRows(d) = out.B1;
        const Matrix W = zero_W ? Matrix::Zero(n, n) : random_psd(rng, n, 0.6);
        const Matrix U = random_spd(rng, m, 1.0);

        out.Q = rotate ? random_orthogonal(rng, n) : Matrix::Identity(n, n);
        try {
            out.sys = lqot::validate_system(out.Q.transpose() * A * out.Q,
                                            out.Q.transpose() * B,
                                            out.Q.transpose() * W * out.Q, U);
        } catch (const lqot::Error&) {
            continue;
        }
        return out;
    }
}

// Independent composite-Simpson quadrature (test-side; N even).
inline double simpson(const std::function<double(double)>& f, double a, double b, int N) {
    const double h = (b - a) / N;
    double acc = f(a) + f(b);
    for (int i = 1; i < N; ++i) {
        acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

// cosh(t W^{1/2}) = sum t^{2k} W^k / (2k)!, summed to machine precision.
inline Matrix cosh_sqrt_series(const Matrix& W, double t) {
    const int n = static_cast<int>(W.rows());
    Matrix term = Matrix::Identity(n, n);
    Matrix acc = term;
    for (int k = 1; k < 200; ++k) {
        term = term * W * (t * t / ((2.0 * k - 1.0) * (2.0 * k)));
        acc += term;
        if (term.norm() <= 1e-17 * acc.norm()) {
            break;
        }
    }
    return acc;
}

// sinh(t W^{1/2}) W^{-1/2} = sum t^{2k+1} W^k / (2k+1)!.
inline Matrix sinh_sqrt_series(const Matrix& W, double t) {
    const int n = static_cast<int>(W.rows());
    Matrix term = t * Matrix::Identity(n, n);
    Matrix acc = term;
    for (int k = 1; k < 200; ++k) {
        term = term * W * (t * t / ((2.0 * k) * (2.0 * k + 1.0)));
        acc += term;
        if (term.norm() <= 1e-17 * acc.norm()) {
            break;
        }
    }
    return acc;
}

// Running cost of the full n-dimensional Lagrangian along the reconstructed
// fiber-optimal trajectory from (x1,x2) to (y1, e^{A2}x2), in Kalman
// coordinates. Independent check of eval_fiber_cost.
inline double fiber_trajectory_cost(const lqot::LinearQuadraticSystem& sys,
                                    const lqot::ControllabilityReport& report,
                                    const lqot::FiberCostModel& fcm, const Vector& x1,
                                    const Vector& y1, int N = 128) {
    const auto dyn = lqot::fiber_dynamics(sys, report);
    const int d = dyn.d;
    const Matrix S1 = dyn.B1 * sys.U.llt().solve(dyn.B1.transpose());
    Matrix Mf(2 * d, 2 * d);
    Mf.topLeftCorner(d, d) = dyn.A1;
    Mf.topRightCorner(d, d) = S1;
    Mf.bottomLeftCorner(d, d) = dyn.W1;
    Mf.bottomRightCorner(d, d) = -dyn.A1.transpose();

    Matrix Wt(sys.n, sys.n);
    Wt.topLeftCorner(d, d) = dyn.W1;
    Wt.topRightCorner(d, dyn.nd) = dyn.W3;
    Wt.bottomLeftCorner(dyn.nd, d) = dyn.W3.transpose();
    Wt.bottomRightCorner(dyn.nd, dyn.nd) = dyn.W2;

    const Vector z1 = y1 - fcm.G1x2; // endpoint of the reduced trajectory
    const Vector p0 = fcm.reduced.R2.partialPivLu().solve(z1 - fcm.reduced.R1 * x1 - fcm.z_bar1);
    const auto forced = lqot::forced_hamiltonian_solution(sys, dyn, fcm.x2, N + 1);

    const Matrix UinvBt = sys.U.llt().solve(dyn.B1.transpose());
    std::vector<double> lag(N + 1);
    Vector zp0(2 * d);
    zp0 << x1, p0;
    for (int i = 0; i <= N; ++i) {
        const double t = static_cast<double>(i) / N;
        const Vector hom = lqot::matrix_exponential(Mf, t) * zp0;
        const Vector z = hom.head(d) + forced[i].z;
        const Vector p = hom.tail(d) + forced[i].p;
        const Vector u = UinvBt * p;
        Vector state(sys.n);
        state << z + dyn.G(t) * fcm.x2, lqot::matrix_exponential(dyn.A2, t) * fcm.x2;
        lag[i] = 0.5 * state.dot(Wt * state) + 0.5 * u.dot(sys.U * u);
    }
    double acc = lag[0] + lag[N];
    for (int i = 1; i < N; ++i) {
        acc += lag[i] * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc / (3.0 * N);
}

} // namespace testsup
