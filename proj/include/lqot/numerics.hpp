#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>

namespace lqot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// e^{tM} for square M. Guaranteed to 1e-12 relative (operator norm) for
// ||tM||_1 <= 50; throws Overflow beyond that range.
Matrix matrix_exponential(const Matrix& M, double t = 1.0);

// Composite 10-point Gauss-Legendre on [a,b], panels doubled until two
// successive composite values differ by less than rel_tol (relative to the
// result magnitude). Suited to entire integrands; throws NumericalStall if
// the doubling does not settle.
Matrix integrate_matrix(const std::function<Matrix(double)>& f, double a, double b,
                        double rel_tol = 1e-12);
Vector integrate_vector(const std::function<Vector(double)>& f, double a, double b,
                        double rel_tol = 1e-12);
double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12);

// ||X - Y||_F / max(1, ||X||_F, ||Y||_F)
double rel_err(const Matrix& X, const Matrix& Y);

// Same, with the denominator floored at `magnitude`: for residuals of
// identities whose evaluation cancels terms of that size, so roundoff at the
// cancellation scale does not read as a violation.
double rel_err(const Matrix& X, const Matrix& Y, double magnitude);

bool is_symmetric(const Matrix& M, double rel_tol = 1e-10);

// sigma_max / sigma_min; +inf when numerically singular.
double cond_2norm(const Matrix& M);

// Uniform double in [0,1) with exactly 53 random bits; identical across
// platforms for a given engine state.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// a^T M b without temporaries, for cost evaluations inside parallel loops.
double quadratic_form(const Vector& a, const Matrix& M, const Vector& b);

// SplitMix64 step, used to derive independent stream seeds from one master seed.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace lqot
