#include "lqot/numerics.hpp"

#include "lqot/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>

namespace lqot {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonSymmetric: return "NonSymmetric";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
        case ErrorCode::Overflow: return "Overflow";
        case ErrorCode::NotControllable: return "NotControllable";
        case ErrorCode::IllConditioned: return "IllConditioned";
        case ErrorCode::ConsistencyFailure: return "ConsistencyFailure";
        case ErrorCode::PreconditionViolated: return "PreconditionViolated";
        case ErrorCode::DegenerateFiber: return "DegenerateFiber";
        case ErrorCode::IncompatibleMarginals: return "IncompatibleMarginals";
        case ErrorCode::EmptyMeasure: return "EmptyMeasure";
        case ErrorCode::NegativeWeight: return "NegativeWeight";
        case ErrorCode::ZeroDensity: return "ZeroDensity";
        case ErrorCode::NonFiniteCost: return "NonFiniteCost";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::NumericalStall: return "NumericalStall";
        case ErrorCode::NotDeterministic: return "NotDeterministic";
        case ErrorCode::UnreachableEndpoint: return "UnreachableEndpoint";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

Matrix matrix_exponential(const Matrix& M, double t) {
    if (M.rows() != M.cols()) {
        fail(ErrorCode::ShapeMismatch, "matrix_exponential requires a square matrix");
    }
    if (M.size() == 0) {
        return Matrix(0, 0);
    }
    const Matrix tM = t * M;
    const double norm1 = tM.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm1) || norm1 > 50.0) {
        fail(ErrorCode::Overflow,
             "||tM||_1 = " + std::to_string(norm1) + " exceeds the supported range (50)");
    }
    return tM.exp();
}

namespace {

// 10-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; rule is symmetric).
constexpr std::array<double, 5> kGlNodes = {
    0.1488743389816312108848260,
    0.4333953941292471907992659,
    0.6794095682990244062343274,
    0.8650633666889845107320967,
    0.9739065285171717200779640,
};
constexpr std::array<double, 5> kGlWeights = {
    0.2955242247147528701738930,
    0.2692667193099963550912269,
    0.2190863625159820439955349,
    0.1494513491505805931457763,
    0.0666713443086881375935688,
};

Matrix gl_composite(const std::function<Matrix(double)>& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    Matrix acc;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        for (int k = 0; k < 5; ++k) {
            const Matrix lo = f(mid - half * kGlNodes[k]);
            const Matrix hi = f(mid + half * kGlNodes[k]);
            const Matrix term = kGlWeights[k] * half * (lo + hi);
            if (acc.size() == 0) {
                acc = term;
            } else {
                acc += term;
            }
        }
    }
    return acc;
}

} // namespace

Matrix integrate_matrix(const std::function<Matrix(double)>& f, double a, double b,
                        double rel_tol) {
    if (a == b) {
        Matrix probe = f(a);
        return Matrix::Zero(probe.rows(), probe.cols());
    }
    Matrix prev = gl_composite(f, a, b, 1);
    for (int panels = 2; panels <= 512; panels *= 2) {
        Matrix cur = gl_composite(f, a, b, panels);
        const double scale = std::max(1.0, std::max(prev.norm(), cur.norm()));
        if ((cur - prev).norm() < rel_tol * scale) {
            return cur;
        }
        prev = std::move(cur);
    }
    fail(ErrorCode::NumericalStall, "quadrature panel doubling did not converge");
}

Vector integrate_vector(const std::function<Vector(double)>& f, double a, double b,
                        double rel_tol) {
    Matrix v = integrate_matrix([&](double t) -> Matrix { return f(t); }, a, b, rel_tol);
    return v.col(0);
}

double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                        double rel_tol) {
    Matrix v = integrate_matrix(
        [&](double t) -> Matrix {
            Matrix m(1, 1);
            m(0, 0) = f(t);
            return m;
        },
        a, b, rel_tol);
    return v(0, 0);
}

double rel_err(const Matrix& X, const Matrix& Y) {
    const double scale = std::max(1.0, std::max(X.norm(), Y.norm()));
    return (X - Y).norm() / scale;
}

double rel_err(const Matrix& X, const Matrix& Y, double magnitude) {
    const double scale = std::max({1.0, X.norm(), Y.norm(), magnitude});
    return (X - Y).norm() / scale;
}

bool is_symmetric(const Matrix& M, double rel_tol) {
    if (M.rows() != M.cols()) {
        return false;
    }
    const double scale = std::max(1.0, M.norm());
    return (M - M.transpose()).norm() <= rel_tol * scale;
}

double cond_2norm(const Matrix& M) {
    if (M.size() == 0) {
        return 1.0;
    }
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv(0) / smin;
}

// Kept loop-based: eval paths call this inside parallel regions, where Eigen
// product temporaries would serialize threads on the allocator.
double quadratic_form(const Vector& a, const Matrix& M, const Vector& b) {
    double acc = 0.0;
    for (int j = 0; j < M.cols(); ++j) {
        double col = 0.0;
        for (int i = 0; i < M.rows(); ++i) {
            col += a(i) * M(i, j);
        }
        acc += col * b(j);
    }
    return acc;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace lqot
