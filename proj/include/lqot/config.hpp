#pragma once

#include "lqot/linsys.hpp"
#include "lqot/transport.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lqot {

struct Options {
    double compat_tol = 1e-9;     // fiber-mass tolerance for compatibility
    int trajectory_samples = 256; // grid intervals for trajectory export
    int check_pairs = 20;         // endpoint pairs exercised by `check`
    int oracle_pieces = 64;       // largest K for the piecewise oracle suite
};

// A fully materialized problem instance: validated system, both measures
// (sampling specs resolved), optional endpoint pairs, options.
struct ProblemConfig {
    LinearQuadraticSystem system;
    DiscreteMeasure mu0, mu1;
    bool has_measures = false;
    std::vector<std::pair<Vector, Vector>> pairs;
    Options options;
    std::uint64_t seed = 0;
};

// Parses and validates the JSON config; throws ConfigError with a
// field-anchored message on any problem. seed_override replaces the config
// seed before sampling; tol_override replaces options.compat_tol (must lie in
// [1e-15, 1e-2], like every tolerance override).
ProblemConfig load_config(const std::string& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt,
                          std::optional<double> tol_override = std::nullopt);

// Compiles a density expression over coordinates x1..x<dim> (plus plain `x`
// when dim = 1). Grammar: numbers, + - * / ^, parentheses, unary minus, and
// exp/abs/sqrt/sin/cos. Throws ConfigError on parse failure.
std::function<double(const Vector&)> compile_density(const std::string& expr, int dim);

} // namespace lqot
