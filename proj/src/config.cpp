#include "lqot/config.hpp"

#include "lqot/errors.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lqot {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
    fail(ErrorCode::ConfigError, where + ": " + what);
}

Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) {
        config_fail(where, "expected a non-empty array of rows");
    }
    const int rows = static_cast<int>(j.size());
    if (!j[0].is_array()) {
        config_fail(where, "rows must be arrays of numbers");
    }
    const int cols = static_cast<int>(j[0].size());
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) {
            config_fail(where + "[" + std::to_string(i) + "]",
                        "row has " + std::to_string(j[i].size()) + " entries, expected " +
                            std::to_string(cols));
        }
        for (int k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) {
                config_fail(where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]",
                            "expected a number");
            }
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

Vector parse_vector(const json& j, const std::string& where) {
    if (!j.is_array()) {
        config_fail(where, "expected an array of numbers");
    }
    Vector v(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            config_fail(where + "[" + std::to_string(i) + "]", "expected a number");
        }
        v(static_cast<int>(i)) = j[i].get<double>();
    }
    return v;
}

// ---- density expression grammar -------------------------------------------

struct DensityParser {
    const std::string& src;
    size_t pos = 0;
    int dim;

    using Fn = std::function<double(const Vector&)>;

    explicit DensityParser(const std::string& s, int d) : src(s), dim(d) {}

    [[noreturn]] void syntax_error(const std::string& what) const {
        config_fail("density expression at position " + std::to_string(pos), what);
    }

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) {
            ++pos;
        }
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    Fn parse() {
        Fn e = expr();
        skip_ws();
        if (pos != src.size()) {
            syntax_error("unexpected trailing input");
        }
        return e;
    }

    Fn expr() {
        Fn left = term();
        while (true) {
            if (eat('+')) {
                Fn right = term();
                left = [left, right](const Vector& x) { return left(x) + right(x); };
            } else if (eat('-')) {
                Fn right = term();
                left = [left, right](const Vector& x) { return left(x) - right(x); };
            } else {
                return left;
            }
        }
    }

    Fn term() {
        Fn left = unary();
        while (true) {
            if (eat('*')) {
                Fn right = unary();
                left = [left, right](const Vector& x) { return left(x) * right(x); };
            } else if (eat('/')) {
                Fn right = unary();
                left = [left, right](const Vector& x) { return left(x) / right(x); };
            } else {
                return left;
            }
        }
    }

    Fn unary() {
        if (eat('-')) {
            Fn inner = unary();
            return [inner](const Vector& x) { return -inner(x); };
        }
        return power();
    }

    Fn power() {
        Fn base = atom();
        if (eat('^')) {
            Fn exponent = unary();
            return [base, exponent](const Vector& x) { return std::pow(base(x), exponent(x)); };
        }
        return base;
    }

    Fn atom() {
        skip_ws();
        if (pos >= src.size()) {
            syntax_error("unexpected end of expression");
        }
        const char c = src[pos];
        if (c == '(') {
            ++pos;
            Fn inner = expr();
            if (!eat(')')) {
                syntax_error("missing closing parenthesis");
            }
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return identifier();
        }
        syntax_error(std::string("unexpected character '") + c + "'");
    }

    Fn number() {
        size_t len = 0;
        double value = 0.0;
        try {
            value = std::stod(src.substr(pos), &len);
        } catch (const std::exception&) {
            syntax_error("malformed number");
        }
        pos += len;
        return [value](const Vector&) { return value; };
    }

    Fn identifier() {
        const size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
            ++pos;
        }
        const std::string name = src.substr(start, pos - start);

        if (name == "x" && dim == 1) {
            return [](const Vector& x) { return x(0); };
        }
        if (name.size() >= 2 && name[0] == 'x') {
            const int k = std::atoi(name.c_str() + 1);
            if (k >= 1 && k <= dim) {
                return [k](const Vector& x) { return x(k - 1); };
            }
            syntax_error("coordinate " + name + " out of range for dimension " +
                         std::to_string(dim));
        }

        using Unary = double (*)(double);
        Unary fn = nullptr;
        if (name == "exp") fn = std::exp;
        else if (name == "abs") fn = std::fabs;
        else if (name == "sqrt") fn = std::sqrt;
        else if (name == "sin") fn = std::sin;
        else if (name == "cos") fn = std::cos;
        if (fn == nullptr) {
            syntax_error("unknown identifier '" + name + "'");
        }
        if (!eat('(')) {
            syntax_error("function '" + name + "' needs parentheses");
        }
        Fn inner = expr();
        if (!eat(')')) {
            syntax_error("missing closing parenthesis");
        }
        return [fn, inner](const Vector& x) { return fn(inner(x)); };
    }
};

DiscreteMeasure parse_measure(const json& j, const std::string& where, int n,
                              std::uint64_t seed, std::uint64_t stream) {
    if (!j.is_object()) {
        config_fail(where, "expected an object with points/weights or a sampling spec");
    }
    if (j.contains("points")) {
        const Matrix pts = parse_matrix(j.at("points"), where + ".points");
        if (pts.cols() != n) {
            config_fail(where + ".points",
                        "atoms have dimension " + std::to_string(pts.cols()) + ", expected " +
                            std::to_string(n));
        }
        std::vector<double> weights;
        if (j.contains("weights")) {
            const Vector w = parse_vector(j.at("weights"), where + ".weights");
            if (w.size() != pts.rows()) {
                config_fail(where + ".weights", "length does not match the number of points");
            }
            weights.assign(w.data(), w.data() + w.size());
        } else {
            weights.assign(pts.rows(), 1.0);
        }
        std::vector<Vector> points;
        for (int i = 0; i < pts.rows(); ++i) {
            points.push_back(pts.row(i).transpose());
        }
        try {
            return make_measure(std::move(points), std::move(weights));
        } catch (const Error& e) {
            config_fail(where, e.what());
        }
    }
    if (j.contains("density")) {
        if (!j.contains("box") || !j.contains("n")) {
            config_fail(where, "sampling spec needs density, box and n");
        }
        const Matrix box_m = parse_matrix(j.at("box"), where + ".box");
        if (box_m.rows() != n || box_m.cols() != 2) {
            config_fail(where + ".box", "expected n rows of [lo, hi]");
        }
        std::vector<std::pair<double, double>> box;
        for (int i = 0; i < n; ++i) {
            box.push_back({box_m(i, 0), box_m(i, 1)});
        }
        const int count = j.at("n").get<int>();
        if (count < 1) {
            config_fail(where + ".n", "must be at least 1");
        }
        const std::uint64_t measure_seed =
            j.contains("seed") ? j.at("seed").get<std::uint64_t>() : split_seed(seed, stream);
        const auto density = compile_density(j.at("density").get<std::string>(), n);
        try {
            return sample_box(density, box, count, measure_seed);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ZeroDensity) {
                config_fail(where, e.what());
            }
            throw;
        }
    }
    config_fail(where, "measure needs either points or a density spec");
}

} // namespace

std::function<double(const Vector&)> compile_density(const std::string& expr, int dim) {
    DensityParser parser(expr, dim);
    return parser.parse();
}

ProblemConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                          std::optional<double> tol_override) {
    std::ifstream in(path);
    if (!in) {
        config_fail(path, "cannot open config file");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        config_fail(path, e.what());
    }

    ProblemConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (seed_override) {
        cfg.seed = *seed_override;
    }

    if (!j.contains("system")) {
        config_fail("system", "missing");
    }
    const json& js = j.at("system");
    for (const char* key : {"A", "B", "W", "U"}) {
        if (!js.contains(key)) {
            config_fail(std::string("system.") + key, "missing");
        }
    }
    try {
        cfg.system = validate_system(parse_matrix(js.at("A"), "system.A"),
                                     parse_matrix(js.at("B"), "system.B"),
                                     parse_matrix(js.at("W"), "system.W"),
                                     parse_matrix(js.at("U"), "system.U"));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) {
            throw;
        }
        config_fail("system", e.what());
    }

    if (j.contains("options")) {
        const json& jo = j.at("options");
        if (jo.contains("compat_tol")) {
            cfg.options.compat_tol = jo.at("compat_tol").get<double>();
        }
        cfg.options.trajectory_samples = jo.value("trajectory_samples", 256);
        cfg.options.check_pairs = jo.value("check_pairs", 20);
        cfg.options.oracle_pieces = jo.value("oracle_pieces", 64);
        if (cfg.options.trajectory_samples < 2) {
            config_fail("options.trajectory_samples", "must be at least 2");
        }
    }
    if (tol_override) {
        cfg.options.compat_tol = *tol_override;
    }
    if (cfg.options.compat_tol < 1e-15 || cfg.options.compat_tol > 1e-2) {
        config_fail("options.compat_tol", "tolerance overrides must lie in [1e-15, 1e-2]");
    }

    if (j.contains("mu0") != j.contains("mu1")) {
        config_fail("mu0/mu1", "either both measures or neither must be given");
    }
    if (j.contains("mu0")) {
        cfg.mu0 = parse_measure(j.at("mu0"), "mu0", cfg.system.n, cfg.seed, 0);
        cfg.mu1 = parse_measure(j.at("mu1"), "mu1", cfg.system.n, cfg.seed, 1);
        cfg.has_measures = true;
    }

    if (j.contains("pairs")) {
        const json& jp = j.at("pairs");
        if (!jp.is_array()) {
            config_fail("pairs", "expected an array of {x, y} objects");
        }
        for (size_t k = 0; k < jp.size(); ++k) {
            const std::string where = "pairs[" + std::to_string(k) + "]";
            if (!jp[k].is_object() || !jp[k].contains("x") || !jp[k].contains("y")) {
                config_fail(where, "expected an object with x and y");
            }
            Vector x = parse_vector(jp[k].at("x"), where + ".x");
            Vector y = parse_vector(jp[k].at("y"), where + ".y");
            if (x.size() != cfg.system.n || y.size() != cfg.system.n) {
                config_fail(where, "x and y must be n-vectors");
            }
            cfg.pairs.push_back({std::move(x), std::move(y)});
        }
    }
    return cfg;
}

} // namespace lqot
