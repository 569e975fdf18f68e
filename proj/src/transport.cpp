#include "lqot/transport.hpp"

#include "lqot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lqot {

namespace {

constexpr double kMergeTol = 1e-12;

// Union-find over atom indices, used to merge coincident points.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int i, int j) {
        i = find(i);
        j = find(j);
        if (i != j) {
            parent[std::max(i, j)] = std::min(i, j);
        }
    }
};

bool lex_less(const Vector& a, const Vector& b) {
    for (int k = 0; k < a.size(); ++k) {
        if (a(k) != b(k)) {
            return a(k) < b(k);
        }
    }
    return false;
}

} // namespace

DiscreteMeasure make_measure(std::vector<Vector> points, std::vector<double> weights) {
    if (points.size() != weights.size()) {
        fail(ErrorCode::ShapeMismatch, "points and weights must have equal lengths");
    }
    if (points.empty()) {
        fail(ErrorCode::EmptyMeasure, "a measure needs at least one atom");
    }
    const int dim = static_cast<int>(points.front().size());
    for (const auto& p : points) {
        if (p.size() != dim) {
            fail(ErrorCode::ShapeMismatch, "all atoms must share one dimension");
        }
    }
    for (double w : weights) {
        if (!(w >= 0.0)) {
            fail(ErrorCode::NegativeWeight, "weights must be non-negative");
        }
    }

    // Merge points within kMergeTol of each other (single pass over a
    // lexicographic sort; coincident points are adjacent in the first
    // coordinate up to the tolerance).
    const int N = static_cast<int>(points.size());
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return lex_less(points[i], points[j]); });
    UnionFind uf(N);
    for (int a = 0; a < N; ++a) {
        for (int b = a + 1; b < N; ++b) {
            const Vector& pa = points[order[a]];
            const Vector& pb = points[order[b]];
            if (pb(0) - pa(0) > kMergeTol) {
                break;
            }
            if ((pa - pb).norm() <= kMergeTol) {
                uf.unite(order[a], order[b]);
            }
        }
    }

    // Representative = first occurrence in the input; keeps output order stable.
    std::vector<int> rep_index(N, -1);
    std::vector<Vector> out_points;
    std::vector<double> out_weights;
    for (int i = 0; i < N; ++i) {
        const int r = uf.find(i);
        if (rep_index[r] < 0) {
            rep_index[r] = static_cast<int>(out_points.size());
            out_points.push_back(points[r]);
            out_weights.push_back(0.0);
        }
        out_weights[rep_index[r]] += weights[i];
    }

    // Drop zero-mass atoms, then normalize.
    std::vector<Vector> kept_points;
    std::vector<double> kept_weights;
    for (size_t i = 0; i < out_points.size(); ++i) {
        if (out_weights[i] > 0.0) {
            kept_points.push_back(out_points[i]);
            kept_weights.push_back(out_weights[i]);
        }
    }
    if (kept_points.empty()) {
        fail(ErrorCode::EmptyMeasure, "total mass is zero");
    }
    const double total = std::accumulate(kept_weights.begin(), kept_weights.end(), 0.0);
    for (double& w : kept_weights) {
        w /= total;
    }

    DiscreteMeasure mu;
    mu.points = std::move(kept_points);
    mu.weights = std::move(kept_weights);
    return mu;
}

DiscreteMeasure sample_box(const std::function<double(const Vector&)>& density,
                           const std::vector<std::pair<double, double>>& box, int N,
                           std::uint64_t seed) {
    const int dim = static_cast<int>(box.size());
    if (dim < 1 || N < 1) {
        fail(ErrorCode::ShapeMismatch, "sample_box needs a non-empty box and N >= 1");
    }
    for (const auto& [lo, hi] : box) {
        if (!(lo < hi)) {
            fail(ErrorCode::ShapeMismatch, "box bounds must satisfy lo < hi");
        }
    }

    // Envelope from a coarse deterministic grid of cell centers.
    int per_dim = std::max(2, static_cast<int>(std::floor(std::pow(4096.0, 1.0 / dim))));
    per_dim = std::min(per_dim, 64);
    double envelope = 0.0;
    std::vector<int> idx(dim, 0);
    Vector probe(dim);
    while (true) {
        for (int k = 0; k < dim; ++k) {
            const double frac = (idx[k] + 0.5) / per_dim;
            probe(k) = box[k].first + frac * (box[k].second - box[k].first);
        }
        const double f = density(probe);
        if (!std::isfinite(f) || f < 0.0) {
            fail(ErrorCode::ZeroDensity, "density must be finite and non-negative on the box");
        }
        envelope = std::max(envelope, f);
        int k = 0;
        while (k < dim && ++idx[k] == per_dim) {
            idx[k] = 0;
            ++k;
        }
        if (k == dim) {
            break;
        }
    }
    if (envelope == 0.0) {
        fail(ErrorCode::ZeroDensity, "density vanishes on the sampling grid");
    }
    envelope *= 1.5;

    const long long proposal_cap = std::max(10'000'000LL, 100'000LL * N);
    while (true) {
        std::mt19937_64 rng(seed);
        std::vector<Vector> points;
        points.reserve(N);
        bool envelope_raised = false;
        long long proposals = 0;
        while (static_cast<int>(points.size()) < N) {
            if (++proposals > proposal_cap) {
                fail(ErrorCode::ZeroDensity, "rejection sampling failed to accept");
            }
            Vector q(dim);
            for (int k = 0; k < dim; ++k) {
                q(k) = box[k].first + uniform01(rng) * (box[k].second - box[k].first);
            }
            const double f = density(q);
            if (!std::isfinite(f) || f < 0.0) {
                fail(ErrorCode::ZeroDensity, "density must be finite and non-negative on the box");
            }
            if (f > envelope) {
                envelope = 1.5 * f; // restart with the tighter bound, same seed
                envelope_raised = true;
                break;
            }
            if (uniform01(rng) * envelope <= f) {
                points.push_back(q);
            }
        }
        if (!envelope_raised) {
            return make_measure(std::move(points), std::vector<double>(N, 1.0));
        }
    }
}

DiscreteMeasure pushforward(const DiscreteMeasure& mu, const Matrix& M, const Vector& b) {
    if (M.cols() != mu.dim() || b.size() != M.rows()) {
        fail(ErrorCode::ShapeMismatch, "pushforward map dimensions do not match the measure");
    }
    std::vector<Vector> points;
    points.reserve(mu.points.size());
    for (const auto& p : mu.points) {
        points.push_back(M * p + b);
    }
    return make_measure(std::move(points), mu.weights);
}

namespace {

double checked_cost(const std::function<double(const Vector&, const Vector&)>& cost,
                    const Vector& x, const Vector& y) {
    const double c = cost(x, y);
    if (!std::isfinite(c)) {
        fail(ErrorCode::NonFiniteCost, "cost matrix entry is not finite");
    }
    return c;
}

} // namespace

Matrix cost_matrix_serial(const std::function<double(const Vector&, const Vector&)>& cost,
                          const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    Matrix C(mu.size(), nu.size());
    for (int i = 0; i < mu.size(); ++i) {
        for (int j = 0; j < nu.size(); ++j) {
            C(i, j) = checked_cost(cost, mu.points[i], nu.points[j]);
        }
    }
    return C;
}

Matrix cost_matrix(const std::function<double(const Vector&, const Vector&)>& cost,
                   const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const int m = mu.size();
    const int n = nu.size();
    Matrix C(m, n);
    bool bad = false;
    std::string what;
    // Threads own whole columns: the storage is column-major, so per-thread
    // writes stay contiguous and the result is bitwise independent of the
    // thread count.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < m; ++i) {
            try {
                C(i, j) = checked_cost(cost, mu.points[i], nu.points[j]);
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    bad = true;
                    what = e.what();
                }
                C(i, j) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    if (bad) {
        fail(ErrorCode::NonFiniteCost, what);
    }
    return C;
}

// ---------------------------------------------------------------------------
// Transportation-tree simplex on the dense bipartite problem.
// ---------------------------------------------------------------------------

namespace {

class TransportSimplex {
public:
    TransportSimplex(const Matrix& C, const std::vector<double>& a, const std::vector<double>& b)
        : C_(C),
          a_(a),
          b_(b),
          m_(static_cast<int>(a.size())),
          n_(static_cast<int>(b.size())),
          flow_(Matrix::Zero(m_, n_)),
          basic_(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m_, n_, false)),
          row_basic_(m_),
          col_basic_(n_),
          u_(m_),
          v_(n_) {
        eps_ = 1e-12 * std::max(1.0, C_.cwiseAbs().maxCoeff());
    }

    void solve() {
        northwest_corner();
        compute_potentials();

        const long long pivot_cap = 200LL * (m_ + n_) * (m_ + n_) + 10000;
        long long degenerate_streak = 0;
        bool bland = false;
        for (long long pivot = 0;; ++pivot) {
            if (pivot > pivot_cap) {
                fail(ErrorCode::NumericalStall,
                     "transport simplex exceeded " + std::to_string(pivot_cap) + " pivots");
            }
            int ei = -1, ej = -1;
            if (!(bland ? find_entering_bland(ei, ej) : find_entering_dantzig(ei, ej))) {
                break; // optimal
            }
            const double theta = pivot_step(ei, ej);
            compute_potentials();
            if (theta > 0.0) {
                degenerate_streak = 0;
                bland = false;
            } else if (++degenerate_streak > 10LL * (m_ + n_)) {
                bland = true; // anti-cycling fallback
            }
        }
    }

    std::vector<Coupling> couplings() const {
        std::vector<Coupling> out;
        for (int i = 0; i < m_; ++i) {
            for (int j : row_basic_[i]) {
                if (flow_(i, j) > 0.0) {
                    out.push_back({i, j, flow_(i, j)});
                }
            }
        }
        std::sort(out.begin(), out.end(), [](const Coupling& x, const Coupling& y) {
            return x.i != y.i ? x.i < y.i : x.j < y.j;
        });
        return out;
    }

    const std::vector<double>& row_potentials() const { return u_; }
    const std::vector<double>& col_potentials() const { return v_; }

private:
    void add_basic(int i, int j, double f) {
        basic_(i, j) = true;
        flow_(i, j) = f;
        row_basic_[i].push_back(j);
        col_basic_[j].push_back(i);
    }

    void remove_basic(int i, int j) {
        basic_(i, j) = false;
        flow_(i, j) = 0.0;
        auto& r = row_basic_[i];
        r.erase(std::find(r.begin(), r.end(), j));
        auto& c = col_basic_[j];
        c.erase(std::find(c.begin(), c.end(), i));
    }

    void northwest_corner() {
        int i = 0, j = 0;
        double arem = a_[0], brem = b_[0];
        while (true) {
            const double f = std::min(arem, brem);
            add_basic(i, j, f);
            arem -= f;
            brem -= f;
            if (i == m_ - 1 && j == n_ - 1) {
                break;
            }
            if (arem <= brem && i < m_ - 1) {
                ++i;
                arem = a_[i];
            } else if (j < n_ - 1) {
                ++j;
                brem = b_[j];
            } else {
                ++i;
                arem = a_[i];
            }
        }
    }

    // Tree walk from source 0 with u[0] = 0; basic arcs satisfy u_i + v_j = c_ij.
    void compute_potentials() {
        std::fill(u_.begin(), u_.end(), 0.0);
        std::fill(v_.begin(), v_.end(), 0.0);
        std::vector<bool> row_seen(m_, false), col_seen(n_, false);
        std::vector<int> stack = {0}; // node ids: rows 0..m-1, cols m..m+n-1
        row_seen[0] = true;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node < m_) {
                const int i = node;
                for (int j : row_basic_[i]) {
                    if (!col_seen[j]) {
                        col_seen[j] = true;
                        v_[j] = C_(i, j) - u_[i];
                        stack.push_back(m_ + j);
                    }
                }
            } else {
                const int j = node - m_;
                for (int i : col_basic_[j]) {
                    if (!row_seen[i]) {
                        row_seen[i] = true;
                        u_[i] = C_(i, j) - v_[j];
                        stack.push_back(i);
                    }
                }
            }
        }
    }

    bool find_entering_dantzig(int& ei, int& ej) const {
        double best = -eps_;
        ei = ej = -1;
        for (int i = 0; i < m_; ++i) {
            const double ui = u_[i];
            for (int j = 0; j < n_; ++j) {
                const double rc = C_(i, j) - ui - v_[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                }
            }
        }
        return ei >= 0;
    }

    bool find_entering_bland(int& ei, int& ej) const {
        for (int i = 0; i < m_; ++i) {
            const double ui = u_[i];
            for (int j = 0; j < n_; ++j) {
                if (!basic_(i, j) && C_(i, j) - ui - v_[j] < -eps_) {
                    ei = i;
                    ej = j;
                    return true;
                }
            }
        }
        ei = ej = -1;
        return false;
    }

    // Pivot on the entering arc: locate the unique tree cycle, shift the
    // alternating flow, drop the blocking arc. Returns the shifted amount.
    double pivot_step(int ei, int ej) {
        // Path from column node ej back to row node ei through the tree.
        std::vector<int> parent(m_ + n_, -1);
        std::vector<bool> seen(m_ + n_, false);
        std::vector<int> stack = {m_ + ej};
        seen[m_ + ej] = true;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node == ei) {
                break;
            }
            if (node < m_) {
                for (int j : row_basic_[node]) {
                    if (!seen[m_ + j]) {
                        seen[m_ + j] = true;
                        parent[m_ + j] = node;
                        stack.push_back(m_ + j);
                    }
                }
            } else {
                for (int i : col_basic_[node - m_]) {
                    if (!seen[i]) {
                        seen[i] = true;
                        parent[i] = node;
                        stack.push_back(i);
                    }
                }
            }
        }
        if (!seen[ei]) {
            fail(ErrorCode::NumericalStall, "basis lost its spanning-tree structure");
        }

        // Cells along the path, alternating -,+,-,... from the entering arc.
        std::vector<std::pair<int, int>> minus_cells, plus_cells;
        int node = ei;
        bool minus = true;
        while (node != m_ + ej) {
            const int par = parent[node];
            const int i = node < m_ ? node : par;
            const int j = node < m_ ? par - m_ : node - m_;
            (minus ? minus_cells : plus_cells).push_back({i, j});
            minus = !minus;
            node = par;
        }

        double theta = std::numeric_limits<double>::infinity();
        for (const auto& [i, j] : minus_cells) {
            theta = std::min(theta, flow_(i, j));
        }
        std::pair<int, int> leaving = {-1, -1};
        for (const auto& [i, j] : minus_cells) {
            if (flow_(i, j) == theta) {
                if (leaving.first < 0 || std::make_pair(i, j) < leaving) {
                    leaving = {i, j};
                }
            }
        }

        for (const auto& [i, j] : minus_cells) {
            flow_(i, j) -= theta;
        }
        for (const auto& [i, j] : plus_cells) {
            flow_(i, j) += theta;
        }
        remove_basic(leaving.first, leaving.second);
        add_basic(ei, ej, theta);
        return theta;
    }

    const Matrix& C_;
    std::vector<double> a_, b_;
    int m_, n_;
    Matrix flow_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
    std::vector<std::vector<int>> row_basic_, col_basic_;
    std::vector<double> u_, v_;
    double eps_ = 0.0;
};

} // namespace

OTSolution solve_discrete_ot(const Matrix& cost, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu) {
    const int m = mu.size();
    const int n = nu.size();
    if (cost.rows() != m || cost.cols() != n) {
        fail(ErrorCode::ShapeMismatch, "cost matrix shape does not match the marginals");
    }
    if (!cost.allFinite()) {
        fail(ErrorCode::NonFiniteCost, "cost matrix has non-finite entries");
    }

    std::vector<double> a = mu.weights;
    std::vector<double> b = nu.weights;
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::abs(sa - 1.0) > 1e-9 || std::abs(sb - 1.0) > 1e-9) {
        fail(ErrorCode::Infeasible, "marginals are not probability vectors");
    }
    b[n - 1] += sa - sb; // absorb roundoff imbalance

    TransportSimplex simplex(cost, a, b);
    simplex.solve();

    OTSolution sol;
    sol.plan.couplings = simplex.couplings();
    double total = 0.0;
    std::vector<int> per_source(m, 0);
    for (const auto& c : sol.plan.couplings) {
        total += c.mass * cost(c.i, c.j);
        ++per_source[c.i];
    }
    sol.plan.total_cost = total;
    sol.plan.is_map = std::all_of(per_source.begin(), per_source.end(),
                                  [](int k) { return k == 1; });

    sol.duals.psi.resize(m);
    sol.duals.psi_c.resize(n);
    for (int i = 0; i < m; ++i) {
        sol.duals.psi[i] = -simplex.row_potentials()[i];
    }
    for (int j = 0; j < n; ++j) {
        sol.duals.psi_c[j] = simplex.col_potentials()[j];
    }
    return sol;
}

ReductionCertificate quadratic_reduction(const CostModel& model, const DiscreteMeasure& mu0,
                                         const DiscreteMeasure& mu1) {
    ReductionCertificate cert;
    cert.mu1_hat = pushforward(mu1, model.E, Vector::Zero(model.n));

    cert.f.resize(mu0.size());
    for (int i = 0; i < mu0.size(); ++i) {
        const Vector& x = mu0.points[i];
        cert.f[i] = 0.5 * x.dot(model.D * x) - 0.5 * x.squaredNorm();
    }
    cert.g.resize(mu1.size());
    std::vector<Vector> Ey(mu1.size());
    for (int j = 0; j < mu1.size(); ++j) {
        const Vector& y = mu1.points[j];
        Ey[j] = model.E * y;
        cert.g[j] = 0.5 * y.dot(model.F * y) - 0.5 * Ey[j].squaredNorm();
    }

    double worst = 0.0;
    for (int i = 0; i < mu0.size(); ++i) {
        for (int j = 0; j < mu1.size(); ++j) {
            const Vector& x = mu0.points[i];
            const double c = eval_cost(model, x, mu1.points[j]);
            const double chat = 0.5 * (x - Ey[j]).squaredNorm();
            const double scale =
                1.0 + std::abs(c) + std::abs(chat) + std::abs(cert.f[i]) + std::abs(cert.g[j]);
            worst = std::max(worst, std::abs(c - chat - cert.f[i] - cert.g[j]) / scale);
        }
    }
    cert.max_split_residual = worst;
    return cert;
}

MonotonicityReport cyclical_monotonicity_check(const TransportPlan& plan,
                                               const DiscreteMeasure& mu,
                                               const DiscreteMeasure& nu, const Matrix& E,
                                               std::uint64_t seed, int random_cycles) {
    MonotonicityReport report;
    const int s = static_cast<int>(plan.couplings.size());
    if (s <= 1) {
        report.pass = true;
        report.min_cycle_slack = 0.0;
        return report;
    }

    // Pair k of the support is (x_k, E y_k); slack terms are inner products.
    std::vector<Vector> xs(s), eys(s);
    for (int k = 0; k < s; ++k) {
        xs[k] = mu.points[plan.couplings[k].i];
        eys[k] = E * nu.points[plan.couplings[k].j];
    }
    Matrix dot(s, s);
    for (int k = 0; k < s; ++k) {
        for (int l = 0; l < s; ++l) {
            dot(k, l) = xs[k].dot(eys[l]);
        }
    }
    const double scale = 1.0 + dot.cwiseAbs().maxCoeff();

    double min_slack = std::numeric_limits<double>::infinity();
    long checked = 0;
    auto cycle_slack = [&](const std::vector<int>& cyc) {
        double slack = 0.0;
        const int L = static_cast<int>(cyc.size());
        for (int t = 0; t < L; ++t) {
            slack += dot(cyc[t], cyc[t]) - dot(cyc[t], cyc[(t + 1) % L]);
        }
        return slack;
    };
    auto consider = [&](const std::vector<int>& cyc) {
        min_slack = std::min(min_slack, cycle_slack(cyc));
        ++checked;
    };

    // Exhaustive enumeration up to length 4, capped by subset count.
    const double c2 = 0.5 * s * (s - 1);
    const double c3 = c2 * (s - 2) / 3.0;
    const double c4 = c3 * (s - 3) / 4.0;
    const double cap = 2e6;
    int max_exhaustive = 1;
    if (c2 <= cap) max_exhaustive = 2;
    if (s >= 3 && c2 + c3 <= cap) max_exhaustive = 3;
    if (s >= 4 && c2 + c3 + c4 <= cap) max_exhaustive = 4;
    report.exhaustive = (max_exhaustive == std::min(4, s));

    if (max_exhaustive >= 2) {
        for (int k = 0; k < s; ++k) {
            for (int l = k + 1; l < s; ++l) {
                consider({k, l});
            }
        }
    }
    if (max_exhaustive >= 3) {
        for (int k = 0; k < s; ++k) {
            for (int l = k + 1; l < s; ++l) {
                for (int p = l + 1; p < s; ++p) {
                    consider({k, l, p});
                    consider({k, p, l});
                }
            }
        }
    }
    if (max_exhaustive >= 4) {
        static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (int k = 0; k < s; ++k) {
            for (int l = k + 1; l < s; ++l) {
                for (int p = l + 1; p < s; ++p) {
                    for (int q = p + 1; q < s; ++q) {
                        const int rest[3] = {l, p, q};
                        for (const auto& perm : perms) {
                            consider({k, rest[perm[0]], rest[perm[1]], rest[perm[2]]});
                        }
                    }
                }
            }
        }
    }

    // Random longer cycles (or all lengths when enumeration was capped).
    std::mt19937_64 rng(seed);
    const int len_lo = report.exhaustive ? 5 : 2;
    const int len_hi = std::min(12, s);
    if (len_hi >= len_lo) {
        std::vector<int> pool(s);
        std::iota(pool.begin(), pool.end(), 0);
        for (int r = 0; r < random_cycles; ++r) {
            const int L = len_lo + static_cast<int>(uniform01(rng) * (len_hi - len_lo + 1));
            std::vector<int> cyc(L);
            for (int t = 0; t < L; ++t) {
                const int pick = t + static_cast<int>(uniform01(rng) * (s - t));
                std::swap(pool[t], pool[pick]);
                cyc[t] = pool[t];
            }
            consider(cyc);
        }
    }

    report.min_cycle_slack = checked == 0 ? 0.0 : min_slack;
    report.cycles_checked = checked;
    report.pass = report.min_cycle_slack >= -1e-9 * scale;
    return report;
}

double dual_ctransform(const DualPotentials& duals, const DiscreteMeasure& mu,
                       const std::function<double(const Vector&, const Vector&)>& cost,
                       const Vector& y) {
    if (duals.psi.size() != static_cast<size_t>(mu.size())) {
        fail(ErrorCode::ShapeMismatch, "potentials do not match the source measure");
    }
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mu.size(); ++i) {
        best = std::min(best, duals.psi[i] + cost(mu.points[i], y));
    }
    return best;
}

std::vector<std::pair<int, int>> plan_to_map(const TransportPlan& plan) {
    std::vector<std::pair<int, int>> map;
    std::vector<int> split;
    int last_i = -1;
    for (const auto& c : plan.couplings) { // couplings sorted by (i, j)
        if (c.i == last_i) {
            if (split.empty() || split.back() != c.i) {
                split.push_back(c.i);
            }
        } else {
            map.push_back({c.i, c.j});
            last_i = c.i;
        }
    }
    if (!split.empty()) {
        std::ostringstream msg;
        msg << "plan splits sources:";
        for (int i : split) {
            msg << ' ' << i;
        }
        fail(ErrorCode::NotDeterministic, msg.str());
    }
    return map;
}

} // namespace lqot
