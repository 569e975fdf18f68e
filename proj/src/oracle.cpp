#include "lqot/oracle.hpp"

#include "lqot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lqot {

namespace {

// One piece of length h: endpoint map [Phi, Gamma] and the quadratic form H of
// the running cost in the stacked variable (x_k, u_k). Both via augmented
// exponentials (Van Loan blocks), so no quadrature error enters the oracle.
struct PieceModel {
    Matrix Phi;   // n x n
    Matrix Gamma; // n x m
    Matrix H;     // (n+m) x (n+m), cost = 1/2 [x;u]^T H [x;u]
};

PieceModel build_piece(const LinearQuadraticSystem& sys, double h) {
    const int n = sys.n;
    const int m = sys.m;

    Matrix Ahat = Matrix::Zero(n + m, n + m);
    Ahat.topLeftCorner(n, n) = sys.A;
    Ahat.topRightCorner(n, m) = sys.B;

    Matrix What = Matrix::Zero(n + m, n + m);
    What.topLeftCorner(n, n) = sys.W;
    What.bottomRightCorner(m, m) = sys.U;

    const Matrix E = matrix_exponential(Ahat, h);

    // exp(h [[-Ahat^T, What], [0, Ahat]]) = [[F1, G1], [0, F2]] gives
    // int_0^h e^{s Ahat^T} What e^{s Ahat} ds = F2^T G1.
    const int d = n + m;
    Matrix big = Matrix::Zero(2 * d, 2 * d);
    big.topLeftCorner(d, d) = -Ahat.transpose();
    big.topRightCorner(d, d) = What;
    big.bottomRightCorner(d, d) = Ahat;
    const Matrix eb = matrix_exponential(big, h);

    PieceModel piece;
    piece.Phi = E.topLeftCorner(n, n);
    piece.Gamma = E.topRightCorner(n, m);
    piece.H = eb.bottomRightCorner(d, d).transpose() * eb.topRightCorner(d, d);
    piece.H = 0.5 * (piece.H + piece.H.transpose());
    return piece;
}

} // namespace

PiecewiseResult min_cost_piecewise(const LinearQuadraticSystem& sys, const Vector& x,
                                   const Vector& y, int K) {
    if (K < 1) {
        fail(ErrorCode::PreconditionViolated, "K must be at least 1");
    }
    if (x.size() != sys.n || y.size() != sys.n) {
        fail(ErrorCode::ShapeMismatch, "endpoints must be n-vectors");
    }
    const int n = sys.n;
    const int m = sys.m;
    const int nu = K * m; // stacked control coefficients
    const PieceModel piece = build_piece(sys, 1.0 / K);

    // x_k = alpha_k + beta_k u with u the stacked controls.
    std::vector<Vector> alpha(K + 1);
    std::vector<Matrix> beta(K + 1);
    alpha[0] = x;
    beta[0] = Matrix::Zero(n, nu);
    for (int k = 0; k < K; ++k) {
        alpha[k + 1] = piece.Phi * alpha[k];
        beta[k + 1] = piece.Phi * beta[k];
        beta[k + 1].middleCols(k * m, m) += piece.Gamma;
    }

    // Total cost = 1/2 u^T P u + q^T u + c0.
    Matrix P = Matrix::Zero(nu, nu);
    Vector q = Vector::Zero(nu);
    double c0 = 0.0;
    for (int k = 0; k < K; ++k) {
        Matrix T = Matrix::Zero(n + m, nu); // (x_k, u_k) = a_k + T u
        T.topRows(n) = beta[k];
        T.block(n, k * m, m, m) = Matrix::Identity(m, m);
        Vector a = Vector::Zero(n + m);
        a.head(n) = alpha[k];

        P += T.transpose() * piece.H * T;
        q += T.transpose() * (piece.H * a);
        c0 += 0.5 * a.dot(piece.H * a);
    }
    P = 0.5 * (P + P.transpose());

    // Endpoint constraint beta_K u = y - alpha_K, reduced to its row space so
    // fiber-confined (rank-deficient) systems stay solvable.
    const Matrix& Mc = beta[K];
    const Vector rhs = y - alpha[K];
    Eigen::JacobiSVD<Matrix> svd(Mc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) > 1e-12 * smax && sv(i) > 0.0) {
            ++rank;
        }
    }
    if (rank < n) {
        const Matrix Ur = svd.matrixU().leftCols(rank);
        const Vector out_of_range = rhs - Ur * (Ur.transpose() * rhs);
        if (out_of_range.norm() > 1e-8 * (1.0 + rhs.norm())) {
            fail(ErrorCode::UnreachableEndpoint,
                 "endpoint misses the reachable set by " + std::to_string(out_of_range.norm()));
        }
    }
    Matrix Ac(rank, nu);
    Vector bc(rank);
    for (int r = 0; r < rank; ++r) {
        Ac.row(r) = sv(r) * svd.matrixV().col(r).transpose();
        bc(r) = svd.matrixU().col(r).dot(rhs);
    }

    // KKT system for the equality-constrained quadratic program.
    Matrix kkt = Matrix::Zero(nu + rank, nu + rank);
    kkt.topLeftCorner(nu, nu) = P;
    kkt.topRightCorner(nu, rank) = Ac.transpose();
    kkt.bottomLeftCorner(rank, nu) = Ac;
    Vector kkt_rhs(nu + rank);
    kkt_rhs.head(nu) = -q;
    kkt_rhs.tail(rank) = bc;

    const Vector sol = kkt.fullPivLu().solve(kkt_rhs);
    const double residual = (kkt * sol - kkt_rhs).norm();
    if (residual > 1e-10 * (1.0 + kkt_rhs.norm() + kkt.norm() * sol.norm())) {
        fail(ErrorCode::NumericalStall,
             "KKT residual " + std::to_string(residual) + " exceeds tolerance");
    }
    const Vector u = sol.head(nu);

    PiecewiseResult result;
    result.cost = 0.5 * u.dot(P * u) + q.dot(u) + c0;
    result.control.K = K;
    result.control.values.reserve(K);
    for (int k = 0; k < K; ++k) {
        result.control.values.push_back(u.segment(k * m, m));
    }
    return result;
}

namespace {

TransportPlan finish_plan(std::vector<Coupling> couplings, const Matrix& cost) {
    TransportPlan plan;
    std::sort(couplings.begin(), couplings.end(), [](const Coupling& a, const Coupling& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    plan.couplings = std::move(couplings);
    plan.total_cost = 0.0;
    std::vector<int> per_source;
    for (const auto& c : plan.couplings) {
        plan.total_cost += c.mass * cost(c.i, c.j);
        if (c.i >= static_cast<int>(per_source.size())) {
            per_source.resize(c.i + 1, 0);
        }
        ++per_source[c.i];
    }
    plan.is_map = std::all_of(per_source.begin(), per_source.end(),
                              [](int k) { return k == 1; });
    return plan;
}

bool coupling_lex_less(const std::vector<Coupling>& a, const std::vector<Coupling>& b) {
    for (size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
        if (a[k].i != b[k].i) return a[k].i < b[k].i;
        if (a[k].j != b[k].j) return a[k].j < b[k].j;
        if (a[k].mass != b[k].mass) return a[k].mass < b[k].mass;
    }
    return a.size() < b.size();
}

// Global minimum over permutation couplings for uniform equal-count marginals.
TransportPlan enumerate_permutations(const Matrix& cost, int N) {
    std::vector<int> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    const double w = 1.0 / N;

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_perm;
    do {
        double value = 0.0;
        for (int i = 0; i < N; ++i) {
            value += cost(i, perm[i]);
        }
        if (value < best) { // strict: first (lexicographic) permutation wins ties
            best = value;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<Coupling> couplings;
    for (int i = 0; i < N; ++i) {
        couplings.push_back({i, best_perm[i], w});
    }
    return finish_plan(std::move(couplings), cost);
}

// Vertices of the transport polytope are basic solutions of spanning trees of
// the complete bipartite graph; enumerate all edge subsets of size m+n-1 that
// form a tree, solve the flows by leaf peeling, keep feasible ones.
TransportPlan enumerate_vertices(const Matrix& cost, const std::vector<double>& a,
                                 const std::vector<double>& b) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    const int nodes = m + n;
    const int edges = m * n;
    const int need = nodes - 1;

    std::vector<int> pick(need);
    std::iota(pick.begin(), pick.end(), 0);

    double best = std::numeric_limits<double>::infinity();
    std::vector<Coupling> best_couplings;

    auto try_subset = [&](const std::vector<int>& subset) {
        // Tree check via union-find.
        std::vector<int> parent(nodes);
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int i) {
            while (parent[i] != i) {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            return i;
        };
        for (int e : subset) {
            const int i = e / n;
            const int j = m + e % n;
            const int ri = find(i), rj = find(j);
            if (ri == rj) {
                return; // cycle
            }
            parent[ri] = rj;
        }

        // Solve flows by peeling leaves of the tree.
        std::vector<std::vector<std::pair<int, int>>> adj(nodes); // (neighbor, edge)
        for (int e : subset) {
            const int i = e / n;
            const int j = m + e % n;
            adj[i].push_back({j, e});
            adj[j].push_back({i, e});
        }
        std::vector<double> supply(nodes);
        for (int i = 0; i < m; ++i) supply[i] = a[i];
        for (int j = 0; j < n; ++j) supply[m + j] = -b[j];

        std::vector<int> degree(nodes);
        std::vector<bool> edge_done(static_cast<size_t>(edges), false);
        std::vector<bool> node_done(nodes, false);
        for (int v = 0; v < nodes; ++v) degree[v] = static_cast<int>(adj[v].size());
        std::vector<int> leaves;
        for (int v = 0; v < nodes; ++v) {
            if (degree[v] == 1) leaves.push_back(v);
        }
        std::vector<double> flow(static_cast<size_t>(edges), 0.0);
        bool feasible = true;
        for (int step = 0; step + 1 < nodes && feasible; ++step) {
            if (leaves.empty()) {
                feasible = false;
                break;
            }
            const int v = leaves.back();
            leaves.pop_back();
            node_done[v] = true;
            for (const auto& [w, e] : adj[v]) {
                if (edge_done[e] || node_done[w]) continue;
                // Edge flow i -> j equals the leaf's remaining supply.
                const double fl = v < m ? supply[v] : -supply[v];
                if (fl < -1e-12) {
                    feasible = false;
                    break;
                }
                flow[e] = std::max(fl, 0.0);
                supply[w] += supply[v];
                supply[v] = 0.0;
                edge_done[e] = true;
                if (--degree[w] == 1 && !node_done[w]) leaves.push_back(w);
                break;
            }
        }
        if (!feasible) {
            return;
        }

        double value = 0.0;
        std::vector<Coupling> couplings;
        for (int e : subset) {
            if (flow[e] > 0.0) {
                const int i = e / n;
                const int j = e % n;
                value += flow[e] * cost(i, j);
                couplings.push_back({i, j, flow[e]});
            }
        }
        std::sort(couplings.begin(), couplings.end(), [](const Coupling& x, const Coupling& y) {
            return x.i != y.i ? x.i < y.i : x.j < y.j;
        });
        if (value < best - 1e-15 ||
            (std::abs(value - best) <= 1e-15 && coupling_lex_less(couplings, best_couplings))) {
            best = value;
            best_couplings = std::move(couplings);
        }
    };

    // Enumerate all C(edges, need) subsets in lexicographic order.
    while (true) {
        try_subset(pick);
        int k = need - 1;
        while (k >= 0 && pick[k] == edges - need + k) {
            --k;
        }
        if (k < 0) {
            break;
        }
        ++pick[k];
        for (int l = k + 1; l < need; ++l) {
            pick[l] = pick[l - 1] + 1;
        }
    }
    if (best_couplings.empty()) {
        fail(ErrorCode::Infeasible, "no feasible vertex found");
    }
    return finish_plan(std::move(best_couplings), cost);
}

} // namespace

TransportPlan enumerate_ot(const Matrix& cost, const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu) {
    const int m = mu.size();
    const int n = nu.size();
    if (cost.rows() != m || cost.cols() != n) {
        fail(ErrorCode::ShapeMismatch, "cost matrix shape does not match the marginals");
    }

    const bool uniform_square =
        m == n &&
        std::all_of(mu.weights.begin(), mu.weights.end(),
                    [&](double w) { return std::abs(w - 1.0 / m) < 1e-12; }) &&
        std::all_of(nu.weights.begin(), nu.weights.end(),
                    [&](double w) { return std::abs(w - 1.0 / n) < 1e-12; });

    if (uniform_square && m <= 8) {
        return enumerate_permutations(cost, m);
    }
    if (m <= 5 && n <= 5) {
        return enumerate_vertices(cost, mu.weights, nu.weights);
    }
    fail(ErrorCode::TooLarge,
         "enumerate_ot handles uniform marginals up to 8+8 atoms or general ones up to 5+5");
}

} // namespace lqot
