#include "lqot/fiber.hpp"

#include "lqot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lqot {

double fiber_radius(double label_scale) {
    return 1e-8 * (1.0 + label_scale);
}

Matrix FiberDynamics::G(double t) const {
    if (t == 0.0) {
        return Matrix::Zero(d, nd);
    }
    const Matrix inner = integrate_matrix(
        [&](double s) -> Matrix {
            return matrix_exponential(A1, -s) * A3 * matrix_exponential(A2, s);
        },
        0.0, t);
    return matrix_exponential(A1, t) * inner;
}

FiberDynamics fiber_dynamics(const LinearQuadraticSystem& sys,
                             const ControllabilityReport& report) {
    if (report.d == 0) {
        fail(ErrorCode::DegenerateFiber, "d = 0 has no controllable block");
    }
    if (report.is_controllable) {
        fail(ErrorCode::PreconditionViolated, "system is controllable; no fiber structure");
    }
    FiberDynamics dyn;
    dyn.d = report.d;
    dyn.nd = report.n - report.d;
    dyn.A1 = report.A1;
    dyn.A2 = report.A2;
    dyn.A3 = report.A3;
    dyn.B1 = report.B1;
    const Matrix Wt = report.P * sys.W * report.P.transpose();
    dyn.W1 = Wt.topLeftCorner(dyn.d, dyn.d);
    dyn.W3 = Wt.topRightCorner(dyn.d, dyn.nd);
    dyn.W2 = Wt.bottomRightCorner(dyn.nd, dyn.nd);
    dyn.A2_exp = matrix_exponential(dyn.A2);
    return dyn;
}

namespace {

// Exact state of the forced system via one augmented exponential:
// (zbar, pbar, G(t)x2, e^{tA2}x2) all satisfy a constant-coefficient linear
// ODE, so the whole bundle is e^{t BigM} (0, 0, 0, x2).
struct ForcedState {
    Vector z, p, g, h;
};

struct ForcedFlow {
    Matrix bigM;
    Vector init;
    int d = 0, nd = 0;

    ForcedFlow(const FiberDynamics& dyn, const Matrix& S1, const Vector& x2) {
        d = dyn.d;
        nd = dyn.nd;
        const int sz = 3 * d + nd;
        bigM = Matrix::Zero(sz, sz);
        bigM.block(0, 0, d, d) = dyn.A1;
        bigM.block(0, d, d, d) = S1;
        bigM.block(d, 0, d, d) = dyn.W1;
        bigM.block(d, d, d, d) = -dyn.A1.transpose();
        bigM.block(d, 2 * d, d, d) = dyn.W1;
        bigM.block(d, 2 * d + d, d, nd) = dyn.W3;
        bigM.block(2 * d, 2 * d, d, d) = dyn.A1;
        bigM.block(2 * d, 3 * d, d, nd) = dyn.A3;
        bigM.block(3 * d, 3 * d, nd, nd) = dyn.A2;
        init = Vector::Zero(sz);
        init.tail(nd) = x2;
    }

    ForcedState at(double t) const {
        const Vector s = matrix_exponential(bigM, t) * init;
        ForcedState out;
        out.z = s.segment(0, d);
        out.p = s.segment(d, d);
        out.g = s.segment(2 * d, d);
        out.h = s.tail(nd);
        return out;
    }
};

Matrix reduced_gram(const FiberDynamics& dyn, const LinearQuadraticSystem& sys) {
    return dyn.B1 * sys.U.llt().solve(dyn.B1.transpose());
}

} // namespace

std::vector<ForcedSample> forced_hamiltonian_solution(const LinearQuadraticSystem& sys,
                                                      const FiberDynamics& dyn, const Vector& x2,
                                                      int samples) {
    if (samples < 2) {
        fail(ErrorCode::PreconditionViolated, "need at least 2 samples");
    }
    if (x2.size() != dyn.nd) {
        fail(ErrorCode::ShapeMismatch, "x2 must have dimension n - d");
    }
    const int d = dyn.d;
    Matrix Mf(2 * d, 2 * d);
    const Matrix S1 = reduced_gram(dyn, sys);
    Mf.topLeftCorner(d, d) = dyn.A1;
    Mf.topRightCorner(d, d) = S1;
    Mf.bottomLeftCorner(d, d) = dyn.W1;
    Mf.bottomRightCorner(d, d) = -dyn.A1.transpose();

    auto forcing = [&](double s) -> Vector {
        Vector f = Vector::Zero(2 * d);
        f.tail(d) = dyn.W1 * (dyn.G(s) * x2) + dyn.W3 * (matrix_exponential(dyn.A2, s) * x2);
        return f;
    };

    std::vector<ForcedSample> out;
    out.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / (samples - 1);
        ForcedSample sample;
        sample.t = t;
        if (t == 0.0) {
            sample.z = Vector::Zero(d);
            sample.p = Vector::Zero(d);
        } else {
            const Vector inner = integrate_vector(
                [&](double s) -> Vector { return matrix_exponential(Mf, -s) * forcing(s); }, 0.0,
                t);
            const Vector zeta = matrix_exponential(Mf, t) * inner;
            sample.z = zeta.head(d);
            sample.p = zeta.tail(d);
        }
        out.push_back(std::move(sample));
    }
    return out;
}

FiberCostModel fiber_cost_model(const LinearQuadraticSystem& sys,
                                const ControllabilityReport& report, const Vector& x2) {
    const FiberDynamics dyn = fiber_dynamics(sys, report);
    const int d = dyn.d;
    if (x2.size() != dyn.nd) {
        fail(ErrorCode::ShapeMismatch, "x2 must have dimension n - d");
    }

    // The reduced pair (A1, B1) with weights (W1, U) is itself a valid
    // controllable system; its closed-form cost model supplies D, E, F and the
    // homogeneous Q1, Q2, C with all relations checked.
    const LinearQuadraticSystem reduced_sys = validate_system(dyn.A1, dyn.B1, dyn.W1, sys.U);
    FiberCostModel fcm;
    fcm.x2 = x2;
    fcm.reduced = cost_matrices(reduced_sys);

    const Matrix S1 = reduced_gram(dyn, sys);
    const Matrix Mf = hamiltonian_matrix(reduced_sys);
    const ForcedFlow flow(dyn, S1, x2);
    Matrix Wt(d + dyn.nd, d + dyn.nd);
    Wt.topLeftCorner(d, d) = dyn.W1;
    Wt.topRightCorner(d, dyn.nd) = dyn.W3;
    Wt.bottomLeftCorner(dyn.nd, d) = dyn.W3.transpose();
    Wt.bottomRightCorner(dyn.nd, dyn.nd) = dyn.W2;

    // v, w, k, l_int in one stacked quadrature pass.
    auto integrand = [&](double t) -> Matrix {
        const Matrix R = matrix_exponential(Mf, t);
        const Matrix R1 = R.topLeftCorner(d, d);
        const Matrix R2 = R.topRightCorner(d, d);
        const Matrix R3 = R.bottomLeftCorner(d, d);
        const Matrix R4 = R.bottomRightCorner(d, d);
        const ForcedState st = flow.at(t);
        const Vector X = dyn.W1 * st.g + dyn.W3 * st.h;

        Matrix out(2 * d + 2, 1);
        out.col(0).segment(0, d) =
            R1.transpose() * (dyn.W1 * st.z) + R3.transpose() * (S1 * st.p) + R1.transpose() * X;
        out.col(0).segment(d, d) =
            R2.transpose() * (dyn.W1 * st.z) + R4.transpose() * (S1 * st.p) + R2.transpose() * X;
        out(2 * d, 0) =
            0.5 * st.z.dot(dyn.W1 * st.z) + 0.5 * st.p.dot(S1 * st.p) + st.z.dot(X);
        Vector gh(d + dyn.nd);
        gh << st.g, st.h;
        out(2 * d + 1, 0) = 0.5 * gh.dot(Wt * gh);
        return out;
    };
    const Matrix stacked = integrate_matrix(integrand, 0.0, 1.0);
    fcm.v = stacked.col(0).segment(0, d);
    fcm.w = stacked.col(0).segment(d, d);
    fcm.k = stacked(2 * d, 0);
    fcm.l_int = stacked(2 * d + 1, 0);

    const ForcedState at1 = flow.at(1.0);
    fcm.z_bar1 = at1.z;
    fcm.G1x2 = at1.g;

    const Vector v_expected = fcm.reduced.R1.transpose() * fcm.reduced.E.transpose() * fcm.w;
    const double relation_scale =
        1.0 + fcm.v.norm() + fcm.w.norm() +
        fcm.reduced.R1.norm() * fcm.reduced.E.norm() * fcm.w.norm();
    if ((fcm.v - v_expected).norm() > 1e-8 * relation_scale) {
        fail(ErrorCode::ConsistencyFailure, "fiber relation v = R1^T E^T w violated");
    }
    return fcm;
}

double eval_fiber_cost(const FiberCostModel& fcm, const Vector& x1, const Vector& y1) {
    const CostModel& rm = fcm.reduced;
    if (x1.size() != rm.n || y1.size() != rm.n) {
        fail(ErrorCode::ShapeMismatch, "fiber cost arguments must be d-vectors");
    }
    const Vector zeta = y1 - fcm.G1x2 - fcm.z_bar1;
    const double value = 0.5 * quadratic_form(x1, rm.D, x1) - quadratic_form(x1, rm.E, zeta) +
                         0.5 * quadratic_form(zeta, rm.F, zeta) +
                         quadratic_form(fcm.w, rm.E, zeta) + fcm.k + fcm.l_int;
    const double floor = -1e-10 * (1.0 + x1.squaredNorm() + y1.squaredNorm() +
                                   fcm.x2.squaredNorm());
    if (value < 0.0 && value >= floor) {
        return 0.0;
    }
    return value;
}

namespace {

std::vector<Vector> fiber_labels(const DiscreteMeasure& mu_k, int d) {
    std::vector<Vector> labels;
    labels.reserve(mu_k.points.size());
    for (const auto& p : mu_k.points) {
        labels.push_back(p.tail(p.size() - d));
    }
    return labels;
}

bool lex_less(const Vector& a, const Vector& b) {
    for (int k = 0; k < a.size(); ++k) {
        if (a(k) != b(k)) {
            return a(k) < b(k);
        }
    }
    return false;
}

// Single-linkage clusters of label vectors within the given radius; returns
// cluster index per atom.
std::vector<int> cluster_labels(const std::vector<Vector>& labels, double radius,
                                int* cluster_count) {
    const int N = static_cast<int>(labels.size());
    std::vector<int> parent(N);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    for (int i = 0; i < N; ++i) {
        for (int j = i + 1; j < N; ++j) {
            if ((labels[i] - labels[j]).norm() <= radius) {
                const int ri = find(i), rj = find(j);
                if (ri != rj) {
                    parent[std::max(ri, rj)] = std::min(ri, rj);
                }
            }
        }
    }
    std::vector<int> cluster_of(N, -1);
    int count = 0;
    for (int i = 0; i < N; ++i) {
        const int r = find(i);
        if (cluster_of[r] < 0) {
            cluster_of[r] = count++;
        }
        cluster_of[i] = cluster_of[r];
    }
    *cluster_count = count;
    return cluster_of;
}

struct LabelCluster {
    Vector mean;
    double mass = 0.0;
    std::vector<int> atoms;
};

std::vector<LabelCluster> build_clusters(const std::vector<Vector>& labels,
                                         const std::vector<double>& weights, double radius) {
    int count = 0;
    const std::vector<int> cluster_of = cluster_labels(labels, radius, &count);
    std::vector<LabelCluster> clusters(count);
    for (size_t i = 0; i < labels.size(); ++i) {
        auto& c = clusters[cluster_of[i]];
        if (c.mass == 0.0) {
            c.mean = Vector::Zero(labels[i].size());
        }
        c.mean += weights[i] * labels[i];
        c.mass += weights[i];
        c.atoms.push_back(static_cast<int>(i));
    }
    for (auto& c : clusters) {
        c.mean /= c.mass;
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const LabelCluster& a, const LabelCluster& b) { return lex_less(a.mean, b.mean); });
    return clusters;
}

double max_label_norm(const std::vector<Vector>& labels) {
    double s = 0.0;
    for (const auto& l : labels) {
        s = std::max(s, l.lpNorm<Eigen::Infinity>());
    }
    return s;
}

} // namespace

CompatibilityReport compatibility_check(const DiscreteMeasure& mu0_k,
                                        const DiscreteMeasure& mu1_k,
                                        const ControllabilityReport& report, double tol) {
    const int d = report.d;
    const Matrix A2_exp = matrix_exponential(report.A2);

    std::vector<Vector> mapped0 = fiber_labels(mu0_k, d);
    for (auto& l : mapped0) {
        l = A2_exp * l;
    }
    const std::vector<Vector> labels1 = fiber_labels(mu1_k, d);

    const double radius = fiber_radius(std::max(max_label_norm(mapped0), max_label_norm(labels1)));
    const auto clusters0 = build_clusters(mapped0, mu0_k.weights, radius);
    const auto clusters1 = build_clusters(labels1, mu1_k.weights, radius);

    std::vector<bool> used(clusters1.size(), false);
    double matched_gap = 0.0;
    double unmatched = 0.0;
    bool per_fiber_ok = true;
    for (const auto& c0 : clusters0) {
        int match = -1;
        double best = radius;
        for (size_t j = 0; j < clusters1.size(); ++j) {
            if (used[j]) continue;
            const double dist = (clusters1[j].mean - c0.mean).norm();
            if (dist <= best) {
                best = dist;
                match = static_cast<int>(j);
            }
        }
        if (match < 0) {
            unmatched += c0.mass;
            per_fiber_ok = per_fiber_ok && c0.mass <= tol;
        } else {
            used[match] = true;
            const double gap = std::abs(c0.mass - clusters1[match].mass);
            matched_gap += gap;
            per_fiber_ok = per_fiber_ok && gap <= tol;
        }
    }
    for (size_t j = 0; j < clusters1.size(); ++j) {
        if (!used[j]) {
            unmatched += clusters1[j].mass;
            per_fiber_ok = per_fiber_ok && clusters1[j].mass <= tol;
        }
    }

    CompatibilityReport rep;
    rep.discrepancy = 0.5 * (matched_gap + unmatched);
    rep.compatible = per_fiber_ok;
    return rep;
}

std::vector<Fiber> disintegrate(const DiscreteMeasure& mu_k, const ControllabilityReport& report) {
    const int d = report.d;
    const std::vector<Vector> labels = fiber_labels(mu_k, d);
    const double radius = fiber_radius(max_label_norm(labels));
    const auto clusters = build_clusters(labels, mu_k.weights, radius);

    std::vector<Fiber> fibers;
    fibers.reserve(clusters.size());
    for (const auto& c : clusters) {
        Fiber f;
        f.label = c.mean;
        f.weight = c.mass;
        f.atom_indices = c.atoms;
        std::vector<Vector> pts;
        std::vector<double> ws;
        for (int idx : c.atoms) {
            pts.push_back(mu_k.points[idx].head(d));
            ws.push_back(mu_k.weights[idx]);
        }
        f.measure = make_measure(std::move(pts), std::move(ws));
        fibers.push_back(std::move(f));
    }
    return fibers;
}

namespace {

NoncontrollableSolution solve_d0(const LinearQuadraticSystem& sys, const DiscreteMeasure& mu0,
                                 const DiscreteMeasure& mu1) {
    const Matrix S = matrix_exponential(sys.A);
    const int N = mu0.size();
    if (mu1.size() != N) {
        fail(ErrorCode::IncompatibleMarginals,
             "d = 0: atom counts differ, mu1 cannot be the image of mu0 under e^A");
    }

    // Sorted atom matching of (e^A)# mu0 against mu1.
    std::vector<Vector> images(N);
    for (int i = 0; i < N; ++i) {
        images[i] = S * mu0.points[i];
    }
    std::vector<int> ord0(N), ord1(N);
    std::iota(ord0.begin(), ord0.end(), 0);
    std::iota(ord1.begin(), ord1.end(), 0);
    std::sort(ord0.begin(), ord0.end(),
              [&](int a, int b) { return lex_less(images[a], images[b]); });
    std::sort(ord1.begin(), ord1.end(),
              [&](int a, int b) { return lex_less(mu1.points[a], mu1.points[b]); });

    NoncontrollableSolution sol;
    sol.d = 0;
    std::vector<Coupling> couplings;
    for (int k = 0; k < N; ++k) {
        const int i = ord0[k];
        const int j = ord1[k];
        const double pos_gap = (images[i] - mu1.points[j]).norm();
        const double mass_gap = std::abs(mu0.weights[i] - mu1.weights[j]);
        if (pos_gap > 1e-8 * (1.0 + mu1.points[j].norm()) || mass_gap > 1e-9) {
            fail(ErrorCode::IncompatibleMarginals,
                 "d = 0: mu1 is not the pushforward of mu0 under e^A (atom gap " +
                     std::to_string(pos_gap) + ", mass gap " + std::to_string(mass_gap) + ")");
        }
        couplings.push_back({i, j, mu0.weights[i]});
    }
    std::sort(couplings.begin(), couplings.end(), [](const Coupling& a, const Coupling& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });

    // cost(x) = 1/2 int_0^1 <e^{tA}x, W e^{tA}x> dt as one quadratic form.
    const Matrix WA = integrate_matrix(
        [&](double t) -> Matrix {
            const Matrix e = matrix_exponential(sys.A, t);
            return e.transpose() * sys.W * e;
        },
        0.0, 1.0);
    double total = 0.0;
    for (const auto& c : couplings) {
        total += c.mass * 0.5 * mu0.points[c.i].dot(WA * mu0.points[c.i]);
    }

    sol.plan.couplings = std::move(couplings);
    sol.plan.total_cost = total;
    sol.plan.is_map = true;
    return sol;
}

} // namespace

NoncontrollableSolution solve_noncontrollable(const LinearQuadraticSystem& sys,
                                              const DiscreteMeasure& mu0,
                                              const DiscreteMeasure& mu1, double compat_tol) {
    const ControllabilityReport report = kalman_decomposition(sys.A, sys.B);
    if (report.is_controllable) {
        fail(ErrorCode::PreconditionViolated,
             "system is controllable; use the controllable pipeline");
    }
    if (mu0.dim() != sys.n || mu1.dim() != sys.n) {
        fail(ErrorCode::ShapeMismatch, "measures must live in the state space");
    }
    if (report.d == 0) {
        return solve_d0(sys, mu0, mu1);
    }

    const DiscreteMeasure mu0_k = pushforward(mu0, report.P, Vector::Zero(sys.n));
    const DiscreteMeasure mu1_k = pushforward(mu1, report.P, Vector::Zero(sys.n));

    const CompatibilityReport compat = compatibility_check(mu0_k, mu1_k, report, compat_tol);
    if (!compat.compatible) {
        fail(ErrorCode::IncompatibleMarginals,
             "fiber marginals differ (discrepancy " + std::to_string(compat.discrepancy) + ")");
    }

    const std::vector<Fiber> fibers0 = disintegrate(mu0_k, report);
    const std::vector<Fiber> fibers1 = disintegrate(mu1_k, report);
    const Matrix A2_exp = matrix_exponential(report.A2);

    // Pair each source fiber with its image fiber e^{A2} x2.
    const int F = static_cast<int>(fibers0.size());
    std::vector<int> match(F, -1);
    {
        double scale = 0.0;
        for (const auto& f : fibers1) {
            scale = std::max(scale, f.label.lpNorm<Eigen::Infinity>());
        }
        std::vector<bool> used(fibers1.size(), false);
        for (int f = 0; f < F; ++f) {
            const Vector target = A2_exp * fibers0[f].label;
            const double radius = fiber_radius(std::max(scale, target.lpNorm<Eigen::Infinity>()));
            double best = radius;
            for (size_t j = 0; j < fibers1.size(); ++j) {
                if (used[j]) continue;
                const double dist = (fibers1[j].label - target).norm();
                if (dist <= best) {
                    best = dist;
                    match[f] = static_cast<int>(j);
                }
            }
            if (match[f] < 0) {
                fail(ErrorCode::IncompatibleMarginals, "source fiber has no image fiber in mu1");
            }
            used[match[f]] = true;
        }
        if (std::count(used.begin(), used.end(), true) != static_cast<long>(fibers1.size())) {
            fail(ErrorCode::IncompatibleMarginals, "mu1 carries fibers with no source fiber");
        }
    }

    // Fibers are independent problems; solve them in parallel, merge in order.
    std::vector<OTSolution> fiber_solutions(F);
    std::vector<std::string> errors(F);
#pragma omp parallel for schedule(dynamic)
    for (int f = 0; f < F; ++f) {
        try {
            const FiberCostModel fcm = fiber_cost_model(sys, report, fibers0[f].label);
            const Matrix C = cost_matrix_serial(
                [&](const Vector& x1, const Vector& y1) { return eval_fiber_cost(fcm, x1, y1); },
                fibers0[f].measure, fibers1[match[f]].measure);
            fiber_solutions[f] = solve_discrete_ot(C, fibers0[f].measure, fibers1[match[f]].measure);
        } catch (const std::exception& e) {
            errors[f] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            fail(ErrorCode::NumericalStall, "fiber solve failed: " + e);
        }
    }

    NoncontrollableSolution sol;
    sol.d = report.d;
    sol.compat_discrepancy = compat.discrepancy;
    double total = 0.0;
    std::vector<Coupling> couplings;
    for (int f = 0; f < F; ++f) {
        const Fiber& src = fibers0[f];
        const Fiber& dst = fibers1[match[f]];
        const OTSolution& fsol = fiber_solutions[f];
        for (const auto& c : fsol.plan.couplings) {
            couplings.push_back({src.atom_indices[c.i], dst.atom_indices[c.j],
                                 src.weight * c.mass});
        }
        total += src.weight * fsol.plan.total_cost;

        FiberSummary summary;
        summary.label = src.label;
        summary.weight = src.weight;
        summary.cost = fsol.plan.total_cost;
        summary.source_atoms = src.measure.size();
        summary.target_atoms = dst.measure.size();
        sol.fibers.push_back(std::move(summary));
    }
    std::sort(couplings.begin(), couplings.end(), [](const Coupling& a, const Coupling& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    std::vector<int> per_source(mu0.size(), 0);
    for (const auto& c : couplings) {
        ++per_source[c.i];
    }
    sol.plan.is_map = std::all_of(per_source.begin(), per_source.end(),
                                  [](int k) { return k == 1; });
    sol.plan.couplings = std::move(couplings);
    sol.plan.total_cost = total;
    return sol;
}

} // namespace lqot
