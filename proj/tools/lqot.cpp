#include "lqot/config.hpp"
#include "lqot/errors.hpp"
#include "lqot/fiber.hpp"
#include "lqot/lqcost.hpp"
#include "lqot/oracle.hpp"
#include "lqot/output.hpp"
#include "lqot/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using lqot::Matrix;
using lqot::Vector;
using nlohmann::json;

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "problem config (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--tol", args.tol, "override the compatibility tolerance");
}

lqot::ProblemConfig load(const CommonArgs& args) {
    return lqot::load_config(args.config_path, args.seed, args.tol);
}

std::string out_path(const CommonArgs& args, const std::string& name) {
    return (std::filesystem::path(args.out_dir) / name).string();
}

void write_json(const CommonArgs& args, const std::string& name, const json& doc) {
    lqot::write_file_atomic(out_path(args, name), doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_analyze(const CommonArgs& args) {
    const auto cfg = load(args);
    const auto report = lqot::kalman_decomposition(cfg.system.A, cfg.system.B);

    json doc;
    doc["n"] = cfg.system.n;
    doc["m"] = cfg.system.m;
    doc["d"] = report.d;
    doc["controllable"] = report.is_controllable;
    doc["V_basis"] = matrix_to_json(report.V_basis);
    if (!report.is_controllable) {
        doc["blocks"]["A1"] = matrix_to_json(report.A1);
        doc["blocks"]["A2"] = matrix_to_json(report.A2);
        doc["blocks"]["A3"] = matrix_to_json(report.A3);
        doc["blocks"]["B1"] = matrix_to_json(report.B1);
        doc["blocks"]["P"] = matrix_to_json(report.P);
    } else {
        const auto model = lqot::cost_matrices(cfg.system);
        doc["cost"]["D"] = matrix_to_json(model.D);
        doc["cost"]["E"] = matrix_to_json(model.E);
        doc["cost"]["F"] = matrix_to_json(model.F);
        doc["cost"]["E_inv"] = matrix_to_json(model.R2);
        doc["cost"]["cond_R2"] = model.cond_R2;
        const Matrix c_rel = -Matrix::Identity(model.n, model.n) +
                             model.R1.transpose() * model.E.transpose() * model.Q2;
        doc["cost"]["residual_C"] = lqot::rel_err(model.C, c_rel);
        doc["cost"]["residual_Q1"] = lqot::rel_err(model.Q1, model.C * model.D);
    }
    write_json(args, "analyze.json", doc);
    std::cout << "analyze: d = " << report.d << "/" << cfg.system.n
              << (report.is_controllable ? " (controllable)" : " (non-controllable)") << "\n";
    return 0;
}

int cmd_cost(const CommonArgs& args, bool with_trajectories) {
    const auto cfg = load(args);
    if (cfg.pairs.empty()) {
        lqot::fail(lqot::ErrorCode::ConfigError, "pairs: missing (cost needs endpoint pairs)");
    }
    const auto report = lqot::kalman_decomposition(cfg.system.A, cfg.system.B);

    json doc;
    doc["pairs"] = json::array();
    if (report.is_controllable) {
        const auto model = lqot::cost_matrices(cfg.system);
        for (size_t k = 0; k < cfg.pairs.size(); ++k) {
            const auto& [x, y] = cfg.pairs[k];
            json entry;
            entry["x"] = vector_to_json(x);
            entry["y"] = vector_to_json(y);
            entry["cost"] = lqot::eval_cost(model, x, y);
            entry["p0"] = vector_to_json(lqot::initial_adjoint(model, x, y));
            doc["pairs"].push_back(entry);
            if (with_trajectories) {
                const auto traj = lqot::optimal_trajectory(cfg.system, model, x, y,
                                                           cfg.options.trajectory_samples);
                lqot::write_file_atomic(
                    out_path(args, "trajectory_" + std::to_string(k) + ".csv"),
                    lqot::trajectory_csv(traj, cfg.system.n, cfg.system.m));
                doc["pairs"].back()["running_cost"] = traj.running_cost;
            }
        }
    } else {
        for (const auto& [x, y] : cfg.pairs) {
            json entry;
            entry["x"] = vector_to_json(x);
            entry["y"] = vector_to_json(y);
            if (!lqot::reachable_target(cfg.system.A, report, x, y)) {
                entry["cost"] = "+inf";
            } else if (report.d == 0) {
                const Matrix WA = lqot::integrate_matrix(
                    [&](double t) -> Matrix {
                        const Matrix e = lqot::matrix_exponential(cfg.system.A, t);
                        return e.transpose() * cfg.system.W * e;
                    },
                    0.0, 1.0);
                entry["cost"] = 0.5 * x.dot(WA * x);
            } else {
                const Vector xk = report.P * x;
                const Vector yk = report.P * y;
                const auto fcm = lqot::fiber_cost_model(cfg.system, report,
                                                        xk.tail(cfg.system.n - report.d));
                entry["cost"] =
                    lqot::eval_fiber_cost(fcm, xk.head(report.d), yk.head(report.d));
            }
            doc["pairs"].push_back(entry);
        }
    }
    write_json(args, with_trajectories ? "trajectories.json" : "costs.json", doc);
    std::cout << (with_trajectories ? "trajectory" : "cost") << ": " << cfg.pairs.size()
              << " pair(s) written\n";
    return 0;
}

json monotonicity_to_json(const lqot::MonotonicityReport& rep) {
    json j;
    j["pass"] = rep.pass;
    j["min_cycle_slack"] = rep.min_cycle_slack;
    j["cycles_checked"] = rep.cycles_checked;
    j["exhaustive_to_length_4"] = rep.exhaustive;
    return j;
}

int cmd_solve(const CommonArgs& args) {
    const auto cfg = load(args);
    if (!cfg.has_measures) {
        lqot::fail(lqot::ErrorCode::ConfigError, "mu0/mu1: missing (solve needs both measures)");
    }
    const auto report = lqot::kalman_decomposition(cfg.system.A, cfg.system.B);

    json doc;
    lqot::TransportPlan plan;
    if (report.is_controllable) {
        const auto model = lqot::cost_matrices(cfg.system);
        const Matrix C = lqot::cost_matrix(
            [&](const Vector& x, const Vector& y) { return lqot::eval_cost(model, x, y); },
            cfg.mu0, cfg.mu1);
        auto sol = lqot::solve_discrete_ot(C, cfg.mu0, cfg.mu1);
        plan = sol.plan;
        doc["duals"]["psi"] = sol.duals.psi;
        doc["duals"]["psi_c"] = sol.duals.psi_c;
        doc["monotonicity"] =
            monotonicity_to_json(lqot::cyclical_monotonicity_check(plan, cfg.mu0, cfg.mu1,
                                                                   model.E));
    } else {
        auto sol = lqot::solve_noncontrollable(cfg.system, cfg.mu0, cfg.mu1,
                                               cfg.options.compat_tol);
        plan = sol.plan;
        doc["d"] = sol.d;
        doc["compat_discrepancy"] = sol.compat_discrepancy;
        doc["fibers"] = json::array();
        for (const auto& f : sol.fibers) {
            json jf;
            jf["label"] = vector_to_json(f.label);
            jf["weight"] = f.weight;
            jf["cost"] = f.cost;
            jf["source_atoms"] = f.source_atoms;
            jf["target_atoms"] = f.target_atoms;
            doc["fibers"].push_back(jf);
        }
    }

    doc["total_cost"] = plan.total_cost;
    doc["couplings"] = json::array();
    for (const auto& c : plan.couplings) {
        doc["couplings"].push_back({c.i, c.j, c.mass});
    }
    doc["is_map"] = plan.is_map;
    if (plan.is_map) {
        json map = json::array();
        for (const auto& [i, j] : lqot::plan_to_map(plan)) {
            map.push_back({i, j});
        }
        doc["map"] = map;
    }

    write_json(args, "plan.json", doc);
    lqot::write_file_atomic(out_path(args, "plan.csv"), lqot::plan_csv(plan));
    std::cout << "solve: total cost " << lqot::format_double(plan.total_cost) << ", "
              << plan.couplings.size() << " coupling(s)\n";
    return 0;
}

int cmd_sample(const CommonArgs& args) {
    const auto cfg = load(args);
    if (!cfg.has_measures) {
        lqot::fail(lqot::ErrorCode::ConfigError, "mu0/mu1: missing (sample needs both measures)");
    }
    json doc;
    auto measure_to_json = [](const lqot::DiscreteMeasure& mu) {
        json jm;
        jm["points"] = json::array();
        for (const auto& p : mu.points) {
            jm["points"].push_back(vector_to_json(p));
        }
        jm["weights"] = mu.weights;
        return jm;
    };
    doc["mu0"] = measure_to_json(cfg.mu0);
    doc["mu1"] = measure_to_json(cfg.mu1);
    write_json(args, "measures.json", doc);
    std::cout << "sample: " << cfg.mu0.size() << " + " << cfg.mu1.size() << " atoms written\n";
    return 0;
}

// Cross-validation suites behind the `check` verb.
int cmd_check(const CommonArgs& args) {
    const auto cfg = load(args);
    const auto report = lqot::kalman_decomposition(cfg.system.A, cfg.system.B);

    json checks = json::array();
    bool all_pass = true;
    auto record = [&](const std::string& name, bool pass, double value, double threshold) {
        json entry;
        entry["name"] = name;
        entry["pass"] = pass;
        entry["value"] = value;
        entry["threshold"] = threshold;
        checks.push_back(entry);
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  value="
                  << lqot::format_double(value) << "\n";
    };

    // Endpoint pairs: configured ones, else deterministic draws from the seed.
    std::vector<std::pair<Vector, Vector>> pairs = cfg.pairs;
    if (pairs.empty()) {
        std::mt19937_64 rng(lqot::split_seed(cfg.seed, 7));
        for (int k = 0; k < cfg.options.check_pairs; ++k) {
            Vector x(cfg.system.n), y(cfg.system.n);
            for (int i = 0; i < cfg.system.n; ++i) {
                x(i) = 2.0 * lqot::uniform01(rng) - 1.0;
                y(i) = 2.0 * lqot::uniform01(rng) - 1.0;
            }
            pairs.push_back({x, y});
        }
    }

    if (report.is_controllable) {
        const auto model = lqot::cost_matrices(cfg.system);

        double worst_traj = 0.0;
        for (const auto& [x, y] : pairs) {
            const double c = lqot::eval_cost(model, x, y);
            const auto traj = lqot::optimal_trajectory(cfg.system, model, x, y, 4096);
            worst_traj = std::max(worst_traj,
                                  std::abs(traj.running_cost - c) / std::max(1.0, std::abs(c)));
        }
        record("triple_consistency_trajectory", worst_traj <= 1e-6, worst_traj, 1e-6);

        if (cfg.system.W.norm() == 0.0) {
            double worst_gram = 0.0;
            for (const auto& [x, y] : pairs) {
                const double c = lqot::eval_cost(model, x, y);
                const double g = lqot::grammian_cost(cfg.system, x, y);
                worst_gram = std::max(worst_gram, std::abs(g - c) / std::max(1.0, std::abs(c)));
            }
            record("triple_consistency_grammian", worst_gram <= 1e-8, worst_gram, 1e-8);
        }

        // Piecewise-constant oracle: monotone in K, never below the closed form.
        {
            const auto& [x, y] = pairs.front();
            const double c = lqot::eval_cost(model, x, y);
            double prev = std::numeric_limits<double>::infinity();
            bool monotone = true;
            bool lower_bounded = true;
            double final_gap = 0.0;
            for (int K = 4; K <= cfg.options.oracle_pieces; K *= 2) {
                const auto res = lqot::min_cost_piecewise(cfg.system, x, y, K);
                monotone = monotone && res.cost <= prev + 1e-9;
                lower_bounded = lower_bounded && res.cost >= c - 1e-8;
                final_gap = (res.cost - c) / std::max(1.0, std::abs(c));
                prev = res.cost;
            }
            record("oracle_monotone_in_K", monotone, prev, 0.0);
            record("oracle_above_closed_form", lower_bounded, final_gap, 1e-8);
        }

        if (cfg.has_measures) {
            const Matrix C = lqot::cost_matrix(
                [&](const Vector& x, const Vector& y) { return lqot::eval_cost(model, x, y); },
                cfg.mu0, cfg.mu1);
            const auto sol = lqot::solve_discrete_ot(C, cfg.mu0, cfg.mu1);

            double dual_value = 0.0;
            for (int j = 0; j < cfg.mu1.size(); ++j) {
                dual_value += sol.duals.psi_c[j] * cfg.mu1.weights[j];
            }
            for (int i = 0; i < cfg.mu0.size(); ++i) {
                dual_value -= sol.duals.psi[i] * cfg.mu0.weights[i];
            }
            const double gap = std::abs(sol.plan.total_cost - dual_value);
            record("duality_gap", gap <= 1e-8 * (1.0 + std::abs(sol.plan.total_cost)), gap, 1e-8);

            double worst_feas = 0.0;
            for (int i = 0; i < cfg.mu0.size(); ++i) {
                for (int j = 0; j < cfg.mu1.size(); ++j) {
                    worst_feas = std::max(worst_feas, sol.duals.psi_c[j] - sol.duals.psi[i] -
                                                          C(i, j));
                }
            }
            record("dual_feasibility", worst_feas <= 1e-9, worst_feas, 1e-9);

            const auto mono =
                lqot::cyclical_monotonicity_check(sol.plan, cfg.mu0, cfg.mu1, model.E);
            record("cyclical_monotonicity", mono.pass, mono.min_cycle_slack, 0.0);
        }
    } else if (cfg.has_measures) {
        const lqot::DiscreteMeasure mu0_k =
            lqot::pushforward(cfg.mu0, report.P, Vector::Zero(cfg.system.n));
        const lqot::DiscreteMeasure mu1_k =
            lqot::pushforward(cfg.mu1, report.P, Vector::Zero(cfg.system.n));
        const auto compat =
            lqot::compatibility_check(mu0_k, mu1_k, report, cfg.options.compat_tol);
        record("fiber_compatibility", compat.compatible, compat.discrepancy,
               cfg.options.compat_tol);

        if (compat.compatible) {
            const auto sol = lqot::solve_noncontrollable(cfg.system, cfg.mu0, cfg.mu1,
                                                         cfg.options.compat_tol);
            double worst_confine = 0.0;
            double label_scale = 0.0;
            if (report.d > 0) {
                const Matrix A2_exp = lqot::matrix_exponential(report.A2);
                for (const auto& c : sol.plan.couplings) {
                    const Vector x2 = (report.P * cfg.mu0.points[c.i]).tail(cfg.system.n - report.d);
                    const Vector y2 = (report.P * cfg.mu1.points[c.j]).tail(cfg.system.n - report.d);
                    worst_confine = std::max(worst_confine, (y2 - A2_exp * x2).norm());
                    label_scale = std::max(label_scale, x2.lpNorm<Eigen::Infinity>());
                }
            }
            const double confine_radius = lqot::fiber_radius(label_scale);
            record("fiber_confinement", worst_confine <= confine_radius, worst_confine,
                   confine_radius);

            double recomputed = 0.0;
            for (const auto& c : sol.plan.couplings) {
                Vector x = cfg.mu0.points[c.i];
                Vector y = cfg.mu1.points[c.j];
                if (report.d == 0) {
                    const Matrix WA = lqot::integrate_matrix(
                        [&](double t) -> Matrix {
                            const Matrix e = lqot::matrix_exponential(cfg.system.A, t);
                            return e.transpose() * cfg.system.W * e;
                        },
                        0.0, 1.0);
                    recomputed += c.mass * 0.5 * x.dot(WA * x);
                } else {
                    const Vector xk = report.P * x;
                    const Vector yk = report.P * y;
                    const auto fcm = lqot::fiber_cost_model(cfg.system, report,
                                                            xk.tail(cfg.system.n - report.d));
                    recomputed += c.mass * lqot::eval_fiber_cost(fcm, xk.head(report.d),
                                                                 yk.head(report.d));
                }
            }
            const double drift =
                std::abs(recomputed - sol.plan.total_cost) / (1.0 + std::abs(recomputed));
            record("plan_cost_reevaluation", drift <= 1e-8, drift, 1e-8);
        }
    } else {
        record("fiber_pipeline_inputs", false, 0.0, 0.0);
        std::cout << "check: non-controllable system needs mu0/mu1 in the config\n";
    }

    json doc;
    doc["checks"] = checks;
    doc["all_pass"] = all_pass;
    write_json(args, "check.json", doc);
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal transport under linear-quadratic control costs"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* analyze = app.add_subcommand("analyze", "controllability and cost-matrix report");
    auto* cost = app.add_subcommand("cost", "evaluate the cost on endpoint pairs");
    auto* trajectory = app.add_subcommand("trajectory", "export optimal trajectories as CSV");
    auto* solve = app.add_subcommand("solve", "solve discrete optimal transport");
    auto* check = app.add_subcommand("check", "run the cross-validation suites");
    auto* sample = app.add_subcommand("sample", "materialize the configured measures");
    for (auto* cmd : {analyze, cost, trajectory, solve, check, sample}) {
        add_common(cmd, args);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(analyze)) return cmd_analyze(args);
        if (app.got_subcommand(cost)) return cmd_cost(args, false);
        if (app.got_subcommand(trajectory)) return cmd_cost(args, true);
        if (app.got_subcommand(solve)) return cmd_solve(args);
        if (app.got_subcommand(check)) return cmd_check(args);
        if (app.got_subcommand(sample)) return cmd_sample(args);
    } catch (const lqot::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case lqot::ErrorCode::ConfigError:
                return 2;
            case lqot::ErrorCode::IncompatibleMarginals:
                return 3;
            default:
                return 4;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
