#include "lqot/output.hpp"

#include "lqot/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lqot {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorCode::ConfigError, "cannot write " + tmp.string());
        }
        out << content;
    }
    fs::rename(tmp, target);
}

std::string trajectory_csv(const OptimalTrajectory& traj, int n, int m) {
    std::ostringstream out;
    out << 't';
    for (int k = 1; k <= n; ++k) out << ",x" << k;
    for (int k = 1; k <= n; ++k) out << ",p" << k;
    for (int k = 1; k <= m; ++k) out << ",u" << k;
    out << '\n';
    for (int i = 0; i < traj.times.size(); ++i) {
        out << format_double(traj.times(i));
        for (int k = 0; k < n; ++k) out << ',' << format_double(traj.states[i](k));
        for (int k = 0; k < n; ++k) out << ',' << format_double(traj.adjoints[i](k));
        for (int k = 0; k < m; ++k) out << ',' << format_double(traj.controls[i](k));
        out << '\n';
    }
    return out.str();
}

std::string plan_csv(const TransportPlan& plan) {
    std::ostringstream out;
    out << "i,j,mass\n";
    for (const auto& c : plan.couplings) {
        out << c.i << ',' << c.j << ',' << format_double(c.mass) << '\n';
    }
    return out.str();
}

} // namespace lqot
