#pragma once

#include "lqot/lqcost.hpp"
#include "lqot/transport.hpp"

#include <string>

namespace lqot {

// Full-precision decimal form (17 significant digits) so round-trips are exact.
std::string format_double(double v);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a partial artifact.
void write_file_atomic(const std::string& path, const std::string& content);

// CSV with header t,x1..xn,p1..pn,u1..um.
std::string trajectory_csv(const OptimalTrajectory& traj, int n, int m);

// CSV with header i,j,mass.
std::string plan_csv(const TransportPlan& plan);

} // namespace lqot
