#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

namespace gb {

using Objective = std::function<double(std::span<const double>)>;

enum class NmStop { Converged, MaxEvals };

struct NmResult {
    std::vector<double> argmin;
    double value = 0.0;
    NmStop stop = NmStop::Converged;
    int evals = 0;
};

// Downhill simplex with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
// Objective values of +inf are treated as worse than any finite value, so a
// constraint set can be imposed by returning +inf outside it. Deterministic
// given the start point. Throws gb::Error if the objective is not finite at
// the start or the simplex gets stuck entirely in a forbidden region.
NmResult nelder_mead_minimize(const Objective& f, std::span<const double> start,
                              double tolerance = 1e-10, int max_evals = 20000);

// Repeats the simplex search from the incumbent with a fresh axis-aligned
// simplex until a restart stops improving. On piecewise-linear objectives a
// single simplex can collapse into a hyperplane and stall off the minimum;
// restarts recover the kink directions.
NmResult nelder_mead_restarted(const Objective& f, std::span<const double> start,
                               double tolerance = 1e-10, int max_evals = 20000,
                               int max_restarts = 8);

// Central-difference Hessian, symmetrized as (H + H^T)/2. Per-coordinate step
// is h * max(1, |theta_k|); h defaults to the fourth root of machine epsilon.
Eigen::MatrixXd hessian_fd(const Objective& f, std::span<const double> theta, double h = 0.0);

}  // namespace gb
