#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gb/gibbs.hpp"
#include "gb/param.hpp"

namespace gb {

using LogDensityFn = std::function<double(std::span<const double>)>;

struct McmcConfig {
    std::size_t iterations = 10000;
    std::size_t burn_in = 1000;
    std::vector<double> step_scales;  // per coordinate; broadcast if length 1
    std::uint64_t seed = 0;
    std::size_t thin = 1;

    void validate(std::size_t dim) const;
    std::vector<double> steps_for(std::size_t dim) const;
};

struct Chain {
    std::vector<ParamPoint> draws;       // post burn-in, post thinning
    double acceptance_rate = 0.0;        // over the whole run
    std::uint64_t seed = 0;
    std::vector<double> log_density_trace;

    std::vector<double> coordinate(std::size_t k) const;
};

struct LaplaceResult {
    double log_evidence = 0.0;
    ParamPoint mode;
    Eigen::MatrixXd covariance;  // inverse Hessian of -log density at the mode
};

struct EvidenceEstimate {
    double log_evidence = 0.0;
    double std_error = 0.0;  // delta-method SE on the log scale
};

// log of int exp(log_integrand) over [lower, upper] by composite Simpson,
// panel sums accumulated in log space. Starts at `panels` and doubles until
// the change is below `tolerance`; throws on non-convergence and on an
// identically-zero integrand ("posterior undefined").
double quadrature_1d(const std::function<double(double)>& log_integrand, double lower,
                     double upper, std::size_t panels, double tolerance = 1e-10);

// Mode via Nelder-Mead from the hint, Hessian of -log density by central
// differences, evidence = (p/2)log(2pi) - 1/2 log det H + log density(mode).
LaplaceResult laplace_log_evidence(const LogDensityFn& log_unnorm,
                                   std::span<const double> mode_hint,
                                   Constraint constraint = Constraint::None);
LaplaceResult laplace_log_evidence(const GibbsPosterior& post, const ParamPoint& mode_hint);

EvidenceEstimate importance_sample_evidence(const LogDensityFn& log_unnorm,
                                            std::span<const double> proposal_mean,
                                            const Eigen::MatrixXd& proposal_cov,
                                            std::size_t n_draws, std::uint64_t seed);
EvidenceEstimate importance_sample_evidence(const GibbsPosterior& post,
                                            std::span<const double> proposal_mean,
                                            const Eigen::MatrixXd& proposal_cov,
                                            std::size_t n_draws, std::uint64_t seed);

// Per-coordinate Gaussian random walk; constraint violations reject through
// a -inf target density. Deterministic given the seed.
Chain random_walk_mh(const LogDensityFn& log_unnorm, std::span<const double> start,
                     const McmcConfig& config, Constraint constraint = Constraint::None);
// Start point searched among prior draws (up to 1000) when not supplied.
Chain random_walk_mh(const GibbsPosterior& post, const McmcConfig& config,
                     std::optional<ParamPoint> start = std::nullopt);

// Equal-tailed interval from chain order statistics (linear interpolation).
std::pair<double, double> credible_interval(const Chain& chain, std::size_t coordinate,
                                            double level);

}  // namespace gb
