#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gb/engines.hpp"
#include "gb/gibbs.hpp"
#include "gb/loss.hpp"
#include "gb/prior.hpp"

namespace gb {

// A rule for choosing the loss-to-prior weight w.
class WeightRule {
public:
    struct Fixed { double w; };
    struct UnitInformation { std::size_t mc_draws = 10000; };
    struct Hierarchical { double xi; };
    struct Operational {
        double alpha;                 // target miscoverage
        std::vector<double> w_grid;   // strictly positive, increasing
        std::size_t replications;
    };

    static WeightRule fixed(double w);
    static WeightRule unit_information(std::size_t mc_draws = 10000);
    static WeightRule hierarchical(double xi);
    static WeightRule operational(double alpha, std::vector<double> w_grid,
                                  std::size_t replications);

    template <class T> const T* get_if() const { return std::get_if<T>(&kind_); }
    std::string kind_name() const;

private:
    using Kind = std::variant<Fixed, UnitInformation, Hierarchical, Operational>;
    explicit WeightRule(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

struct UnitInfoResult {
    double w = 0.0;
    double numerator = 0.0;      // Monte-Carlo estimate of E_pi[log pi(mode)/pi(theta)]
    double numerator_se = 0.0;
    double denominator = 0.0;    // (1/(n-p)) sum_i l_std(theta_hat_x, x_i)
    std::vector<double> theta_hat_x;
};

// w = E_pi[log pi(mode)/pi(theta)] / [(1/(n-p)) sum_i l_std(theta_hat_x, x_i)]
// with theta_hat_x the cumulative-loss minimizer over the prior support and
// l_std the per-datum standardized loss. Deterministic given the seed.
UnitInfoResult unit_info_weight(const LogPrior& prior, const DatasetLoss& loss,
                                std::uint64_t seed, std::size_t mc_draws = 10000);

// Extended posterior over (theta, w): log density xi*log w - w L(theta)
// + log pi(theta, w), with w as the last coordinate of the joint prior.
class HierarchicalPosterior {
public:
    HierarchicalPosterior(DatasetLoss loss, LogPrior joint_prior, double xi);

    double log_unnormalized(std::span<const double> theta_w) const;
    std::size_t dim() const { return prior_.dim(); }
    const LogPrior& prior() const { return prior_; }
    double xi() const { return xi_; }

private:
    std::shared_ptr<const DatasetLoss> loss_;
    LogPrior prior_;
    double xi_;
};

inline HierarchicalPosterior hierarchical_posterior(DatasetLoss loss, LogPrior joint_prior,
                                                    double xi) {
    return HierarchicalPosterior(std::move(loss), std::move(joint_prior), xi);
}

// A seeded resampling mechanism together with the parameter its cumulative
// loss targets (the coverage target of the operational rule).
struct Resampler {
    std::function<std::vector<Datum>(Rng&)> draw;
    std::vector<double> loss_minimizer;
};

// Row bootstrap over the given data; the target is the cumulative-loss
// minimizer on the original sample, optimized over the prior support.
Resampler bootstrap_resampler(const PointLoss& loss, std::vector<Datum> data,
                              const LogPrior& prior);

struct OperationalResult {
    double w = 0.0;
    std::vector<double> coverage;  // one entry per grid w
    std::vector<std::string> warnings;
};

// Picks the grid w whose empirical credible-interval coverage of the
// resampler's loss minimizer is closest to 1-alpha (ties go to smaller w).
OperationalResult operational_weight(const PointLoss& loss, const LogPrior& prior,
                                     const Resampler& generator, double alpha,
                                     std::span<const double> w_grid, std::size_t replications,
                                     const McmcConfig& mcmc);

}  // namespace gb
