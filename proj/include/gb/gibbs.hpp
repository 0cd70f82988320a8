#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gb/loss.hpp"
#include "gb/param.hpp"
#include "gb/prior.hpp"

namespace gb {

// The exponential tilt: log nu(theta) = -w L(theta) + log pi(theta) up to
// the normalizing constant. Immutable and shareable; normalization lives in
// the engines (Laplace / quadrature / importance sampling).
class GibbsPosterior {
public:
    GibbsPosterior(DatasetLoss loss, double weight, LogPrior prior);

    // -inf exactly where the prior density is 0. Throws on NaN / -inf loss.
    double log_unnormalized(std::span<const double> theta) const;
    double log_unnormalized(const ParamPoint& theta) const {
        return log_unnormalized(theta.values());
    }

    const DatasetLoss& loss() const { return *loss_; }
    const LogPrior& prior() const { return prior_; }
    double weight() const { return w_; }
    std::size_t dim() const { return prior_.dim(); }

private:
    std::shared_ptr<const DatasetLoss> loss_;
    double w_;
    LogPrior prior_;
};

// A belief over a finite support; log-weights normalized so exp sums to 1.
class DiscreteBelief {
public:
    DiscreteBelief(std::vector<ParamPoint> support, std::vector<double> weights);
    static DiscreteBelief from_log_weights(std::vector<ParamPoint> support,
                                           std::vector<double> log_weights);

    std::span<const ParamPoint> support() const { return support_; }
    std::span<const double> log_weights() const { return log_weights_; }
    double weight(std::size_t k) const;
    std::size_t size() const { return support_.size(); }
    std::size_t argmax() const;

private:
    DiscreteBelief() = default;
    std::vector<ParamPoint> support_;
    std::vector<double> log_weights_;
};

// One exact update on a finite grid: w_k <- w_k * exp(-w L(theta_k)),
// renormalized. Throws "posterior undefined" when every weight underflows.
DiscreteBelief update_discrete(const DiscreteBelief& prior_belief, const DatasetLoss& loss,
                               double weight);

// (fold over the batches in order, single update with the summed loss);
// the coherence property says the two agree.
std::pair<DiscreteBelief, DiscreteBelief> sequential_vs_batch(
    const DiscreteBelief& prior_belief, std::span<const DatasetLoss> batches, double weight);

// argmax_a (1/n) sum_i u(a, theta_i); ties broken by lowest action index.
std::size_t expected_utility_action(
    std::span<const ParamPoint> belief_samples,
    const std::function<double(std::size_t, const ParamPoint&)>& utility, std::size_t n_actions);

}  // namespace gb
