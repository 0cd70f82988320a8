#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gb/param.hpp"
#include "gb/rng.hpp"

namespace gb {

// Log-prior density with sampling access. Densities are normalized where a
// closed form exists (independent-normal, spike-slab, discrete-grid);
// ordered-normal is the unconstrained product restricted to the increasing
// cone, so its values are up to the (unknown) cone-mass constant.
class LogPrior {
public:
    static LogPrior independent_normal(std::vector<double> means, std::vector<double> variances);
    static LogPrior ordered_normal(std::vector<double> means, std::vector<double> variances);
    // Joint (delta, beta) state represented by beta alone: delta_j = [beta_j != 0].
    static LogPrior spike_slab(std::vector<double> slab_variances,
                               std::vector<double> inclusion_probs);
    static LogPrior discrete_grid(std::vector<ParamPoint> support, std::vector<double> weights);
    static LogPrior product(std::vector<LogPrior> blocks);

    double log_density(const ParamPoint& theta) const { return log_density(theta.values()); }
    double log_density(std::span<const double> theta) const;

    // i.i.d. draws; ordered-normal by rejection (throws past the attempt cap).
    std::vector<ParamPoint> sample(Rng& rng, std::size_t n) const;
    std::vector<ParamPoint> sample(std::uint64_t seed, std::size_t n) const;

    // Argmax of the density; throws where no closed form exists (spike-slab).
    ParamPoint mode() const;

    std::size_t dim() const;
    Constraint constraint() const;
    std::string kind_name() const;

    static constexpr int kOrderedRejectionCap = 10000;

private:
    struct IndependentNormal {
        std::vector<double> means, variances;
    };
    struct OrderedNormal {
        std::vector<double> means, variances;
    };
    struct SpikeSlab {
        std::vector<double> slab_variances, inclusion_probs;
    };
    struct DiscreteGrid {
        std::vector<ParamPoint> support;
        std::vector<double> log_weights;
    };
    struct Product {
        std::vector<LogPrior> blocks;
        std::size_t total_dim;
    };
    using Kind = std::variant<IndependentNormal, OrderedNormal, SpikeSlab, DiscreteGrid, Product>;

    explicit LogPrior(Kind k) : kind_(std::make_shared<Kind>(std::move(k))) {}
    void sample_into(Rng& rng, std::span<double> out) const;

    std::shared_ptr<const Kind> kind_;
};

// Spec'd operation names.
inline double log_density(const LogPrior& prior, const ParamPoint& theta) {
    return prior.log_density(theta);
}
inline std::vector<ParamPoint> sample_prior(const LogPrior& prior, std::uint64_t seed,
                                            std::size_t n) {
    return prior.sample(seed, n);
}
inline ParamPoint prior_mode(const LogPrior& prior) { return prior.mode(); }

double normal_log_pdf(double x, double mean, double var);

}  // namespace gb
