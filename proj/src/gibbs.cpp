#include "gb/gibbs.hpp"

#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/util.hpp"

namespace gb {

GibbsPosterior::GibbsPosterior(DatasetLoss loss, double weight, LogPrior prior)
    : loss_(std::make_shared<DatasetLoss>(std::move(loss))), w_(weight), prior_(std::move(prior)) {
    if (!(w_ > 0.0) || !std::isfinite(w_))
        throw Error("GibbsPosterior: weight must be positive and finite");
}

double GibbsPosterior::log_unnormalized(std::span<const double> theta) const {
    const double lp = prior_.log_density(theta);
    if (lp == neg_inf) return neg_inf;
    const double L = loss_->eval(theta);
    if (std::isnan(L) || L == neg_inf) {
        std::ostringstream os;
        os << "log_unnormalized: non-finite loss at theta = (";
        for (std::size_t k = 0; k < theta.size(); ++k) os << (k ? "," : "") << theta[k];
        os << ")";
        throw Error(os.str());
    }
    if (L == pos_inf) return neg_inf;  // zero posterior density, surfaced as log 0
    return -w_ * L + lp;
}

DiscreteBelief::DiscreteBelief(std::vector<ParamPoint> support, std::vector<double> weights) {
    if (support.empty() || support.size() != weights.size())
        throw Error("DiscreteBelief: support/weights must be non-empty and equal length");
    std::vector<double> lw(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw Error("DiscreteBelief: weights must be >= 0");
        lw[i] = weights[i] > 0.0 ? std::log(weights[i]) : neg_inf;
    }
    *this = from_log_weights(std::move(support), std::move(lw));
}

DiscreteBelief DiscreteBelief::from_log_weights(std::vector<ParamPoint> support,
                                                std::vector<double> log_weights) {
    if (support.empty() || support.size() != log_weights.size())
        throw Error("DiscreteBelief: support/log-weights must be non-empty and equal length");
    const double lse = log_sum_exp(log_weights);
    if (lse == neg_inf || !std::isfinite(lse))
        throw Error("posterior undefined: all discrete weights vanished (integral 0 or infinite)");
    for (double& lw : log_weights) lw -= lse;
    DiscreteBelief b;
    b.support_ = std::move(support);
    b.log_weights_ = std::move(log_weights);
    return b;
}

double DiscreteBelief::weight(std::size_t k) const { return std::exp(log_weights_.at(k)); }

std::size_t DiscreteBelief::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < log_weights_.size(); ++i)
        if (log_weights_[i] > log_weights_[best]) best = i;
    return best;
}

DiscreteBelief update_discrete(const DiscreteBelief& prior_belief, const DatasetLoss& loss,
                               double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight))
        throw Error("update_discrete: weight must be positive and finite");
    std::vector<double> lw(prior_belief.log_weights().begin(), prior_belief.log_weights().end());
    std::vector<ParamPoint> support(prior_belief.support().begin(), prior_belief.support().end());
    for (std::size_t k = 0; k < lw.size(); ++k) {
        if (lw[k] == neg_inf) continue;  // zero prior mass stays zero
        const double L = loss.eval(support[k]);
        if (std::isnan(L) || L == neg_inf)
            throw Error("update_discrete: non-finite loss at a support point");
        lw[k] = (L == pos_inf) ? neg_inf : lw[k] - weight * L;
    }
    return DiscreteBelief::from_log_weights(std::move(support), std::move(lw));
}

std::pair<DiscreteBelief, DiscreteBelief> sequential_vs_batch(const DiscreteBelief& prior_belief,
                                                              std::span<const DatasetLoss> batches,
                                                              double weight) {
    if (batches.empty()) throw Error("sequential_vs_batch: need at least one batch");

    DiscreteBelief sequential = prior_belief;
    for (const auto& batch : batches) sequential = update_discrete(sequential, batch, weight);

    // one update with the summed cumulative loss
    std::vector<const DatasetLoss*> parts;
    parts.reserve(batches.size());
    for (const auto& b : batches) parts.push_back(&b);
    const DatasetLoss total = DatasetLoss::whole_sample(
        [parts](std::span<const double> theta) {
            double s = 0.0;
            for (const auto* p : parts) s += p->eval(theta);
            return s;
        },
        "summed-batches");
    DiscreteBelief batch = update_discrete(prior_belief, total, weight);

    return {std::move(sequential), std::move(batch)};
}

std::size_t expected_utility_action(
    std::span<const ParamPoint> belief_samples,
    const std::function<double(std::size_t, const ParamPoint&)>& utility, std::size_t n_actions) {
    if (belief_samples.empty()) throw Error("expected_utility_action: no belief samples");
    if (n_actions == 0) throw Error("expected_utility_action: no actions");

    std::size_t best = 0;
    double best_value = neg_inf;
    for (std::size_t a = 0; a < n_actions; ++a) {
        double total = 0.0;
        for (std::size_t i = 0; i < belief_samples.size(); ++i) {
            const double u = utility(a, belief_samples[i]);
            if (!std::isfinite(u)) {
                std::ostringstream os;
                os << "expected_utility_action: non-finite utility at action " << a
                   << ", sample " << i;
                throw Error(os.str());
            }
            total += u;
        }
        const double avg = total / static_cast<double>(belief_samples.size());
        if (avg > best_value) {  // strict: ties keep the lowest index
            best_value = avg;
            best = a;
        }
    }
    return best;
}

}  // namespace gb
