#include "gb/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/util.hpp"

namespace gb {

WeightRule WeightRule::fixed(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("WeightRule: fixed w must be positive and finite");
    return WeightRule(Kind{Fixed{w}});
}

WeightRule WeightRule::unit_information(std::size_t mc_draws) {
    if (mc_draws == 0) throw Error("WeightRule: mc_draws must be >= 1");
    return WeightRule(Kind{UnitInformation{mc_draws}});
}

WeightRule WeightRule::hierarchical(double xi) {
    if (!std::isfinite(xi)) throw Error("WeightRule: xi must be finite");
    return WeightRule(Kind{Hierarchical{xi}});
}

WeightRule WeightRule::operational(double alpha, std::vector<double> w_grid,
                                   std::size_t replications) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("WeightRule: alpha must lie in (0,1)");
    if (w_grid.empty()) throw Error("WeightRule: empty w grid");
    for (std::size_t i = 0; i < w_grid.size(); ++i) {
        if (!(w_grid[i] > 0.0)) throw Error("WeightRule: w grid must be strictly positive");
        if (i > 0 && !(w_grid[i] > w_grid[i - 1]))
            throw Error("WeightRule: w grid must be strictly increasing");
    }
    return WeightRule(Kind{Operational{alpha, std::move(w_grid), replications}});
}

std::string WeightRule::kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Fixed>) return "fixed";
            else if constexpr (std::is_same_v<T, UnitInformation>) return "unit-information";
            else if constexpr (std::is_same_v<T, Hierarchical>) return "hierarchical";
            else return "operational";
        },
        kind_);
}

UnitInfoResult unit_info_weight(const LogPrior& prior, const DatasetLoss& loss,
                                std::uint64_t seed, std::size_t mc_draws) {
    if (!loss.is_separable())
        throw Error("unit_info_weight: needs a separable loss with per-datum terms");
    const auto data = loss.data();
    const std::size_t n = data.size();
    const std::size_t p = prior.dim();
    if (n <= p) {
        std::ostringstream os;
        os << "unit_info_weight: need n > p (n=" << n << ", p=" << p << ")";
        throw Error(os.str());
    }

    const ParamPoint mode = prior.mode();
    const double log_pi_mode = prior.log_density(mode);

    // numerator: Monte-Carlo prior expectation of log pi(mode)/pi(theta)
    Rng rng(seed);
    std::vector<double> gaps(mc_draws);
    {
        const auto draws = prior.sample(rng, mc_draws);
        for (std::size_t i = 0; i < mc_draws; ++i)
            gaps[i] = log_pi_mode - prior.log_density(draws[i]);
    }
    const double numerator = mean(gaps);
    const double numerator_se = mc_draws > 1 ? stddev(gaps) / std::sqrt(static_cast<double>(mc_draws)) : 0.0;

    // theta_hat_x: cumulative-loss minimizer over the prior support
    const Objective cum = [&](std::span<const double> th) {
        if (prior.log_density(th) == neg_inf) return pos_inf;
        return loss.eval(th);
    };
    // restarts matter here: separable losses with kinks defeat one simplex
    const auto opt = nelder_mead_restarted(cum, mode.values(), 1e-12, 20000);

    const PointLoss standardized = standardize_loss(loss.point_loss());
    double denom_sum = 0.0;
    for (const auto& d : data) denom_sum += standardized.eval(opt.argmin, d);
    const double denominator = denom_sum / static_cast<double>(n - p);

    if (!(denominator > 0.0)) {
        std::ostringstream os;
        os << "unit_info_weight: perfect fit, standardized loss at the minimizer is "
           << denominator << "; choose a fixed w instead";
        throw Error(os.str());
    }

    return UnitInfoResult{numerator / denominator, numerator, numerator_se, denominator,
                          opt.argmin};
}

HierarchicalPosterior::HierarchicalPosterior(DatasetLoss loss, LogPrior joint_prior, double xi)
    : loss_(std::make_shared<DatasetLoss>(std::move(loss))), prior_(std::move(joint_prior)), xi_(xi) {
    if (prior_.dim() < 2)
        throw Error("hierarchical_posterior: joint prior must cover (theta, w)");
}

double HierarchicalPosterior::log_unnormalized(std::span<const double> theta_w) const {
    if (theta_w.size() != prior_.dim())
        throw Error("hierarchical_posterior: dimension mismatch");
    const double w = theta_w.back();
    if (!(w > 0.0)) return neg_inf;  // w support is (0, inf)
    const double lp = prior_.log_density(theta_w);
    if (lp == neg_inf) return neg_inf;
    const auto theta = theta_w.first(theta_w.size() - 1);
    const double L = loss_->eval(theta);
    if (std::isnan(L) || L == neg_inf)
        throw Error("hierarchical_posterior: non-finite loss");
    if (L == pos_inf) return neg_inf;
    return xi_ * std::log(w) - w * L + lp;
}

Resampler bootstrap_resampler(const PointLoss& loss, std::vector<Datum> data,
                              const LogPrior& prior) {
    if (data.empty()) throw Error("bootstrap_resampler: empty data");
    const DatasetLoss full = DatasetLoss::separable(loss, data);
    const Objective cum = [&prior, full](std::span<const double> th) {
        if (prior.log_density(th) == neg_inf) return pos_inf;
        return full.eval(th);
    };
    const auto opt = nelder_mead_restarted(cum, prior.mode().values(), 1e-12, 20000);

    auto shared = std::make_shared<std::vector<Datum>>(std::move(data));
    return Resampler{
        [shared](Rng& rng) {
            std::vector<Datum> out;
            out.reserve(shared->size());
            for (std::size_t i = 0; i < shared->size(); ++i)
                out.push_back((*shared)[rng.below(shared->size())]);
            return out;
        },
        opt.argmin,
    };
}

OperationalResult operational_weight(const PointLoss& loss, const LogPrior& prior,
                                     const Resampler& generator, double alpha,
                                     std::span<const double> w_grid, std::size_t replications,
                                     const McmcConfig& mcmc) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("operational_weight: alpha must lie in (0,1)");
    if (w_grid.empty()) throw Error("operational_weight: empty w grid");
    if (w_grid.size() > 1 && replications < 50)
        throw Error("operational_weight: need >= 50 replications to compare candidate weights");
    if (!generator.draw) throw Error("operational_weight: null resampler");
    const auto& target = generator.loss_minimizer;
    if (target.size() != prior.dim())
        throw Error("operational_weight: loss-minimizer dimension does not match the prior");

    if (w_grid.size() == 1)
        return OperationalResult{w_grid[0], {}, {}};  // nothing to compare

    const double level = 1.0 - alpha;
    OperationalResult res;
    res.coverage.resize(w_grid.size(), 0.0);

    for (std::size_t wi = 0; wi < w_grid.size(); ++wi) {
        std::size_t covered = 0;
        for (std::size_t r = 0; r < replications; ++r) {
            const std::uint64_t cell = wi * replications + r;
            Rng data_rng = Rng::from(mcmc.seed, 0xD000u + cell);
            std::vector<Datum> sample = generator.draw(data_rng);

            McmcConfig cfg = mcmc;
            cfg.seed = derive_seed(mcmc.seed, 0xC000u + cell);
            try {
                const GibbsPosterior post(DatasetLoss::separable(loss, std::move(sample)),
                                          w_grid[wi], prior);
                const Chain chain = random_walk_mh(post, cfg);
                bool cover = true;
                for (std::size_t k = 0; k < target.size() && cover; ++k) {
                    const auto [lo, hi] = credible_interval(chain, k, level);
                    cover = (target[k] >= lo && target[k] <= hi);
                }
                covered += cover ? 1 : 0;
            } catch (const Error& e) {
                std::ostringstream os;
                os << "operational_weight: MCMC failed at w=" << w_grid[wi] << ", replication "
                   << r << ": " << e.what();
                throw Error(os.str());
            }
        }
        res.coverage[wi] = static_cast<double>(covered) / static_cast<double>(replications);
    }

    // coverage should fall as w grows; flag non-monotonicity beyond binomial noise
    for (std::size_t i = 0; i + 1 < res.coverage.size(); ++i) {
        const double c = res.coverage[i];
        const double se = std::sqrt(std::max(c * (1.0 - c), 1e-12) / static_cast<double>(replications));
        if (res.coverage[i + 1] > c + 2.0 * se) {
            std::ostringstream os;
            os << "coverage not monotone beyond noise between w=" << w_grid[i] << " (" << c
               << ") and w=" << w_grid[i + 1] << " (" << res.coverage[i + 1] << ")";
            res.warnings.push_back(os.str());
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < w_grid.size(); ++i)
        if (std::abs(res.coverage[i] - level) < std::abs(res.coverage[best] - level)) best = i;
    res.w = w_grid[best];
    return res;
}

}  // namespace gb
