#include "gb/prior.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_positive(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x)) throw Error(std::string(what) + " must be positive and finite");
}

bool strictly_increasing(std::span<const double> v) {
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
        if (!(v[k] < v[k + 1])) return false;
    return true;
}

}  // namespace

double normal_log_pdf(double x, double mean, double var) {
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * sqr(x - mean) / var;
}

LogPrior LogPrior::independent_normal(std::vector<double> means, std::vector<double> variances) {
    if (means.empty() || means.size() != variances.size())
        throw Error("independent_normal: means/variances must be non-empty and equal length");
    check_positive(variances, "independent_normal: variances");
    return LogPrior(Kind{IndependentNormal{std::move(means), std::move(variances)}});
}

LogPrior LogPrior::ordered_normal(std::vector<double> means, std::vector<double> variances) {
    if (means.size() < 2 || means.size() != variances.size())
        throw Error("ordered_normal: need >= 2 coordinates and equal-length variances");
    check_positive(variances, "ordered_normal: variances");
    return LogPrior(Kind{OrderedNormal{std::move(means), std::move(variances)}});
}

LogPrior LogPrior::spike_slab(std::vector<double> slab_variances,
                              std::vector<double> inclusion_probs) {
    if (slab_variances.empty() || slab_variances.size() != inclusion_probs.size())
        throw Error("spike_slab: slab_variances/inclusion_probs must be non-empty and equal length");
    check_positive(slab_variances, "spike_slab: slab variances");
    for (double a : inclusion_probs)
        if (!(a > 0.0 && a <= 1.0)) throw Error("spike_slab: inclusion probs must lie in (0,1]");
    return LogPrior(Kind{SpikeSlab{std::move(slab_variances), std::move(inclusion_probs)}});
}

LogPrior LogPrior::discrete_grid(std::vector<ParamPoint> support, std::vector<double> weights) {
    if (support.empty() || support.size() != weights.size())
        throw Error("discrete_grid: support/weights must be non-empty and equal length");
    const std::size_t d = support.front().dim();
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error("discrete_grid: weights must be >= 0");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error("discrete_grid: weights must sum to 1 within 1e-12");
    for (const auto& p : support)
        if (p.dim() != d) throw Error("discrete_grid: support points must share one dimension");
    std::vector<double> lw(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i)
        lw[i] = weights[i] > 0.0 ? std::log(weights[i]) : neg_inf;
    return LogPrior(Kind{DiscreteGrid{std::move(support), std::move(lw)}});
}

LogPrior LogPrior::product(std::vector<LogPrior> blocks) {
    if (blocks.empty()) throw Error("product prior: no blocks");
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.dim();
    return LogPrior(Kind{Product{std::move(blocks), total}});
}

std::size_t LogPrior::dim() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IndependentNormal> || std::is_same_v<T, OrderedNormal>)
                return k.means.size();
            else if constexpr (std::is_same_v<T, SpikeSlab>)
                return k.slab_variances.size();
            else if constexpr (std::is_same_v<T, DiscreteGrid>)
                return k.support.front().dim();
            else
                return k.total_dim;
        },
        *kind_);
}

Constraint LogPrior::constraint() const {
    if (std::holds_alternative<OrderedNormal>(*kind_)) return Constraint::StrictlyIncreasing;
    return Constraint::None;
}

std::string LogPrior::kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IndependentNormal>) return "independent-normal";
            else if constexpr (std::is_same_v<T, OrderedNormal>) return "ordered-normal";
            else if constexpr (std::is_same_v<T, SpikeSlab>) return "spike-slab";
            else if constexpr (std::is_same_v<T, DiscreteGrid>) return "discrete-grid";
            else return "product";
        },
        *kind_);
}

double LogPrior::log_density(std::span<const double> theta) const {
    if (theta.size() != dim()) {
        std::ostringstream os;
        os << "log_density: dimension mismatch, prior dim " << dim() << " vs theta dim "
           << theta.size();
        throw Error(os.str());
    }
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IndependentNormal>) {
                double lp = 0.0;
                for (std::size_t j = 0; j < theta.size(); ++j)
                    lp += normal_log_pdf(theta[j], k.means[j], k.variances[j]);
                return lp;
            } else if constexpr (std::is_same_v<T, OrderedNormal>) {
                if (!strictly_increasing(theta)) return neg_inf;
                double lp = 0.0;
                for (std::size_t j = 0; j < theta.size(); ++j)
                    lp += normal_log_pdf(theta[j], k.means[j], k.variances[j]);
                return lp;
            } else if constexpr (std::is_same_v<T, SpikeSlab>) {
                double lp = 0.0;
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    const double a = k.inclusion_probs[j];
                    if (theta[j] == 0.0) {
                        if (a >= 1.0) return neg_inf;
                        lp += std::log1p(-a);
                    } else {
                        lp += std::log(a) + normal_log_pdf(theta[j], 0.0, k.slab_variances[j]);
                    }
                }
                return lp;
            } else if constexpr (std::is_same_v<T, DiscreteGrid>) {
                for (std::size_t i = 0; i < k.support.size(); ++i) {
                    const auto sv = k.support[i].values();
                    if (std::equal(sv.begin(), sv.end(), theta.begin(), theta.end()))
                        return k.log_weights[i];
                }
                return neg_inf;
            } else {
                double lp = 0.0;
                std::size_t off = 0;
                for (const auto& b : k.blocks) {
                    const double v = b.log_density(theta.subspan(off, b.dim()));
                    if (v == neg_inf) return neg_inf;
                    lp += v;
                    off += b.dim();
                }
                return lp;
            }
        },
        *kind_);
}

void LogPrior::sample_into(Rng& rng, std::span<double> out) const {
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IndependentNormal>) {
                for (std::size_t j = 0; j < out.size(); ++j)
                    out[j] = rng.normal(k.means[j], std::sqrt(k.variances[j]));
            } else if constexpr (std::is_same_v<T, OrderedNormal>) {
                for (int attempt = 0; attempt < kOrderedRejectionCap; ++attempt) {
                    for (std::size_t j = 0; j < out.size(); ++j)
                        out[j] = rng.normal(k.means[j], std::sqrt(k.variances[j]));
                    if (strictly_increasing(std::span<const double>(out.data(), out.size())))
                        return;
                }
                std::ostringstream os;
                os << "ordered-normal sampling: rejection failed after " << kOrderedRejectionCap
                   << " attempts";
                throw Error(os.str());
            } else if constexpr (std::is_same_v<T, SpikeSlab>) {
                for (std::size_t j = 0; j < out.size(); ++j) {
                    const bool in = rng.bernoulli(k.inclusion_probs[j]);
                    out[j] = in ? rng.normal(0.0, std::sqrt(k.slab_variances[j])) : 0.0;
                }
            } else if constexpr (std::is_same_v<T, DiscreteGrid>) {
                const double u = rng.uniform();
                double acc = 0.0;
                std::size_t pick = k.support.size() - 1;
                for (std::size_t i = 0; i < k.support.size(); ++i) {
                    acc += std::exp(k.log_weights[i]);
                    if (u < acc) {
                        pick = i;
                        break;
                    }
                }
                const auto sv = k.support[pick].values();
                std::copy(sv.begin(), sv.end(), out.begin());
            } else {
                std::size_t off = 0;
                for (const auto& b : k.blocks) {
                    b.sample_into(rng, out.subspan(off, b.dim()));
                    off += b.dim();
                }
            }
        },
        *kind_);
}

std::vector<ParamPoint> LogPrior::sample(Rng& rng, std::size_t n) const {
    if (n == 0) throw Error("sample_prior: n must be >= 1");
    const std::size_t d = dim();
    const Constraint c = constraint();
    std::vector<ParamPoint> draws;
    draws.reserve(n);
    std::vector<double> buf(d);
    for (std::size_t i = 0; i < n; ++i) {
        sample_into(rng, buf);
        draws.push_back(ParamPoint::require(buf, c));
    }
    return draws;
}

std::vector<ParamPoint> LogPrior::sample(std::uint64_t seed, std::size_t n) const {
    Rng rng(seed);
    return sample(rng, n);
}

ParamPoint LogPrior::mode() const {
    return std::visit(
        [&](const auto& k) -> ParamPoint {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IndependentNormal>) {
                return ParamPoint::require(k.means);
            } else if constexpr (std::is_same_v<T, OrderedNormal>) {
                if (!strictly_increasing(k.means))
                    throw Error("prior_mode: ordered-normal mode requires strictly increasing means");
                return ParamPoint::require(k.means, Constraint::StrictlyIncreasing);
            } else if constexpr (std::is_same_v<T, SpikeSlab>) {
                throw Error("prior_mode: not available in closed form for spike-slab");
            } else if constexpr (std::is_same_v<T, DiscreteGrid>) {
                std::size_t best = 0;
                for (std::size_t i = 1; i < k.log_weights.size(); ++i)
                    if (k.log_weights[i] > k.log_weights[best]) best = i;  // ties: lowest index
                return k.support[best];
            } else {
                std::vector<double> out;
                out.reserve(k.total_dim);
                for (const auto& b : k.blocks) {
                    const auto m = b.mode();
                    out.insert(out.end(), m.values().begin(), m.values().end());
                }
                return ParamPoint::require(std::move(out));
            }
        },
        *kind_);
}

}  // namespace gb
