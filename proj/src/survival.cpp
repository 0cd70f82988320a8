#include "gb/survival.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/prior.hpp"
#include "gb/rng.hpp"
#include "gb/util.hpp"

namespace gb {

SurvivalDataset SurvivalDataset::make(std::vector<double> times, std::vector<int> events,
                                      Eigen::MatrixXd covariates) {
    const std::size_t n = times.size();
    if (n == 0) throw Error("SurvivalDataset: empty");
    if (events.size() != n || static_cast<std::size_t>(covariates.rows()) != n)
        throw Error("SurvivalDataset: times/events/covariates row counts differ");
    if (covariates.cols() < 1) throw Error("SurvivalDataset: need at least one covariate column");
    bool any_event = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i]))
            throw Error("SurvivalDataset: times must be positive and finite");
        if (events[i] != 0 && events[i] != 1)
            throw Error("SurvivalDataset: event flags must be 0 or 1");
        any_event = any_event || events[i] == 1;
    }
    if (!any_event) throw Error("SurvivalDataset: needs at least one event");
    if (!covariates.allFinite()) throw Error("SurvivalDataset: non-finite covariate entry");
    return SurvivalDataset{std::move(times), std::move(events), std::move(covariates)};
}

RiskIndex RiskIndex::build(const SurvivalDataset& data) {
    const std::size_t n = data.n();
    RiskIndex idx;
    idx.order_.resize(n);
    std::iota(idx.order_.begin(), idx.order_.end(), std::size_t{0});
    std::stable_sort(idx.order_.begin(), idx.order_.end(),
                     [&](std::size_t a, std::size_t b) { return data.times[a] > data.times[b]; });

    // prefix length for time t: number of subjects with t_j >= t
    for (std::size_t i = 0; i < n; ++i) {
        if (data.events[i] != 1) continue;
        const double t = data.times[i];
        // binary search over descending times for the last position with t_j >= t
        std::size_t lo = 0, hi = n;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (data.times[idx.order_[mid]] >= t) lo = mid + 1;
            else hi = mid;
        }
        idx.events_.push_back(Event{i, lo});
    }
    return idx;
}

std::vector<std::size_t> RiskIndex::risk_set(std::size_t event_idx) const {
    const auto& ev = events_.at(event_idx);
    std::vector<std::size_t> out(order_.begin(),
                                 order_.begin() + static_cast<std::ptrdiff_t>(ev.risk_count));
    std::sort(out.begin(), out.end());
    return out;
}

double cox_partial_loss_eta(std::span<const double> eta, const RiskIndex& index) {
    for (double e : eta)
        if (!std::isfinite(e)) throw Error("cox_partial_loss: non-finite linear predictor");

    // events sorted by their risk-prefix length so one sweep accumulates all
    // the needed log-sum-exp values
    std::vector<std::size_t> by_prefix(index.events().size());
    std::iota(by_prefix.begin(), by_prefix.end(), std::size_t{0});
    std::stable_sort(by_prefix.begin(), by_prefix.end(), [&](std::size_t a, std::size_t b) {
        return index.events()[a].risk_count < index.events()[b].risk_count;
    });

    const auto order = index.descending_order();
    LogSumAcc acc;
    std::size_t consumed = 0;
    double loss = 0.0;
    for (std::size_t e : by_prefix) {
        const auto& ev = index.events()[e];
        while (consumed < ev.risk_count) acc.add(eta[order[consumed++]]);
        loss += acc.value() - eta[ev.subject];
    }
    return loss;
}

double cox_partial_loss(std::span<const double> beta, const SurvivalDataset& data,
                        const RiskIndex& index) {
    if (beta.size() != data.p()) {
        std::ostringstream os;
        os << "cox_partial_loss: beta has dim " << beta.size() << ", dataset has p=" << data.p();
        throw Error(os.str());
    }
    const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
    const Eigen::VectorXd eta = data.covariates * b;
    return cox_partial_loss_eta(std::span<const double>(eta.data(), data.n()), index);
}

DatasetLoss cox_dataset_loss(std::shared_ptr<const SurvivalDataset> data,
                             std::shared_ptr<const RiskIndex> index) {
    if (!data || !index) throw Error("cox_dataset_loss: null dataset or index");
    return DatasetLoss::whole_sample(
        [data, index](std::span<const double> beta) {
            return cox_partial_loss(beta, *data, *index);
        },
        "cox-partial");
}

namespace {

// 1-D partial loss along one marker column, from precomputed column values.
struct MarkerLoss {
    std::vector<double> column;
    const RiskIndex* index;

    double operator()(double beta) const {
        std::vector<double> eta(column.size());
        for (std::size_t i = 0; i < column.size(); ++i) eta[i] = column[i] * beta;
        return cox_partial_loss_eta(eta, *index);
    }
};

}  // namespace

BfResult single_marker_bf(const SurvivalDataset& data, const RiskIndex& index, std::size_t marker,
                          double slab_variance, const BfOptions& opts) {
    if (marker >= data.p()) throw Error("single_marker_bf: marker index out of range");
    if (!(slab_variance > 0.0)) throw Error("single_marker_bf: slab variance must be positive");

    MarkerLoss loss{std::vector<double>(data.n()), &index};
    for (std::size_t i = 0; i < data.n(); ++i)
        loss.column[i] = data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(marker));

    const auto [mn, mx] = std::minmax_element(loss.column.begin(), loss.column.end());
    if (*mn == *mx) return BfResult{0.0, opts.method, 0.0, /*degenerate=*/true, false};

    const double loss_at_zero = loss(0.0);
    const LogDensityFn log_unnorm = [&](std::span<const double> th) {
        return -loss(th[0]) + normal_log_pdf(th[0], 0.0, slab_variance);
    };

    BfResult res;
    res.method_used = opts.method;

    std::optional<LaplaceResult> lap;
    try {
        lap = laplace_log_evidence(log_unnorm, std::vector<double>{0.0});
    } catch (const Error&) {
        if (opts.method == BfMethod::Laplace) res.laplace_fallback = true;
    }

    auto quadrature_evidence = [&]() {
        double center = 0.0, half_width = 10.0 * std::sqrt(slab_variance);
        if (lap) {
            center = lap->mode[0];
            half_width = 10.0 * std::sqrt(lap->covariance(0, 0));
        }
        return quadrature_1d([&](double b) { return log_unnorm(std::span<const double>(&b, 1)); },
                             center - half_width, center + half_width, 64, 1e-8);
    };

    double log_evidence = 0.0;
    switch (opts.method) {
        case BfMethod::Laplace:
            if (lap) {
                log_evidence = lap->log_evidence;
            } else {
                log_evidence = quadrature_evidence();
                res.method_used = BfMethod::Quadrature;
            }
            break;
        case BfMethod::Quadrature:
            log_evidence = quadrature_evidence();
            break;
        case BfMethod::Importance: {
            if (!lap) throw Error("single_marker_bf: importance sampling needs a Laplace proposal");
            const auto est = importance_sample_evidence(log_unnorm, lap->mode.values(),
                                                        lap->covariance, opts.is_draws, opts.seed);
            log_evidence = est.log_evidence;
            res.se = est.std_error;
            break;
        }
    }

    res.log_bf = log_evidence + loss_at_zero;
    return res;
}

std::size_t ModelState::size() const {
    std::size_t s = 0;
    for (auto d : delta) s += d;
    return s;
}

bool ModelState::consistent() const {
    if (delta.size() != beta.size()) return false;
    for (std::size_t j = 0; j < delta.size(); ++j)
        if (delta[j] == 0 && beta[j] != 0.0) return false;
    return true;
}

namespace {

using Bitmask = std::vector<std::uint64_t>;

Bitmask mask_of(const std::vector<std::uint8_t>& delta) {
    Bitmask m((delta.size() + 63) / 64, 0);
    for (std::size_t j = 0; j < delta.size(); ++j)
        if (delta[j]) m[j / 64] |= (1ULL << (j % 64));
    return m;
}

struct BitmaskHash {
    std::size_t operator()(const Bitmask& m) const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (auto w : m) {
            h ^= w;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

// conditional MAP and proposal covariance for one support
struct SupportFit {
    Eigen::VectorXd map;      // restricted coordinates
    Eigen::MatrixXd chol_l;   // lower Cholesky of the covariance
    double half_log_det = 0.0;  // of the covariance
    bool ok = false;
};

double log_mvn_from_chol(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol_l, double half_log_det) {
    constexpr double kLog2Pi = 1.8378770664093454836;
    const Eigen::VectorXd z = chol_l.triangularView<Eigen::Lower>().solve(x - mean);
    return -0.5 * static_cast<double>(x.size()) * kLog2Pi - half_log_det - 0.5 * z.squaredNorm();
}

class SelectionSampler {
public:
    SelectionSampler(const SurvivalDataset& data, const RiskIndex& index,
                     std::span<const double> v, std::span<const double> a,
                     const SelectionOptions& opts)
        : data_(data), index_(index), v_(v.begin(), v.end()), a_(a.begin(), a.end()), opts_(opts) {}

    SelectionChain run() {
        const std::size_t p = data_.p();
        ModelState cur{std::vector<std::uint8_t>(p, 0), std::vector<double>(p, 0.0)};
        double cur_loss = cox_partial_loss(cur.beta, data_, index_);

        Rng rng(opts_.seed);
        SelectionChain chain;
        chain.seed = opts_.seed;
        chain.p = p;
        std::size_t accepted_total = 0;

        for (std::size_t it = 0; it < opts_.iterations; ++it) {
            bool accepted = false;
            const auto proposal = propose(cur, cur_loss, rng);
            if (proposal) {
                const auto& [next, log_ratio] = *proposal;
                if (log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio)) {
                    cur = next.state;
                    cur_loss = next.loss;
                    accepted = true;
                    ++accepted_total;
                }
            } else {
                ++chain.proposal_failures;
            }
            if (it >= opts_.burn_in && (it - opts_.burn_in) % opts_.thin == 0)
                chain.records.push_back(SelectionRecord{it, accepted, cur});
        }

        chain.acceptance_rate =
            static_cast<double>(accepted_total) / static_cast<double>(opts_.iterations);
        return chain;
    }

private:
    enum class Move { Add, Remove, Swap };

    struct Candidate {
        ModelState state;
        double loss;
    };

    std::vector<Move> admissible(const ModelState& s) const {
        const std::size_t k = s.size();
        const std::size_t p = s.delta.size();
        std::vector<Move> moves;
        if (k < std::min(p, opts_.model_size_cap)) moves.push_back(Move::Add);
        if (k >= 1) moves.push_back(Move::Remove);
        if (k >= 1 && k < p) moves.push_back(Move::Swap);
        return moves;
    }

    // log q(delta'|delta): uniform move type, then uniform candidate(s)
    double log_move_prob(const ModelState& from, Move mv) const {
        const double n_types = static_cast<double>(admissible(from).size());
        const double k = static_cast<double>(from.size());
        const double p = static_cast<double>(from.delta.size());
        switch (mv) {
            case Move::Add: return -std::log(n_types) - std::log(p - k);
            case Move::Remove: return -std::log(n_types) - std::log(k);
            case Move::Swap: return -std::log(n_types) - std::log(k) - std::log(p - k);
        }
        return neg_inf;
    }

    const SupportFit& fit_support(const std::vector<std::uint8_t>& delta) {
        const Bitmask key = mask_of(delta);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        SupportFit fit;
        std::vector<std::size_t> active;
        for (std::size_t j = 0; j < delta.size(); ++j)
            if (delta[j]) active.push_back(j);

        if (active.empty()) {
            fit.ok = true;  // empty support: proposal density is the empty product
            return cache_.emplace(std::move(key), std::move(fit)).first->second;
        }

        const Objective neg_log_cond = [&](std::span<const double> b) {
            std::vector<double> beta(delta.size(), 0.0);
            double lp = 0.0;
            for (std::size_t k = 0; k < active.size(); ++k) {
                beta[active[k]] = b[k];
                lp += normal_log_pdf(b[k], 0.0, v_[active[k]]);
            }
            return cox_partial_loss(beta, data_, index_) - lp;
        };

        try {
            std::vector<double> start(active.size(), 0.0);
            auto best = nelder_mead_minimize(neg_log_cond, start, 1e-10, 4000);
            // restart cycles for larger supports; a single simplex pass can
            // stall on elongated valleys
            if (active.size() > 3) {
                for (int r = 0; r < 5; ++r) {
                    auto again = nelder_mead_minimize(neg_log_cond, best.argmin, 1e-10, 4000);
                    const bool improved = again.value < best.value - 1e-10;
                    best = std::move(again);
                    if (!improved) break;
                }
            }
            const Eigen::MatrixXd H = hessian_fd(neg_log_cond, best.argmin);
            Eigen::LLT<Eigen::MatrixXd> llt(H);
            if (llt.info() != Eigen::Success) throw Error("Hessian not positive definite");
            const Eigen::MatrixXd cov = llt.solve(
                Eigen::MatrixXd::Identity(H.rows(), H.cols()));
            Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
            if (cov_llt.info() != Eigen::Success) throw Error("covariance not positive definite");
            fit.map = Eigen::Map<const Eigen::VectorXd>(best.argmin.data(),
                                                        static_cast<Eigen::Index>(best.argmin.size()));
            fit.chol_l = cov_llt.matrixL();
            for (Eigen::Index i = 0; i < fit.chol_l.rows(); ++i)
                fit.half_log_det += std::log(fit.chol_l(i, i));
            fit.ok = true;
        } catch (const Error&) {
            fit.ok = false;
        }
        return cache_.emplace(std::move(key), std::move(fit)).first->second;
    }

    // returns {candidate, log acceptance ratio}, or nullopt on optimisation failure
    std::optional<std::pair<Candidate, double>> propose(const ModelState& cur, double cur_loss,
                                                        Rng& rng) {
        const std::size_t p = cur.delta.size();
        const auto moves = admissible(cur);
        const Move mv = moves[rng.below(moves.size())];

        std::vector<std::size_t> included, excluded;
        for (std::size_t j = 0; j < p; ++j)
            (cur.delta[j] ? included : excluded).push_back(j);

        ModelState next = cur;
        Move reverse = Move::Add;
        switch (mv) {
            case Move::Add: {
                const std::size_t j = excluded[rng.below(excluded.size())];
                next.delta[j] = 1;
                reverse = Move::Remove;
                break;
            }
            case Move::Remove: {
                const std::size_t j = included[rng.below(included.size())];
                next.delta[j] = 0;
                reverse = Move::Add;
                break;
            }
            case Move::Swap: {
                const std::size_t out = included[rng.below(included.size())];
                const std::size_t in = excluded[rng.below(excluded.size())];
                next.delta[out] = 0;
                next.delta[in] = 1;
                reverse = Move::Swap;
                break;
            }
        }

        const SupportFit& next_fit = fit_support(next.delta);
        // the reverse proposal needs the current support's fit as well
        const SupportFit& cur_fit = fit_support(cur.delta);
        if (!next_fit.ok || !cur_fit.ok) return std::nullopt;

        // draw beta' ~ N(map, V) on the proposed support
        std::vector<std::size_t> next_active;
        for (std::size_t j = 0; j < p; ++j)
            if (next.delta[j]) next_active.push_back(j);
        std::fill(next.beta.begin(), next.beta.end(), 0.0);
        if (!next_active.empty()) {
            Eigen::VectorXd z(static_cast<Eigen::Index>(next_active.size()));
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
            const Eigen::VectorXd bnext = next_fit.map + next_fit.chol_l * z;
            for (std::size_t k = 0; k < next_active.size(); ++k)
                next.beta[next_active[k]] = bnext(static_cast<Eigen::Index>(k));
        }

        const double next_loss = cox_partial_loss(next.beta, data_, index_);

        // slab + bernoulli prior terms
        auto log_prior = [&](const ModelState& s) {
            double lp = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                if (s.delta[j]) {
                    lp += std::log(a_[j]) + normal_log_pdf(s.beta[j], 0.0, v_[j]);
                } else {
                    lp += std::log1p(-a_[j]);
                }
            }
            return lp;
        };

        auto log_proposal_beta = [&](const ModelState& s, const SupportFit& fit) {
            if (s.size() == 0) return 0.0;
            Eigen::VectorXd b(static_cast<Eigen::Index>(s.size()));
            Eigen::Index k = 0;
            for (std::size_t j = 0; j < p; ++j)
                if (s.delta[j]) b(k++) = s.beta[j];
            return log_mvn_from_chol(b, fit.map, fit.chol_l, fit.half_log_det);
        };

        const double log_ratio = (-next_loss + log_prior(next) + log_move_prob(next, reverse) +
                                  log_proposal_beta(cur, cur_fit)) -
                                 (-cur_loss + log_prior(cur) + log_move_prob(cur, mv) +
                                  log_proposal_beta(next, next_fit));

        return std::make_pair(Candidate{std::move(next), next_loss}, log_ratio);
    }

    const SurvivalDataset& data_;
    const RiskIndex& index_;
    std::vector<double> v_, a_;
    SelectionOptions opts_;
    std::unordered_map<Bitmask, SupportFit, BitmaskHash> cache_;
};

}  // namespace

SelectionChain variable_selection_mcmc(const SurvivalDataset& data, const RiskIndex& index,
                                       std::span<const double> slab_variances,
                                       std::span<const double> inclusion_probs,
                                       const SelectionOptions& opts) {
    const std::size_t p = data.p();
    if (slab_variances.size() != p || inclusion_probs.size() != p)
        throw Error("variable_selection_mcmc: v/a vectors must have length p");
    for (double v : slab_variances)
        if (!(v > 0.0)) throw Error("variable_selection_mcmc: slab variances must be positive");
    for (double a : inclusion_probs)
        if (!(a > 0.0 && a < 1.0))
            throw Error("variable_selection_mcmc: inclusion probs must lie in (0,1)");
    if (opts.iterations == 0 || opts.burn_in >= opts.iterations)
        throw Error("variable_selection_mcmc: burn-in must be < iterations");
    if (opts.model_size_cap == 0)
        throw Error("variable_selection_mcmc: model size cap must be >= 1");

    SelectionSampler sampler(data, index, slab_variances, inclusion_probs, opts);
    return sampler.run();
}

std::vector<double> inclusion_probabilities(const SelectionChain& chain) {
    if (chain.records.empty()) throw Error("inclusion_probabilities: empty chain");
    std::vector<double> probs(chain.p, 0.0);
    for (const auto& rec : chain.records)
        for (std::size_t j = 0; j < chain.p; ++j) probs[j] += rec.state.delta[j];
    for (double& pr : probs) pr /= static_cast<double>(chain.records.size());
    return probs;
}

SurvivalDataset simulate_cox_data(const CoxSimSpec& spec) {
    if (spec.n < 1 || spec.p < 1) throw Error("simulate_cox_data: n and p must be >= 1");
    if (spec.true_beta.size() != spec.p)
        throw Error("simulate_cox_data: true_beta must have length p");
    if (spec.minor_allele_freqs.size() != spec.p)
        throw Error("simulate_cox_data: minor_allele_freqs must have length p");
    for (double f : spec.minor_allele_freqs)
        if (!(f > 0.0 && f <= 0.5))
            throw Error("simulate_cox_data: allele frequencies must lie in (0, 0.5]");
    if (!(spec.baseline_scale > 0.0))
        throw Error("simulate_cox_data: baseline scale must be positive");
    if (!(spec.censoring_fraction >= 0.0 && spec.censoring_fraction < 1.0))
        throw Error("simulate_cox_data: unattainable censoring target (need 0 <= c < 1)");

    Rng rng(spec.seed);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);

    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            X(i, j) = static_cast<double>(rng.binomial(2, spec.minor_allele_freqs[static_cast<std::size_t>(j)]));

    const Eigen::Map<const Eigen::VectorXd> beta(spec.true_beta.data(), p);
    const Eigen::VectorXd rate = (X * beta).array().exp() * spec.baseline_scale;

    // analytic censoring probability: E_i[ mu / (rate_i + mu) ] = target
    double mu = 0.0;
    if (spec.censoring_fraction > 0.0) {
        auto frac = [&](double m) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) s += m / (rate(i) + m);
            return s / static_cast<double>(n);
        };
        double lo = 0.0, hi = rate.maxCoeff();
        int guard = 0;
        while (frac(hi) < spec.censoring_fraction) {
            hi *= 2.0;
            if (++guard > 200) throw Error("simulate_cox_data: unattainable censoring target");
        }
        for (int it = 0; it < 200; ++it) {
            mu = 0.5 * (lo + hi);
            (frac(mu) < spec.censoring_fraction ? lo : hi) = mu;
        }
        mu = 0.5 * (lo + hi);
    }

    std::vector<double> times(spec.n);
    std::vector<int> events(spec.n, 1);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double t = rng.exponential(rate(static_cast<Eigen::Index>(i)));
        if (mu > 0.0) {
            const double c = rng.exponential(mu);
            times[i] = std::min(t, c);
            events[i] = t <= c ? 1 : 0;
        } else {
            times[i] = t;
        }
    }

    bool any_event = false;
    for (int e : events) any_event = any_event || e == 1;
    if (!any_event)
        throw Error("simulate_cox_data: simulation produced no events; lower the censoring target");

    return SurvivalDataset::make(std::move(times), std::move(events), std::move(X));
}

}  // namespace gb
