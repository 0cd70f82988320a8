#include "gb/engines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/rng.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_simpson(const std::function<double(double)>& log_f, double lower, double upper,
                   std::size_t panels) {
    const double h = (upper - lower) / static_cast<double>(panels);
    const double log_h6 = std::log(h / 6.0);
    const double log4 = std::log(4.0);
    LogSumAcc acc;
    double fa = log_f(lower);
    for (std::size_t i = 0; i < panels; ++i) {
        const double a = lower + h * static_cast<double>(i);
        const double m = a + 0.5 * h;
        const double b = (i + 1 == panels) ? upper : a + h;
        const double fm = log_f(m);
        const double fb = log_f(b);
        if (std::isnan(fa) || std::isnan(fm) || std::isnan(fb) || fa == pos_inf || fm == pos_inf ||
            fb == pos_inf)
            throw Error("quadrature_1d: log-integrand returned NaN or +inf");
        acc.add(log_h6 + fa);
        acc.add(log_h6 + log4 + fm);
        acc.add(log_h6 + fb);
        fa = fb;
    }
    return acc.value();
}

}  // namespace

void McmcConfig::validate(std::size_t dim) const {
    if (iterations == 0) throw Error("McmcConfig: iterations must be >= 1");
    if (burn_in >= iterations) throw Error("McmcConfig: burn-in must be < iterations");
    if (thin == 0) throw Error("McmcConfig: thin must be >= 1");
    const auto steps = steps_for(dim);
    for (double s : steps)
        if (!(s > 0.0) || !std::isfinite(s)) throw Error("McmcConfig: step scales must be positive and finite");
}

std::vector<double> McmcConfig::steps_for(std::size_t dim) const {
    if (step_scales.empty()) throw Error("McmcConfig: step scales not set");
    if (step_scales.size() == dim) return step_scales;
    if (step_scales.size() == 1) return std::vector<double>(dim, step_scales[0]);
    throw Error("McmcConfig: step-scale length matches neither 1 nor the parameter dimension");
}

std::vector<double> Chain::coordinate(std::size_t k) const {
    std::vector<double> out;
    out.reserve(draws.size());
    for (const auto& d : draws) out.push_back(d[k]);
    return out;
}

double quadrature_1d(const std::function<double(double)>& log_integrand, double lower,
                     double upper, std::size_t panels, double tolerance) {
    if (!(upper > lower)) throw Error("quadrature_1d: need upper > lower");
    if (panels == 0) panels = 1;

    constexpr int kMaxDoublings = 18;
    double prev = log_simpson(log_integrand, lower, upper, panels);
    for (int k = 0; k < kMaxDoublings; ++k) {
        panels *= 2;
        const double cur = log_simpson(log_integrand, lower, upper, panels);
        if (prev == neg_inf && cur == neg_inf)
            throw Error("posterior undefined: integrand is zero over the quadrature range");
        if (std::abs(cur - prev) < tolerance) return cur;
        prev = cur;
    }
    std::ostringstream os;
    os << "quadrature_1d: no convergence to " << tolerance << " after " << kMaxDoublings
       << " panel doublings";
    throw Error(os.str());
}

LaplaceResult laplace_log_evidence(const LogDensityFn& log_unnorm,
                                   std::span<const double> mode_hint, Constraint constraint) {
    const auto p = mode_hint.size();
    const Objective neg = [&](std::span<const double> th) {
        const double v = log_unnorm(th);
        return -v;  // -(-inf) = +inf marks the forbidden region for the simplex
    };
    if (!std::isfinite(neg(mode_hint)))
        throw Error("laplace_log_evidence: mode hint is outside the support");

    const auto opt = nelder_mead_minimize(neg, mode_hint, 1e-12, 20000);
    Eigen::MatrixXd H = hessian_fd(neg, opt.argmin);

    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        std::ostringstream os;
        os << "laplace_log_evidence: Hessian not positive definite; eigenvalues:";
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) os << " " << es.eigenvalues()[i];
        throw Error(os.str());
    }

    double half_log_det = 0.0;
    for (Eigen::Index i = 0; i < H.rows(); ++i) half_log_det += std::log(llt.matrixL()(i, i));

    LaplaceResult res{
        0.5 * static_cast<double>(p) * kLog2Pi - half_log_det - opt.value,
        ParamPoint::require(opt.argmin, constraint),
        llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols())),
    };
    return res;
}

LaplaceResult laplace_log_evidence(const GibbsPosterior& post, const ParamPoint& mode_hint) {
    return laplace_log_evidence(
        [&post](std::span<const double> th) { return post.log_unnormalized(th); },
        mode_hint.values(), mode_hint.constraint());
}

EvidenceEstimate importance_sample_evidence(const LogDensityFn& log_unnorm,
                                            std::span<const double> proposal_mean,
                                            const Eigen::MatrixXd& proposal_cov,
                                            std::size_t n_draws, std::uint64_t seed) {
    const auto p = static_cast<Eigen::Index>(proposal_mean.size());
    if (proposal_cov.rows() != p || proposal_cov.cols() != p)
        throw Error("importance_sample_evidence: proposal covariance dimension mismatch");
    if (n_draws == 0) throw Error("importance_sample_evidence: need at least one draw");

    Eigen::LLT<Eigen::MatrixXd> llt(proposal_cov);
    if (llt.info() != Eigen::Success)
        throw Error("importance_sample_evidence: proposal covariance not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    double half_log_det = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) half_log_det += std::log(L(i, i));
    const double log_norm = -0.5 * static_cast<double>(p) * kLog2Pi - half_log_det;

    Rng rng(seed);
    std::vector<double> log_w(n_draws);
    Eigen::VectorXd z(p), x(p);
    for (std::size_t i = 0; i < n_draws; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) z(k) = rng.normal();
        x = L * z;
        for (Eigen::Index k = 0; k < p; ++k) x(k) += proposal_mean[static_cast<std::size_t>(k)];
        const double log_q = log_norm - 0.5 * z.squaredNorm();
        const double lt = log_unnorm(std::span<const double>(x.data(), static_cast<std::size_t>(p)));
        const double lw = lt - log_q;
        if (std::isnan(lw) || lw == pos_inf) {
            std::ostringstream os;
            os << "importance_sample_evidence: non-finite weight at draw " << i;
            throw Error(os.str());
        }
        log_w[i] = lw;  // -inf allowed: zero-weight draw
    }

    double max_lw = neg_inf;
    for (double lw : log_w) max_lw = std::max(max_lw, lw);
    if (max_lw == neg_inf)
        throw Error("importance_sample_evidence: all weights are zero (proposal misses the target)");

    // delta method on log(mean weight): se = sd(a)/(sqrt(n)*mean(a)), a_i = w_i/max
    double sum_a = 0.0, sum_a2 = 0.0;
    for (double lw : log_w) {
        const double a = std::exp(lw - max_lw);
        sum_a += a;
        sum_a2 += a * a;
    }
    const double n = static_cast<double>(n_draws);
    const double mean_a = sum_a / n;
    const double var_a = n > 1 ? (sum_a2 - n * mean_a * mean_a) / (n - 1.0) : 0.0;
    const double se = var_a > 0.0 ? std::sqrt(var_a / n) / mean_a : 0.0;

    return EvidenceEstimate{max_lw + std::log(mean_a), se};
}

EvidenceEstimate importance_sample_evidence(const GibbsPosterior& post,
                                            std::span<const double> proposal_mean,
                                            const Eigen::MatrixXd& proposal_cov,
                                            std::size_t n_draws, std::uint64_t seed) {
    return importance_sample_evidence(
        [&post](std::span<const double> th) { return post.log_unnormalized(th); }, proposal_mean,
        proposal_cov, n_draws, seed);
}

Chain random_walk_mh(const LogDensityFn& log_unnorm, std::span<const double> start,
                     const McmcConfig& config, Constraint constraint) {
    const std::size_t dim = start.size();
    // custom indicators enforce support through the density itself
    if (constraint == Constraint::Custom) constraint = Constraint::None;
    config.validate(dim);
    const auto steps = config.steps_for(dim);

    std::vector<double> cur(start.begin(), start.end());
    double cur_ld = log_unnorm(cur);
    if (!std::isfinite(cur_ld))
        throw Error("random_walk_mh: start point has non-finite log density");

    Rng rng(config.seed);
    Chain chain;
    chain.seed = config.seed;
    const std::size_t kept_hint = (config.iterations - config.burn_in) / config.thin + 1;
    chain.draws.reserve(kept_hint);
    chain.log_density_trace.reserve(kept_hint);

    std::vector<double> prop(dim);
    std::size_t accepted = 0;
    std::size_t accepted_post_burnin = 0;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        for (std::size_t k = 0; k < dim; ++k) prop[k] = cur[k] + steps[k] * rng.normal();
        const double prop_ld = log_unnorm(prop);
        const double u = rng.uniform();
        if (prop_ld > neg_inf && (prop_ld >= cur_ld || u < std::exp(prop_ld - cur_ld))) {
            cur = prop;
            cur_ld = prop_ld;
            ++accepted;
            if (it >= config.burn_in) ++accepted_post_burnin;
        }
        if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
            chain.draws.push_back(ParamPoint::require(cur, constraint));
            chain.log_density_trace.push_back(cur_ld);
        }
    }

    if (accepted_post_burnin == 0 && config.iterations - config.burn_in > 100) {
        std::ostringstream os;
        os << "random_walk_mh: zero acceptances after burn-in; step scales:";
        for (double s : steps) os << " " << s;
        throw Error(os.str());
    }

    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.iterations);
    return chain;
}

Chain random_walk_mh(const GibbsPosterior& post, const McmcConfig& config,
                     std::optional<ParamPoint> start) {
    const LogDensityFn target = [&post](std::span<const double> th) {
        return post.log_unnormalized(th);
    };
    if (start) return random_walk_mh(target, start->values(), config, start->constraint());

    // start-point search among prior draws
    constexpr int kStartCap = 1000;
    Rng rng = Rng::from(config.seed, 0x5741u);
    for (int i = 0; i < kStartCap; ++i) {
        const auto draw = post.prior().sample(rng, 1);
        if (std::isfinite(post.log_unnormalized(draw[0])))
            return random_walk_mh(target, draw[0].values(), config, post.prior().constraint());
    }
    std::ostringstream os;
    os << "random_walk_mh: no start point with finite density among " << kStartCap
       << " prior draws";
    throw Error(os.str());
}

std::pair<double, double> credible_interval(const Chain& chain, std::size_t coordinate,
                                            double level) {
    if (chain.draws.size() < 100) throw Error("credible_interval: need at least 100 draws");
    if (!(level > 0.0 && level < 1.0)) throw Error("credible_interval: level must lie in (0,1)");
    std::vector<double> xs = chain.coordinate(coordinate);
    std::sort(xs.begin(), xs.end());
    const double tail = 0.5 * (1.0 - level);
    const double lo = quantile_type7(xs, tail, /*presorted=*/true);
    const double hi = quantile_type7(std::move(xs), 1.0 - tail, /*presorted=*/true);
    return {lo, hi};
}

}  // namespace gb
