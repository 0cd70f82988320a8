#include "gb/misspec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/gibbs.hpp"
#include "gb/loss.hpp"
#include "gb/optimize.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

// plain composite Simpson for signed integrands, with panel doubling
double simpson_adaptive(const std::function<double(double)>& f, double lo, double hi,
                        double tol = 1e-10) {
    auto pass = [&](std::size_t panels) {
        const double h = (hi - lo) / static_cast<double>(panels);
        double s = 0.0;
        double fa = f(lo);
        for (std::size_t i = 0; i < panels; ++i) {
            const double a = lo + h * static_cast<double>(i);
            const double b = (i + 1 == panels) ? hi : a + h;
            const double fm = f(a + 0.5 * h);
            const double fb = f(b);
            s += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            fa = fb;
        }
        return s;
    };
    std::size_t panels = 64;
    double prev = pass(panels);
    for (int k = 0; k < 16; ++k) {
        panels *= 2;
        const double cur = pass(panels);
        if (std::abs(cur - prev) < tol * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw Error("kl_divergence: quadrature did not converge");
}

}  // namespace

TrueDensity TrueDensity::normal(double mean, double var) {
    if (!(var > 0.0)) throw Error("TrueDensity::normal: variance must be positive");
    TrueDensity d;
    d.kind_ = Kind::Normal;
    d.m1_ = mean;
    d.v1_ = var;
    return d;
}

TrueDensity TrueDensity::mixture2(double weight1, double mean1, double var1, double mean2,
                                  double var2) {
    if (!(weight1 > 0.0 && weight1 < 1.0))
        throw Error("TrueDensity::mixture2: weight must lie in (0,1)");
    if (!(var1 > 0.0 && var2 > 0.0))
        throw Error("TrueDensity::mixture2: variances must be positive");
    TrueDensity d;
    d.kind_ = Kind::Mixture2;
    d.w1_ = weight1;
    d.m1_ = mean1;
    d.v1_ = var1;
    d.m2_ = mean2;
    d.v2_ = var2;
    return d;
}

TrueDensity TrueDensity::exponential(double rate) {
    if (!(rate > 0.0)) throw Error("TrueDensity::exponential: rate must be positive");
    TrueDensity d;
    d.kind_ = Kind::Exponential;
    d.rate_ = rate;
    return d;
}

double TrueDensity::log_density(double x) const {
    switch (kind_) {
        case Kind::Normal:
            return normal_log_pdf(x, m1_, v1_);
        case Kind::Mixture2:
            return log_add_exp(std::log(w1_) + normal_log_pdf(x, m1_, v1_),
                               std::log1p(-w1_) + normal_log_pdf(x, m2_, v2_));
        case Kind::Exponential:
            return x >= 0.0 ? std::log(rate_) - rate_ * x : neg_inf;
    }
    return neg_inf;
}

double TrueDensity::density(double x) const { return std::exp(log_density(x)); }

double TrueDensity::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::Normal:
            return rng.normal(m1_, std::sqrt(v1_));
        case Kind::Mixture2:
            return rng.bernoulli(w1_) ? rng.normal(m1_, std::sqrt(v1_))
                                      : rng.normal(m2_, std::sqrt(v2_));
        case Kind::Exponential:
            return rng.exponential(rate_);
    }
    return 0.0;
}

std::optional<std::pair<double, double>> TrueDensity::normal_params() const {
    if (kind_ != Kind::Normal) return std::nullopt;
    return std::make_pair(m1_, v1_);
}

std::pair<double, double> TrueDensity::support_hint() const {
    switch (kind_) {
        case Kind::Normal:
            return {m1_ - 8.5 * std::sqrt(v1_), m1_ + 8.5 * std::sqrt(v1_)};
        case Kind::Mixture2: {
            const double lo = std::min(m1_ - 8.5 * std::sqrt(v1_), m2_ - 8.5 * std::sqrt(v2_));
            const double hi = std::max(m1_ + 8.5 * std::sqrt(v1_), m2_ + 8.5 * std::sqrt(v2_));
            return {lo, hi};
        }
        case Kind::Exponential:
            return {0.0, 34.0 / rate_};  // exp(-34) ~ 1.7e-15 tail mass
    }
    return {0.0, 1.0};
}

std::string TrueDensity::kind_name() const {
    switch (kind_) {
        case Kind::Normal: return "normal";
        case Kind::Mixture2: return "two-component-normal-mixture";
        case Kind::Exponential: return "exponential";
    }
    return "?";
}

ProxyFamily ProxyFamily::normal_location(double fixed_var) {
    if (!(fixed_var > 0.0)) throw Error("ProxyFamily: fixed variance must be positive");
    ProxyFamily f;
    f.scale_free_ = true;
    f.fixed_var_ = fixed_var;
    return f;
}

ProxyFamily ProxyFamily::normal_location_scale() {
    ProxyFamily f;
    f.scale_free_ = false;
    return f;
}

double ProxyFamily::log_density(double x, std::span<const double> theta) const {
    if (theta.size() != dim()) throw Error("ProxyFamily: theta dimension mismatch");
    if (scale_free_) return normal_log_pdf(x, theta[0], fixed_var_);
    if (!(theta[1] > 0.0)) return neg_inf;
    return normal_log_pdf(x, theta[0], theta[1] * theta[1]);
}

bool ProxyFamily::in_domain(std::span<const double> theta) const {
    if (theta.size() != dim()) return false;
    return scale_free_ || theta[1] > 0.0;
}

double ProxyFamily::fixed_variance() const {
    if (!scale_free_) throw Error("ProxyFamily: location-scale family has no fixed variance");
    return fixed_var_;
}

std::string ProxyFamily::kind_name() const {
    return scale_free_ ? "normal-location" : "normal-location-scale";
}

double kl_divergence(const TrueDensity& f0, const ProxyFamily& family,
                     std::span<const double> theta) {
    if (!family.in_domain(theta)) throw Error("kl_divergence: theta outside the family domain");

    // closed form for N(m0,v0) against N(theta, v):
    // 1/2 [ log(v/v0) + (v0 + (m0-theta)^2)/v - 1 ]
    if (const auto nm = f0.normal_params()) {
        const auto [m0, v0] = *nm;
        const double v = family.is_location_only() ? family.fixed_variance() : sqr(theta[1]);
        return 0.5 * (std::log(v / v0) + (v0 + sqr(m0 - theta[0])) / v - 1.0);
    }

    const auto [lo, hi] = f0.support_hint();
    return simpson_adaptive(
        [&](double x) {
            const double lf0 = f0.log_density(x);
            if (lf0 == neg_inf) return 0.0;  // integrand vanishes with f0
            const double lf = family.log_density(x, theta);
            return std::exp(lf0) * (lf0 - lf);
        },
        lo, hi);
}

KlMinimum kl_minimizer(const TrueDensity& f0, const ProxyFamily& family,
                       std::span<const double> box_lo, std::span<const double> box_hi) {
    const std::size_t d = family.dim();
    if (box_lo.size() != d || box_hi.size() != d)
        throw Error("kl_minimizer: search box dimension mismatch");
    std::vector<double> start(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(box_hi[k] > box_lo[k])) throw Error("kl_minimizer: empty search box");
        start[k] = 0.5 * (box_lo[k] + box_hi[k]);
    }

    const Objective obj = [&](std::span<const double> th) {
        for (std::size_t k = 0; k < d; ++k)
            if (th[k] < box_lo[k] || th[k] > box_hi[k]) return pos_inf;
        if (!family.in_domain(th)) return pos_inf;
        return kl_divergence(f0, family, th);
    };
    const auto res = nelder_mead_minimize(obj, start, 1e-12, 20000);
    return KlMinimum{res.argmin, res.value};
}

ConcentrationResult concentration_experiment(const TrueDensity& f0, const ProxyFamily& family,
                                             const LogPrior& prior, const ConcentrationSpec& spec) {
    if (family.dim() != 1)
        throw Error("concentration_experiment: only 1-D proxy families are supported");
    if (prior.dim() != 1) throw Error("concentration_experiment: prior must be one-dimensional");
    if (spec.n_schedule.empty()) throw Error("concentration_experiment: empty n schedule");
    if (!(spec.eps > 0.0)) throw Error("concentration_experiment: eps must be positive");
    if (spec.seeds == 0) throw Error("concentration_experiment: need at least one seed");

    // theta grid: prior mean +/- 8 prior SDs
    const ParamPoint prior_mode = prior.mode();
    const double center = prior_mode[0];
    // prior sd recovered from the density curvature at the mode would be
    // fragile; sample instead
    double prior_sd;
    {
        Rng r(derive_seed(spec.base_seed, 0xEEu));
        const auto draws = prior.sample(r, 4096);
        std::vector<double> xs(draws.size());
        for (std::size_t i = 0; i < draws.size(); ++i) xs[i] = draws[i][0];
        prior_sd = stddev(xs);
    }
    if (!(prior_sd > 0.0)) throw Error("concentration_experiment: degenerate prior scale");

    const std::size_t g = spec.grid_points;
    const double lo = center - 8.0 * prior_sd;
    const double hi = center + 8.0 * prior_sd;
    const double step = (hi - lo) / static_cast<double>(g - 1);
    if (spec.eps < step) {
        std::ostringstream os;
        os << "concentration_experiment: eps " << spec.eps << " below grid resolution " << step;
        throw Error(os.str());
    }

    std::vector<ParamPoint> support;
    std::vector<double> prior_lw(g);
    support.reserve(g);
    for (std::size_t k = 0; k < g; ++k) {
        const double theta = lo + step * static_cast<double>(k);
        support.push_back(ParamPoint::require({theta}));
        prior_lw[k] = prior.log_density(support.back());
    }

    // locate theta0 before touching any data
    const std::vector<double> box_lo{lo}, box_hi{hi};
    const KlMinimum km = kl_minimizer(f0, family, box_lo, box_hi);
    const double theta0 = km.theta0[0];

    // Prior support condition: positive prior mass in the eps-ball around
    // theta0 (checked, not assumed).
    {
        double ball_mass = 0.0;
        for (std::size_t k = 0; k < g; ++k)
            if (std::abs(support[k][0] - theta0) <= spec.eps) ball_mass += std::exp(prior_lw[k]);
        if (!(ball_mass > 0.0))
            throw Error("concentration_experiment: prior assigns no mass near theta0 "
                        "(support condition violated); refusing to run");
    }

    const DiscreteBelief prior_belief = DiscreteBelief::from_log_weights(support, prior_lw);

    ConcentrationResult out;
    out.theta0 = km.theta0;
    out.divergence = km.divergence;
    out.grid_lo = lo;
    out.grid_hi = hi;
    out.grid_points = g;

    const PointLoss self_info = PointLoss::neg_log_density(
        [&family](std::span<const double> th, const Datum& d) {
            return family.log_density(std::get<ScalarDatum>(d).x, th);
        },
        1);

    for (std::size_t n : spec.n_schedule) {
        if (n == 0) throw Error("concentration_experiment: n schedule entries must be >= 1");
        std::vector<double> masses(spec.seeds);
        for (std::size_t s = 0; s < spec.seeds; ++s) {
            Rng rng = Rng::from(spec.base_seed, (n << 8) ^ s);
            std::vector<Datum> data;
            data.reserve(n);
            for (std::size_t i = 0; i < n; ++i) data.push_back(make_scalar(f0.sample(rng)));

            const DiscreteBelief posterior = update_discrete(
                prior_belief, DatasetLoss::separable(self_info, std::move(data)), 1.0);

            double mass = 0.0;
            const auto lw = posterior.log_weights();
            for (std::size_t k = 0; k < g; ++k)
                if (std::abs(posterior.support()[k][0] - theta0) <= spec.eps)
                    mass += std::exp(lw[k]);
            masses[s] = mass;
        }
        ConcentrationRow row;
        row.n = n;
        row.eps = spec.eps;
        row.mass_mean = mean(masses);
        row.mass_sd = spec.seeds > 1 ? stddev(masses) : 0.0;
        row.seeds = spec.seeds;
        out.table.push_back(row);
    }
    return out;
}

}  // namespace gb
