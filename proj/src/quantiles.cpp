#include "gb/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

std::vector<Datum> to_data(const std::vector<double>& values) {
    std::vector<Datum> data;
    data.reserve(values.size());
    for (double v : values) data.push_back(make_scalar(v));
    return data;
}

// fixed and unit-information resolve to a scalar here; operational runs its
// own bootstrap over the sample; the hierarchical rule yields a joint
// posterior and has its own entry point (hierarchical_posterior).
double resolve_weight(const WeightRule& rule, const LogPrior& prior, const DatasetLoss& loss,
                      const McmcConfig& config) {
    if (const auto* f = rule.get_if<WeightRule::Fixed>()) return f->w;
    if (const auto* u = rule.get_if<WeightRule::UnitInformation>()) {
        const auto res = unit_info_weight(prior, loss, derive_seed(config.seed, 0x11u), u->mc_draws);
        return res.w;
    }
    if (const auto* o = rule.get_if<WeightRule::Operational>()) {
        const std::vector<Datum> data(loss.data().begin(), loss.data().end());
        const auto resampler = bootstrap_resampler(loss.point_loss(), data, prior);
        const auto res = operational_weight(loss.point_loss(), prior, resampler, o->alpha,
                                            o->w_grid, o->replications, config);
        return res.w;
    }
    throw Error("the hierarchical weight rule yields a joint (theta,w) posterior; "
                "use hierarchical_posterior instead of a sampling pipeline weight");
}

// strictly increasing start for the ordered cone, nudging ties apart
std::array<double, 3> strictified_quartiles(const std::vector<double>& values) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::array<double, 3> q{quantile_type7(sorted, 0.25, true), quantile_type7(sorted, 0.50, true),
                            quantile_type7(sorted, 0.75, true)};
    const double spread = std::max(sorted.back() - sorted.front(), 1.0);
    for (int k = 1; k < 3; ++k)
        if (!(q[k] > q[k - 1])) q[k] = q[k - 1] + 1e-6 * spread;
    return q;
}

// Random-walk scales matched to the posterior width. Each loss term has a
// unit kink-slope jump (the absolute term has 2), so the curvature of the
// tilt near quartile q is about w * n * f(q) and the posterior sd about
// 1/sqrt(w n f). f is estimated by a normal reference through the IQR.
// A flat n-free default such as IQR/10 collapses the acceptance rate once
// n reaches the tens of thousands.
std::vector<double> default_quartile_steps(const std::vector<double>& values, double w) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double iqr = quantile_type7(sorted, 0.75, true) - quantile_type7(sorted, 0.25, true);
    const double spread = sorted.back() - sorted.front();
    const double n = static_cast<double>(values.size());
    if (!(iqr > 0.0)) {
        // point-mass-like data: the tilt is Laplace-shaped with scale ~1/(w n)
        if (!(spread > 0.0)) return std::vector<double>(3, 6.0 / (w * n));
        iqr = spread;
    }
    const double f_quartile = 0.3178 * 1.349 / iqr;  // phi(+-0.6745) / (IQR/1.349)
    const double f_median = 0.3989 * 1.349 / iqr;
    const double s_q = std::min(2.4 / std::sqrt(w * n * f_quartile), spread);
    const double s_m = std::min(2.4 / std::sqrt(w * n * f_median), spread);
    return {s_q, s_m, s_q};
}

std::vector<double> default_median_steps(const std::vector<double>& values, double w) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double iqr = quantile_type7(sorted, 0.75, true) - quantile_type7(sorted, 0.25, true);
    const double spread = sorted.back() - sorted.front();
    const double n = static_cast<double>(values.size());
    if (!(iqr > 0.0)) {
        if (!(spread > 0.0)) return {3.0 / (w * n)};
        iqr = spread;
    }
    const double f_median = 0.3989 * 1.349 / iqr;
    return {std::min(2.4 / std::sqrt(2.0 * w * n * f_median), spread)};
}

}  // namespace

GroupedSample GroupedSample::make(std::vector<Group> groups) {
    if (groups.empty()) throw Error("GroupedSample: no groups");
    std::set<std::string> labels;
    for (const auto& g : groups) {
        if (g.values.empty()) throw Error("GroupedSample: group '" + g.label + "' is empty");
        for (double v : g.values)
            if (!std::isfinite(v))
                throw Error("GroupedSample: non-finite value in group '" + g.label + "'");
        if (!labels.insert(g.label).second)
            throw Error("GroupedSample: duplicate label '" + g.label + "'");
    }
    return GroupedSample{std::move(groups)};
}

QuartileRun quartile_posterior(const std::vector<double>& values, const LogPrior& prior,
                               const WeightRule& rule, const McmcConfig& config) {
    if (values.size() < 4) throw Error("quartile_posterior: need at least 4 data points");
    if (prior.dim() != 3 || prior.constraint() != Constraint::StrictlyIncreasing)
        throw Error("quartile_posterior: prior must be ordered-normal over 3 coordinates");

    DatasetLoss loss = DatasetLoss::separable(PointLoss::quartile_triple(), to_data(values));
    const double w = resolve_weight(rule, prior, loss, config);

    const auto q = strictified_quartiles(values);
    McmcConfig cfg = config;
    if (cfg.step_scales.empty()) cfg.step_scales = default_quartile_steps(values, w);

    GibbsPosterior post(std::move(loss), w, prior);
    Chain chain = random_walk_mh(post, cfg,
                                 ParamPoint::require({q[0], q[1], q[2]}, Constraint::StrictlyIncreasing));
    return QuartileRun{std::move(chain), w, q};
}

MedianRun median_posterior(const std::vector<double>& values, const LogPrior& prior,
                           const WeightRule& rule, const McmcConfig& config) {
    if (values.size() < 2) throw Error("median_posterior: need at least 2 data points");
    if (prior.dim() != 1) throw Error("median_posterior: prior must be one-dimensional");

    DatasetLoss loss = DatasetLoss::separable(PointLoss::absolute(), to_data(values));
    const double w = resolve_weight(rule, prior, loss, config);

    const double med = quantile_type7(values, 0.5);
    McmcConfig cfg = config;
    if (cfg.step_scales.empty()) cfg.step_scales = default_median_steps(values, w);

    GibbsPosterior post(std::move(loss), w, prior);
    Chain chain = random_walk_mh(post, cfg, ParamPoint::require({med}));
    return MedianRun{std::move(chain), w, med};
}

BoxplotSummary bayesian_boxplot(const GroupedSample& data, const std::vector<LogPrior>& priors,
                                const WeightRule& rule, double level, const McmcConfig& config) {
    if (priors.size() != data.groups.size())
        throw Error("bayesian_boxplot: one prior per group required");
    if (!(level > 0.0 && level < 1.0)) throw Error("bayesian_boxplot: level must lie in (0,1)");

    BoxplotSummary summary;
    summary.level = level;
    for (std::size_t g = 0; g < data.groups.size(); ++g) {
        const auto& group = data.groups[g];
        McmcConfig cfg = config;
        cfg.seed = derive_seed(config.seed, g);
        try {
            QuartileRun run = quartile_posterior(group.values, priors[g], rule, cfg);
            GroupSummary gs;
            gs.label = group.label;
            gs.n = group.values.size();
            gs.q1 = run.empirical[0];
            gs.q2 = run.empirical[1];
            gs.q3 = run.empirical[2];
            gs.w = run.w;
            for (std::size_t k = 0; k < 3; ++k)
                gs.intervals[k] = credible_interval(run.chain, k, level);
            gs.acceptance = run.chain.acceptance_rate;
            gs.draw_count = run.chain.draws.size();
            summary.groups.push_back(std::move(gs));
        } catch (const Error& e) {
            summary.failures.emplace_back(group.label, e.what());
        }
    }
    return summary;
}

}  // namespace gb
