// gbayes — command-line front end: data simulation, posterior sampling,
// Cox marker scans and variable selection, Bayesian boxplots, and the
// misspecification concentration experiment. Every command is a pure
// function of (config, flags, input files, seed); outputs are written
// atomically and are byte-identical across reruns.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "gb/calibrate.hpp"
#include "gb/csv.hpp"
#include "gb/engines.hpp"
#include "gb/gibbs.hpp"
#include "gb/misspec.hpp"
#include "gb/quantiles.hpp"
#include "gb/survival.hpp"
#include "gb/util.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitPartial = 4;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iters;
    std::optional<std::size_t> burnin;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<double> level;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gb::ValidationError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw gb::ValidationError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw gb::ValidationError("config " + path + ": top level must be an object");
    return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw gb::ValidationError("unknown key '" + key + "' in " + ctx);
}

void check_command(const json& cfg, const std::string& cmd) {
    if (cfg.contains("command") && cfg.at("command").get<std::string>() != cmd)
        throw gb::ValidationError("config 'command' is '" +
                                  cfg.at("command").get<std::string>() + "', expected '" + cmd + "'");
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw gb::ValidationError("config key '" + key + "': " + e.what());
    }
}

template <class T>
T get_req(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key)) throw gb::ValidationError("missing key '" + key + "' in " + ctx);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw gb::ValidationError("config key '" + key + "': " + e.what());
    }
}

std::vector<double> broadcast(const json& j, const std::string& key, std::size_t n,
                              std::optional<double> fallback, const std::string& ctx) {
    if (!j.contains(key)) {
        if (!fallback) throw gb::ValidationError("missing key '" + key + "' in " + ctx);
        return std::vector<double>(n, *fallback);
    }
    const auto& v = j.at(key);
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    const auto vec = get_req<std::vector<double>>(j, key, ctx);
    if (vec.size() != n) {
        std::ostringstream os;
        os << "config key '" << key << "' must be a scalar or a vector of length " << n;
        throw gb::ValidationError(os.str());
    }
    return vec;
}

gb::LogPrior parse_normal_prior(const json& j, const std::string& ctx, bool ordered = false) {
    check_keys(j, {"means", "variances"}, ctx);
    const auto means = get_req<std::vector<double>>(j, "means", ctx);
    const auto vars = get_req<std::vector<double>>(j, "variances", ctx);
    try {
        return ordered ? gb::LogPrior::ordered_normal(means, vars)
                       : gb::LogPrior::independent_normal(means, vars);
    } catch (const gb::Error& e) {
        throw gb::ValidationError(ctx + ": " + e.what());
    }
}

gb::PointLoss parse_loss(const json& j) {
    check_keys(j, {"kind", "tau", "k"}, "loss");
    const auto kind = get_req<std::string>(j, "kind", "loss");
    try {
        if (kind == "squared") return gb::PointLoss::squared();
        if (kind == "absolute") return gb::PointLoss::absolute();
        if (kind == "pinball") return gb::PointLoss::pinball(get_req<double>(j, "tau", "loss"));
        if (kind == "huber") return gb::PointLoss::huber(get_req<double>(j, "k", "loss"));
    } catch (const gb::Error& e) {
        throw gb::ValidationError(std::string("loss: ") + e.what());
    }
    throw gb::ValidationError("loss kind '" + kind +
                              "' not available here (use squared|absolute|pinball|huber)");
}

gb::WeightRule parse_weight_rule(const json& j) {
    check_keys(j, {"kind", "w", "mc_draws", "xi", "alpha", "w_grid", "replications"}, "weight_rule");
    const auto kind = get_req<std::string>(j, "kind", "weight_rule");
    try {
        if (kind == "fixed") return gb::WeightRule::fixed(get_req<double>(j, "w", "weight_rule"));
        if (kind == "unit-information")
            return gb::WeightRule::unit_information(get_or<std::size_t>(j, "mc_draws", 10000));
        if (kind == "hierarchical")
            return gb::WeightRule::hierarchical(get_req<double>(j, "xi", "weight_rule"));
        if (kind == "operational")
            return gb::WeightRule::operational(
                get_req<double>(j, "alpha", "weight_rule"),
                get_req<std::vector<double>>(j, "w_grid", "weight_rule"),
                get_req<std::size_t>(j, "replications", "weight_rule"));
    } catch (const gb::Error& e) {
        throw gb::ValidationError(std::string("weight_rule: ") + e.what());
    }
    throw gb::ValidationError("unknown weight_rule kind '" + kind + "'");
}

gb::McmcConfig parse_mcmc(const json& cfg, const Overrides& ov, std::size_t default_iters,
                          std::size_t default_burnin) {
    gb::McmcConfig mc;
    mc.iterations = ov.iters.value_or(get_or<std::size_t>(cfg, "iterations", default_iters));
    mc.burn_in = ov.burnin.value_or(get_or<std::size_t>(cfg, "burnin", default_burnin));
    mc.thin = get_or<std::size_t>(cfg, "thin", 1);
    mc.seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    mc.step_scales = get_or<std::vector<double>>(cfg, "step_scales", {});
    if (mc.iterations == 0 || mc.burn_in >= mc.iterations)
        throw gb::ValidationError("need burnin < iterations");
    if (mc.thin == 0) throw gb::ValidationError("thin must be >= 1");
    return mc;
}

std::string out_path(const json& cfg, const Overrides& ov) {
    if (ov.out) return *ov.out;
    return get_req<std::string>(cfg, "out", "config");
}

std::string fmt(double v) { return gb::format_double(v); }

// ---------------------------------------------------------------- fit ----

int cmd_fit(const json& cfg, const Overrides& ov) {
    check_command(cfg, "fit");
    check_keys(cfg,
               {"command", "data", "loss", "prior", "weight_rule", "seed", "iterations", "burnin",
                "thin", "step_scales", "level", "out"},
               "fit config");

    const auto data_path = get_req<std::string>(cfg, "data", "fit config");
    const auto values = gb::read_scalar_csv(data_path);
    const gb::PointLoss loss = parse_loss(get_req<json>(cfg, "loss", "fit config"));
    const gb::LogPrior prior = parse_normal_prior(get_req<json>(cfg, "prior", "fit config"), "prior");
    if (prior.dim() != 1)
        throw gb::ValidationError("fit: scalar losses need a one-dimensional prior");
    const gb::WeightRule rule = parse_weight_rule(get_req<json>(cfg, "weight_rule", "fit config"));
    const double level = ov.level.value_or(get_or<double>(cfg, "level", 0.95));
    if (!(level > 0.0 && level < 1.0)) throw gb::ValidationError("level must lie in (0,1)");
    gb::McmcConfig mc = parse_mcmc(cfg, ov, 20000, 5000);
    const std::string out = out_path(cfg, ov);

    std::vector<gb::Datum> data;
    data.reserve(values.size());
    for (double v : values) data.push_back(gb::make_scalar(v));
    gb::DatasetLoss dataset_loss = gb::DatasetLoss::separable(loss, std::move(data));

    double w = 0.0;
    if (const auto* f = rule.get_if<gb::WeightRule::Fixed>()) {
        w = f->w;
    } else if (const auto* u = rule.get_if<gb::WeightRule::UnitInformation>()) {
        w = gb::unit_info_weight(prior, dataset_loss, gb::derive_seed(mc.seed, 0x11u), u->mc_draws).w;
    } else if (const auto* o = rule.get_if<gb::WeightRule::Operational>()) {
        const std::vector<gb::Datum> d2(dataset_loss.data().begin(), dataset_loss.data().end());
        const auto resampler = gb::bootstrap_resampler(loss, d2, prior);
        gb::McmcConfig boot = mc;
        if (boot.step_scales.empty()) boot.step_scales = {gb::stddev(values) / 5.0 + 1e-9};
        w = gb::operational_weight(loss, prior, resampler, o->alpha, o->w_grid, o->replications,
                                   boot)
                .w;
    } else {
        throw gb::ValidationError(
            "fit: the hierarchical weight rule has no scalar w; use fixed, "
            "unit-information, or operational");
    }

    if (mc.step_scales.empty()) {
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        const double iqr = gb::quantile_type7(sorted, 0.75, true) - gb::quantile_type7(sorted, 0.25, true);
        mc.step_scales = {iqr > 0.0 ? iqr / 10.0 : 0.1};
    }

    const gb::GibbsPosterior post(std::move(dataset_loss), w, prior);
    const gb::Chain chain = gb::random_walk_mh(post, mc);

    std::ostringstream header;
    header << "gbayes " << kVersion << " command=fit seed=" << mc.seed << " loss="
           << loss.kind_name() << " rule=" << rule.kind_name() << " w=" << fmt(w)
           << " iterations=" << mc.iterations << " burnin=" << mc.burn_in << " thin=" << mc.thin
           << " level=" << fmt(level);

    gb::AtomicCsvWriter draws(out);
    draws.comment(header.str());
    draws.row("iter,theta_1");
    for (std::size_t k = 0; k < chain.draws.size(); ++k) {
        std::ostringstream os;
        os << (mc.burn_in + k * mc.thin) << "," << fmt(chain.draws[k][0]);
        draws.row(os.str());
    }
    draws.commit();

    // mode = draw with the highest recorded log density
    std::size_t mode_idx = 0;
    for (std::size_t k = 1; k < chain.log_density_trace.size(); ++k)
        if (chain.log_density_trace[k] > chain.log_density_trace[mode_idx]) mode_idx = k;
    const auto [lo, hi] = gb::credible_interval(chain, 0, level);

    gb::AtomicCsvWriter summary(out + ".summary.csv");
    summary.comment(header.str());
    summary.row("coordinate,mode,ci_lo,ci_hi,w,acceptance");
    {
        std::ostringstream os;
        os << 1 << "," << fmt(chain.draws[mode_idx][0]) << "," << fmt(lo) << "," << fmt(hi) << ","
           << fmt(w) << "," << fmt(chain.acceptance_rate);
        summary.row(os.str());
    }
    summary.commit();
    return kExitOk;
}

// ------------------------------------------------------------- cox-bf ----

gb::BfMethod parse_method(const std::string& name) {
    if (name == "laplace") return gb::BfMethod::Laplace;
    if (name == "quadrature") return gb::BfMethod::Quadrature;
    if (name == "importance") return gb::BfMethod::Importance;
    throw gb::ValidationError("unknown method '" + name +
                              "' (use laplace|quadrature|importance)");
}

int cmd_cox_bf(const json& cfg, const Overrides& ov) {
    check_command(cfg, "cox-bf");
    check_keys(cfg, {"command", "data", "slab_variance", "methods", "is_draws", "seed", "out"},
               "cox-bf config");

    const auto data_path = get_req<std::string>(cfg, "data", "cox-bf config");
    const gb::SurvivalDataset data = gb::read_survival_csv(data_path);
    const gb::RiskIndex index = gb::RiskIndex::build(data);
    const auto v = broadcast(cfg, "slab_variance", data.p(), 0.5, "cox-bf config");
    const auto is_draws = get_or<std::size_t>(cfg, "is_draws", 500);
    const std::uint64_t seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    const std::string out = out_path(cfg, ov);

    std::vector<std::string> method_names = get_or<std::vector<std::string>>(cfg, "methods", {"laplace"});
    if (ov.method) {
        method_names.clear();
        std::stringstream ss(*ov.method);
        std::string tok;
        while (std::getline(ss, tok, ',')) method_names.push_back(tok);
    }
    if (method_names.empty() || method_names.size() > 2)
        throw gb::ValidationError("cox-bf: need one or two methods");
    std::vector<gb::BfMethod> methods;
    for (const auto& m : method_names) methods.push_back(parse_method(m));

    std::ostringstream header;
    header << "gbayes " << kVersion << " command=cox-bf seed=" << seed << " markers=" << data.p()
           << " slab_variance=" << fmt(v[0]) << " methods=" << method_names[0];
    if (methods.size() == 2) header << "," << method_names[1] << " is_draws=" << is_draws;

    gb::AtomicCsvWriter table(out);
    table.comment(header.str());
    if (methods.size() == 2) {
        table.comment("method2=" + method_names[1]);
        table.row("marker,logbf_" + method_names[0] + ",logbf_method2,se,degenerate");
    } else {
        table.row("marker,logbf_" + method_names[0] + ",degenerate");
    }

    for (std::size_t j = 0; j < data.p(); ++j) {
        gb::BfOptions o1{methods[0], is_draws, gb::derive_seed(seed, 2 * j)};
        const auto r1 = gb::single_marker_bf(data, index, j, v[j], o1);
        std::ostringstream os;
        os << (j + 1) << "," << fmt(r1.log_bf);
        if (methods.size() == 2) {
            gb::BfOptions o2{methods[1], is_draws, gb::derive_seed(seed, 2 * j + 1)};
            const auto r2 = gb::single_marker_bf(data, index, j, v[j], o2);
            os << "," << fmt(r2.log_bf) << "," << fmt(r2.se);
        }
        os << "," << (r1.degenerate ? 1 : 0);
        table.row(os.str());
    }
    table.commit();
    return kExitOk;
}

// --------------------------------------------------------- cox-select ----

// delta_1 is the lowest bit of the lowest nibble (big-endian hex string)
std::string delta_hex(const std::vector<std::uint8_t>& delta) {
    const std::size_t nibbles = (delta.size() + 3) / 4;
    std::vector<unsigned> nib(nibbles, 0);
    for (std::size_t j = 0; j < delta.size(); ++j)
        if (delta[j]) nib[j / 4] |= 1u << (j % 4);
    std::string hex(nibbles, '0');
    for (std::size_t k = 0; k < nibbles; ++k) hex[nibbles - 1 - k] = "0123456789abcdef"[nib[k]];
    return hex;
}

int cmd_cox_select(const json& cfg, const Overrides& ov) {
    check_command(cfg, "cox-select");
    check_keys(cfg,
               {"command", "data", "v", "a", "iterations", "burnin", "thin", "model_size_cap",
                "seed", "out"},
               "cox-select config");

    const auto data_path = get_req<std::string>(cfg, "data", "cox-select config");
    const gb::SurvivalDataset data = gb::read_survival_csv(data_path);
    const gb::RiskIndex index = gb::RiskIndex::build(data);
    const std::size_t p = data.p();

    // paper-default prior settings: v_j = 0.5, a_j = 1/p
    const auto v = broadcast(cfg, "v", p, 0.5, "cox-select config");
    const auto a = broadcast(cfg, "a", p, 1.0 / static_cast<double>(p), "cox-select config");

    gb::SelectionOptions opts;
    opts.iterations = ov.iters.value_or(get_or<std::size_t>(cfg, "iterations", 100000));
    opts.burn_in = ov.burnin.value_or(get_or<std::size_t>(cfg, "burnin", 10000));
    opts.thin = get_or<std::size_t>(cfg, "thin", 1);
    opts.seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    opts.model_size_cap = get_or<std::size_t>(cfg, "model_size_cap", 20);
    if (opts.iterations == 0 || opts.burn_in >= opts.iterations)
        throw gb::ValidationError("need burnin < iterations");
    const std::string out = out_path(cfg, ov);

    const auto chain = gb::variable_selection_mcmc(data, index, v, a, opts);
    const auto probs = gb::inclusion_probabilities(chain);

    std::ostringstream header;
    header << "gbayes " << kVersion << " command=cox-select seed=" << opts.seed << " p=" << p
           << " v=" << fmt(v[0]) << " a=" << fmt(a[0]) << " iterations=" << opts.iterations
           << " burnin=" << opts.burn_in << " thin=" << opts.thin
           << " model_size_cap=" << opts.model_size_cap << " acceptance="
           << fmt(chain.acceptance_rate) << " proposal_failures=" << chain.proposal_failures;

    gb::AtomicCsvWriter incl(out);
    incl.comment(header.str());
    incl.row("marker,prob");
    for (std::size_t j = 0; j < p; ++j) {
        std::ostringstream os;
        os << (j + 1) << "," << fmt(probs[j]);
        incl.row(os.str());
    }
    incl.commit();

    gb::AtomicCsvWriter states(out + ".states.csv");
    states.comment(header.str());
    states.row("iter,accepted,model_size,delta_bitmask_hex");
    for (const auto& rec : chain.records) {
        std::ostringstream os;
        os << rec.iter << "," << (rec.accepted ? 1 : 0) << "," << rec.state.size() << ","
           << delta_hex(rec.state.delta);
        states.row(os.str());
    }
    states.commit();
    return kExitOk;
}

// ------------------------------------------------------------ boxplot ----

int cmd_boxplot(const json& cfg, const Overrides& ov) {
    check_command(cfg, "boxplot");
    check_keys(cfg,
               {"command", "data", "prior", "weight_rule", "level", "seed", "iterations",
                "burnin", "thin", "step_scales", "out"},
               "boxplot config");

    const auto data_path = get_req<std::string>(cfg, "data", "boxplot config");
    const gb::GroupedSample sample = gb::read_grouped_csv(data_path);

    // paper defaults: N(10,100), N(20,100), N(30,100) with theta1<theta2<theta3
    json prior_cfg = get_or<json>(cfg, "prior", json{{"means", {10.0, 20.0, 30.0}},
                                                     {"variances", {100.0, 100.0, 100.0}}});
    const gb::LogPrior prior = parse_normal_prior(prior_cfg, "prior", /*ordered=*/true);
    if (prior.dim() != 3) throw gb::ValidationError("boxplot: prior must have 3 coordinates");

    const gb::WeightRule rule =
        cfg.contains("weight_rule") ? parse_weight_rule(cfg.at("weight_rule"))
                                    : gb::WeightRule::unit_information();
    const double level = ov.level.value_or(get_or<double>(cfg, "level", 0.95));
    if (!(level > 0.0 && level < 1.0)) throw gb::ValidationError("level must lie in (0,1)");
    const gb::McmcConfig mc = parse_mcmc(cfg, ov, 100000, 50000);
    const std::string out = out_path(cfg, ov);

    const std::vector<gb::LogPrior> priors(sample.groups.size(), prior);
    const auto summary = gb::bayesian_boxplot(sample, priors, rule, level, mc);

    const auto prior_means = get_req<std::vector<double>>(prior_cfg, "means", "prior");
    const auto prior_vars = get_req<std::vector<double>>(prior_cfg, "variances", "prior");
    std::ostringstream header;
    header << "gbayes " << kVersion << " command=boxplot seed=" << mc.seed << " prior=";
    for (std::size_t k = 0; k < 3; ++k)
        header << (k ? "," : "") << "N(" << fmt(prior_means[k]) << "," << fmt(prior_vars[k]) << ")";
    header << " rule=" << rule.kind_name() << " level=" << fmt(level)
           << " iterations=" << mc.iterations << " burnin=" << mc.burn_in;

    gb::AtomicCsvWriter table(out);
    table.comment(header.str());
    table.row("label,n,q1,q2,q3,w,ci1_lo,ci1_hi,ci2_lo,ci2_hi,ci3_lo,ci3_hi,acceptance");
    for (const auto& g : summary.groups) {
        std::ostringstream os;
        os << g.label << "," << g.n << "," << fmt(g.q1) << "," << fmt(g.q2) << "," << fmt(g.q3)
           << "," << fmt(g.w);
        for (const auto& [lo, hi] : g.intervals) os << "," << fmt(lo) << "," << fmt(hi);
        os << "," << fmt(g.acceptance);
        table.row(os.str());
    }
    for (const auto& [label, err] : summary.failures)
        table.comment("failed group=" + label + " error=" + err);
    table.commit();
    return summary.failures.empty() ? kExitOk : kExitPartial;
}

// ------------------------------------------------------------ misspec ----

gb::TrueDensity parse_f0(const json& j) {
    check_keys(j, {"kind", "mean", "var", "rate", "weight", "mean1", "var1", "mean2", "var2"},
               "f0");
    const auto kind = get_req<std::string>(j, "kind", "f0");
    try {
        if (kind == "normal")
            return gb::TrueDensity::normal(get_req<double>(j, "mean", "f0"),
                                           get_req<double>(j, "var", "f0"));
        if (kind == "exponential")
            return gb::TrueDensity::exponential(get_req<double>(j, "rate", "f0"));
        if (kind == "mixture")
            return gb::TrueDensity::mixture2(
                get_req<double>(j, "weight", "f0"), get_req<double>(j, "mean1", "f0"),
                get_req<double>(j, "var1", "f0"), get_req<double>(j, "mean2", "f0"),
                get_req<double>(j, "var2", "f0"));
    } catch (const gb::Error& e) {
        throw gb::ValidationError(std::string("f0: ") + e.what());
    }
    throw gb::ValidationError("unknown f0 kind '" + kind + "' (use normal|exponential|mixture)");
}

int cmd_misspec(const json& cfg, const Overrides& ov) {
    check_command(cfg, "misspec");
    check_keys(cfg,
               {"command", "f0", "family", "prior", "n_schedule", "eps", "seeds", "grid_points",
                "seed", "out"},
               "misspec config");

    const gb::TrueDensity f0 = parse_f0(get_req<json>(cfg, "f0", "misspec config"));

    const json fam = get_req<json>(cfg, "family", "misspec config");
    check_keys(fam, {"kind", "var"}, "family");
    const auto fam_kind = get_req<std::string>(fam, "kind", "family");
    if (fam_kind != "normal-location")
        throw gb::ValidationError("family kind '" + fam_kind +
                                  "' not supported by this command (use normal-location)");
    const gb::ProxyFamily family = gb::ProxyFamily::normal_location(get_or<double>(fam, "var", 1.0));

    const gb::LogPrior prior =
        parse_normal_prior(get_req<json>(cfg, "prior", "misspec config"), "prior");

    gb::ConcentrationSpec spec;
    spec.n_schedule = get_req<std::vector<std::size_t>>(cfg, "n_schedule", "misspec config");
    spec.eps = get_or<double>(cfg, "eps", 0.1);
    spec.seeds = get_or<std::size_t>(cfg, "seeds", 10);
    spec.grid_points = get_or<std::size_t>(cfg, "grid_points", 4096);
    spec.base_seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    const std::string out = out_path(cfg, ov);

    gb::ConcentrationResult res;
    try {
        res = gb::concentration_experiment(f0, family, prior, spec);
    } catch (const gb::Error& e) {
        // sub-resolution eps and support gaps are config mistakes
        const std::string msg = e.what();
        if (msg.find("below grid resolution") != std::string::npos ||
            msg.find("support condition") != std::string::npos)
            throw gb::ValidationError(msg);
        throw;
    }

    std::ostringstream header;
    header << "gbayes " << kVersion << " command=misspec seed=" << spec.base_seed << " f0="
           << f0.kind_name() << " family=" << family.kind_name() << " theta0="
           << fmt(res.theta0[0]) << " delta=" << fmt(res.divergence) << " grid=["
           << fmt(res.grid_lo) << "," << fmt(res.grid_hi) << "]x" << res.grid_points;

    gb::AtomicCsvWriter table(out);
    table.comment(header.str());
    table.row("n,eps,mass_mean,mass_sd,seeds");
    for (const auto& row : res.table) {
        std::ostringstream os;
        os << row.n << "," << fmt(row.eps) << "," << fmt(row.mass_mean) << ","
           << fmt(row.mass_sd) << "," << row.seeds;
        table.row(os.str());
    }
    table.commit();
    return kExitOk;
}

// ----------------------------------------------------------- simulate ----

int cmd_simulate(const json& cfg, const Overrides& ov) {
    check_command(cfg, "simulate");
    check_keys(cfg, {"command", "generator", "seed", "out"}, "simulate config");
    const json gen = get_req<json>(cfg, "generator", "simulate config");
    const auto kind = get_req<std::string>(gen, "kind", "generator");
    const std::uint64_t seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
    const std::string out = out_path(cfg, ov);

    std::ostringstream header;
    header << "gbayes " << kVersion << " command=simulate seed=" << seed << " kind=" << kind;

    json manifest;
    manifest["command"] = "simulate";
    manifest["seed"] = seed;
    manifest["out"] = out;

    if (kind == "cox") {
        check_keys(gen, {"kind", "n", "p", "true_beta", "baseline_scale", "censoring", "maf"},
                   "generator");
        gb::CoxSimSpec spec;
        spec.n = get_req<std::size_t>(gen, "n", "generator");
        spec.p = get_req<std::size_t>(gen, "p", "generator");
        spec.true_beta = broadcast(gen, "true_beta", spec.p, 0.0, "generator");
        spec.baseline_scale = get_or<double>(gen, "baseline_scale", 1.0);
        spec.censoring_fraction = get_or<double>(gen, "censoring", 0.0);
        spec.minor_allele_freqs = broadcast(gen, "maf", spec.p, 0.3, "generator");
        spec.seed = seed;

        gb::SurvivalDataset data = [&] {
            try {
                return gb::simulate_cox_data(spec);
            } catch (const gb::Error& e) {
                const std::string msg = e.what();
                if (msg.find("unattainable") != std::string::npos ||
                    msg.find("must") != std::string::npos)
                    throw gb::ValidationError(msg);
                throw;
            }
        }();

        gb::AtomicCsvWriter csv(out);
        csv.comment(header.str());
        std::ostringstream hdr;
        hdr << "time,event";
        for (std::size_t j = 1; j <= spec.p; ++j) hdr << ",x" << j;
        csv.row(hdr.str());
        for (std::size_t i = 0; i < spec.n; ++i) {
            std::ostringstream os;
            os << fmt(data.times[i]) << "," << data.events[i];
            for (std::size_t j = 0; j < spec.p; ++j)
                os << "," << fmt(data.covariates(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)));
            csv.row(os.str());
        }
        csv.commit();

        manifest["generator"] = {{"kind", "cox"},
                                 {"n", spec.n},
                                 {"p", spec.p},
                                 {"true_beta", spec.true_beta},
                                 {"baseline_scale", spec.baseline_scale},
                                 {"censoring", spec.censoring_fraction},
                                 {"maf", spec.minor_allele_freqs}};
    } else if (kind == "grouped") {
        check_keys(gen, {"kind", "groups"}, "generator");
        const json groups = get_req<json>(gen, "groups", "generator");
        if (!groups.is_array() || groups.empty())
            throw gb::ValidationError("generator.groups must be a non-empty array");

        gb::AtomicCsvWriter csv(out);
        csv.comment(header.str());
        csv.row("group,value");
        json manifest_groups = json::array();
        std::size_t gi = 0;
        for (const auto& g : groups) {
            check_keys(g, {"label", "n", "mean", "sd"}, "generator.groups[]");
            const auto label = get_req<std::string>(g, "label", "group");
            const auto n = get_req<std::size_t>(g, "n", "group");
            const auto gmean = get_req<double>(g, "mean", "group");
            const auto gsd = get_req<double>(g, "sd", "group");
            if (n == 0 || !(gsd > 0.0))
                throw gb::ValidationError("group '" + label + "': need n >= 1 and sd > 0");
            gb::Rng rng = gb::Rng::from(seed, gi++);
            for (std::size_t i = 0; i < n; ++i) {
                std::ostringstream os;
                os << label << "," << fmt(rng.normal(gmean, gsd));
                csv.row(os.str());
            }
            manifest_groups.push_back(
                {{"label", label}, {"n", n}, {"mean", gmean}, {"sd", gsd}});
        }
        csv.commit();
        manifest["generator"] = {{"kind", "grouped"}, {"groups", manifest_groups}};
    } else if (kind == "scalar") {
        check_keys(gen, {"kind", "n", "dist"}, "generator");
        const auto n = get_req<std::size_t>(gen, "n", "generator");
        if (n == 0) throw gb::ValidationError("generator.n must be >= 1");
        const gb::TrueDensity dist = parse_f0(get_req<json>(gen, "dist", "generator"));
        gb::Rng rng(seed);
        gb::AtomicCsvWriter csv(out);
        csv.comment(header.str());
        csv.row("value");
        for (std::size_t i = 0; i < n; ++i) csv.row(fmt(dist.sample(rng)));
        csv.commit();
        manifest["generator"] = {{"kind", "scalar"}, {"n", n}, {"dist", gen.at("dist")}};
    } else {
        throw gb::ValidationError("unknown generator kind '" + kind +
                                  "' (use cox|grouped|scalar)");
    }

    // the manifest is itself a valid simulate config; re-feeding it
    // regenerates the same file
    const std::string manifest_path = out + ".manifest.json";
    {
        const std::string tmp = manifest_path + ".tmp";
        std::ofstream mf(tmp, std::ios::binary | std::ios::trunc);
        if (!mf) throw gb::Error("cannot write " + tmp);
        mf << manifest.dump(2) << "\n";
        mf.close();
        std::filesystem::rename(tmp, manifest_path);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gbayes: loss-based Bayesian updating pipelines"};
    app.require_subcommand(1);

    struct SubSpec {
        std::string name;
        std::string desc;
        int (*run)(const json&, const Overrides&);
    };
    const std::vector<SubSpec> subs = {
        {"fit", "generic scalar-loss posterior fit", cmd_fit},
        {"cox-bf", "per-marker general Bayes factors", cmd_cox_bf},
        {"cox-select", "Cox variable-selection MCMC", cmd_cox_select},
        {"boxplot", "Bayesian boxplot over grouped data", cmd_boxplot},
        {"misspec", "posterior concentration under misspecification", cmd_misspec},
        {"simulate", "synthetic data generators", cmd_simulate},
    };

    struct SubState {
        CLI::App* cmd = nullptr;
        std::string config_path;
        Overrides ov;
        std::string method;
        std::uint64_t seed = 0;
        std::size_t iters = 0, burnin = 0;
        std::string out;
        double level = 0.0;
    };
    std::vector<SubState> states(subs.size());

    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto& st = states[i];
        st.cmd = app.add_subcommand(subs[i].name, subs[i].desc);
        st.cmd->add_option("--config", st.config_path, "JSON config file")->required();
        st.cmd->add_option("--seed", st.seed, "override config seed");
        st.cmd->add_option("--iters", st.iters, "override config iterations");
        st.cmd->add_option("--burnin", st.burnin, "override config burn-in");
        st.cmd->add_option("--out", st.out, "override config output path");
        st.cmd->add_option("--method", st.method, "override methods (NAME[,NAME])");
        st.cmd->add_option("--level", st.level, "override credible level");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto& st = states[i];
        if (!st.cmd->parsed()) continue;
        if (st.cmd->count("--seed")) st.ov.seed = st.seed;
        if (st.cmd->count("--iters")) st.ov.iters = st.iters;
        if (st.cmd->count("--burnin")) st.ov.burnin = st.burnin;
        if (st.cmd->count("--out")) st.ov.out = st.out;
        if (st.cmd->count("--method")) st.ov.method = st.method;
        if (st.cmd->count("--level")) st.ov.level = st.level;
        try {
            const json cfg = load_config(st.config_path);
            return subs[i].run(cfg, st.ov);
        } catch (const gb::ValidationError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitValidation;
        } catch (const json::exception& e) {
            std::cerr << "error: config: " << e.what() << "\n";
            return kExitValidation;
        } catch (const gb::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitNumeric;
        }
    }
    return kExitValidation;
}
