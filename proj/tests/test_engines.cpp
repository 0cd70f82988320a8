#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "gb/engines.hpp"
#include "gb/prior.hpp"
#include "gb/util.hpp"

using namespace gb;

namespace {

const double kLogInvSqrt2 = -0.5 * std::log(2.0);

// loss theta^2/2 with prior N(0,1): total integrand exp(-theta^2)/sqrt(2pi),
// whose integral is exactly 1/sqrt(2)
GibbsPosterior gaussian_case() {
    return GibbsPosterior(
        DatasetLoss::whole_sample([](std::span<const double> th) { return 0.5 * sqr(th[0]); },
                                  "half-square"),
        1.0, LogPrior::independent_normal({0.0}, {1.0}));
}

}  // namespace

TEST_CASE("quadrature_1d handles normalized and scaled gaussians") {
    const auto std_normal = [](double x) { return normal_log_pdf(x, 0.0, 1.0); };
    CHECK(std::abs(quadrature_1d(std_normal, -10.0, 10.0, 64)) < 1e-10);

    const auto tilted = [](double x) { return -x * x - 0.5 * std::log(2.0 * M_PI); };
    CHECK(quadrature_1d(tilted, -10.0, 10.0, 64) == doctest::Approx(kLogInvSqrt2).epsilon(1e-10));

    const auto nothing = [](double) { return neg_inf; };
    CHECK_THROWS_WITH_AS(quadrature_1d(nothing, -1.0, 1.0, 8),
                         doctest::Contains("posterior undefined"), Error);
}

TEST_CASE("laplace evidence is exact on gaussian cases") {
    const auto post = gaussian_case();
    const auto r = laplace_log_evidence(post, ParamPoint::require({0.5}));
    CHECK(r.log_evidence == doctest::Approx(kLogInvSqrt2).epsilon(1e-8));
    CHECK(std::abs(r.mode[0]) < 1e-6);
    CHECK(r.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-4));

    // flat loss: evidence is the prior normalization, exactly 1
    const GibbsPosterior flat(
        DatasetLoss::whole_sample([](std::span<const double>) { return 0.0; }, "flat"), 1.0,
        LogPrior::independent_normal({2.0}, {4.0}));
    const auto rf = laplace_log_evidence(flat, ParamPoint::require({1.0}));
    CHECK(std::abs(rf.log_evidence) < 1e-6);

    // agrees with quadrature to 1e-6 whenever the density is exactly gaussian
    const auto quad = quadrature_1d(
        [&](double x) { return post.log_unnormalized(std::vector<double>{x}); }, -12.0, 12.0, 64);
    CHECK(std::abs(r.log_evidence - quad) < 1e-6);
}

TEST_CASE("laplace reports non-positive-definite curvature") {
    // flat second coordinate: the Hessian of -log density is singular
    const LogDensityFn ridge = [](std::span<const double> th) { return -sqr(th[0]); };
    CHECK_THROWS_WITH_AS(laplace_log_evidence(ridge, std::vector<double>{0.2, 0.0}),
                         doctest::Contains("eigenvalue"), Error);
}

TEST_CASE("importance sampling evidence") {
    // target = proposal: every weight is exactly 1
    const GibbsPosterior self(
        DatasetLoss::whole_sample([](std::span<const double>) { return 0.0; }, "flat"), 1.0,
        LogPrior::independent_normal({0.0}, {1.0}));
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(1, 1);
    const auto r0 = importance_sample_evidence(self, std::vector<double>{0.0}, eye, 200, 9);
    CHECK(r0.log_evidence == 0.0);
    CHECK(r0.std_error == 0.0);

    // the 1/sqrt(2) case with a N(0,1) proposal
    const auto post = gaussian_case();
    const auto r = importance_sample_evidence(post, std::vector<double>{0.0}, eye, 100000, 4);
    CHECK(std::abs(r.log_evidence - kLogInvSqrt2) < 4.0 * r.std_error);
    CHECK(r.std_error < 0.01);

    // proposal misses the support entirely
    const LogDensityFn never = [](std::span<const double>) { return neg_inf; };
    CHECK_THROWS_WITH_AS(
        importance_sample_evidence(never, std::vector<double>{0.0}, eye, 50, 1),
        doctest::Contains("all weights are zero"), Error);
}

TEST_CASE("random walk mh samples the prior when the loss is flat") {
    const GibbsPosterior post(
        DatasetLoss::whole_sample([](std::span<const double>) { return 0.0; }, "flat"), 1.0,
        LogPrior::independent_normal({0.0}, {1.0}));
    McmcConfig cfg;
    cfg.iterations = 100000;
    cfg.burn_in = 5000;
    cfg.step_scales = {1.5};
    cfg.seed = 42;
    const Chain chain = random_walk_mh(post, cfg);

    CHECK(chain.draws.size() == 95000);
    const auto xs = chain.coordinate(0);
    // conservative MCMC error bound: 4 * sqrt(tau_int / n), tau_int <~ 20
    CHECK(std::abs(mean(xs)) < 4.0 * std::sqrt(20.0 / 95000.0));
    CHECK(variance(xs) == doctest::Approx(1.0).epsilon(0.10));
    CHECK(chain.acceptance_rate > 0.2);
    CHECK(chain.acceptance_rate < 0.9);
}

TEST_CASE("chains are bit-identical for a fixed seed") {
    const GibbsPosterior post(
        DatasetLoss::whole_sample([](std::span<const double> th) { return std::abs(th[0]); },
                                  "abs"),
        1.0, LogPrior::independent_normal({0.0}, {4.0}));
    McmcConfig cfg;
    cfg.iterations = 5000;
    cfg.burn_in = 500;
    cfg.step_scales = {0.8};
    cfg.seed = 777;
    cfg.thin = 3;
    const Chain a = random_walk_mh(post, cfg);
    const Chain b = random_walk_mh(post, cfg);
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t i = 0; i < a.draws.size(); ++i) CHECK(a.draws[i].vec() == b.draws[i].vec());
    CHECK(a.acceptance_rate == b.acceptance_rate);
    CHECK(a.log_density_trace == b.log_density_trace);
}

TEST_CASE("constraint-violating proposals are rejected wholesale") {
    const GibbsPosterior post(
        DatasetLoss::whole_sample([](std::span<const double>) { return 0.0; }, "flat"), 1.0,
        LogPrior::ordered_normal({0.0, 1.0, 2.0}, {4.0, 4.0, 4.0}));
    McmcConfig cfg;
    cfg.iterations = 20000;
    cfg.burn_in = 1000;
    cfg.step_scales = {1.0};
    cfg.seed = 3;
    const Chain chain = random_walk_mh(post, cfg);
    for (const auto& d : chain.draws) {
        CHECK(d[0] < d[1]);
        CHECK(d[1] < d[2]);
    }
}

TEST_CASE("mh visit frequencies match update_discrete on a 3-bin embedding") {
    // discrete target over bins [0,1), [1,2), [2,3): continuous relaxation of
    // a 3-point belief updated by a loss table
    std::vector<ParamPoint> support{ParamPoint::require({0.0}), ParamPoint::require({1.0}),
                                    ParamPoint::require({2.0})};
    const DiscreteBelief prior(support, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto loss = DatasetLoss::whole_sample(
        [](std::span<const double> th) {
            if (th[0] == 0.0) return 0.3;
            if (th[0] == 1.0) return 1.1;
            return 0.0;
        },
        "table");
    const auto target_belief = update_discrete(prior, loss, 1.0);

    const LogDensityFn step_density = [&](std::span<const double> th) {
        const double x = th[0];
        if (x < 0.0 || x >= 3.0) return neg_inf;
        const auto bin = static_cast<std::size_t>(x);
        return target_belief.log_weights()[bin];
    };
    McmcConfig cfg;
    cfg.iterations = 400000;
    cfg.burn_in = 20000;
    cfg.step_scales = {0.9};
    cfg.seed = 12;
    const Chain chain = random_walk_mh(step_density, std::vector<double>{1.5}, cfg);

    std::array<double, 3> freq{0, 0, 0};
    for (const auto& d : chain.draws) freq[static_cast<std::size_t>(d[0])] += 1.0;
    const double n_eff = static_cast<double>(chain.draws.size()) / 40.0;  // generous IACT bound
    for (std::size_t k = 0; k < 3; ++k) {
        freq[k] /= static_cast<double>(chain.draws.size());
        const double pk = target_belief.weight(k);
        CHECK(std::abs(freq[k] - pk) < 3.0 * std::sqrt(pk * (1 - pk) / n_eff));
    }
}

TEST_CASE("credible intervals interpolate order statistics") {
    Chain chain;
    for (int i = 1; i <= 1000; ++i)
        chain.draws.push_back(ParamPoint::require({static_cast<double>(i)}));
    const auto [lo, hi] = credible_interval(chain, 0, 0.95);
    CHECK(lo == doctest::Approx(25.975).epsilon(1e-12));
    CHECK(hi == doctest::Approx(975.025).epsilon(1e-12));

    const auto [alo, ahi] = credible_interval(chain, 0, 0.999999999);
    CHECK(alo == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ahi == doctest::Approx(1000.0).epsilon(1e-6));

    Chain constant;
    for (int i = 0; i < 200; ++i) constant.draws.push_back(ParamPoint::require({7.0}));
    const auto [clo, chi] = credible_interval(constant, 0, 0.9);
    CHECK(clo == 7.0);
    CHECK(chi == 7.0);

    Chain tiny;
    tiny.draws.push_back(ParamPoint::require({1.0}));
    CHECK_THROWS_AS(credible_interval(tiny, 0, 0.9), Error);
}

TEST_CASE("start search fails cleanly when the prior never hits the support") {
    // +inf loss everywhere: every prior draw has log density -inf
    const GibbsPosterior post(
        DatasetLoss::whole_sample([](std::span<const double>) { return pos_inf; }, "void"), 1.0,
        LogPrior::independent_normal({0.0}, {1.0}));
    McmcConfig cfg;
    cfg.iterations = 100;
    cfg.burn_in = 10;
    cfg.step_scales = {1.0};
    cfg.seed = 8;
    CHECK_THROWS_WITH_AS(random_walk_mh(post, cfg), doctest::Contains("no start point"), Error);
}
