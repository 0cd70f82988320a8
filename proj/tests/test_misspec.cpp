#include <doctest.h>

#include <cmath>
#include <vector>

#include "gb/gibbs.hpp"
#include "gb/misspec.hpp"
#include "gb/util.hpp"

using namespace gb;

TEST_CASE("kl divergence closed forms and quadrature") {
    const auto f0 = TrueDensity::normal(0.0, 1.0);
    const auto family = ProxyFamily::normal_location(1.0);
    // D = theta^2 / 2
    CHECK(kl_divergence(f0, family, std::vector<double>{1.0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(kl_divergence(f0, family, std::vector<double>{0.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_divergence(f0, family, std::vector<double>{-2.0}) == doctest::Approx(2.0).epsilon(1e-12));

    // exponential truth, normal proxy: quadrature path; KL(theta) =
    // const + E(x-theta)^2/2, so D(1) < D(0)
    const auto expo = TrueDensity::exponential(1.0);
    const double d1 = kl_divergence(expo, family, std::vector<double>{1.0});
    const double d0 = kl_divergence(expo, family, std::vector<double>{0.0});
    CHECK(d1 < d0);
    CHECK(d0 - d1 == doctest::Approx(0.5).epsilon(1e-6));  // difference of squared-loss terms
    CHECK(d1 > 0.0);
}

TEST_CASE("kl divergence is nonnegative on a grid and zero only at coincidence") {
    const auto expo = TrueDensity::exponential(1.3);
    const auto family = ProxyFamily::normal_location(2.0);
    for (double th = -3.0; th <= 5.0; th += 0.5)
        CHECK(kl_divergence(expo, family, std::vector<double>{th}) > 0.0);

    const auto well = TrueDensity::normal(0.7, 2.0);
    const auto matching = ProxyFamily::normal_location(2.0);
    CHECK(kl_divergence(well, matching, std::vector<double>{0.7}) ==
          doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("kl minimizer lands on the analytic targets") {
    const std::vector<double> lo{-5.0}, hi{5.0};

    // well-specified: the true location
    const auto km1 = kl_minimizer(TrueDensity::normal(0.7, 1.0), ProxyFamily::normal_location(1.0),
                                  lo, hi);
    CHECK(std::abs(km1.theta0[0] - 0.7) < 1e-6);
    CHECK(km1.divergence < 1e-10);

    // symmetric mixture: zero by symmetry
    const auto km2 = kl_minimizer(TrueDensity::mixture2(0.5, -1.0, 1.0, 1.0, 1.0),
                                  ProxyFamily::normal_location(1.0), lo, hi);
    CHECK(std::abs(km2.theta0[0]) < 1e-6);
    CHECK(km2.divergence > 0.0);

    // Exp(1) against N(theta, 1): minimizer is the mean, 1
    const auto km3 = kl_minimizer(TrueDensity::exponential(1.0), ProxyFamily::normal_location(1.0),
                                  lo, hi);
    CHECK(std::abs(km3.theta0[0] - 1.0) < 1e-5);

    // location-scale family against a normal truth: recovers (mu, sigma)
    const auto km4 = kl_minimizer(TrueDensity::normal(0.5, 4.0),
                                  ProxyFamily::normal_location_scale(),
                                  std::vector<double>{-5.0, 0.1}, std::vector<double>{5.0, 10.0});
    CHECK(std::abs(km4.theta0[0] - 0.5) < 1e-5);
    CHECK(std::abs(km4.theta0[1] - 2.0) < 1e-5);
}

TEST_CASE("well-specified concentration accumulates at the truth") {
    ConcentrationSpec spec;
    spec.n_schedule = {10, 100, 1000, 10000};
    spec.eps = 0.1;
    spec.seeds = 5;
    spec.base_seed = 77;
    const auto res = concentration_experiment(TrueDensity::normal(0.3, 1.0),
                                              ProxyFamily::normal_location(1.0),
                                              LogPrior::independent_normal({0.0}, {4.0}), spec);
    CHECK(std::abs(res.theta0[0] - 0.3) < 1e-6);
    REQUIRE(res.table.size() == 4);
    for (std::size_t i = 1; i < res.table.size(); ++i)
        CHECK(res.table[i].mass_mean >= res.table[i - 1].mass_mean - 1e-12);
    CHECK(res.table.back().mass_mean > 0.95);
}

TEST_CASE("misspecified exponential data still concentrates at theta0 = 1") {
    ConcentrationSpec spec;
    spec.n_schedule = {10000};
    spec.eps = 0.1;
    spec.seeds = 3;
    spec.base_seed = 5;
    const auto res = concentration_experiment(TrueDensity::exponential(1.0),
                                              ProxyFamily::normal_location(1.0),
                                              LogPrior::independent_normal({0.0}, {4.0}), spec);
    CHECK(std::abs(res.theta0[0] - 1.0) < 1e-5);
    CHECK(res.table[0].mass_mean > 0.9);
}

TEST_CASE("grid posterior equals the conjugate closed form in total variation") {
    // well-specified normal location, known variance: posterior is
    // N(sum x / (n + 1/tau^2), 1/(n + 1/tau^2)) for prior N(0, tau^2)
    const double tau2 = 4.0;
    const auto prior = LogPrior::independent_normal({0.0}, {tau2});
    Rng rng(13);
    const std::size_t n = 200;
    std::vector<double> xs(n);
    double sum = 0.0;
    for (auto& x : xs) {
        x = rng.normal(0.5, 1.0);
        sum += x;
    }

    // the same grid the experiment uses: prior mean +/- 8 prior SDs
    const std::size_t g = 4096;
    const double lo = -8.0 * 2.0, hi = 8.0 * 2.0;
    const double h = (hi - lo) / static_cast<double>(g - 1);
    std::vector<ParamPoint> support;
    std::vector<double> prior_lw(g);
    for (std::size_t k = 0; k < g; ++k) {
        support.push_back(ParamPoint::require({lo + h * static_cast<double>(k)}));
        prior_lw[k] = prior.log_density(support.back());
    }
    const auto self_info = PointLoss::neg_log_density(
        [](std::span<const double> th, const Datum& d) {
            return normal_log_pdf(std::get<ScalarDatum>(d).x, th[0], 1.0);
        },
        1);
    std::vector<Datum> data;
    for (double x : xs) data.push_back(make_scalar(x));
    const auto post = update_discrete(DiscreteBelief::from_log_weights(support, prior_lw),
                                      DatasetLoss::separable(self_info, std::move(data)), 1.0);

    const double post_var = 1.0 / (static_cast<double>(n) + 1.0 / tau2);
    const double post_mean = sum * post_var;
    std::vector<double> conj_lw(g);
    for (std::size_t k = 0; k < g; ++k)
        conj_lw[k] = normal_log_pdf(support[k][0], post_mean, post_var);
    const double lse = log_sum_exp(conj_lw);

    double tv = 0.0;
    for (std::size_t k = 0; k < g; ++k)
        tv += std::abs(post.weight(k) - std::exp(conj_lw[k] - lse));
    CHECK(0.5 * tv < 1e-8);
}

TEST_CASE("mass is monotone in the neighborhood radius by construction") {
    ConcentrationSpec narrow, wide;
    narrow.n_schedule = wide.n_schedule = {500};
    narrow.seeds = wide.seeds = 3;
    narrow.base_seed = wide.base_seed = 9;
    narrow.eps = 0.05;
    wide.eps = 0.2;
    const auto f0 = TrueDensity::normal(0.0, 1.0);
    const auto fam = ProxyFamily::normal_location(1.0);
    const auto prior = LogPrior::independent_normal({0.0}, {4.0});
    const auto small = concentration_experiment(f0, fam, prior, narrow);
    const auto large = concentration_experiment(f0, fam, prior, wide);
    CHECK(large.table[0].mass_mean >= small.table[0].mass_mean);
}

TEST_CASE("precondition failures refuse to run") {
    const auto f0 = TrueDensity::normal(1.0, 0.25);
    const auto fam = ProxyFamily::normal_location(0.25);

    // prior with a support gap away from theta0 = 1
    const auto gap = LogPrior::discrete_grid(
        {ParamPoint::require({-3.0}), ParamPoint::require({-2.0})}, {0.5, 0.5});
    ConcentrationSpec spec;
    spec.n_schedule = {100};
    spec.eps = 0.1;
    spec.seeds = 2;
    CHECK_THROWS_WITH_AS(concentration_experiment(f0, fam, gap, spec),
                         doctest::Contains("support condition"), Error);

    // eps below the grid resolution
    ConcentrationSpec fine;
    fine.n_schedule = {100};
    fine.eps = 1e-6;
    fine.seeds = 2;
    CHECK_THROWS_WITH_AS(concentration_experiment(f0, fam,
                                                  LogPrior::independent_normal({0.0}, {4.0}),
                                                  fine),
                         doctest::Contains("grid resolution"), Error);
}
