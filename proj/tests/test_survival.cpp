#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "gb/engines.hpp"
#include "gb/prior.hpp"
#include "gb/survival.hpp"
#include "gb/util.hpp"

using namespace gb;

namespace {

SurvivalDataset three_subjects(std::vector<int> events, std::vector<double> column) {
    Eigen::MatrixXd X(3, 1);
    for (int i = 0; i < 3; ++i) X(i, 0) = column[static_cast<std::size_t>(i)];
    return SurvivalDataset::make({1.0, 2.0, 3.0}, std::move(events), std::move(X));
}

// independent oracle for the p=2 selection chain: composite Simpson in log
// space over a tensor grid, panels doubled until stable
double log_simpson_2d(const std::function<double(double, double)>& log_f, double lo1, double hi1,
                      double lo2, double hi2, std::size_t panels) {
    auto weights = [](std::size_t n) {
        std::vector<double> w(n + 1, 2.0);
        w.front() = w.back() = 1.0;
        for (std::size_t i = 1; i < n; i += 2) w[i] = 4.0;
        return w;
    };
    auto pass = [&](std::size_t n) {
        const double h1 = (hi1 - lo1) / static_cast<double>(n);
        const double h2 = (hi2 - lo2) / static_cast<double>(n);
        const auto w = weights(n);
        LogSumAcc acc;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j <= n; ++j) {
                const double x = lo1 + h1 * static_cast<double>(i);
                const double y = lo2 + h2 * static_cast<double>(j);
                acc.add(std::log(w[i] * w[j] * h1 * h2 / 9.0) + log_f(x, y));
            }
        return acc.value();
    };
    double prev = pass(panels);
    for (int k = 0; k < 10; ++k) {
        panels *= 2;
        const double cur = pass(panels);
        if (std::abs(cur - prev) < 1e-9) return cur;
        prev = cur;
    }
    FAIL("2-D Simpson oracle did not converge");
    return prev;
}

}  // namespace

TEST_CASE("risk sets are inclusive prefixes of the time-descending order") {
    // events enumerated in subject order: R_1={1,2,3}, R_2={2,3}, R_3={3}
    const auto all = three_subjects({1, 1, 1}, {0, 0, 0});
    const auto idx = RiskIndex::build(all);
    REQUIRE(idx.events().size() == 3);
    CHECK(idx.risk_set(0) == std::vector<std::size_t>{0, 1, 2});     // subject 0, t=1
    CHECK(idx.risk_set(1) == std::vector<std::size_t>{1, 2});        // subject 1, t=2
    CHECK(idx.risk_set(2) == std::vector<std::size_t>{2});           // subject 2, t=3

    // censored subject keeps membership in other risk sets but gets no term
    const auto censored = three_subjects({1, 0, 1}, {0, 0, 0});
    const auto idx2 = RiskIndex::build(censored);
    REQUIRE(idx2.events().size() == 2);
    CHECK(idx2.risk_set(0) == std::vector<std::size_t>{0, 1, 2});    // subject 0, t=1
    CHECK(idx2.risk_set(1) == std::vector<std::size_t>{2});          // subject 2, t=3

    // ties: both subjects in each other's risk set
    Eigen::MatrixXd X(2, 1);
    X << 0.0, 0.0;
    const auto tied = SurvivalDataset::make({1.0, 1.0}, {1, 1}, X);
    const auto idx3 = RiskIndex::build(tied);
    REQUIRE(idx3.events().size() == 2);
    CHECK(idx3.risk_set(0) == std::vector<std::size_t>{0, 1});
    CHECK(idx3.risk_set(1) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("partial loss reproduces the hand-computed values") {
    // beta=0: uniform risk, loss = log 3 + log 2 + log 1 = log 6
    const auto data = three_subjects({1, 1, 1}, {1, 0, 0});
    const auto idx = RiskIndex::build(data);
    CHECK(cox_partial_loss(std::vector<double>{0.0}, data, idx) ==
          doctest::Approx(std::log(6.0)).epsilon(1e-15));

    // x=(1,0,0), beta=log 2: 2 log 2
    CHECK(cox_partial_loss(std::vector<double>{std::log(2.0)}, data, idx) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));

    // constant covariate column: shared factor cancels, equals beta=0 value
    const auto constant = three_subjects({1, 1, 1}, {2.0, 2.0, 2.0});
    const auto idxc = RiskIndex::build(constant);
    for (double beta : {-1.0, 0.7, 3.0})
        CHECK(cox_partial_loss(std::vector<double>{beta}, constant, idxc) ==
              doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("partial loss is invariant to shifting a covariate column") {
    const auto data = simulate_cox_data({.n = 60,
                                         .p = 2,
                                         .true_beta = {0.5, -0.3},
                                         .baseline_scale = 0.5,
                                         .censoring_fraction = 0.2,
                                         .minor_allele_freqs = {0.3, 0.4},
                                         .seed = 9});
    const auto idx = RiskIndex::build(data);
    SurvivalDataset shifted = data;
    shifted.covariates.col(0).array() += 11.5;
    const auto idx2 = RiskIndex::build(shifted);
    for (const auto beta : {std::vector<double>{0.4, -0.2}, std::vector<double>{-1.0, 0.8}})
        CHECK(std::abs(cox_partial_loss(beta, data, idx) -
                       cox_partial_loss(beta, shifted, idx2)) < 1e-10);
}

TEST_CASE("partial loss is midpoint convex in beta") {
    const auto data = simulate_cox_data({.n = 50,
                                         .p = 2,
                                         .true_beta = {0.4, 0.0},
                                         .baseline_scale = 1.0,
                                         .censoring_fraction = 0.15,
                                         .minor_allele_freqs = {0.25, 0.4},
                                         .seed = 31});
    const auto idx = RiskIndex::build(data);
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> a{rng.normal(0, 1.5), rng.normal(0, 1.5)};
        std::vector<double> b{rng.normal(0, 1.5), rng.normal(0, 1.5)};
        std::vector<double> m{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
        const double fm = cox_partial_loss(m, data, idx);
        const double hull = 0.5 * cox_partial_loss(a, data, idx) +
                            0.5 * cox_partial_loss(b, data, idx);
        CHECK(fm <= hull + 1e-10);
    }
}

TEST_CASE("removing a censored subject changes only what it must") {
    // subject 0 censored with the smallest time: it sits in no risk set
    Eigen::MatrixXd X(3, 1);
    X << 1.0, 0.5, -0.5;
    const auto data = SurvivalDataset::make({0.5, 2.0, 3.0}, {0, 1, 1}, X);
    const auto idx = RiskIndex::build(data);

    Eigen::MatrixXd X2(2, 1);
    X2 << 0.5, -0.5;
    const auto reduced = SurvivalDataset::make({2.0, 3.0}, {1, 1}, X2);
    const auto idx2 = RiskIndex::build(reduced);
    for (double beta : {-0.8, 0.0, 1.2})
        CHECK(cox_partial_loss(std::vector<double>{beta}, data, idx) ==
              doctest::Approx(cox_partial_loss(std::vector<double>{beta}, reduced, idx2))
                  .epsilon(1e-14));

    // censored in the middle: appears only inside risk sets; direct recomputation
    const auto mid = SurvivalDataset::make({2.5, 2.0, 3.0}, {0, 1, 1}, X);
    const auto idxm = RiskIndex::build(mid);
    const double beta = 0.6;
    // hand recomputation: events at t=2 (risk {all}) and t=3 (risk {subject 2})
    const Eigen::VectorXd eta = mid.covariates * Eigen::VectorXd::Constant(1, beta);
    const double hand = -(eta(1) - std::log(std::exp(eta(0)) + std::exp(eta(1)) + std::exp(eta(2)))) -
                        (eta(2) - std::log(std::exp(eta(2))));
    CHECK(cox_partial_loss(std::vector<double>{beta}, mid, idxm) ==
          doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("single-marker bayes factors: degenerate, laplace vs quadrature, strong effect") {
    // constant marker column: log BF identically zero
    const auto flat = three_subjects({1, 1, 1}, {1.0, 1.0, 1.0});
    const auto idxf = RiskIndex::build(flat);
    const auto r = single_marker_bf(flat, idxf, 0, 0.5);
    CHECK(r.degenerate);
    CHECK(r.log_bf == 0.0);

    // null marker: laplace and quadrature agree tightly
    const auto null_data = simulate_cox_data({.n = 400,
                                              .p = 1,
                                              .true_beta = {0.0},
                                              .baseline_scale = 0.8,
                                              .censoring_fraction = 0.2,
                                              .minor_allele_freqs = {0.3},
                                              .seed = 17});
    const auto idxn = RiskIndex::build(null_data);
    const auto lap = single_marker_bf(null_data, idxn, 0, 0.5, {BfMethod::Laplace, 500, 0});
    const auto quad = single_marker_bf(null_data, idxn, 0, 0.5, {BfMethod::Quadrature, 500, 0});
    CHECK(std::abs(lap.log_bf - quad.log_bf) <=
          1e-3 * std::max({1.0, std::abs(lap.log_bf), std::abs(quad.log_bf)}));

    // importance sampling with the laplace proposal stays within 3 SEs
    const auto imp = single_marker_bf(null_data, idxn, 0, 0.5, {BfMethod::Importance, 500, 77});
    CHECK(std::abs(imp.log_bf - quad.log_bf) <= 3.0 * imp.se + 1e-9);

    // strong effect: positive evidence of association
    const auto hit = simulate_cox_data({.n = 500,
                                        .p = 1,
                                        .true_beta = {1.0},
                                        .baseline_scale = 0.8,
                                        .censoring_fraction = 0.2,
                                        .minor_allele_freqs = {0.3},
                                        .seed = 23});
    const auto idxh = RiskIndex::build(hit);
    CHECK(single_marker_bf(hit, idxh, 0, 0.5).log_bf > 0.0);
}

TEST_CASE("null simulation keeps large bayes factors rare") {
    const auto data = simulate_cox_data({.n = 300,
                                         .p = 200,
                                         .true_beta = std::vector<double>(200, 0.0),
                                         .baseline_scale = 1.0,
                                         .censoring_fraction = 0.25,
                                         .minor_allele_freqs = std::vector<double>(200, 0.3),
                                         .seed = 41});
    const auto idx = RiskIndex::build(data);
    std::size_t big = 0;
    double total = 0.0;
    for (std::size_t j = 0; j < 200; ++j) {
        const auto r = single_marker_bf(data, idx, j, 0.5);
        total += r.log_bf;
        big += r.log_bf > std::log(10.0) ? 1 : 0;
    }
    CHECK(static_cast<double>(big) / 200.0 < 0.05);
    CHECK(total / 200.0 < 0.0);  // the null pays the complexity penalty
}

TEST_CASE("cox data simulation controls censoring and reproduces bytes") {
    const CoxSimSpec spec{.n = 200,
                          .p = 3,
                          .true_beta = {0.5, 0.0, -0.25},
                          .baseline_scale = 1.0,
                          .censoring_fraction = 0.0,
                          .minor_allele_freqs = {0.2, 0.3, 0.5},
                          .seed = 100};
    const auto none = simulate_cox_data(spec);
    for (int e : none.events) CHECK(e == 1);

    CoxSimSpec cens = spec;
    cens.censoring_fraction = 0.4;
    const auto some = simulate_cox_data(cens);
    double frac = 0.0;
    for (int e : some.events) frac += e == 0 ? 1.0 : 0.0;
    frac /= static_cast<double>(some.n());
    CHECK(std::abs(frac - 0.4) < 0.15);  // one realization, expectation-tuned

    const auto again = simulate_cox_data(cens);
    CHECK(some.times == again.times);
    CHECK(some.events == again.events);
    CHECK(some.covariates == again.covariates);

    CoxSimSpec bad = spec;
    bad.censoring_fraction = 1.0;
    CHECK_THROWS_AS(simulate_cox_data(bad), Error);

    // genotype marginals follow Binomial(2, maf)
    double mean_col0 = none.covariates.col(0).mean();
    CHECK(mean_col0 == doctest::Approx(2.0 * 0.2).epsilon(0.25));
}

TEST_CASE("variable selection matches the p=2 enumeration oracle") {
    const auto data = simulate_cox_data({.n = 120,
                                         .p = 2,
                                         .true_beta = {0.8, 0.0},
                                         .baseline_scale = 1.0,
                                         .censoring_fraction = 0.2,
                                         .minor_allele_freqs = {0.3, 0.4},
                                         .seed = 7});
    const auto idx = RiskIndex::build(data);
    const double v = 0.5, a = 0.5;

    // enumeration oracle over the 4 models
    const auto loss1 = [&](double b, std::size_t j) {
        std::vector<double> beta(2, 0.0);
        beta[j] = b;
        return cox_partial_loss(beta, data, idx);
    };
    const double l0 = cox_partial_loss(std::vector<double>{0.0, 0.0}, data, idx);

    auto log_evidence_1d = [&](std::size_t j) {
        const LogDensityFn f = [&, j](std::span<const double> th) {
            return -loss1(th[0], j) + normal_log_pdf(th[0], 0.0, v);
        };
        const auto lap = laplace_log_evidence(f, std::vector<double>{0.0});
        const double half = 10.0 * std::sqrt(lap.covariance(0, 0));
        return quadrature_1d([&](double b) { return f(std::vector<double>{b}); },
                             lap.mode[0] - half, lap.mode[0] + half, 64, 1e-9);
    };

    const auto joint = [&](double b1, double b2) {
        return -cox_partial_loss(std::vector<double>{b1, b2}, data, idx) +
               normal_log_pdf(b1, 0.0, v) + normal_log_pdf(b2, 0.0, v);
    };
    const LogDensityFn joint_fn = [&](std::span<const double> th) { return joint(th[0], th[1]); };
    const auto lap2 = laplace_log_evidence(joint_fn, std::vector<double>{0.0, 0.0});
    const double h1 = 10.0 * std::sqrt(lap2.covariance(0, 0));
    const double h2 = 10.0 * std::sqrt(lap2.covariance(1, 1));
    const double log_e11 = log_simpson_2d(joint, lap2.mode[0] - h1, lap2.mode[0] + h1,
                                          lap2.mode[1] - h2, lap2.mode[1] + h2, 64);

    // model posterior: pi(delta) * evidence
    const double la = std::log(a), lna = std::log(1.0 - a);
    std::vector<double> log_m{
        2.0 * lna - l0,                    // (0,0)
        la + lna + log_evidence_1d(0),     // (1,0)
        lna + la + log_evidence_1d(1),     // (0,1)
        2.0 * la + log_e11,                // (1,1)
    };
    const double lz = log_sum_exp(log_m);
    const double oracle_p1 = std::exp(log_m[1] - lz) + std::exp(log_m[3] - lz);
    const double oracle_p2 = std::exp(log_m[2] - lz) + std::exp(log_m[3] - lz);

    SelectionOptions opts;
    opts.iterations = 200000;
    opts.burn_in = 20000;
    opts.seed = 3;
    const auto chain = variable_selection_mcmc(data, idx, std::vector<double>{v, v},
                                               std::vector<double>{a, a}, opts);
    const auto probs = inclusion_probabilities(chain);

    CHECK(std::abs(probs[0] - oracle_p1) < 0.02);
    CHECK(std::abs(probs[1] - oracle_p2) < 0.02);
    CHECK(chain.acceptance_rate > 0.01);
    CHECK(chain.acceptance_rate < 0.9);
    CHECK(chain.proposal_failures == 0);
}

TEST_CASE("selection chain elementary contracts") {
    const auto data = simulate_cox_data({.n = 80,
                                         .p = 1,
                                         .true_beta = {0.6},
                                         .baseline_scale = 1.0,
                                         .censoring_fraction = 0.1,
                                         .minor_allele_freqs = {0.4},
                                         .seed = 19});
    const auto idx = RiskIndex::build(data);

    // near-unit inclusion prior forces near-permanent occupancy
    SelectionOptions opts;
    opts.iterations = 20000;
    opts.burn_in = 2000;
    opts.seed = 5;
    const auto chain = variable_selection_mcmc(data, idx, std::vector<double>{0.5},
                                               std::vector<double>{0.999}, opts);
    CHECK(inclusion_probabilities(chain)[0] > 0.99);
    for (const auto& rec : chain.records) CHECK(rec.state.consistent());

    // determinism
    const auto again = variable_selection_mcmc(data, idx, std::vector<double>{0.5},
                                               std::vector<double>{0.999}, opts);
    REQUIRE(chain.records.size() == again.records.size());
    for (std::size_t i = 0; i < chain.records.size(); ++i) {
        CHECK(chain.records[i].state.beta == again.records[i].state.beta);
        CHECK(chain.records[i].state.delta == again.records[i].state.delta);
    }
}

TEST_CASE("model size cap bounds every visited state") {
    const auto data = simulate_cox_data({.n = 60,
                                         .p = 6,
                                         .true_beta = std::vector<double>(6, 0.3),
                                         .baseline_scale = 1.0,
                                         .censoring_fraction = 0.0,
                                         .minor_allele_freqs = std::vector<double>(6, 0.4),
                                         .seed = 2});
    const auto idx = RiskIndex::build(data);
    SelectionOptions opts;
    opts.iterations = 6000;
    opts.burn_in = 500;
    opts.seed = 11;
    opts.model_size_cap = 2;
    const auto chain = variable_selection_mcmc(data, idx, std::vector<double>(6, 0.5),
                                               std::vector<double>(6, 0.4), opts);
    for (const auto& rec : chain.records) CHECK(rec.state.size() <= 2);
}

TEST_CASE("dataset validation rejects malformed inputs") {
    Eigen::MatrixXd X(2, 1);
    X << 0.0, 1.0;
    CHECK_THROWS_AS(SurvivalDataset::make({0.0, 1.0}, {1, 1}, X), Error);   // time 0
    CHECK_THROWS_AS(SurvivalDataset::make({1.0, 2.0}, {0, 0}, X), Error);   // no event
    CHECK_THROWS_AS(SurvivalDataset::make({1.0, 2.0}, {1, 2}, X), Error);   // bad flag
    CHECK_THROWS_AS(SurvivalDataset::make({1.0}, {1, 1}, X), Error);        // shape
}
