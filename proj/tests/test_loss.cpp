#include <doctest.h>

#include <cmath>
#include <vector>

#include "gb/loss.hpp"
#include "gb/rng.hpp"
#include "gb/util.hpp"

using namespace gb;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);

ParamPoint pt(std::initializer_list<double> v) { return ParamPoint::require(std::vector<double>(v)); }

// unit-variance normal location model, log f(x | theta)
PointLoss unit_normal_nld() {
    return PointLoss::neg_log_density(
        [](std::span<const double> th, const Datum& d) {
            const double x = std::get<ScalarDatum>(d).x;
            return -0.5 * std::log(2.0 * M_PI) - 0.5 * (x - th[0]) * (x - th[0]);
        },
        1);
}

}  // namespace

TEST_CASE("point loss values match hand evaluations") {
    CHECK(eval_point_loss(PointLoss::absolute(), pt({2}), make_scalar(2)) == 0.0);
    CHECK(eval_point_loss(PointLoss::squared(), pt({1}), make_scalar(3)) == 4.0);

    // at theta=(4,5,6), x=5: the lower-quartile term pays 0.25(5-4), the
    // median term 0, the upper 0.25(6-5)
    const auto q = ParamPoint::require({4, 5, 6}, Constraint::StrictlyIncreasing);
    CHECK(eval_point_loss(PointLoss::quartile_triple(), q, make_scalar(5)) == doctest::Approx(0.5).epsilon(1e-15));

    // the three components pull toward Q1/Q2/Q3: above-datum penalties
    const auto qt = PointLoss::quartile_triple();
    CHECK(qt.eval(std::vector<double>{6, 7, 8}, make_scalar(5)) ==
          doctest::Approx(0.75 * 1 + 0.5 * 2 + 0.25 * 3).epsilon(1e-15));
    CHECK(qt.eval(std::vector<double>{1, 2, 3}, make_scalar(5)) ==
          doctest::Approx(0.25 * 4 + 0.5 * 3 + 0.75 * 2).epsilon(1e-15));

    const auto pb = PointLoss::pinball(0.25);
    CHECK(eval_point_loss(pb, pt({0}), make_scalar(1)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(eval_point_loss(pb, pt({0}), make_scalar(-1)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("point loss rejects shape mismatches and bad data") {
    CHECK_THROWS_AS(PointLoss::squared().eval(pt({1}).values(),
                                              Datum{SurvivalDatum{1.0, 1, {0.0}}}),
                    Error);
    CHECK_THROWS_AS(PointLoss::absolute().eval(pt({1}).values(),
                                               make_scalar(std::numeric_limits<double>::quiet_NaN())),
                    Error);
    CHECK_THROWS_AS(PointLoss::quartile_triple().eval(pt({1}).values(), make_scalar(0)), Error);
    CHECK_THROWS(PointLoss::pinball(1.5));
    CHECK_THROWS(PointLoss::huber(0.0));
}

TEST_CASE("dataset loss sums in data order") {
    std::vector<Datum> data{make_scalar(1), make_scalar(2), make_scalar(3)};
    const auto L = DatasetLoss::separable(PointLoss::absolute(), data);
    CHECK(eval_dataset_loss(L, pt({2})) == 2.0);

    const auto empty = DatasetLoss::separable(PointLoss::squared(), {});
    CHECK(eval_dataset_loss(empty, pt({0})) == 0.0);

    const auto nld = DatasetLoss::separable(unit_normal_nld(), {make_scalar(0)});
    CHECK(eval_dataset_loss(nld, pt({0})) == doctest::Approx(kHalfLog2Pi).epsilon(1e-12));
}

TEST_CASE("dataset loss reports the offending datum index") {
    std::vector<Datum> data{make_scalar(1), Datum{RegressionDatum{1.0, {2.0}}}};
    const auto L = DatasetLoss::separable(PointLoss::squared(), data);
    try {
        L.eval(pt({0}));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("separable dataset loss is additive over concatenation") {
    Rng rng(41);
    std::vector<Datum> a, b, both;
    for (int i = 0; i < 17; ++i) a.push_back(make_scalar(rng.normal()));
    for (int i = 0; i < 9; ++i) b.push_back(make_scalar(rng.normal()));
    both = a;
    both.insert(both.end(), b.begin(), b.end());

    const auto loss = PointLoss::huber(1.3);
    const auto LA = DatasetLoss::separable(loss, a);
    const auto LB = DatasetLoss::separable(loss, b);
    const auto LAB = DatasetLoss::separable(loss, both);
    for (double theta : {-2.0, 0.0, 0.7}) {
        const std::vector<double> th{theta};
        // additive up to the last-ulp regrouping of one fixed-order sum
        CHECK(LAB.eval(th) == doctest::Approx(LA.eval(th) + LB.eval(th)).epsilon(1e-15));
        // and bit-reproducible against itself
        CHECK(LAB.eval(th) == LAB.eval(th));
    }
}

TEST_CASE("standardization leaves closed-form losses alone and centers neg-log-density") {
    const auto sq = standardize_loss(PointLoss::squared());
    CHECK(sq.eval(pt({5}).values(), make_scalar(3)) == 4.0);

    const auto qts = standardize_loss(PointLoss::quartile_triple());
    const auto q = ParamPoint::require({4, 5, 6}, Constraint::StrictlyIncreasing);
    CHECK(qts.eval(q.values(), make_scalar(5)) == doctest::Approx(0.5).epsilon(1e-15));

    // unit normal at x=0: standardized loss is theta^2/2
    const auto nld = standardize_loss(unit_normal_nld());
    CHECK(nld.eval(pt({0}).values(), make_scalar(0)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(nld.eval(pt({1}).values(), make_scalar(0)) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(nld.eval(pt({2}).values(), make_scalar(0)) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("standardize reports when no per-datum minimizer is computable") {
    const auto twod = PointLoss::neg_log_density(
        [](std::span<const double> th, const Datum& d) {
            const double x = std::get<ScalarDatum>(d).x;
            return -(x - th[0]) * (x - th[0]) - th[1] * th[1];
        },
        2);
    CHECK_THROWS_AS(standardize_loss(twod), Error);

    // caller-supplied minimizer unblocks it
    const auto fixed = standardize_loss(twod, [](const Datum& d) {
        return std::vector<double>{std::get<ScalarDatum>(d).x, 0.0};
    });
    CHECK(fixed.eval(std::vector<double>{3.0, 0.0}, make_scalar(3)) == doctest::Approx(0.0));
}

TEST_CASE("standardized losses have per-datum infimum zero on a grid") {
    const std::vector<PointLoss> losses{
        standardize_loss(PointLoss::squared()), standardize_loss(PointLoss::absolute()),
        standardize_loss(PointLoss::pinball(0.3)), standardize_loss(PointLoss::huber(0.8)),
        standardize_loss(unit_normal_nld())};
    Rng rng(7);
    for (const auto& loss : losses) {
        for (int rep = 0; rep < 4; ++rep) {
            const double x = rng.normal(0.0, 2.0);
            double grid_min = pos_inf;
            for (int k = -4000; k <= 4000; ++k) {
                const double theta = x + k * 1e-3;
                const double v = loss.eval(std::vector<double>{theta}, make_scalar(x));
                CHECK(v >= -1e-9);  // stays nonnegative
                grid_min = std::min(grid_min, v);
            }
            CHECK(grid_min <= 1e-5);  // grid resolution bound
        }
    }
}

TEST_CASE("scalar losses are convex in theta") {
    const std::vector<PointLoss> losses{PointLoss::squared(), PointLoss::absolute(),
                                        PointLoss::pinball(0.15), PointLoss::huber(1.1)};
    Rng rng(99);
    for (const auto& loss : losses) {
        for (int rep = 0; rep < 200; ++rep) {
            const double x = rng.normal(0.0, 3.0);
            const double a = rng.normal(0.0, 5.0), b = rng.normal(0.0, 5.0);
            const double t = rng.uniform();
            const double mid = loss.eval(std::vector<double>{t * a + (1 - t) * b}, make_scalar(x));
            const double hull = t * loss.eval(std::vector<double>{a}, make_scalar(x)) +
                                (1 - t) * loss.eval(std::vector<double>{b}, make_scalar(x));
            CHECK(mid <= hull + 1e-12);
        }
    }

    // quartile triple, 3-d segments
    Rng rng2(100);
    const auto qt = PointLoss::quartile_triple();
    for (int rep = 0; rep < 200; ++rep) {
        const double x = rng2.normal(0.0, 3.0);
        std::vector<double> a(3), b(3), m(3);
        for (int k = 0; k < 3; ++k) {
            a[k] = rng2.normal(0.0, 5.0);
            b[k] = rng2.normal(0.0, 5.0);
        }
        const double t = rng2.uniform();
        for (int k = 0; k < 3; ++k) m[k] = t * a[k] + (1 - t) * b[k];
        CHECK(qt.eval(m, make_scalar(x)) <=
              t * qt.eval(a, make_scalar(x)) + (1 - t) * qt.eval(b, make_scalar(x)) + 1e-12);
    }
}

TEST_CASE("pinball at tau = 1/2 is half the absolute loss") {
    const auto pb = PointLoss::pinball(0.5);
    const auto ab = PointLoss::absolute();
    Rng rng(3);
    for (int rep = 0; rep < 300; ++rep) {
        const double theta = rng.normal(0.0, 4.0), x = rng.normal(0.0, 4.0);
        CHECK(pb.eval(std::vector<double>{theta}, make_scalar(x)) ==
              doctest::Approx(0.5 * ab.eval(std::vector<double>{theta}, make_scalar(x)))
                  .epsilon(1e-14));
    }
}

TEST_CASE("gee quadratic loss") {
    // two responses, one covariate each, identity link, unit variance fn
    GroupedDatum unit;
    unit.responses = {1.0, 3.0};
    unit.covariates = {{1.0}, {1.0}};
    const Datum d{unit};

    // independence: V = phi I, rho = |r|^2 / (2 phi)
    const auto indep = PointLoss::gee(GeeSpec{Link::Identity, VarianceFn::One,
                                              WorkingCorr::Independence, 1});
    // theta = (beta, phi, alpha); beta=2 -> residuals (-1, 1)
    CHECK(indep.eval(std::vector<double>{2.0, 1.0, 0.0}, d) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(indep.eval(std::vector<double>{2.0, 2.0, 0.0}, d) == doctest::Approx(0.5).epsilon(1e-12));

    // exchangeable with alpha=0 coincides with independence
    const auto exch = PointLoss::gee(GeeSpec{Link::Identity, VarianceFn::One,
                                             WorkingCorr::Exchangeable, 1});
    CHECK(exch.eval(std::vector<double>{2.0, 1.5, 0.0}, d) ==
          doctest::Approx(indep.eval(std::vector<double>{2.0, 1.5, 0.0}, d)).epsilon(1e-12));

    // hand value for exchangeable alpha=0.5: V = phi [[1,.5],[.5,1]],
    // r=(-1,1): r' V^{-1} r = (r1^2 - 2*.5*r1*r2 + r2^2)/(phi*(1-.25))
    const double expect = 0.5 * (1.0 + 1.0 + 1.0) / 0.75;
    CHECK(exch.eval(std::vector<double>{2.0, 1.0, 0.5}, d) ==
          doctest::Approx(expect).epsilon(1e-12));

    // domain edges surface as +inf, not NaN
    CHECK(exch.eval(std::vector<double>{2.0, -1.0, 0.0}, d) == pos_inf);
    CHECK(exch.eval(std::vector<double>{2.0, 1.0, 1.5}, d) == pos_inf);

    // log link with mu variance
    GroupedDatum pois;
    pois.responses = {2.0};
    pois.covariates = {{1.0}};
    const auto loglink = PointLoss::gee(GeeSpec{Link::Log, VarianceFn::Mu,
                                                WorkingCorr::Independence, 1});
    // beta=0 -> mu=1, V=phi*1: rho = (2-1)^2/(2 phi)
    CHECK(loglink.eval(std::vector<double>{0.0, 1.0, 0.0}, Datum{pois}) ==
          doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("param point construction honours constraints") {
    CHECK(ParamPoint::make({1, 2, 3}, Constraint::StrictlyIncreasing).has_value());
    CHECK_FALSE(ParamPoint::make({1, 1, 3}, Constraint::StrictlyIncreasing).has_value());
    CHECK_FALSE(ParamPoint::make({}, Constraint::None).has_value());
    CHECK_FALSE(ParamPoint::make({std::numeric_limits<double>::quiet_NaN()}).has_value());

    const auto even = ParamPoint::make_custom(
        {2.0}, [](std::span<const double> v) { return std::fmod(v[0], 2.0) == 0.0; });
    CHECK(even.has_value());
    CHECK_FALSE(ParamPoint::make_custom(
                    {3.0}, [](std::span<const double> v) { return std::fmod(v[0], 2.0) == 0.0; })
                    .has_value());
}
