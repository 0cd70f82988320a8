#include <doctest.h>

#include <cmath>
#include <vector>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/util.hpp"

using namespace gb;

TEST_CASE("nelder-mead finds analytic minima") {
    const auto quad = [](std::span<const double> x) { return sqr(x[0] - 3.0); };
    const auto r1 = nelder_mead_minimize(quad, std::vector<double>{0.0}, 1e-14, 5000);
    CHECK(std::abs(r1.argmin[0] - 3.0) < 1e-6);
    CHECK(r1.stop == NmStop::Converged);

    const auto rosenbrock = [](std::span<const double> x) {
        return sqr(1.0 - x[0]) + 100.0 * sqr(x[1] - sqr(x[0]));
    };
    const auto r2 = nelder_mead_minimize(rosenbrock, std::vector<double>{-1.2, 1.0}, 1e-14, 20000);
    CHECK(std::abs(r2.argmin[0] - 1.0) < 1e-4);
    CHECK(std::abs(r2.argmin[1] - 1.0) < 1e-4);

    const auto constant = [](std::span<const double>) { return 42.0; };
    const auto r3 = nelder_mead_minimize(constant, std::vector<double>{7.0, -2.0}, 1e-10, 1000);
    CHECK(r3.value == 42.0);
    CHECK(r3.argmin[0] == 7.0);
    CHECK(r3.argmin[1] == -2.0);
}

TEST_CASE("nelder-mead reports which termination fired") {
    const auto slow = [](std::span<const double> x) { return sqr(x[0]); };
    const auto r = nelder_mead_minimize(slow, std::vector<double>{100.0}, 1e-300, 25);
    CHECK(r.stop == NmStop::MaxEvals);
    CHECK(r.evals <= 25 + 2);
}

TEST_CASE("nelder-mead handles forbidden regions through +inf") {
    // constrained quadratic: feasible only for x > 1
    const auto f = [](std::span<const double> x) {
        if (x[0] <= 1.0) return pos_inf;
        return sqr(x[0] - 2.0);
    };
    const auto r = nelder_mead_minimize(f, std::vector<double>{1.5}, 1e-12, 5000);
    CHECK(std::abs(r.argmin[0] - 2.0) < 1e-5);

    CHECK_THROWS_AS(nelder_mead_minimize(f, std::vector<double>{0.0}, 1e-12, 100), Error);
}

TEST_CASE("finite-difference hessian matches analytic second derivatives") {
    // f = x'Ax/2 for symmetric A
    Eigen::MatrixXd A(2, 2);
    A << 4.0, 1.0, 1.0, 3.0;
    const auto quad = [&](std::span<const double> x) {
        const Eigen::Map<const Eigen::VectorXd> v(x.data(), 2);
        return 0.5 * v.dot(A * v);
    };
    const auto H = hessian_fd(quad, std::vector<double>{0.3, -0.2});
    CHECK((H - A).norm() < 1e-4 * A.norm());
    CHECK(H(0, 1) == H(1, 0));  // symmetrized

    const auto linear = [](std::span<const double> x) { return 2.0 * x[0] - x[1]; };
    const auto Hl = hessian_fd(linear, std::vector<double>{1.0, 1.0});
    CHECK(Hl.cwiseAbs().maxCoeff() < 1e-6);

    const auto cosine = [](std::span<const double> x) { return std::cos(x[0]); };
    const auto Hc = hessian_fd(cosine, std::vector<double>{0.0});
    CHECK(Hc(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("hessian rejects non-finite stencils") {
    const auto f = [](std::span<const double> x) {
        return x[0] > 0.0 ? x[0] * x[0] : pos_inf;
    };
    CHECK_THROWS_AS(hessian_fd(f, std::vector<double>{1e-9}), Error);
}
