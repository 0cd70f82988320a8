#include "gb/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gb/error.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

double checked_eval(const Objective& f, std::span<const double> x, int& evals) {
    ++evals;
    const double v = f(x);
    if (std::isnan(v) || v == neg_inf) throw Error("nelder_mead: objective returned NaN or -inf");
    return v;  // +inf allowed: forbidden region
}

NmResult nelder_mead_core(const Objective& f, std::span<const double> start, double tolerance,
                          int max_evals, double step_sign);

}  // namespace

NmResult nelder_mead_minimize(const Objective& f, std::span<const double> start,
                              double tolerance, int max_evals) {
    return nelder_mead_core(f, start, tolerance, max_evals, 1.0);
}

namespace {

NmResult nelder_mead_core(const Objective& f, std::span<const double> start, double tolerance,
                          int max_evals, double step_sign) {
    const std::size_t n = start.size();
    if (n == 0) throw Error("nelder_mead: empty start point");

    int evals = 0;
    std::vector<std::vector<double>> x(n + 1, std::vector<double>(start.begin(), start.end()));
    std::vector<double> fx(n + 1);

    fx[0] = checked_eval(f, x[0], evals);
    if (!std::isfinite(fx[0])) throw Error("nelder_mead: objective not finite at start point");

    // standard initial simplex: nonzero coordinates scaled, zero coordinates stepped
    for (std::size_t k = 0; k < n; ++k) {
        double& c = x[k + 1][k];
        c = (c != 0.0) ? (1.0 + 0.05 * step_sign) * c : 0.00025 * step_sign;
        fx[k + 1] = checked_eval(f, x[k + 1], evals);
    }

    std::vector<std::size_t> ord(n + 1);
    auto sort_order = [&] {
        std::iota(ord.begin(), ord.end(), std::size_t{0});
        std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    };

    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    NmStop stop = NmStop::MaxEvals;

    // a value-spread test alone stalls on vertices straddling a symmetric
    // minimum, so the simplex must also be small in parameter space
    const double xtol = std::sqrt(std::max(tolerance, 1e-30));
    auto simplex_small = [&](std::size_t best) {
        for (std::size_t j = 0; j <= n; ++j) {
            if (j == best) continue;
            for (std::size_t k = 0; k < n; ++k)
                if (std::abs(x[j][k] - x[best][k]) > xtol * (1.0 + std::abs(x[best][k])))
                    return false;
        }
        return true;
    };

    while (evals < max_evals) {
        sort_order();
        const std::size_t best = ord[0], worst = ord[n], second_worst = ord[n - 1];

        const double spread = std::isfinite(fx[worst]) ? fx[worst] - fx[best] : pos_inf;
        if (spread < tolerance && simplex_small(best)) {
            stop = NmStop::Converged;
            break;
        }

        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j <= n; ++j)
                if (j != worst) s += x[j][k];
            centroid[k] = s / static_cast<double>(n);
        }

        for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + (centroid[k] - x[worst][k]);
        const double fr = checked_eval(f, xr, evals);

        if (fr < fx[best]) {
            for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + 2.0 * (xr[k] - centroid[k]);
            const double fe = checked_eval(f, xe, evals);
            if (fe < fr) {
                x[worst] = xe;
                fx[worst] = fe;
            } else {
                x[worst] = xr;
                fx[worst] = fr;
            }
        } else if (fr < fx[second_worst]) {
            x[worst] = xr;
            fx[worst] = fr;
        } else {
            const bool outside = fr < fx[worst];
            if (outside) {
                for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] + 0.5 * (xr[k] - centroid[k]);
            } else {
                for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] + 0.5 * (x[worst][k] - centroid[k]);
            }
            const double fc = checked_eval(f, xc, evals);
            if (fc < std::min(fr, fx[worst])) {
                x[worst] = xc;
                fx[worst] = fc;
            } else {
                // shrink toward best vertex
                bool any_finite = false;
                for (std::size_t j = 0; j <= n; ++j) {
                    if (j == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        x[j][k] = x[best][k] + 0.5 * (x[j][k] - x[best][k]);
                    fx[j] = checked_eval(f, x[j], evals);
                    any_finite = any_finite || std::isfinite(fx[j]);
                }
                if (!any_finite && !std::isfinite(fr) && !std::isfinite(fc))
                    throw Error("nelder_mead: stuck in a forbidden region (all trial points non-finite)");
            }
        }
    }

    sort_order();
    return NmResult{x[ord[0]], fx[ord[0]], stop, evals};
}

}  // namespace

NmResult nelder_mead_restarted(const Objective& f, std::span<const double> start,
                               double tolerance, int max_evals, int max_restarts) {
    NmResult best = nelder_mead_core(f, start, tolerance, max_evals, 1.0);
    for (int r = 0; r < max_restarts; ++r) {
        // mirrored initial steps on odd restarts: at a constraint-set corner
        // only one sign of coordinate step may be feasible
        const double sign = (r % 2 == 0) ? -1.0 : 1.0;
        NmResult again = nelder_mead_core(f, best.argmin, tolerance, max_evals, sign);
        again.evals += best.evals;
        const bool improved =
            again.value < best.value - std::max(tolerance, 1e-12 * (1.0 + std::abs(best.value)));
        if (again.value <= best.value) best = std::move(again);
        if (!improved && r % 2 == 1) break;  // both signs tried without progress
    }
    return best;
}

Eigen::MatrixXd hessian_fd(const Objective& f, std::span<const double> theta, double h) {
    const auto p = static_cast<Eigen::Index>(theta.size());
    if (p == 0) throw Error("hessian_fd: empty point");
    // eps^(1/4) balances truncation against roundoff for second differences;
    // eps^(1/3) leaves ~6e-6 of roundoff noise on the diagonal
    if (h <= 0.0) h = std::pow(std::numeric_limits<double>::epsilon(), 0.25);

    std::vector<double> step(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) step[k] = h * std::max(1.0, std::abs(theta[k]));

    std::vector<double> x(theta.begin(), theta.end());
    auto eval = [&](const std::vector<double>& pt) {
        const double v = f(pt);
        if (!std::isfinite(v)) throw Error("hessian_fd: non-finite objective on the stencil");
        return v;
    };

    const double f0 = eval(x);
    Eigen::MatrixXd H(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto si = static_cast<std::size_t>(i);
        x[si] = theta[si] + step[si];
        const double fp = eval(x);
        x[si] = theta[si] - step[si];
        const double fm = eval(x);
        x[si] = theta[si];
        H(i, i) = (fp - 2.0 * f0 + fm) / (step[si] * step[si]);

        for (Eigen::Index j = i + 1; j < p; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            x[si] = theta[si] + step[si];
            x[sj] = theta[sj] + step[sj];
            const double fpp = eval(x);
            x[sj] = theta[sj] - step[sj];
            const double fpm = eval(x);
            x[si] = theta[si] - step[si];
            const double fmm = eval(x);
            x[sj] = theta[sj] + step[sj];
            const double fmp = eval(x);
            x[si] = theta[si];
            x[sj] = theta[sj];
            H(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * step[si] * step[sj]);
            H(j, i) = H(i, j);
        }
    }
    return 0.5 * (H + H.transpose());
}

}  // namespace gb
