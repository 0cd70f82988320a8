#include "gb/loss.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "gb/error.hpp"
#include "gb/optimize.hpp"
#include "gb/util.hpp"

namespace gb {

namespace {

double scalar_of(const Datum& d, const char* kind) {
    if (const auto* s = std::get_if<ScalarDatum>(&d)) return s->x;
    throw Error(std::string(kind) + " loss expects a scalar datum, got " + datum_shape_name(d));
}

void check_dim(std::span<const double> theta, std::size_t want, const char* kind) {
    if (theta.size() != want) {
        std::ostringstream os;
        os << kind << " loss expects dim(theta)=" << want << ", got " << theta.size();
        throw Error(os.str());
    }
}

// tau*(theta-x)_+ + (1-tau)*(x-theta)_+
double pinball_eval(double tau, double theta, double x) {
    return tau * pos_part(theta - x) + (1.0 - tau) * pos_part(x - theta);
}

double gee_eval(const GeeSpec& spec, std::span<const double> theta, const Datum& d) {
    const auto* g = std::get_if<GroupedDatum>(&d);
    if (!g) throw Error("gee loss expects a grouped datum, got " + datum_shape_name(d));
    check_dim(theta, spec.n_beta + 2, "gee");

    const auto m = static_cast<Eigen::Index>(g->responses.size());
    const double phi = theta[spec.n_beta];
    const double alpha = theta[spec.n_beta + 1];
    if (!(phi > 0.0)) return pos_inf;
    if (spec.corr == WorkingCorr::Exchangeable) {
        // positive definiteness of the exchangeable correlation
        const double lo = (m > 1) ? -1.0 / static_cast<double>(m - 1) : -1.0;
        if (!(alpha > lo && alpha < 1.0)) return pos_inf;
    }

    Eigen::VectorXd resid(m);
    Eigen::VectorXd avar(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& row = g->covariates[static_cast<std::size_t>(j)];
        if (row.size() != spec.n_beta)
            throw Error("gee loss: covariate row length does not match n_beta");
        double eta = 0.0;
        for (std::size_t k = 0; k < spec.n_beta; ++k) eta += row[k] * theta[k];
        const double mu = (spec.link == Link::Identity) ? eta : std::exp(eta);
        const double a = (spec.var_fn == VarianceFn::One) ? 1.0 : mu;
        if (!(a > 0.0)) return pos_inf;
        resid(j) = g->responses[static_cast<std::size_t>(j)] - mu;
        avar(j) = a;
    }

    // V = phi * A^{1/2} R(alpha) A^{1/2}
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);
    if (spec.corr == WorkingCorr::Exchangeable)
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                if (i != j) R(i, j) = alpha;
    const Eigen::VectorXd sa = avar.cwiseSqrt();
    const Eigen::MatrixXd V = phi * sa.asDiagonal() * R * sa.asDiagonal();

    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) return pos_inf;
    return 0.5 * resid.dot(llt.solve(resid));
}

}  // namespace

PointLoss PointLoss::pinball(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error("pinball: tau must lie in (0,1)");
    return PointLoss(Pinball{tau});
}

PointLoss PointLoss::huber(double k) {
    if (!(k > 0.0)) throw Error("huber: k must be positive");
    return PointLoss(Huber{k});
}

PointLoss PointLoss::gee(GeeSpec spec) {
    if (spec.n_beta == 0) throw Error("gee: n_beta must be >= 1");
    return PointLoss(Gee{spec});
}

PointLoss PointLoss::neg_log_density(LogDensityModel model, std::size_t param_dim) {
    if (!model) throw Error("neg_log_density: null model");
    if (param_dim == 0) throw Error("neg_log_density: param_dim must be >= 1");
    return PointLoss(NegLogDensity{std::move(model), param_dim});
}

std::size_t PointLoss::param_dim() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, QuartileTriple>) return 3;
            else if constexpr (std::is_same_v<T, Gee>) return k.spec.n_beta + 2;
            else if constexpr (std::is_same_v<T, NegLogDensity>) return k.param_dim;
            else return 1;
        },
        kind_);
}

std::string PointLoss::kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Squared>) return "squared";
            else if constexpr (std::is_same_v<T, Absolute>) return "absolute";
            else if constexpr (std::is_same_v<T, Pinball>) return "pinball";
            else if constexpr (std::is_same_v<T, QuartileTriple>) return "quartile-triple";
            else if constexpr (std::is_same_v<T, Huber>) return "huber";
            else if constexpr (std::is_same_v<T, Gee>) return "gee-quadratic";
            else return "neg-log-density";
        },
        kind_);
}

double PointLoss::raw_eval(std::span<const double> theta, const Datum& d) const {
    if (!datum_is_finite(d)) throw Error("loss evaluation: non-finite or invalid datum");
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Squared>) {
                check_dim(theta, 1, "squared");
                return sqr(theta[0] - scalar_of(d, "squared"));
            } else if constexpr (std::is_same_v<T, Absolute>) {
                check_dim(theta, 1, "absolute");
                return std::abs(theta[0] - scalar_of(d, "absolute"));
            } else if constexpr (std::is_same_v<T, Pinball>) {
                check_dim(theta, 1, "pinball");
                return pinball_eval(k.tau, theta[0], scalar_of(d, "pinball"));
            } else if constexpr (std::is_same_v<T, QuartileTriple>) {
                check_dim(theta, 3, "quartile-triple");
                const double x = scalar_of(d, "quartile-triple");
                // theta_1 pays 0.75 above the datum and 0.25 below, so its
                // cumulative minimizer is the lower quartile; mirrored for
                // theta_3. Each component's coefficients sum to 1.
                return pinball_eval(0.75, theta[0], x) + 0.5 * std::abs(theta[1] - x) +
                       pinball_eval(0.25, theta[2], x);
            } else if constexpr (std::is_same_v<T, Huber>) {
                check_dim(theta, 1, "huber");
                const double r = std::abs(theta[0] - scalar_of(d, "huber"));
                return r <= k.k ? 0.5 * r * r : k.k * (r - 0.5 * k.k);
            } else if constexpr (std::is_same_v<T, Gee>) {
                return gee_eval(k.spec, theta, d);
            } else {
                check_dim(theta, k.param_dim, "neg-log-density");
                const double logf = k.model(theta, d);
                if (std::isnan(logf) || logf == pos_inf)
                    throw Error("neg-log-density loss: model returned NaN or +inf log-density");
                return -logf;  // +inf where the model density is 0
            }
        },
        kind_);
}

double PointLoss::eval(std::span<const double> theta, const Datum& d) const {
    const double raw = raw_eval(theta, d);
    if (!offset_) return raw;
    return raw - offset_(d);
}

PointLoss standardize_loss(const PointLoss& loss) {
    return std::visit(
        [&](const auto& k) -> PointLoss {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PointLoss::Squared> ||
                          std::is_same_v<T, PointLoss::Absolute> ||
                          std::is_same_v<T, PointLoss::Pinball> ||
                          std::is_same_v<T, PointLoss::QuartileTriple> ||
                          std::is_same_v<T, PointLoss::Huber>) {
                // already zero at theta -> x (quartile-triple: in the ordered limit)
                return loss;
            } else if constexpr (std::is_same_v<T, PointLoss::NegLogDensity>) {
                if (k.param_dim != 1)
                    throw Error(
                        "standardize_loss: no computable per-datum minimizer for "
                        "multidimensional neg-log-density; supply theta_x explicitly");
                PointLoss out = loss;
                PointLoss raw = loss;
                raw.offset_ = nullptr;
                out.offset_ = [raw](const Datum& d) -> double {
                    double start = 0.0;
                    if (const auto* s = std::get_if<ScalarDatum>(&d)) start = s->x;
                    else if (const auto* r = std::get_if<RegressionDatum>(&d)) start = r->x;
                    const std::vector<double> s0{start};
                    const auto res = nelder_mead_minimize(
                        [&raw, &d](std::span<const double> th) { return raw.eval(th, d); }, s0,
                        1e-12, 2000);
                    return res.value;
                };
                return out;
            } else {
                throw Error("standardize_loss: no computable per-datum minimizer for " +
                            loss.kind_name() + "; supply theta_x explicitly");
            }
        },
        loss.kind_);
}

PointLoss standardize_loss(const PointLoss& loss,
                           std::function<std::vector<double>(const Datum&)> theta_x) {
    if (!theta_x) throw Error("standardize_loss: null theta_x");
    PointLoss out = loss;
    PointLoss raw = loss;
    raw.offset_ = nullptr;
    out.offset_ = [raw, theta_x = std::move(theta_x)](const Datum& d) -> double {
        return raw.eval(theta_x(d), d);
    };
    return out;
}

DatasetLoss DatasetLoss::separable(PointLoss loss, std::vector<Datum> data) {
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!datum_is_finite(data[i])) {
            std::ostringstream os;
            os << "separable loss: non-finite or invalid datum (datum index " << i << ")";
            throw Error(os.str());
        }
    DatasetLoss out;
    out.label_ = "separable(" + loss.kind_name() + ")";
    out.separable_ = Separable{std::move(loss), std::move(data)};
    return out;
}

DatasetLoss DatasetLoss::whole_sample(WholeSampleFn fn, std::string label) {
    if (!fn) throw Error("DatasetLoss: null whole-sample evaluator");
    DatasetLoss out;
    out.whole_ = std::move(fn);
    out.label_ = std::move(label);
    return out;
}

namespace {

// scalar view of the whole dataset, or nullptr where a datum is not scalar
const double* scalar_or_null(const Datum& d) {
    const auto* s = std::get_if<ScalarDatum>(&d);
    return s ? &s->x : nullptr;
}

}  // namespace

double DatasetLoss::eval(std::span<const double> theta) const {
    if (!separable_) {
        const double v = whole_(theta);
        if (std::isnan(v)) throw Error("DatasetLoss(" + label_ + "): evaluator returned NaN");
        return v;
    }
    const auto& [loss, data] = *separable_;

    // single dispatch on the loss kind, then a tight pass over the data;
    // identical arithmetic and order as the per-datum path
    if (!loss.offset_ && !data.empty()) {
        const auto run_scalar = [&](auto&& term, std::size_t dim) -> std::optional<double> {
            check_dim(theta, dim, loss.kind_name().c_str());
            double total = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double* x = scalar_or_null(data[i]);
                if (!x) {
                    std::ostringstream os;
                    os << loss.kind_name() << " loss expects a scalar datum, got "
                       << datum_shape_name(data[i]) << " (datum index " << i << ")";
                    throw Error(os.str());
                }
                total += term(*x);
            }
            return total;
        };
        std::optional<double> fast;
        if (std::get_if<PointLoss::Squared>(&loss.kind_)) {
            fast = run_scalar([&](double x) { return sqr(theta[0] - x); }, 1);
        } else if (std::get_if<PointLoss::Absolute>(&loss.kind_)) {
            fast = run_scalar([&](double x) { return std::abs(theta[0] - x); }, 1);
        } else if (const auto* pb = std::get_if<PointLoss::Pinball>(&loss.kind_)) {
            fast = run_scalar([&](double x) { return pinball_eval(pb->tau, theta[0], x); }, 1);
        } else if (std::get_if<PointLoss::QuartileTriple>(&loss.kind_)) {
            fast = run_scalar(
                [&](double x) {
                    return pinball_eval(0.75, theta[0], x) + 0.5 * std::abs(theta[1] - x) +
                           pinball_eval(0.25, theta[2], x);
                },
                3);
        } else if (const auto* hb = std::get_if<PointLoss::Huber>(&loss.kind_)) {
            fast = run_scalar(
                [&](double x) {
                    const double r = std::abs(theta[0] - x);
                    return r <= hb->k ? 0.5 * r * r : hb->k * (r - 0.5 * hb->k);
                },
                1);
        }
        if (fast) return *fast;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        try {
            total += loss.eval(theta, data[i]);
        } catch (const Error& e) {
            std::ostringstream os;
            os << e.what() << " (datum index " << i << ")";
            throw Error(os.str());
        }
    }
    return total;
}

const PointLoss& DatasetLoss::point_loss() const {
    if (!separable_) throw Error("DatasetLoss: not separable");
    return separable_->loss;
}

std::span<const Datum> DatasetLoss::data() const {
    if (!separable_) throw Error("DatasetLoss: not separable");
    return separable_->data;
}

}  // namespace gb
