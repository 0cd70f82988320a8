#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gb/param.hpp"

namespace gb {

// Log-density evaluator of a conditional model f(datum | theta); returns
// log f, -inf where the model density is zero.
using LogDensityModel = std::function<double(std::span<const double>, const Datum&)>;

enum class Link { Identity, Log };
enum class VarianceFn { One, Mu };
enum class WorkingCorr { Independence, Exchangeable };

// Quadratic GEE working loss. theta is laid out as (beta..., phi, alpha);
// alpha is ignored under the independence working correlation but keeps its
// slot so the layout does not depend on the correlation choice.
struct GeeSpec {
    Link link = Link::Identity;
    VarianceFn var_fn = VarianceFn::One;
    WorkingCorr corr = WorkingCorr::Independence;
    std::size_t n_beta = 1;
};

// Per-datum loss l(theta, x). Pure; evaluation never mutates.
class PointLoss {
public:
    struct Squared {};
    struct Absolute {};
    struct Pinball { double tau; };
    struct QuartileTriple {};
    struct Huber { double k; };
    struct Gee { GeeSpec spec; };
    struct NegLogDensity {
        LogDensityModel model;
        std::size_t param_dim;
    };

    static PointLoss squared() { return PointLoss(Squared{}); }
    static PointLoss absolute() { return PointLoss(Absolute{}); }
    static PointLoss pinball(double tau);
    static PointLoss quartile_triple() { return PointLoss(QuartileTriple{}); }
    static PointLoss huber(double k);
    static PointLoss gee(GeeSpec spec);
    static PointLoss neg_log_density(LogDensityModel model, std::size_t param_dim);

    double eval(std::span<const double> theta, const Datum& d) const;
    double eval(const ParamPoint& theta, const Datum& d) const { return eval(theta.values(), d); }

    std::size_t param_dim() const;
    std::string kind_name() const;
    bool is_standardized() const { return static_cast<bool>(offset_); }

    friend PointLoss standardize_loss(const PointLoss& loss);
    friend PointLoss standardize_loss(const PointLoss& loss,
                                      std::function<std::vector<double>(const Datum&)> theta_x);

private:
    using Kind = std::variant<Squared, Absolute, Pinball, QuartileTriple, Huber, Gee, NegLogDensity>;
    explicit PointLoss(Kind k) : kind_(std::move(k)) {}

    double raw_eval(std::span<const double> theta, const Datum& d) const;

    Kind kind_;
    // per-datum value l(theta_x, x) subtracted when standardized
    std::function<double(const Datum&)> offset_;

    friend class DatasetLoss;  // hoists the kind dispatch out of the data loop
};

// l'(theta,x) = l(theta,x) - l(theta_x,x) with theta_x the per-datum
// minimizer: closed-form for the scalar losses, 1-D numerical minimization
// for neg-log-density with param_dim 1. Throws when no minimizer is
// computable; the overload takes a caller-supplied theta_x.
PointLoss standardize_loss(const PointLoss& loss);
PointLoss standardize_loss(const PointLoss& loss,
                           std::function<std::vector<double>(const Datum&)> theta_x);

// Cumulative loss L(theta) = sum_i l(theta, x_i), or an arbitrary
// whole-sample evaluator (the Cox partial loss plugs in through the latter).
class DatasetLoss {
public:
    using WholeSampleFn = std::function<double(std::span<const double>)>;

    static DatasetLoss separable(PointLoss loss, std::vector<Datum> data);
    static DatasetLoss whole_sample(WholeSampleFn fn, std::string label = "whole-sample");

    // Separable: single pass over the data in stored order.
    double eval(std::span<const double> theta) const;
    double eval(const ParamPoint& theta) const { return eval(theta.values()); }

    bool is_separable() const { return separable_.has_value(); }
    const PointLoss& point_loss() const;
    std::span<const Datum> data() const;
    const std::string& label() const { return label_; }

private:
    struct Separable {
        PointLoss loss;
        std::vector<Datum> data;
    };
    DatasetLoss() = default;

    std::optional<Separable> separable_;
    WholeSampleFn whole_{};
    std::string label_;
};

// Spec'd operation names; thin forwards kept for call-site readability.
inline double eval_point_loss(const PointLoss& loss, const ParamPoint& theta, const Datum& d) {
    return loss.eval(theta, d);
}
inline double eval_dataset_loss(const DatasetLoss& L, const ParamPoint& theta) {
    return L.eval(theta);
}

}  // namespace gb
