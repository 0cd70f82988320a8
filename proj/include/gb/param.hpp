#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gb/error.hpp"

namespace gb {

enum class Constraint { None, StrictlyIncreasing, Custom };

// A point in parameter space with an attached support constraint. Points
// violating their constraint cannot be constructed; make() reports failure.
class ParamPoint {
public:
    using Indicator = std::function<bool(std::span<const double>)>;

    static std::optional<ParamPoint> make(std::vector<double> values,
                                          Constraint constraint = Constraint::None);
    static std::optional<ParamPoint> make_custom(std::vector<double> values, Indicator indicator);

    // Throwing variant for call sites where failure is a logic error.
    static ParamPoint require(std::vector<double> values,
                              Constraint constraint = Constraint::None);

    static bool satisfies(std::span<const double> values, Constraint constraint,
                          const Indicator* indicator = nullptr);

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::size_t dim() const { return values_.size(); }
    Constraint constraint() const { return constraint_; }

    const std::vector<double>& vec() const { return values_; }

private:
    ParamPoint(std::vector<double> v, Constraint c, Indicator ind)
        : values_(std::move(v)), constraint_(c), indicator_(std::move(ind)) {}

    std::vector<double> values_;
    Constraint constraint_ = Constraint::None;
    Indicator indicator_;
};

// A single observation. Survival records live in gb/survival.hpp as whole
// datasets; the per-datum shape here covers the separable losses.
struct ScalarDatum {
    double x = 0.0;
};

struct RegressionDatum {
    double x = 0.0;                  // response
    std::vector<double> z;           // covariates
};

struct SurvivalDatum {
    double time = 0.0;               // > 0
    int event = 0;                   // 0/1
    std::vector<double> covariates;
};

// Repeated measures on one independent unit (one GEE cluster): responses
// x_1..x_m with one covariate row per response.
struct GroupedDatum {
    std::vector<double> responses;
    std::vector<std::vector<double>> covariates;  // responses.size() rows
};

using Datum = std::variant<ScalarDatum, RegressionDatum, SurvivalDatum, GroupedDatum>;

Datum make_scalar(double x);
bool datum_is_finite(const Datum& d);
std::string datum_shape_name(const Datum& d);

}  // namespace gb
