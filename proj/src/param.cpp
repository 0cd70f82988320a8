#include "gb/param.hpp"

#include <cmath>

namespace gb {

bool ParamPoint::satisfies(std::span<const double> values, Constraint constraint,
                           const Indicator* indicator) {
    if (values.empty()) return false;
    for (double v : values)
        if (std::isnan(v)) return false;
    switch (constraint) {
        case Constraint::None:
            return true;
        case Constraint::StrictlyIncreasing:
            for (std::size_t k = 0; k + 1 < values.size(); ++k)
                if (!(values[k] < values[k + 1])) return false;
            return true;
        case Constraint::Custom:
            return indicator != nullptr && *indicator && (*indicator)(values);
    }
    return false;
}

std::optional<ParamPoint> ParamPoint::make(std::vector<double> values, Constraint constraint) {
    if (constraint == Constraint::Custom) return std::nullopt;  // use make_custom
    if (!satisfies(values, constraint)) return std::nullopt;
    return ParamPoint(std::move(values), constraint, nullptr);
}

std::optional<ParamPoint> ParamPoint::make_custom(std::vector<double> values, Indicator indicator) {
    if (!satisfies(values, Constraint::Custom, &indicator)) return std::nullopt;
    return ParamPoint(std::move(values), Constraint::Custom, std::move(indicator));
}

ParamPoint ParamPoint::require(std::vector<double> values, Constraint constraint) {
    auto p = make(std::move(values), constraint);
    if (!p) throw Error("ParamPoint: constraint violated or empty/NaN values");
    return *std::move(p);
}

Datum make_scalar(double x) { return Datum{ScalarDatum{x}}; }

bool datum_is_finite(const Datum& d) {
    return std::visit(
        [](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ScalarDatum>) {
                return std::isfinite(v.x);
            } else if constexpr (std::is_same_v<T, RegressionDatum>) {
                if (!std::isfinite(v.x)) return false;
                for (double z : v.z)
                    if (!std::isfinite(z)) return false;
                return true;
            } else if constexpr (std::is_same_v<T, SurvivalDatum>) {
                if (!(v.time > 0.0) || !std::isfinite(v.time)) return false;
                if (v.event != 0 && v.event != 1) return false;
                for (double z : v.covariates)
                    if (!std::isfinite(z)) return false;
                return true;
            } else {
                if (v.responses.empty() || v.covariates.size() != v.responses.size()) return false;
                for (double x : v.responses)
                    if (!std::isfinite(x)) return false;
                for (const auto& row : v.covariates)
                    for (double z : row)
                        if (!std::isfinite(z)) return false;
                return true;
            }
        },
        d);
}

std::string datum_shape_name(const Datum& d) {
    switch (d.index()) {
        case 0: return "scalar";
        case 1: return "regression";
        case 2: return "survival";
        default: return "grouped";
    }
}

}  // namespace gb
