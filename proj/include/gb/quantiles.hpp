#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gb/calibrate.hpp"
#include "gb/engines.hpp"
#include "gb/prior.hpp"

namespace gb {

struct Group {
    std::string label;
    std::vector<double> values;
};

struct GroupedSample {
    std::vector<Group> groups;

    static GroupedSample make(std::vector<Group> groups);  // validates
};

// Joint posterior on (lower quartile, median, upper quartile): separable
// quartile-triple loss, ordered-normal prior, weight resolved from the rule,
// sampled by a per-coordinate random walk started at the empirical quartiles.
struct QuartileRun {
    Chain chain;
    double w = 0.0;
    std::array<double, 3> empirical{};  // q1, q2, q3 (type-7)
};

QuartileRun quartile_posterior(const std::vector<double>& values, const LogPrior& prior,
                               const WeightRule& rule, const McmcConfig& config);

struct MedianRun {
    Chain chain;
    double w = 0.0;
    double empirical_median = 0.0;
};

MedianRun median_posterior(const std::vector<double>& values, const LogPrior& prior,
                           const WeightRule& rule, const McmcConfig& config);

struct GroupSummary {
    std::string label;
    std::size_t n = 0;
    double q1 = 0.0, q2 = 0.0, q3 = 0.0;  // empirical boxes
    double w = 0.0;
    std::array<std::pair<double, double>, 3> intervals{};  // credible, per quartile
    double acceptance = 0.0;
    std::size_t draw_count = 0;
};

struct BoxplotSummary {
    double level = 0.95;
    std::vector<GroupSummary> groups;
    std::vector<std::pair<std::string, std::string>> failures;  // (label, error)
};

// Empirical boxes overlaid with posterior credible intervals, one group at a
// time; a failing group is reported and the others still produced.
BoxplotSummary bayesian_boxplot(const GroupedSample& data, const std::vector<LogPrior>& priors,
                                const WeightRule& rule, double level, const McmcConfig& config);

}  // namespace gb
