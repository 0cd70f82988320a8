#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gb/prior.hpp"
#include "gb/rng.hpp"

namespace gb {

// The data-generating density f0: evaluation plus seeded sampling.
class TrueDensity {
public:
    static TrueDensity normal(double mean, double var);
    static TrueDensity mixture2(double weight1, double mean1, double var1, double mean2,
                                double var2);
    static TrueDensity exponential(double rate);

    double log_density(double x) const;
    double density(double x) const;
    double sample(Rng& rng) const;
    // effective support for quadrature (mass outside is ~1e-14)
    std::pair<double, double> support_hint() const;
    // (mean, variance) when the density is a single normal
    std::optional<std::pair<double, double>> normal_params() const;
    std::string kind_name() const;

private:
    enum class Kind { Normal, Mixture2, Exponential };
    TrueDensity() = default;
    Kind kind_ = Kind::Normal;
    double w1_ = 1.0, m1_ = 0.0, v1_ = 1.0, m2_ = 0.0, v2_ = 1.0, rate_ = 1.0;
};

// The proxy family f(x; theta): normal location (fixed variance) or normal
// location-scale with theta = (mu, sigma).
class ProxyFamily {
public:
    static ProxyFamily normal_location(double fixed_var);
    static ProxyFamily normal_location_scale();

    double log_density(double x, std::span<const double> theta) const;
    std::size_t dim() const { return scale_free_ ? 1 : 2; }
    bool in_domain(std::span<const double> theta) const;
    bool is_location_only() const { return scale_free_; }
    double fixed_variance() const;
    std::string kind_name() const;

private:
    ProxyFamily() = default;
    bool scale_free_ = true;  // true: location only
    double fixed_var_ = 1.0;
};

// D(f0 || f(.;theta)) = int f0 log(f0/f(.;theta)); analytic for
// normal-vs-normal-location, adaptive Simpson otherwise.
double kl_divergence(const TrueDensity& f0, const ProxyFamily& family,
                     std::span<const double> theta);

struct KlMinimum {
    std::vector<double> theta0;
    double divergence = 0.0;  // delta = D(f0, f(.;theta0))
};

KlMinimum kl_minimizer(const TrueDensity& f0, const ProxyFamily& family,
                       std::span<const double> box_lo, std::span<const double> box_hi);

struct ConcentrationRow {
    std::size_t n = 0;
    double eps = 0.0;
    double mass_mean = 0.0;
    double mass_sd = 0.0;
    std::size_t seeds = 0;
};

struct ConcentrationResult {
    std::vector<double> theta0;
    double divergence = 0.0;
    double grid_lo = 0.0, grid_hi = 0.0;
    std::size_t grid_points = 0;
    std::vector<ConcentrationRow> table;
};

struct ConcentrationSpec {
    std::vector<std::size_t> n_schedule;
    double eps = 0.1;
    std::size_t seeds = 10;
    std::uint64_t base_seed = 0;
    std::size_t grid_points = 4096;
};

// Gibbs posterior with self-information loss and w=1 on a dense theta grid;
// records the posterior mass in the closed eps-ball around theta0 for each
// n in the schedule, averaged over seeds. Only 1-D proxy families.
ConcentrationResult concentration_experiment(const TrueDensity& f0, const ProxyFamily& family,
                                             const LogPrior& prior, const ConcentrationSpec& spec);

}  // namespace gb
