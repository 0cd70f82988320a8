#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gb/engines.hpp"
#include "gb/loss.hpp"

namespace gb {

struct SurvivalDataset {
    std::vector<double> times;   // > 0
    std::vector<int> events;     // 0/1, at least one 1
    Eigen::MatrixXd covariates;  // n x p

    static SurvivalDataset make(std::vector<double> times, std::vector<int> events,
                                Eigen::MatrixXd covariates);
    std::size_t n() const { return times.size(); }
    std::size_t p() const { return static_cast<std::size_t>(covariates.cols()); }
};

// Risk sets R_i = {j : t_j >= t_i} for every event i, realized as prefixes of
// the subjects sorted by time descending (ties share a prefix; Breslow
// convention, no tie correction).
class RiskIndex {
public:
    struct Event {
        std::size_t subject;     // index into the dataset
        std::size_t risk_count;  // prefix length into sorted order
    };

    static RiskIndex build(const SurvivalDataset& data);

    std::span<const std::size_t> descending_order() const { return order_; }
    std::span<const Event> events() const { return events_; }
    std::vector<std::size_t> risk_set(std::size_t event_idx) const;

private:
    std::vector<std::size_t> order_;
    std::vector<Event> events_;
};

// Negative log partial likelihood, log-sum-exp stabilized per risk set;
// exp(-loss) is the Cox partial likelihood.
double cox_partial_loss(std::span<const double> beta, const SurvivalDataset& data,
                        const RiskIndex& index);
// Same, from precomputed linear predictors eta_i = x_i . beta.
double cox_partial_loss_eta(std::span<const double> eta, const RiskIndex& index);

// Whole-sample DatasetLoss adapter (shares the dataset; cheap to copy).
DatasetLoss cox_dataset_loss(std::shared_ptr<const SurvivalDataset> data,
                             std::shared_ptr<const RiskIndex> index);

enum class BfMethod { Laplace, Quadrature, Importance };

struct BfOptions {
    BfMethod method = BfMethod::Laplace;
    std::size_t is_draws = 500;
    std::uint64_t seed = 0;
};

struct BfResult {
    double log_bf = 0.0;
    BfMethod method_used = BfMethod::Laplace;
    double se = 0.0;           // importance sampling only
    bool degenerate = false;   // constant marker column: BF = 1 exactly
    bool laplace_fallback = false;  // laplace failed, quadrature used instead
};

// log BF_j = log int exp(-l_j(b)) N(b|0,v_j) db + l_j(0), the general Bayes
// factor of association at marker j with w = 1.
BfResult single_marker_bf(const SurvivalDataset& data, const RiskIndex& index, std::size_t marker,
                          double slab_variance, const BfOptions& opts = {});

// Joint (delta, beta) model state; beta_j = 0 exactly where delta_j = 0.
struct ModelState {
    std::vector<std::uint8_t> delta;
    std::vector<double> beta;

    std::size_t size() const;  // number of active markers
    bool consistent() const;
};

struct SelectionOptions {
    std::size_t iterations = 100000;
    std::size_t burn_in = 10000;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
    std::size_t model_size_cap = 20;
};

struct SelectionRecord {
    std::size_t iter;
    bool accepted;
    ModelState state;
};

struct SelectionChain {
    std::vector<SelectionRecord> records;  // post burn-in, thinned
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;
    std::size_t proposal_failures = 0;  // conditional MAP optimizations that failed
    std::size_t p = 0;
};

// Add/remove/swap variable-selection sampler with a Gaussian independence
// proposal centred at the conditional MAP of the proposed support.
SelectionChain variable_selection_mcmc(const SurvivalDataset& data, const RiskIndex& index,
                                       std::span<const double> slab_variances,
                                       std::span<const double> inclusion_probs,
                                       const SelectionOptions& opts);

std::vector<double> inclusion_probabilities(const SelectionChain& chain);

struct CoxSimSpec {
    std::size_t n = 100;
    std::size_t p = 1;
    std::vector<double> true_beta;          // length p
    double baseline_scale = 1.0;            // exponential baseline hazard rate
    double censoring_fraction = 0.0;        // target, in [0,1)
    std::vector<double> minor_allele_freqs; // length p, in (0, 0.5]
    std::uint64_t seed = 0;
};

// Genotypes Binomial(2, MAF); event times exponential with rate
// h0*exp(x.beta); independent exponential censoring tuned by bisection to the
// target fraction in expectation.
SurvivalDataset simulate_cox_data(const CoxSimSpec& spec);

}  // namespace gb
