#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rhem/sampling.hpp"
#include "rhem/statistics.hpp"
#include "rhem/types.hpp"

namespace rhem {

struct LogLikResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Sampled Cox partial log-likelihood over case-control strata, with exact
// analytic gradient and Hessian. Rows are centered on the case row and the
// per-stratum reduction order is a function of the row set only, so two
// strata holding the same rows produce bit-identical values.
LogLikResult log_likelihood(std::span<const Stratum> strata, const Eigen::VectorXd& theta);
double log_likelihood_value(std::span<const Stratum> strata, const Eigen::VectorXd& theta);

struct FitOptions {
  int max_iterations = 100;
  double gradient_tol = 1e-8;
  double rel_loglik_tol = 1e-12;
  double separation_threshold = 20.0;
  int max_step_halvings = 40;
};

struct ModelFit {
  std::vector<std::string> labels;
  Eigen::VectorXd theta;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z_values;
  Eigen::VectorXd p_values;
  double log_lik = 0.0;
  double aic = 0.0;  // finite iff converged
  int iterations = 0;
  bool converged = false;
  std::size_t n_events = 0;
  std::size_t n_obs = 0;
  std::string policy_tag;
};

// Newton-Raphson with step halving from theta = 0. Throws EstimationError on
// separation or singular information.
ModelFit fit_cox(std::span<const Stratum> strata, const std::vector<std::string>& labels,
                 const FitOptions& options = {}, std::string policy_tag = {});

struct ParamSummary {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double sign_fraction = 0.0;  // share of fits carrying the majority sign
  bool sign_consistent = false;  // identical sign across all successful fits
};

struct ReplicatedFit {
  std::vector<ModelFit> fits;            // successful replications, in index order
  std::vector<std::string> failures;     // "replication 3: <error>" entries
  std::vector<ParamSummary> summary;
  BuildWarnings warnings;                // accumulated over replications
  std::string policy_tag;
};

// R independent resample-and-fit passes with per-parameter variability.
ReplicatedFit fit_replicated(const Dataset& data, const RiskSetPolicy& policy,
                             const std::vector<StatisticSpec>& specs,
                             const CovariateTable* covariates, Split split,
                             std::uint64_t seed, std::uint32_t replications,
                             const FitOptions& options = {},
                             StatisticEvaluator::Options eval_options = {},
                             std::string policy_tag = {});

struct RomFit {
  std::vector<std::string> labels;  // "(intercept)" first
  Eigen::VectorXd coefficients;     // NaN for dropped collinear columns
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;
  std::vector<bool> dropped;
  double residual_variance = 0.0;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  double rmse = 0.0;
  std::size_t n_obs = 0;
  std::vector<std::string> warnings;
};

// Ordinary least squares of event outcomes on history statistics evaluated
// against the strictly-prior history, with an intercept. Collinear columns
// are dropped left to right with a warning.
RomFit fit_rom(const Dataset& data, const std::vector<StatisticSpec>& specs,
               const CovariateTable* covariates, Split split,
               StatisticEvaluator::Options eval_options = {});

// Counts of outcome-bearing events falling in each split class.
struct SplitCounts {
  std::size_t first_events = 0;
  std::size_t repeated_events = 0;
};
SplitCounts count_split(const Dataset& data);

}  // namespace rhem
