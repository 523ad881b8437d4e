#include "rhem/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rhem/errors.hpp"
#include "rhem/parallel.hpp"

namespace rhem {

namespace {

constexpr std::size_t kChunk = 64;  // strata per reduction chunk

double wald_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Row evaluation order determined by the row set alone: descending centered
// score, ties broken lexicographically on the statistic vector. Keeps the
// reduction independent of sampling order.
void canonical_order(const Stratum& s, const std::vector<double>& u,
                     std::vector<std::uint32_t>& order) {
  const std::size_t k = s.stats.size() / s.rows();
  order.resize(s.rows());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (u[a] != u[b]) return u[a] > u[b];
    const double* ra = s.stats.data() + a * k;
    const double* rb = s.stats.data() + b * k;
    return std::lexicographical_compare(ra, ra + k, rb, rb + k);
  });
}

struct StratumTerm {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Per-stratum conditional-logit term; row 0 is the case.
void stratum_contribution(const Stratum& s, const Eigen::VectorXd& theta, bool with_derivs,
                          StratumTerm& out, std::vector<double>& u,
                          std::vector<std::uint32_t>& order, std::vector<double>& prob) {
  const std::size_t k = static_cast<std::size_t>(theta.size());
  const std::size_t rows = s.rows();
  u.resize(rows);
  const double* case_row = s.stats.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = s.stats.data() + r * k;
    double dot = 0;
    for (std::size_t j = 0; j < k; ++j) dot += (row[j] - case_row[j]) * theta[j];
    if (!std::isfinite(dot)) {
      throw EstimationError("non-finite statistic in stratum for event ordinal " +
                            std::to_string(s.event_ordinal));
    }
    u[r] = dot;
  }
  canonical_order(s, u, order);

  const double max_u = u[order[0]];
  double denom = 0;
  for (std::uint32_t r : order) denom += std::exp(u[r] - max_u);
  // log of the centered denominator; the case term u[0] = 0 cancels exactly.
  out.value = -(max_u + std::log(denom));
  if (!with_derivs) return;

  prob.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    prob[order[i]] = std::exp(u[order[i]] - max_u) / denom;
  }

  out.gradient = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (std::uint32_t r : order) {
    const double* row = s.stats.data() + r * k;
    for (std::size_t j = 0; j < k; ++j) mean[j] += prob[r] * row[j];
  }
  for (std::size_t j = 0; j < k; ++j) out.gradient[j] = case_row[j] - mean[j];

  out.hessian = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd centered(k);
  for (std::uint32_t r : order) {
    const double* row = s.stats.data() + r * k;
    for (std::size_t j = 0; j < k; ++j) centered[j] = row[j] - mean[j];
    out.hessian.noalias() -= prob[r] * (centered * centered.transpose());
  }
}

LogLikResult reduce(std::span<const Stratum> strata, const Eigen::VectorXd& theta,
                    bool with_derivs) {
  const std::size_t k = static_cast<std::size_t>(theta.size());
  const std::size_t n = strata.size();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;

  std::vector<StratumTerm> partials(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    StratumTerm acc;
    acc.value = 0;
    if (with_derivs) {
      acc.gradient = Eigen::VectorXd::Zero(k);
      acc.hessian = Eigen::MatrixXd::Zero(k, k);
    }
    StratumTerm term;
    std::vector<double> u, prob;
    std::vector<std::uint32_t> order;
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(begin + kChunk, n);
    for (std::size_t i = begin; i < end; ++i) {
      stratum_contribution(strata[i], theta, with_derivs, term, u, order, prob);
      acc.value += term.value;
      if (with_derivs) {
        acc.gradient += term.gradient;
        acc.hessian += term.hessian;
      }
    }
    partials[c] = std::move(acc);
  });

  LogLikResult result;
  result.value = 0;
  result.gradient = Eigen::VectorXd::Zero(k);
  result.hessian = Eigen::MatrixXd::Zero(k, k);
  for (const auto& part : partials) {
    result.value += part.value;
    if (with_derivs) {
      result.gradient += part.gradient;
      result.hessian += part.hessian;
    }
  }
  return result;
}

}  // namespace

LogLikResult log_likelihood(std::span<const Stratum> strata, const Eigen::VectorXd& theta) {
  return reduce(strata, theta, true);
}

double log_likelihood_value(std::span<const Stratum> strata, const Eigen::VectorXd& theta) {
  return reduce(strata, theta, false).value;
}

ModelFit fit_cox(std::span<const Stratum> strata, const std::vector<std::string>& labels,
                 const FitOptions& options, std::string policy_tag) {
  if (strata.empty()) throw EstimationError("no strata to fit");
  const std::size_t k = labels.size();

  ModelFit fit;
  fit.labels = labels;
  fit.policy_tag = std::move(policy_tag);
  fit.n_events = strata.size();
  for (const auto& s : strata) fit.n_obs += s.rows();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
  LogLikResult cur = log_likelihood(strata, theta);

  auto solve_direction = [&](const Eigen::MatrixXd& hessian,
                             const Eigen::VectorXd& gradient) -> Eigen::VectorXd {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hessian);
    const auto& lambda = eig.eigenvalues();
    const double max_l = lambda.maxCoeff();
    if (!(max_l > 0) || lambda.minCoeff() <= 1e-10 * std::max(max_l, 1.0)) {
      throw EstimationError(
          "singular information: a statistic is constant within every stratum");
    }
    return eig.eigenvectors() *
           (eig.eigenvectors().transpose() * gradient).cwiseQuotient(lambda);
  };

  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (cur.gradient.cwiseAbs().maxCoeff() < options.gradient_tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd direction = solve_direction(cur.hessian, cur.gradient);

    double step = 1.0;
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd theta_new;
    int halvings = 0;
    for (; halvings <= options.max_step_halvings; ++halvings) {
      theta_new = theta + step * direction;
      f_new = log_likelihood_value(strata, theta_new);
      if (std::isfinite(f_new) && f_new > cur.value) break;
      step *= 0.5;
    }
    if (halvings > options.max_step_halvings) {
      // No ascent possible beyond floating-point resolution.
      converged = true;
      break;
    }

    const double improvement = f_new - cur.value;
    theta = theta_new;
    cur = log_likelihood(strata, theta);

    if (theta.cwiseAbs().maxCoeff() > options.separation_threshold && improvement > 0 &&
        cur.gradient.cwiseAbs().maxCoeff() >= options.gradient_tol) {
      Eigen::Index worst = 0;
      theta.cwiseAbs().maxCoeff(&worst);
      throw EstimationError("separation detected: coefficient for " + labels[worst] +
                            " diverged beyond ±" +
                            std::to_string(options.separation_threshold) +
                            " with the likelihood still improving");
    }
    if (std::abs(improvement) <
        options.rel_loglik_tol * (std::abs(cur.value) + options.rel_loglik_tol)) {
      converged = true;
      ++iter;
      break;
    }
  }

  fit.theta = theta;
  fit.log_lik = cur.value;
  fit.iterations = iter;
  fit.converged = converged;
  fit.aic = converged ? 2.0 * static_cast<double>(k) - 2.0 * cur.value
                      : std::numeric_limits<double>::quiet_NaN();

  // Standard errors from the inverse observed information at the optimum.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-cur.hessian);
  const auto& lambda = eig.eigenvalues();
  const double max_l = lambda.maxCoeff();
  if (!(max_l > 0) || lambda.minCoeff() <= 1e-10 * std::max(max_l, 1.0)) {
    throw EstimationError("singular information at the optimum");
  }
  const Eigen::MatrixXd cov =
      eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  fit.std_errors = cov.diagonal().cwiseSqrt();
  fit.z_values = fit.theta.cwiseQuotient(fit.std_errors);
  fit.p_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) fit.p_values[j] = wald_p(fit.z_values[j]);
  return fit;
}

ReplicatedFit fit_replicated(const Dataset& data, const RiskSetPolicy& policy,
                             const std::vector<StatisticSpec>& specs,
                             const CovariateTable* covariates, Split split,
                             std::uint64_t seed, std::uint32_t replications,
                             const FitOptions& options,
                             StatisticEvaluator::Options eval_options,
                             std::string policy_tag) {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  std::vector<std::string> labels;
  labels.reserve(specs.size());
  for (const auto& s : specs) labels.push_back(s.label());

  ReplicatedFit result;
  result.policy_tag = policy_tag;
  for (std::uint32_t r = 0; r < replications; ++r) {
    try {
      StrataResult strata =
          build_strata(data, policy, specs, covariates, split, seed, r, eval_options);
      result.warnings.dropped_strata += strata.warnings.dropped_strata;
      result.warnings.underfilled_strata += strata.warnings.underfilled_strata;
      result.warnings.skipped_events += strata.warnings.skipped_events;
      result.fits.push_back(fit_cox(strata.strata, labels, options, policy_tag));
    } catch (const EstimationError& error) {
      result.failures.push_back("replication " + std::to_string(r) + ": " + error.what());
    }
  }

  result.summary.resize(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    ParamSummary& summary = result.summary[j];
    summary.label = labels[j];
    if (result.fits.empty()) continue;
    double sum = 0;
    std::size_t positive = 0, negative = 0, zero = 0;
    for (const auto& fit : result.fits) {
      sum += fit.theta[j];
      if (fit.theta[j] > 0) {
        ++positive;
      } else if (fit.theta[j] < 0) {
        ++negative;
      } else {
        ++zero;
      }
    }
    const double n = static_cast<double>(result.fits.size());
    summary.mean = sum / n;
    double ss = 0;
    for (const auto& fit : result.fits) {
      ss += (fit.theta[j] - summary.mean) * (fit.theta[j] - summary.mean);
    }
    summary.sd = result.fits.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const std::size_t majority = std::max({positive, negative, zero});
    summary.sign_fraction = static_cast<double>(majority) / n;
    summary.sign_consistent = majority == result.fits.size();
  }
  return result;
}

SplitCounts count_split(const Dataset& data) {
  SplitCounts counts;
  History history(data.nodes.size(), data.directed, data.has_outcomes);
  for (const Event& e : data.events) {
    // Counted against the strictly-prior history; simultaneous events do not
    // see each other but the ingest order within a tie is irrelevant here
    // because activity uses time < t.
    if (history.activity(e.edge.view(), e.time) > 0) {
      ++counts.repeated_events;
    } else {
      ++counts.first_events;
    }
    history.push(e);
  }
  return counts;
}

RomFit fit_rom(const Dataset& data, const std::vector<StatisticSpec>& specs,
               const CovariateTable* covariates, Split split,
               StatisticEvaluator::Options eval_options) {
  if (!data.has_outcomes) throw ConfigError("outcomes not available for outcome model");

  History history(data.nodes.size(), data.directed, data.has_outcomes);
  StatisticEvaluator evaluator(history, specs, covariates, eval_options);
  const std::size_t k = specs.size();

  std::vector<double> design;  // row major, 1 + k columns
  std::vector<double> response;
  StatisticEvaluator::Workspace ws;
  std::vector<double> row(k);

  // Events sharing a timestamp must all be scored against the same snapshot,
  // so rows for a tie group are built before the group is pushed.
  std::size_t begin = 0;
  while (begin < data.events.size()) {
    std::size_t end = begin + 1;
    while (end < data.events.size() && data.events[end].time == data.events[begin].time) {
      ++end;
    }
    for (std::size_t i = begin; i < end; ++i) {
      const Event& e = data.events[i];
      const bool repeated = history.activity(e.edge.view(), e.time) > 0;
      if ((split == Split::first && repeated) || (split == Split::repeated && !repeated)) {
        continue;
      }
      evaluator.eval_row(e.edge.view(), e.time, row, ws);
      design.push_back(1.0);
      design.insert(design.end(), row.begin(), row.end());
      response.push_back(*e.outcome);
    }
    for (std::size_t i = begin; i < end; ++i) history.push(data.events[i]);
    begin = end;
  }

  const std::size_t n = response.size();
  const std::size_t cols = k + 1;
  if (n == 0) throw EstimationError("no events selected for the outcome model");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      design.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  Eigen::Map<const Eigen::VectorXd> y(response.data(), static_cast<Eigen::Index>(n));

  RomFit fit;
  fit.labels.push_back("(intercept)");
  for (const auto& s : specs) fit.labels.push_back(s.label());
  fit.n_obs = n;
  fit.dropped.assign(cols, false);

  // Greedy left-to-right collinearity screen; later dependent columns are
  // dropped deterministically.
  std::vector<std::size_t> kept;
  Eigen::MatrixXd basis(n, cols);  // orthonormalized kept columns
  for (std::size_t c = 0; c < cols; ++c) {
    Eigen::VectorXd col = X.col(static_cast<Eigen::Index>(c));
    const double original = col.norm();
    for (std::size_t b = 0; b < kept.size(); ++b) {
      col -= basis.col(static_cast<Eigen::Index>(b)).dot(col) *
             basis.col(static_cast<Eigen::Index>(b));
    }
    if (original == 0.0 || col.norm() <= 1e-10 * std::max(original, 1.0)) {
      if (c == 0) throw EstimationError("degenerate design: intercept column is collinear");
      fit.dropped[c] = true;
      fit.warnings.push_back("dropped collinear column " + fit.labels[c]);
      continue;
    }
    basis.col(static_cast<Eigen::Index>(kept.size())) = col / col.norm();
    kept.push_back(c);
  }

  Eigen::MatrixXd Xk(n, kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Xk.col(static_cast<Eigen::Index>(i)) = X.col(static_cast<Eigen::Index>(kept[i]));
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xk);
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd residuals = y - Xk * beta;
  const double rss = residuals.squaredNorm();
  const double mean_y = y.mean();
  const double tss = (y.array() - mean_y).square().sum();

  const std::size_t kk = kept.size();
  fit.r_squared = tss > 0 ? 1.0 - rss / tss : 0.0;
  fit.adj_r_squared = n > kk ? 1.0 - (1.0 - fit.r_squared) * (static_cast<double>(n) - 1.0) /
                                         (static_cast<double>(n - kk))
                             : fit.r_squared;
  fit.residual_variance = n > kk ? rss / static_cast<double>(n - kk) : 0.0;
  fit.rmse = std::sqrt(rss / static_cast<double>(n));

  const Eigen::MatrixXd xtx_inv =
      (Xk.transpose() * Xk).ldlt().solve(Eigen::MatrixXd::Identity(kk, kk));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.coefficients = Eigen::VectorXd::Constant(cols, nan);
  fit.std_errors = Eigen::VectorXd::Constant(cols, nan);
  fit.p_values = Eigen::VectorXd::Constant(cols, nan);
  for (std::size_t i = 0; i < kk; ++i) {
    const std::size_t c = kept[i];
    fit.coefficients[c] = beta[static_cast<Eigen::Index>(i)];
    const double se = std::sqrt(std::max(0.0, fit.residual_variance *
                                                  xtx_inv(static_cast<Eigen::Index>(i),
                                                          static_cast<Eigen::Index>(i))));
    fit.std_errors[c] = se;
    fit.p_values[c] = se > 0 ? wald_p(fit.coefficients[c] / se) : nan;
  }
  return fit;
}

}  // namespace rhem
