#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rhem/history.hpp"
#include "rhem/types.hpp"

namespace rhem {

enum class Aggregator { mean, min, max, sum, sd };

enum class StatKind {
  size,
  size_squared,
  num_sources,
  num_targets,
  repetition,
  sub_repetition,              // undirected, order p
  sub_repetition_directed,     // order (p,q), p+q >= 1
  shared_prior_events,         // undirected, order p
  reciprocation,               // directed one-mode
  sub_reciprocation,           // order (p,q) of the reversed hyperedge
  switch_reciprocation,        // order l, loopless directed
  closure,                     // undirected (p,q,l)
  transitive_closure,          // directed (p,q,l), loopless
  cyclic_closure,
  shared_receivers,
  shared_senders,
  covariate_aggregate,         // exogenous node attribute + aggregator
  prior_hyperedge_success,     // requires outcomes
  prior_sub_hyperedge_success  // order p, undirected, requires outcomes
};

// A parsed entry of the statistic grammar `name(order...)[:aggregator]`,
// e.g. "subrep(2):mean", "closure(1,1,1)", "covagg(age):sd".
struct StatisticSpec {
  StatKind kind = StatKind::size;
  int p = 0;
  int q = 0;
  int l = 0;
  std::string attribute;
  Aggregator aggregator = Aggregator::mean;

  std::string label() const;
  bool directed_only() const;
  bool undirected_only() const;
  bool needs_outcomes() const;
  bool supports_aggregator() const;

  static StatisticSpec parse(std::string_view text);

  bool operator==(const StatisticSpec&) const = default;
};

std::string_view aggregator_name(Aggregator a);

// Exogenous per-node attributes keyed by the ingestion node table. Every
// ingested node must be covered; missing values fail at load.
class CovariateTable {
 public:
  static CovariateTable load(const std::string& path, const NodeTable& nodes);
  static CovariateTable from_columns(std::vector<std::string> names,
                                     std::vector<std::vector<double>> columns);

  std::optional<std::size_t> attribute_index(std::string_view name) const;
  double value(std::size_t attribute, NodeId node) const { return columns_[attribute][node]; }
  const std::vector<std::string>& attribute_names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;  // [attribute][node]
};

// Evaluates statistic vectors s(h; t) against an immutable History snapshot.
// Stateless between calls; safe for unrestricted parallel use as long as each
// thread owns its Workspace.
class StatisticEvaluator {
 public:
  struct Options {
    // Closure normalizers use the full node roster by default; with this set
    // they use the count of nodes active strictly before t.
    bool closure_active_pool = false;
  };

  struct Workspace {
    std::vector<History::ProfileEntry> profile;      // for the row's own orientation
    std::vector<History::ProfileEntry> profile_rev;  // for reversed-hyperedge statistics
    bool profile_valid = false;
    std::vector<std::uint32_t> scratch;
    std::vector<std::uint32_t> ord1, ord2, ord_tmp;
    std::vector<NodeId> nodes1, nodes2, candidates;
    std::vector<NodeId> sub1, sub2;
    std::vector<double> values;
  };

  StatisticEvaluator(const History& history, std::vector<StatisticSpec> specs,
                     const CovariateTable* covariates = nullptr, Options options = {});

  const std::vector<StatisticSpec>& specs() const { return specs_; }
  std::size_t spec_count() const { return specs_.size(); }

  double eval(std::size_t spec_index, const HyperedgeView& h, double t) const;
  double eval(std::size_t spec_index, const HyperedgeView& h, double t, Workspace& ws) const;

  // All specs for one hyperedge; out.size() must equal spec_count().
  void eval_row(const HyperedgeView& h, double t, std::span<double> out, Workspace& ws) const;

  // Row-major |hs| x spec_count matrix.
  std::vector<double> eval_batch(std::span<const Hyperedge> hs, double t) const;

 private:
  void validate_spec(const StatisticSpec& spec) const;
  void ensure_profile(const HyperedgeView& h, double t, Workspace& ws) const;

  double eval_one(std::size_t spec_index, const HyperedgeView& h, double t,
                  Workspace& ws) const;
  double sub_repetition_undirected(const StatisticSpec& spec, const HyperedgeView& h, double t,
                                   Workspace& ws) const;
  double sub_repetition_directed(const StatisticSpec& spec, std::span<const NodeId> sources,
                                 std::span<const NodeId> targets, double t, Workspace& ws,
                                 bool profile_usable) const;
  double switch_reciprocation(const StatisticSpec& spec, const HyperedgeView& h, double t,
                              Workspace& ws) const;
  double closure_undirected(const StatisticSpec& spec, const HyperedgeView& h, double t,
                            Workspace& ws) const;
  double closure_directed(const StatisticSpec& spec, const HyperedgeView& h, double t,
                          Workspace& ws) const;
  double covariate_aggregate(const StatisticSpec& spec, std::size_t attribute,
                             const HyperedgeView& h) const;
  double node_universe(double t) const;

  const History& history_;
  std::vector<StatisticSpec> specs_;
  const CovariateTable* covariates_;
  Options options_;
  std::vector<std::size_t> attribute_indices_;  // per spec; only covagg entries used
};

}  // namespace rhem
