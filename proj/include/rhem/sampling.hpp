#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rhem/history.hpp"
#include "rhem/rng.hpp"
#include "rhem/statistics.hpp"
#include "rhem/types.hpp"

namespace rhem {

enum class RiskSetKind { full, unconstrained, conditional_size, repeated };
enum class NodePool { active_at_event_time, full_roster };
enum class Split { all, first, repeated };

struct RiskSetPolicy {
  RiskSetKind kind = RiskSetKind::conditional_size;
  std::uint32_t controls = 1;  // m, for the sampled kinds
  NodePool pool = NodePool::active_at_event_time;
  std::uint64_t full_enumeration_limit = 1u << 20;
};

// One observed event (case) plus its sampled non-event controls, scored on
// the run's statistics. Row 0 of the matrix is the case.
struct Stratum {
  std::uint32_t event_ordinal = 0;
  double time = 0.0;
  Hyperedge case_edge;
  std::vector<Hyperedge> controls;
  std::vector<double> stats;  // (1 + controls) x spec_count, row major
  bool underfilled = false;

  std::size_t rows() const { return controls.size() + 1; }
};

struct BuildWarnings {
  std::size_t dropped_strata = 0;     // sampling failed; stratum discarded
  std::size_t underfilled_strata = 0; // repeated risk set smaller than m
  std::size_t skipped_events = 0;     // excluded by the first/repeated split
};

struct StrataResult {
  std::vector<Stratum> strata;
  std::size_t spec_count = 0;
  BuildWarnings warnings;

  std::size_t observation_count() const {
    std::size_t n = 0;
    for (const auto& s : strata) n += s.rows();
    return n;
  }
};

// Node pool per event time, derived from the full event list: a node is
// active at t once it participates in any event at or before t.
class NodePoolIndex {
 public:
  explicit NodePoolIndex(const Dataset& data);
  std::span<const NodeId> active_at(double t) const;
  std::span<const NodeId> roster() const { return {roster_.data(), roster_.size()}; }

 private:
  std::vector<NodeId> by_first_time_;
  std::vector<double> first_times_;  // non-decreasing, parallel to by_first_time_
  std::vector<NodeId> roster_;
};

// Optional per-candidate admission test used by the first-event split.
using ControlFilter = std::function<bool(const Hyperedge&)>;

// m distinct non-empty hyperedges over the pool, uniform over all candidates,
// none equal to case_edge, drawn by fair inclusion with rejection. Directed
// cases sample both sides from the pool. Throws EstimationError("risk set
// exhausted") when the pool cannot supply m distinct controls.
std::vector<Hyperedge> sample_unconstrained(std::span<const NodeId> pool,
                                            const Hyperedge& case_edge, std::uint32_t m,
                                            Rng& rng, const ControlFilter& filter = {});

// m distinct uniform size-matched subsets (componentwise for directed cases).
std::vector<Hyperedge> sample_conditional_size(std::span<const NodeId> pool,
                                               const Hyperedge& case_edge, std::uint32_t m,
                                               Rng& rng, const ControlFilter& filter = {});

// m distinct hyperedges uniform over those with at least one event strictly
// before t, excluding the case. When fewer than m are eligible all of them
// are returned and underfilled is set.
std::vector<Hyperedge> sample_repeated(const History& history, double t,
                                       const Hyperedge& case_edge, std::uint32_t m, Rng& rng,
                                       bool& underfilled);

// Full sweep: for each admitted event, snapshot the strictly-before history,
// draw controls, score case and controls, then push the event. Deterministic
// given (seed, replication_index) for any thread count.
StrataResult build_strata(const Dataset& data, const RiskSetPolicy& policy,
                          const std::vector<StatisticSpec>& specs,
                          const CovariateTable* covariates, Split split, std::uint64_t seed,
                          std::uint32_t replication_index,
                          StatisticEvaluator::Options eval_options = {});

}  // namespace rhem
