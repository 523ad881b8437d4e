#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "rhem/types.hpp"

namespace rhem {

// Append-only store of past events with the inverted indexes that back all
// attribute queries. Every query uses strictly-before semantics: events at
// time t are invisible to queries at t, so events sharing a timestamp never
// see each other.
//
// Writes are single-threaded; any number of readers may query concurrently
// between pushes.
class History {
 public:
  History(std::size_t node_count, bool directed, bool has_outcomes);

  // e.time must be >= the last pushed time; otherwise throws
  // std::invalid_argument naming the offending ordinal.
  void push(const Event& e);

  std::size_t node_count() const { return directed_ ? by_source_.size() : by_member_.size(); }
  bool directed() const { return directed_; }
  bool has_outcomes() const { return has_outcomes_; }
  std::size_t event_count() const { return events_.size(); }
  const Event& event(std::size_t ordinal) const { return events_[ordinal]; }
  double last_time() const { return events_.empty() ? 0.0 : times_.back(); }

  // Number of events with time < t.
  std::size_t events_before(double t) const;

  // Count of past events on exactly h.
  std::int64_t activity(const HyperedgeView& h, double t) const;

  // Count of past events on any superset of h (componentwise for directed
  // views; an empty side is unconstrained).
  std::int64_t degree(const HyperedgeView& h, double t) const;

  // Sum of outcomes over past events on exactly h / on any superset of h.
  // Throws std::invalid_argument when the dataset carries no outcomes.
  double hyperedge_performance(const HyperedgeView& h, double t) const;
  double sub_hyperedge_performance(const HyperedgeView& h, double t) const;

  struct ProfileEntry {
    std::uint32_t ordinal;
    std::uint32_t shared;          // |h ∩ h_e|, or source-side overlap when directed
    std::uint32_t shared_targets;  // target-side overlap (directed only)
  };

  // One entry per past event sharing at least one node with h (on either side
  // for directed views), ordered by ordinal. `scratch` is reusable storage.
  void intersection_profile(const HyperedgeView& h, double t,
                            std::vector<ProfileEntry>& out,
                            std::vector<std::uint32_t>& scratch) const;

  // Ascending ordinals of past events containing h.
  void containing_events(const HyperedgeView& h, double t,
                         std::vector<std::uint32_t>& out) const;

  // Distinct hyperedges in first-occurrence order; the prefix with first
  // event strictly before t is the repeated-events risk set at t.
  std::size_t distinct_count(double t) const;
  const Hyperedge& distinct_edge(std::size_t index) const { return cells_[index].edge; }
  // Index into the distinct-edge list, or -1 if the edge never occurred.
  std::int64_t distinct_index_of(const Hyperedge& h) const;

  // Per-node event-ordinal lists (ascending). Undirected histories use
  // node_events; directed ones the role-specific lists.
  std::span<const std::uint32_t> node_events(NodeId v) const { return span_of(by_member_, v); }
  std::span<const std::uint32_t> node_events_as_source(NodeId v) const {
    return span_of(by_source_, v);
  }
  std::span<const std::uint32_t> node_events_as_target(NodeId v) const {
    return span_of(by_target_, v);
  }

  // Length of the prefix of an ascending ordinal list with event time < t.
  std::size_t prefix_before(std::span<const std::uint32_t> ordinals, double t) const;

  // Nodes with at least one event strictly before t.
  std::size_t active_node_count(double t) const;

  // Sum of outcomes over all events strictly before t.
  double outcome_sum_before(double t) const;

 private:
  struct EdgeCell {
    Hyperedge edge;
    std::vector<std::uint32_t> ordinals;
    std::vector<double> outcome_prefix;  // size ordinals+1 when outcomes present
  };

  std::span<const std::uint32_t> span_of(const std::vector<std::vector<std::uint32_t>>& lists,
                                         NodeId v) const {
    const auto& l = lists.at(v);
    return {l.data(), l.size()};
  }

  // Intersects the per-node lists implied by h, truncated to time < t, and
  // appends surviving ordinals to out. Returns false if any required list is
  // empty (out untouched).
  bool intersect_lists(const HyperedgeView& h, double t, std::vector<std::uint32_t>& out) const;

  const EdgeCell* find_cell(const HyperedgeView& h) const;

  bool directed_ = false;
  bool has_outcomes_ = false;
  std::vector<Event> events_;
  std::vector<double> times_;  // parallel to events_
  std::vector<double> outcome_prefix_all_;

  std::vector<std::vector<std::uint32_t>> by_member_;
  std::vector<std::vector<std::uint32_t>> by_source_;
  std::vector<std::vector<std::uint32_t>> by_target_;
  std::vector<double> node_first_times_;  // sorted; one entry per activated node

  std::vector<EdgeCell> cells_;            // first-occurrence order
  std::vector<double> cell_first_times_;   // parallel to cells_, non-decreasing
  std::unordered_map<Hyperedge, std::uint32_t, HyperedgeHash, HyperedgeEq> cell_index_;
};

}  // namespace rhem
