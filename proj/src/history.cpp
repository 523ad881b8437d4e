#include "rhem/history.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace rhem {

History::History(std::size_t node_count, bool directed, bool has_outcomes)
    : directed_(directed), has_outcomes_(has_outcomes) {
  if (directed_) {
    by_source_.resize(node_count);
    by_target_.resize(node_count);
  } else {
    by_member_.resize(node_count);
  }
  outcome_prefix_all_.push_back(0.0);
}

void History::push(const Event& e) {
  const std::size_t ordinal = events_.size();
  if (!events_.empty() && e.time < times_.back()) {
    throw std::invalid_argument("event " + std::to_string(ordinal) +
                                " is out of order: time " + std::to_string(e.time) +
                                " < previous time " + std::to_string(times_.back()));
  }
  if (e.edge.is_directed() != directed_) {
    throw std::invalid_argument("event " + std::to_string(ordinal) +
                                " does not match the history's directedness");
  }
  if (has_outcomes_ && !e.outcome.has_value()) {
    throw std::invalid_argument("event " + std::to_string(ordinal) +
                                " is missing an outcome but the dataset declares outcomes");
  }

  // Record fresh node activations before touching any list, so a node that
  // appears on both sides of a loop is counted once.
  auto record_activation = [this, &e](NodeId v) {
    const bool seen = directed_ ? (!by_source_.at(v).empty() || !by_target_.at(v).empty())
                                : !by_member_.at(v).empty();
    if (!seen) node_first_times_.push_back(e.time);
  };
  if (directed_) {
    for (NodeId v : e.edge.sources()) record_activation(v);
    for (NodeId v : e.edge.targets()) {
      if (!std::binary_search(e.edge.sources().begin(), e.edge.sources().end(), v)) {
        record_activation(v);
      }
    }
    for (NodeId v : e.edge.sources()) {
      by_source_.at(v).push_back(static_cast<std::uint32_t>(ordinal));
    }
    for (NodeId v : e.edge.targets()) {
      by_target_.at(v).push_back(static_cast<std::uint32_t>(ordinal));
    }
  } else {
    for (NodeId v : e.edge.members()) {
      record_activation(v);
      by_member_.at(v).push_back(static_cast<std::uint32_t>(ordinal));
    }
  }

  auto it = cell_index_.find(e.edge);
  if (it == cell_index_.end()) {
    const std::uint32_t idx = static_cast<std::uint32_t>(cells_.size());
    cells_.push_back(EdgeCell{e.edge, {}, {}});
    if (has_outcomes_) cells_.back().outcome_prefix.push_back(0.0);
    cell_first_times_.push_back(e.time);
    cell_index_.emplace(e.edge, idx);
    it = cell_index_.find(e.edge);
  }
  EdgeCell& cell = cells_[it->second];
  cell.ordinals.push_back(static_cast<std::uint32_t>(ordinal));
  if (has_outcomes_) {
    cell.outcome_prefix.push_back(cell.outcome_prefix.back() + *e.outcome);
  }

  if (has_outcomes_) {
    outcome_prefix_all_.push_back(outcome_prefix_all_.back() + *e.outcome);
  }
  times_.push_back(e.time);
  events_.push_back(e);
}

std::size_t History::events_before(double t) const {
  return static_cast<std::size_t>(
      std::lower_bound(times_.begin(), times_.end(), t) - times_.begin());
}

std::size_t History::prefix_before(std::span<const std::uint32_t> ordinals, double t) const {
  auto it = std::partition_point(ordinals.begin(), ordinals.end(),
                                 [this, t](std::uint32_t o) { return times_[o] < t; });
  return static_cast<std::size_t>(it - ordinals.begin());
}

std::size_t History::active_node_count(double t) const {
  return static_cast<std::size_t>(
      std::lower_bound(node_first_times_.begin(), node_first_times_.end(), t) -
      node_first_times_.begin());
}

double History::outcome_sum_before(double t) const {
  if (!has_outcomes_) throw std::invalid_argument("outcomes not available");
  return outcome_prefix_all_[events_before(t)];
}

const History::EdgeCell* History::find_cell(const HyperedgeView& h) const {
  auto it = cell_index_.find(h);
  if (it == cell_index_.end()) return nullptr;
  return &cells_[it->second];
}

std::int64_t History::activity(const HyperedgeView& h, double t) const {
  const EdgeCell* cell = find_cell(h);
  if (cell == nullptr) return 0;
  return static_cast<std::int64_t>(prefix_before(
      {cell->ordinals.data(), cell->ordinals.size()}, t));
}

std::int64_t History::distinct_index_of(const Hyperedge& h) const {
  auto it = cell_index_.find(h);
  if (it == cell_index_.end()) return -1;
  return static_cast<std::int64_t>(it->second);
}

std::size_t History::distinct_count(double t) const {
  return static_cast<std::size_t>(
      std::lower_bound(cell_first_times_.begin(), cell_first_times_.end(), t) -
      cell_first_times_.begin());
}

bool History::intersect_lists(const HyperedgeView& h, double t,
                              std::vector<std::uint32_t>& out) const {
  struct Trimmed {
    const std::uint32_t* data;
    std::size_t len;
  };
  std::vector<Trimmed> lists;
  auto add = [&](std::span<const std::uint32_t> full) {
    lists.push_back(Trimmed{full.data(), prefix_before(full, t)});
  };
  if (h.directed != directed_) {
    throw std::invalid_argument("hyperedge directedness does not match the history");
  }
  if (directed_) {
    for (NodeId v : h.nodes) add(node_events_as_source(v));
    for (NodeId v : h.targets) add(node_events_as_target(v));
  } else {
    for (NodeId v : h.nodes) add(node_events(v));
  }

  if (lists.empty()) {
    // Unconstrained query: every past event matches.
    const std::size_t n = events_before(t);
    out.reserve(out.size() + n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint32_t>(i));
    return true;
  }
  for (const auto& l : lists) {
    if (l.len == 0) return false;
  }
  std::sort(lists.begin(), lists.end(),
            [](const Trimmed& a, const Trimmed& b) { return a.len < b.len; });

  // Walk the smallest list; advance a cursor in each other list.
  std::vector<std::size_t> cursor(lists.size(), 0);
  const Trimmed& base = lists[0];
  for (std::size_t i = 0; i < base.len; ++i) {
    const std::uint32_t o = base.data[i];
    bool in_all = true;
    for (std::size_t j = 1; j < lists.size(); ++j) {
      const Trimmed& l = lists[j];
      const std::uint32_t* begin = l.data + cursor[j];
      const std::uint32_t* end = l.data + l.len;
      const std::uint32_t* pos = std::lower_bound(begin, end, o);
      cursor[j] = static_cast<std::size_t>(pos - l.data);
      if (pos == end) return true;  // no further matches possible
      if (*pos != o) {
        in_all = false;
        break;
      }
    }
    if (in_all) out.push_back(o);
  }
  return true;
}

std::int64_t History::degree(const HyperedgeView& h, double t) const {
  // Single-list fast paths avoid the intersection machinery.
  if (!directed_ && h.nodes.size() == 1) {
    return static_cast<std::int64_t>(prefix_before(node_events(h.nodes[0]), t));
  }
  if (directed_ && h.nodes.size() + h.targets.size() == 1) {
    if (h.nodes.size() == 1) {
      return static_cast<std::int64_t>(prefix_before(node_events_as_source(h.nodes[0]), t));
    }
    return static_cast<std::int64_t>(prefix_before(node_events_as_target(h.targets[0]), t));
  }
  if (h.nodes.empty() && h.targets.empty()) {
    return static_cast<std::int64_t>(events_before(t));
  }
  std::vector<std::uint32_t> hits;
  if (!intersect_lists(h, t, hits)) return 0;
  return static_cast<std::int64_t>(hits.size());
}

void History::containing_events(const HyperedgeView& h, double t,
                                std::vector<std::uint32_t>& out) const {
  out.clear();
  intersect_lists(h, t, out);
}

double History::hyperedge_performance(const HyperedgeView& h, double t) const {
  if (!has_outcomes_) throw std::invalid_argument("outcomes not available");
  const EdgeCell* cell = find_cell(h);
  if (cell == nullptr) return 0.0;
  const std::size_t k = prefix_before({cell->ordinals.data(), cell->ordinals.size()}, t);
  return cell->outcome_prefix[k];
}

double History::sub_hyperedge_performance(const HyperedgeView& h, double t) const {
  if (!has_outcomes_) throw std::invalid_argument("outcomes not available");
  std::vector<std::uint32_t> hits;
  if (!intersect_lists(h, t, hits)) return 0.0;
  double sum = 0.0;
  for (std::uint32_t o : hits) sum += *events_[o].outcome;
  return sum;
}

void History::intersection_profile(const HyperedgeView& h, double t,
                                   std::vector<ProfileEntry>& out,
                                   std::vector<std::uint32_t>& scratch) const {
  out.clear();
  if (h.directed != directed_) {
    throw std::invalid_argument("hyperedge directedness does not match the history");
  }
  auto gather = [&](std::span<const NodeId> nodes, bool as_target) {
    scratch.clear();
    for (NodeId v : nodes) {
      const auto full = directed_ ? (as_target ? node_events_as_target(v)
                                               : node_events_as_source(v))
                                  : node_events(v);
      const std::size_t len = prefix_before(full, t);
      scratch.insert(scratch.end(), full.begin(), full.begin() + len);
    }
    std::sort(scratch.begin(), scratch.end());
  };

  if (!directed_) {
    gather(h.nodes, false);
    for (std::size_t i = 0; i < scratch.size();) {
      std::size_t j = i;
      while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
      out.push_back(ProfileEntry{scratch[i], static_cast<std::uint32_t>(j - i), 0});
      i = j;
    }
    return;
  }

  // Directed: run-length encode each side, then merge by ordinal.
  gather(h.nodes, false);
  std::vector<ProfileEntry> source_side;
  for (std::size_t i = 0; i < scratch.size();) {
    std::size_t j = i;
    while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
    source_side.push_back(ProfileEntry{scratch[i], static_cast<std::uint32_t>(j - i), 0});
    i = j;
  }
  gather(h.targets, true);
  std::size_t si = 0;
  std::size_t i = 0;
  auto flush_source_until = [&](std::uint32_t ordinal) {
    while (si < source_side.size() && source_side[si].ordinal < ordinal) {
      out.push_back(source_side[si]);
      ++si;
    }
  };
  while (i < scratch.size()) {
    std::size_t j = i;
    while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
    const std::uint32_t ordinal = scratch[i];
    const std::uint32_t count = static_cast<std::uint32_t>(j - i);
    flush_source_until(ordinal);
    if (si < source_side.size() && source_side[si].ordinal == ordinal) {
      out.push_back(ProfileEntry{ordinal, source_side[si].shared, count});
      ++si;
    } else {
      out.push_back(ProfileEntry{ordinal, 0, count});
    }
    i = j;
  }
  flush_source_until(std::numeric_limits<std::uint32_t>::max());
}

}  // namespace rhem
