#include "rhem/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_set>

#include "rhem/errors.hpp"
#include "rhem/parallel.hpp"
#include "rhem/util.hpp"

namespace rhem {

NodePoolIndex::NodePoolIndex(const Dataset& data) {
  const std::size_t n = data.nodes.size();
  std::vector<double> first(n, std::numeric_limits<double>::infinity());
  auto touch = [&first](const std::vector<NodeId>& nodes, double t) {
    for (NodeId v : nodes) {
      if (t < first[v]) first[v] = t;
    }
  };
  for (const Event& e : data.events) {
    if (data.directed) {
      touch(e.edge.sources(), e.time);
      touch(e.edge.targets(), e.time);
    } else {
      touch(e.edge.members(), e.time);
    }
  }
  roster_.resize(n);
  std::iota(roster_.begin(), roster_.end(), 0u);
  by_first_time_.reserve(n);
  for (NodeId v = 0; v < n; ++v) {
    if (std::isfinite(first[v])) by_first_time_.push_back(v);
  }
  std::sort(by_first_time_.begin(), by_first_time_.end(), [&first](NodeId a, NodeId b) {
    if (first[a] != first[b]) return first[a] < first[b];
    return a < b;
  });
  first_times_.reserve(by_first_time_.size());
  for (NodeId v : by_first_time_) first_times_.push_back(first[v]);
}

std::span<const NodeId> NodePoolIndex::active_at(double t) const {
  const auto end = std::upper_bound(first_times_.begin(), first_times_.end(), t);
  return {by_first_time_.data(), static_cast<std::size_t>(end - first_times_.begin())};
}

namespace {

// Distinct non-empty candidate hyperedges over a pool, excluding the case.
std::uint64_t unconstrained_capacity(std::size_t pool, bool directed) {
  if (!directed) {
    if (pool >= 63) return std::numeric_limits<std::uint64_t>::max();
    return ((1ULL << pool) - 1) - 1;
  }
  if (pool >= 32) return std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t side = (1ULL << pool) - 1;
  return side * side - 1;
}

Hyperedge draw_inclusion_subset(std::span<const NodeId> pool, bool directed, Rng& rng) {
  std::vector<NodeId> nodes;
  auto fill = [&pool, &rng](std::vector<NodeId>& out) {
    out.clear();
    do {
      for (NodeId v : pool) {
        if (rng.next() & 1u) out.push_back(v);
      }
    } while (out.empty());
  };
  if (!directed) {
    fill(nodes);
    return Hyperedge::undirected(std::move(nodes));
  }
  std::vector<NodeId> targets;
  fill(nodes);
  fill(targets);
  return Hyperedge::directed(std::move(nodes), std::move(targets));
}

// Uniform k-subset of pool by Floyd's algorithm; result sorted.
std::vector<NodeId> draw_k_subset(std::span<const NodeId> pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  const std::size_t n = pool.size();
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t idx = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) {
      chosen.push_back(j);
    } else {
      chosen.push_back(idx);
    }
  }
  std::vector<NodeId> out;
  out.reserve(k);
  for (std::size_t idx : chosen) out.push_back(pool[idx]);
  std::sort(out.begin(), out.end());
  return out;
}

struct EdgeSetHash {
  std::size_t operator()(const Hyperedge& h) const { return HyperedgeHash{}(h); }
};

}  // namespace

std::vector<Hyperedge> sample_unconstrained(std::span<const NodeId> pool,
                                            const Hyperedge& case_edge, std::uint32_t m,
                                            Rng& rng, const ControlFilter& filter) {
  std::vector<Hyperedge> controls;
  if (m == 0) return controls;
  if (pool.empty()) throw EstimationError("risk set exhausted: empty node pool");
  if (unconstrained_capacity(pool.size(), case_edge.is_directed()) < m) {
    throw EstimationError("risk set exhausted: requested " + std::to_string(m) +
                          " controls from a pool of " + std::to_string(pool.size()) +
                          " nodes");
  }
  std::unordered_set<Hyperedge, EdgeSetHash> seen;
  const std::uint64_t max_attempts = 100ULL * m;
  std::uint64_t attempts = 0;
  while (controls.size() < m) {
    if (attempts++ >= max_attempts) {
      throw EstimationError("risk set exhausted: could not draw " + std::to_string(m) +
                            " distinct controls in " + std::to_string(max_attempts) +
                            " attempts");
    }
    Hyperedge candidate = draw_inclusion_subset(pool, case_edge.is_directed(), rng);
    if (candidate == case_edge) continue;
    if (filter && !filter(candidate)) continue;
    if (!seen.insert(candidate).second) continue;
    controls.push_back(std::move(candidate));
  }
  return controls;
}

std::vector<Hyperedge> sample_conditional_size(std::span<const NodeId> pool,
                                               const Hyperedge& case_edge, std::uint32_t m,
                                               Rng& rng, const ControlFilter& filter) {
  std::vector<Hyperedge> controls;
  if (m == 0) return controls;
  const bool directed = case_edge.is_directed();
  const std::uint64_t needed = static_cast<std::uint64_t>(m) + 1;
  std::uint64_t capacity;
  if (directed) {
    const std::uint64_t ca = binom_capped(pool.size(), case_edge.source_count(), needed + 1);
    const std::uint64_t cb = binom_capped(pool.size(), case_edge.target_count(), needed + 1);
    const unsigned __int128 product = static_cast<unsigned __int128>(ca) * cb;
    capacity = product > needed ? needed + 1 : static_cast<std::uint64_t>(product);
  } else {
    capacity = binom_capped(pool.size(), case_edge.size(), needed + 1);
  }
  if (capacity < needed) {
    throw EstimationError(
        "risk set exhausted: conditional-size risk set holds " + std::to_string(capacity) +
        " hyperedges but " + std::to_string(needed) + " are required (case plus m)");
  }

  std::unordered_set<Hyperedge, EdgeSetHash> seen;
  const std::uint64_t max_attempts = 100ULL * m;
  std::uint64_t attempts = 0;
  while (controls.size() < m) {
    if (attempts++ >= max_attempts) {
      throw EstimationError("risk set exhausted: could not draw " + std::to_string(m) +
                            " distinct size-matched controls in " +
                            std::to_string(max_attempts) + " attempts");
    }
    Hyperedge candidate =
        directed ? Hyperedge::directed(draw_k_subset(pool, case_edge.source_count(), rng),
                                       draw_k_subset(pool, case_edge.target_count(), rng))
                 : Hyperedge::undirected(draw_k_subset(pool, case_edge.size(), rng));
    if (candidate == case_edge) continue;
    if (filter && !filter(candidate)) continue;
    if (!seen.insert(candidate).second) continue;
    controls.push_back(std::move(candidate));
  }
  return controls;
}

std::vector<Hyperedge> sample_repeated(const History& history, double t,
                                       const Hyperedge& case_edge, std::uint32_t m, Rng& rng,
                                       bool& underfilled) {
  underfilled = false;
  const std::size_t eligible = history.distinct_count(t);
  const std::int64_t case_index = history.distinct_index_of(case_edge);
  const bool case_eligible =
      case_index >= 0 && static_cast<std::size_t>(case_index) < eligible;
  const std::size_t available = eligible - (case_eligible ? 1 : 0);

  std::vector<Hyperedge> controls;
  if (available <= m) {
    // Keep the stratum with every eligible control; smaller denominators are
    // still a valid partial likelihood.
    underfilled = available < m;
    controls.reserve(available);
    for (std::size_t i = 0; i < eligible; ++i) {
      if (case_eligible && static_cast<std::size_t>(case_index) == i) continue;
      controls.push_back(history.distinct_edge(i));
    }
    return controls;
  }

  std::unordered_set<std::size_t> chosen;
  controls.reserve(m);
  while (controls.size() < m) {
    const std::size_t idx = static_cast<std::size_t>(rng.below(eligible));
    if (case_eligible && static_cast<std::size_t>(case_index) == idx) continue;
    if (!chosen.insert(idx).second) continue;
    controls.push_back(history.distinct_edge(idx));
  }
  return controls;
}

namespace {

// Enumerate the full risk set over the pool (minus the case), bitmask order.
std::vector<Hyperedge> enumerate_full(std::span<const NodeId> pool, const Hyperedge& case_edge,
                                      std::uint64_t limit, const ControlFilter& filter) {
  const bool directed = case_edge.is_directed();
  const std::size_t n = pool.size();
  if (n >= 63) {
    throw ConfigError("full risk set of " + std::to_string(pool.size()) +
                      " nodes exceeds the enumeration limit");
  }
  const std::uint64_t side = (1ULL << n) - 1;
  const unsigned __int128 cardinality =
      directed ? static_cast<unsigned __int128>(side) * side
               : static_cast<unsigned __int128>(side);
  if (cardinality > limit) {
    throw ConfigError("full risk set of " + std::to_string(pool.size()) +
                      " nodes exceeds the enumeration limit");
  }
  std::vector<NodeId> sorted_pool(pool.begin(), pool.end());
  std::sort(sorted_pool.begin(), sorted_pool.end());

  auto subset_of = [&sorted_pool, n](std::uint64_t mask) {
    std::vector<NodeId> nodes;
    for (std::size_t b = 0; b < n; ++b) {
      if (mask & (1ULL << b)) nodes.push_back(sorted_pool[b]);
    }
    return nodes;
  };

  std::vector<Hyperedge> out;
  if (!directed) {
    for (std::uint64_t mask = 1; mask <= side; ++mask) {
      Hyperedge h = Hyperedge::undirected(subset_of(mask));
      if (h == case_edge) continue;
      if (filter && !filter(h)) continue;
      out.push_back(std::move(h));
    }
  } else {
    for (std::uint64_t ma = 1; ma <= side; ++ma) {
      const auto sources = subset_of(ma);
      for (std::uint64_t mb = 1; mb <= side; ++mb) {
        Hyperedge h = Hyperedge::directed(sources, subset_of(mb));
        if (h == case_edge) continue;
        if (filter && !filter(h)) continue;
        out.push_back(std::move(h));
      }
    }
  }
  return out;
}

}  // namespace

StrataResult build_strata(const Dataset& data, const RiskSetPolicy& policy,
                          const std::vector<StatisticSpec>& specs,
                          const CovariateTable* covariates, Split split, std::uint64_t seed,
                          std::uint32_t replication_index,
                          StatisticEvaluator::Options eval_options) {
  if (policy.kind == RiskSetKind::repeated && split != Split::repeated) {
    throw ConfigError("the repeated risk set requires split=repeated");
  }
  for (const auto& spec : specs) {
    if (split == Split::first &&
        (spec.kind == StatKind::repetition || spec.kind == StatKind::prior_hyperedge_success)) {
      throw ConfigError("statistic " + spec.label() +
                        " is constantly zero on first events and must be removed "
                        "under split=first");
    }
  }

  History history(data.nodes.size(), data.directed, data.has_outcomes);
  StatisticEvaluator evaluator(history, specs, covariates, eval_options);
  NodePoolIndex pools(data);

  StrataResult result;
  result.spec_count = specs.size();
  std::vector<std::optional<Stratum>> slots(data.events.size());
  std::atomic<std::size_t> dropped{0}, underfilled_count{0}, skipped{0};

  auto process_event = [&](std::size_t ordinal) {
    const Event& event = data.events[ordinal];
    const double t = event.time;
    const std::int64_t case_activity = history.activity(event.edge.view(), t);
    if (split == Split::first && case_activity > 0) {
      skipped.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (split == Split::repeated && case_activity == 0) {
      skipped.fetch_add(1, std::memory_order_relaxed);
      return;
    }

    const auto pool = policy.pool == NodePool::active_at_event_time ? pools.active_at(t)
                                                                    : pools.roster();
    ControlFilter filter;
    if (split == Split::first) {
      filter = [&history, t](const Hyperedge& h) { return history.activity(h.view(), t) == 0; };
    } else if (split == Split::repeated && policy.kind != RiskSetKind::repeated) {
      filter = [&history, t](const Hyperedge& h) { return history.activity(h.view(), t) > 0; };
    }

    Stratum stratum;
    stratum.event_ordinal = static_cast<std::uint32_t>(ordinal);
    stratum.time = t;
    stratum.case_edge = event.edge;

    Rng rng(substream_key(seed, replication_index, ordinal));
    try {
      switch (policy.kind) {
        case RiskSetKind::full:
          stratum.controls =
              enumerate_full(pool, event.edge, policy.full_enumeration_limit, filter);
          break;
        case RiskSetKind::unconstrained:
          stratum.controls =
              sample_unconstrained(pool, event.edge, policy.controls, rng, filter);
          break;
        case RiskSetKind::conditional_size:
          stratum.controls =
              sample_conditional_size(pool, event.edge, policy.controls, rng, filter);
          break;
        case RiskSetKind::repeated:
          stratum.controls = sample_repeated(history, t, event.edge, policy.controls, rng,
                                             stratum.underfilled);
          break;
      }
    } catch (const EstimationError&) {
      dropped.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (stratum.controls.empty()) {
      // The partial-likelihood term needs at least one alternative.
      dropped.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (stratum.underfilled) underfilled_count.fetch_add(1, std::memory_order_relaxed);

    const std::size_t k = specs.size();
    stratum.stats.resize((1 + stratum.controls.size()) * k);
    StatisticEvaluator::Workspace ws;
    evaluator.eval_row(event.edge.view(), t, {stratum.stats.data(), k}, ws);
    for (std::size_t c = 0; c < stratum.controls.size(); ++c) {
      evaluator.eval_row(stratum.controls[c].view(), t,
                         {stratum.stats.data() + (c + 1) * k, k}, ws);
    }
    slots[ordinal] = std::move(stratum);
  };

  // Events sharing a timestamp see the same strictly-before snapshot, so each
  // tie group is processed in parallel and then pushed sequentially.
  std::size_t begin = 0;
  while (begin < data.events.size()) {
    std::size_t end = begin + 1;
    while (end < data.events.size() && data.events[end].time == data.events[begin].time) {
      ++end;
    }
    parallel_for(end - begin, [&](std::size_t i) { process_event(begin + i); });
    for (std::size_t i = begin; i < end; ++i) history.push(data.events[i]);
    begin = end;
  }

  result.strata.reserve(data.events.size());
  for (auto& slot : slots) {
    if (slot.has_value()) result.strata.push_back(std::move(*slot));
  }
  result.warnings.dropped_strata = dropped.load();
  result.warnings.underfilled_strata = underfilled_count.load();
  result.warnings.skipped_events = skipped.load();
  return result;
}

}  // namespace rhem
