#include "rhem/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "rhem/errors.hpp"
#include "rhem/history.hpp"
#include "rhem/rng.hpp"
#include "rhem/util.hpp"

namespace rhem {

namespace {

std::string node_label(std::size_t i) {
  std::string s = std::to_string(i);
  while (s.size() < 4) s.insert(s.begin(), '0');
  return "n" + s;
}

std::vector<Hyperedge> enumerate_subsets(std::size_t n, std::uint64_t limit) {
  if (n >= 63 || ((1ULL << n) - 1) > limit) {
    throw ConfigError("candidate enumeration over " + std::to_string(n) +
                      " nodes exceeds the limit");
  }
  std::vector<Hyperedge> out;
  const std::uint64_t top = (1ULL << n) - 1;
  out.reserve(top);
  for (std::uint64_t mask = 1; mask <= top; ++mask) {
    std::vector<NodeId> nodes;
    for (std::size_t b = 0; b < n; ++b) {
      if (mask & (1ULL << b)) nodes.push_back(static_cast<NodeId>(b));
    }
    out.push_back(Hyperedge::undirected(std::move(nodes)));
  }
  return out;
}

std::vector<Hyperedge> enumerate_k_subsets(std::size_t n, std::size_t k,
                                           std::uint64_t limit) {
  if (binom_capped(n, k, limit + 1) > limit) {
    throw ConfigError("size-" + std::to_string(k) + " candidate enumeration over " +
                      std::to_string(n) + " nodes exceeds the limit");
  }
  std::vector<Hyperedge> out;
  for_each_combination(n, k, [&out](std::span<const std::size_t> idx) {
    std::vector<NodeId> nodes(idx.begin(), idx.end());
    out.push_back(Hyperedge::undirected(std::move(nodes)));
  });
  return out;
}

std::vector<NodeId> random_distinct_nodes(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<NodeId> nodes;
  nodes.reserve(k);
  while (nodes.size() < k) {
    const NodeId v = static_cast<NodeId>(rng.below(n));
    if (std::find(nodes.begin(), nodes.end(), v) == nodes.end()) nodes.push_back(v);
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

}  // namespace

Dataset simulate(const SimConfig& config) {
  if (config.theta.size() != config.specs.size()) {
    throw ConfigError("theta length must match the number of statistics");
  }
  if (config.policy == CandidatePolicy::full && config.node_count > 20) {
    throw ConfigError("full candidate policy is limited to 20 nodes");
  }
  if (config.policy == CandidatePolicy::conditional_size_empirical &&
      config.size_pool.empty()) {
    throw ConfigError("conditional-size simulation needs a non-empty size pool");
  }
  if (config.innovation_rate < 0.0 || config.innovation_rate > 1.0) {
    throw ConfigError("innovation rate must lie in [0,1]");
  }
  for (std::uint32_t s : config.size_pool) {
    if (s < 1 || s > config.node_count) {
      throw ConfigError("size pool entries must lie in [1, node_count]");
    }
  }
  if (config.outcome.has_value() &&
      config.outcome->coefficients.size() != config.specs.size() + 1) {
    throw ConfigError("outcome coefficients must be intercept plus one per statistic");
  }

  Dataset data;
  data.directed = false;
  data.has_outcomes = config.outcome.has_value();
  for (std::size_t i = 0; i < config.node_count; ++i) data.nodes.intern(node_label(i));

  History history(config.node_count, false, data.has_outcomes);
  StatisticEvaluator evaluator(history, config.specs);
  StatisticEvaluator::Workspace ws;
  Rng rng(substream_key(config.seed, 0, 0));

  std::vector<Hyperedge> full_candidates;
  std::map<std::uint32_t, std::vector<Hyperedge>> by_size;
  if (config.policy == CandidatePolicy::full) {
    full_candidates = enumerate_subsets(config.node_count, config.enumeration_limit);
  }

  const std::size_t k = config.specs.size();
  std::vector<double> row(k);
  std::vector<double> scores;

  auto select_softmax = [&](std::span<const Hyperedge> candidates, double t) -> std::size_t {
    scores.clear();
    scores.reserve(candidates.size());
    double max_score = -std::numeric_limits<double>::infinity();
    for (const Hyperedge& h : candidates) {
      evaluator.eval_row(h.view(), t, row, ws);
      double dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += config.theta[j] * row[j];
      if (!std::isfinite(dot)) {
        throw EstimationError(
            "overflow in exp while simulating; standardize the statistics or shrink theta");
      }
      scores.push_back(dot);
      max_score = std::max(max_score, dot);
    }
    double total = 0;
    for (double& s : scores) {
      s = std::exp(s - max_score);
      total += s;
    }
    const double pick = rng.uniform01() * total;
    double cumulative = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      cumulative += scores[i];
      if (pick < cumulative) return i;
    }
    return scores.size() - 1;
  };

  for (std::size_t step = 1; step <= config.event_count; ++step) {
    const double t = static_cast<double>(step);
    Hyperedge chosen;
    switch (config.policy) {
      case CandidatePolicy::full: {
        chosen = full_candidates[select_softmax(full_candidates, t)];
        break;
      }
      case CandidatePolicy::conditional_size_empirical: {
        const std::uint32_t size =
            config.size_pool[rng.below(config.size_pool.size())];
        auto it = by_size.find(size);
        if (it == by_size.end()) {
          it = by_size
                   .emplace(size, enumerate_k_subsets(config.node_count, size,
                                                      config.enumeration_limit))
                   .first;
        }
        chosen = it->second[select_softmax(it->second, t)];
        break;
      }
      case CandidatePolicy::repeated_plus_innovation: {
        const std::size_t eligible = history.distinct_count(t);
        if (eligible == 0 || rng.uniform01() < config.innovation_rate) {
          std::size_t size = 0;
          if (!config.size_pool.empty()) {
            size = config.size_pool[rng.below(config.size_pool.size())];
          } else {
            // fair-inclusion fresh draw
            std::vector<NodeId> nodes;
            do {
              nodes.clear();
              for (std::size_t v = 0; v < config.node_count; ++v) {
                if (rng.next() & 1u) nodes.push_back(static_cast<NodeId>(v));
              }
            } while (nodes.empty());
            chosen = Hyperedge::undirected(std::move(nodes));
            break;
          }
          chosen = Hyperedge::undirected(random_distinct_nodes(config.node_count, size, rng));
        } else {
          std::vector<Hyperedge> candidates;
          candidates.reserve(eligible);
          for (std::size_t i = 0; i < eligible; ++i) {
            candidates.push_back(history.distinct_edge(i));
          }
          chosen = candidates[select_softmax(candidates, t)];
        }
        break;
      }
    }

    Event event;
    event.edge = chosen;
    event.time = t;
    if (config.outcome.has_value()) {
      evaluator.eval_row(chosen.view(), t, row, ws);
      double y = config.outcome->coefficients[0];
      for (std::size_t j = 0; j < k; ++j) y += config.outcome->coefficients[j + 1] * row[j];
      y += config.outcome->noise_sd * rng.normal();
      event.outcome = y;
    }
    history.push(event);
    data.events.push_back(std::move(event));
  }
  return data;
}

Dataset make_meeting_like(std::uint64_t seed, std::size_t event_count) {
  constexpr std::size_t kMinisters = 23;
  Dataset data;
  data.directed = false;
  data.has_outcomes = false;
  for (std::size_t i = 0; i < kMinisters; ++i) {
    std::string label = "m" + std::string(i + 1 < 10 ? "0" : "") + std::to_string(i + 1);
    data.nodes.intern(label);
  }

  // Skewed weights for one-on-one meetings, so a handful of frequent contacts
  // dominate the singleton mass.
  std::vector<double> weights(kMinisters);
  double total_weight = 0;
  for (std::size_t i = 0; i < kMinisters; ++i) {
    weights[i] = 1.0 / static_cast<double>(i + 1);
    total_weight += weights[i];
  }

  // Three recurring large meetings: the full set and two fixed 21/22-member
  // variants.
  std::vector<std::vector<NodeId>> cabinets;
  {
    std::vector<NodeId> all(kMinisters);
    for (std::size_t i = 0; i < kMinisters; ++i) all[i] = static_cast<NodeId>(i);
    cabinets.push_back(all);
    cabinets.push_back(std::vector<NodeId>(all.begin(), all.begin() + 21));
    cabinets.push_back(std::vector<NodeId>(all.begin() + 1, all.end()));
  }

  Rng rng(substream_key(seed, 17, 0));
  for (std::size_t step = 1; step <= event_count; ++step) {
    const double u = rng.uniform01();
    std::vector<NodeId> nodes;
    if (u < 0.55) {
      double pick = rng.uniform01() * total_weight;
      std::size_t who = 0;
      for (; who + 1 < kMinisters; ++who) {
        pick -= weights[who];
        if (pick < 0) break;
      }
      nodes.push_back(static_cast<NodeId>(who));
    } else if (u < 0.85) {
      nodes = cabinets[rng.below(cabinets.size())];
    } else {
      const std::size_t size = 3 + static_cast<std::size_t>(rng.below(7));  // 3..9
      nodes = random_distinct_nodes(kMinisters, size, rng);
    }
    Event event;
    event.edge = Hyperedge::undirected(std::move(nodes));
    event.time = static_cast<double>(step);
    data.events.push_back(std::move(event));
  }
  return data;
}

}  // namespace rhem
