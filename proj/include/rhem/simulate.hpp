#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rhem/statistics.hpp"
#include "rhem/types.hpp"

namespace rhem {

enum class CandidatePolicy {
  full,                      // all non-empty subsets; node_count <= 20
  conditional_size_empirical,  // size drawn from size_pool, all subsets of that size
  repeated_plus_innovation   // previously active hyperedges, fresh edges with rate epsilon
};

struct OutcomeModel {
  std::vector<double> coefficients;  // intercept first, then one per spec
  double noise_sd = 1.0;
};

struct SimConfig {
  std::size_t node_count = 10;
  std::size_t event_count = 1000;
  std::vector<StatisticSpec> specs;
  std::vector<double> theta;  // one per spec
  CandidatePolicy policy = CandidatePolicy::full;
  std::vector<std::uint32_t> size_pool;   // empirical sizes; also innovation sizes
  double innovation_rate = 0.1;           // repeated_plus_innovation only
  std::optional<OutcomeModel> outcome;
  std::uint64_t seed = 1;
  std::uint64_t enumeration_limit = 1u << 20;
};

// Sequential generative draw: at each step the next hyperedge is selected
// from the policy's candidate set with probability proportional to
// exp(theta · s(h)) against the running history. Event times are 1..N; the
// ordinal likelihood is invariant to monotone time transforms, so nothing is
// lost by the integer clock.
Dataset simulate(const SimConfig& config);

// 23-node stream with a bimodal size distribution (heavy singleton mass plus
// repeated near-full meetings), for exercising unconstrained-risk-set models.
Dataset make_meeting_like(std::uint64_t seed, std::size_t event_count = 886);

}  // namespace rhem
