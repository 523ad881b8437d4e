#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rhem {

using NodeId = std::uint32_t;

// Dense ids 0..n-1 assigned in order of first appearance; label <-> id is a
// bijection.
class NodeTable {
 public:
  NodeId intern(const std::string& label);
  std::optional<NodeId> find(const std::string& label) const;
  const std::string& label(NodeId id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
};

// Non-owning view of a hyperedge. Node spans must be sorted and duplicate
// free. Directed views may have an empty side: that encodes a containment
// query which is unconstrained on that side. Owning Hyperedges never do.
struct HyperedgeView {
  bool directed = false;
  std::span<const NodeId> nodes;    // members (undirected) or sources (directed)
  std::span<const NodeId> targets;  // directed only

  static HyperedgeView undirected(std::span<const NodeId> members) {
    return HyperedgeView{false, members, {}};
  }
  static HyperedgeView make_directed(std::span<const NodeId> sources,
                                     std::span<const NodeId> targets) {
    return HyperedgeView{true, sources, targets};
  }
};

// An undirected node set or a directed (sources, targets) pair. Member sets
// are stored sorted and duplicate free; equality is set equality.
class Hyperedge {
 public:
  Hyperedge() = default;

  static Hyperedge undirected(std::vector<NodeId> members);
  static Hyperedge directed(std::vector<NodeId> sources, std::vector<NodeId> targets);

  bool is_directed() const { return directed_; }
  const std::vector<NodeId>& members() const { return nodes_; }
  const std::vector<NodeId>& sources() const { return nodes_; }
  const std::vector<NodeId>& targets() const { return targets_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t source_count() const { return nodes_.size(); }
  std::size_t target_count() const { return targets_.size(); }

  // Directed hyperedge whose sources and targets intersect.
  bool has_loop() const;

  Hyperedge reversed() const;  // directed only: (targets, sources)

  HyperedgeView view() const {
    return HyperedgeView{directed_, {nodes_.data(), nodes_.size()},
                         {targets_.data(), targets_.size()}};
  }

  bool operator==(const Hyperedge& other) const = default;

 private:
  bool directed_ = false;
  std::vector<NodeId> nodes_;
  std::vector<NodeId> targets_;
};

// Transparent hash/equality so hash lookups work with non-owning views.
struct HyperedgeHash {
  using is_transparent = void;
  std::size_t operator()(const Hyperedge& h) const { return (*this)(h.view()); }
  std::size_t operator()(const HyperedgeView& h) const;
};

struct HyperedgeEq {
  using is_transparent = void;
  bool operator()(const Hyperedge& a, const Hyperedge& b) const { return a == b; }
  bool operator()(const Hyperedge& a, const HyperedgeView& b) const;
  bool operator()(const HyperedgeView& a, const Hyperedge& b) const { return (*this)(b, a); }
};

struct Event {
  Hyperedge edge;
  double time = 0.0;
  std::optional<std::string> type;
  std::optional<double> weight;
  std::optional<double> outcome;
};

// An in-memory event sequence together with its node table.
struct Dataset {
  NodeTable nodes;
  std::vector<Event> events;
  bool directed = false;
  bool has_outcomes = false;
  std::size_t truncated_events = 0;  // events clipped to the ingestion size cap
};

}  // namespace rhem
