#include "rhem/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace rhem {

NodeId NodeTable::intern(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  const NodeId id = static_cast<NodeId>(labels_.size());
  labels_.push_back(label);
  index_.emplace(label, id);
  return id;
}

std::optional<NodeId> NodeTable::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {
void canonicalize(std::vector<NodeId>& nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
}
}  // namespace

Hyperedge Hyperedge::undirected(std::vector<NodeId> members) {
  canonicalize(members);
  if (members.empty()) {
    throw std::invalid_argument("undirected hyperedge must have at least one member");
  }
  Hyperedge h;
  h.directed_ = false;
  h.nodes_ = std::move(members);
  return h;
}

Hyperedge Hyperedge::directed(std::vector<NodeId> sources, std::vector<NodeId> targets) {
  canonicalize(sources);
  canonicalize(targets);
  if (sources.empty() || targets.empty()) {
    throw std::invalid_argument("directed hyperedge must have at least one source and one target");
  }
  Hyperedge h;
  h.directed_ = true;
  h.nodes_ = std::move(sources);
  h.targets_ = std::move(targets);
  return h;
}

bool Hyperedge::has_loop() const {
  if (!directed_) return false;
  std::size_t i = 0, j = 0;
  while (i < nodes_.size() && j < targets_.size()) {
    if (nodes_[i] < targets_[j]) {
      ++i;
    } else if (targets_[j] < nodes_[i]) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

Hyperedge Hyperedge::reversed() const {
  if (!directed_) throw std::invalid_argument("reversed() requires a directed hyperedge");
  Hyperedge h;
  h.directed_ = true;
  h.nodes_ = targets_;
  h.targets_ = nodes_;
  return h;
}

std::size_t HyperedgeHash::operator()(const HyperedgeView& h) const {
  // FNV-1a over the member ids with a side separator.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](std::uint64_t v) {
    hash ^= v;
    hash *= 0x100000001b3ULL;
  };
  mix(h.directed ? 2u : 1u);
  for (NodeId v : h.nodes) mix(static_cast<std::uint64_t>(v) + 1);
  if (h.directed) {
    mix(0xffffffffULL);
    for (NodeId v : h.targets) mix(static_cast<std::uint64_t>(v) + 1);
  }
  return static_cast<std::size_t>(hash);
}

bool HyperedgeEq::operator()(const Hyperedge& a, const HyperedgeView& b) const {
  if (a.is_directed() != b.directed) return false;
  if (a.members().size() != b.nodes.size()) return false;
  if (!std::equal(a.members().begin(), a.members().end(), b.nodes.begin())) return false;
  if (!a.is_directed()) return true;
  if (a.targets().size() != b.targets.size()) return false;
  return std::equal(a.targets().begin(), a.targets().end(), b.targets.begin());
}

}  // namespace rhem
