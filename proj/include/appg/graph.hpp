#pragma once

#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

namespace appg {

using Edge = std::pair<int, int>;

enum class TopologyKind { kLog, kSqrt, kLinear, kFully, kRing, kCustom };

TopologyKind parse_topology_kind(std::string_view name);
std::string_view topology_name(TopologyKind kind);

// Simple directed graph. Self-loops are never stored as edges; instead every
// neighbor set contains the node itself, so |out_neighbors(i)| is the
// push-weight denominator directly.
class DirectedGraph {
 public:
  DirectedGraph(int n, std::vector<Edge> edges);

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Sorted, always contains i.
  const std::vector<int>& out_neighbors(int i) const { return out_[i]; }
  const std::vector<int>& in_neighbors(int i) const { return in_[i]; }

  bool has_edge(int from, int to) const;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
};

// log:    i -> (2^j + i) mod n,    j in [0, log2 n)
// sqrt:   i -> (j^2 + i + 1) mod n, j in [0, sqrt n)
// linear: i -> (5j + i + 1) mod n,  j in [0, n/5)
// fully:  complete digraph
// ring:   i -> i+1 mod n
DirectedGraph build_topology(TopologyKind kind, int n);

// Plain-text edge list: one "i j" pair per line, 0-indexed, '#' comments.
DirectedGraph load_edge_list(const std::filesystem::path& path, int n);

bool is_strongly_connected(const DirectedGraph& g);

// Longest shortest directed path. A single node has diameter 1 by convention.
// Throws std::invalid_argument if g is not strongly connected.
int diameter(const DirectedGraph& g);

}  // namespace appg
