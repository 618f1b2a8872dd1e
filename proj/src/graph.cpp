#include "appg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "appg/errors.hpp"

namespace appg {

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "log") return TopologyKind::kLog;
  if (name == "sqrt") return TopologyKind::kSqrt;
  if (name == "linear") return TopologyKind::kLinear;
  if (name == "fully") return TopologyKind::kFully;
  if (name == "ring") return TopologyKind::kRing;
  if (name == "custom") return TopologyKind::kCustom;
  throw std::invalid_argument("unknown topology kind: " + std::string(name));
}

std::string_view topology_name(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kLog: return "log";
    case TopologyKind::kSqrt: return "sqrt";
    case TopologyKind::kLinear: return "linear";
    case TopologyKind::kFully: return "fully";
    case TopologyKind::kRing: return "ring";
    case TopologyKind::kCustom: return "custom";
  }
  return "unknown";
}

DirectedGraph::DirectedGraph(int n, std::vector<Edge> edges) : n_(n) {
  if (n < 1) throw std::invalid_argument("graph needs at least one node");
  for (const auto& [from, to] : edges) {
    if (from < 0 || from >= n || to < 0 || to >= n) {
      throw std::invalid_argument("edge (" + std::to_string(from) + "," +
                                  std::to_string(to) + ") references a node >= n");
    }
  }
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  out_.assign(n, {});
  in_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    out_[i].push_back(i);
    in_[i].push_back(i);
  }
  for (const auto& [from, to] : edges_) {
    out_[from].push_back(to);
    in_[to].push_back(from);
  }
  for (int i = 0; i < n; ++i) {
    std::sort(out_[i].begin(), out_[i].end());
    std::sort(in_[i].begin(), in_[i].end());
  }
}

bool DirectedGraph::has_edge(int from, int to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

DirectedGraph build_topology(TopologyKind kind, int n) {
  if (n < 1) throw std::invalid_argument("topology size must be positive");
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::kLog:
      // j ranges while 2^j < n.
      for (int i = 0; i < n; ++i) {
        for (long long p = 1; p < n; p *= 2) edges.emplace_back(i, static_cast<int>((p + i) % n));
      }
      break;
    case TopologyKind::kSqrt:
      for (int i = 0; i < n; ++i) {
        for (long long j = 0; j * j < n; ++j) {
          edges.emplace_back(i, static_cast<int>((j * j + i + 1) % n));
        }
      }
      break;
    case TopologyKind::kLinear:
      for (int i = 0; i < n; ++i) {
        for (long long j = 0; 5 * j < n; ++j) {
          edges.emplace_back(i, static_cast<int>((5 * j + i + 1) % n));
        }
      }
      break;
    case TopologyKind::kFully:
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) edges.emplace_back(i, j);
      }
      break;
    case TopologyKind::kRing:
      for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      break;
    case TopologyKind::kCustom:
      throw std::invalid_argument("custom topology needs an edge list");
  }
  return DirectedGraph(n, std::move(edges));
}

DirectedGraph load_edge_list(const std::filesystem::path& path, int n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list " + path.string());
  std::vector<Edge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    int from = 0;
    int to = 0;
    if (!(fields >> from)) continue;
    if (!(fields >> to)) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected two node ids");
    }
    edges.emplace_back(from, to);
  }
  return DirectedGraph(n, std::move(edges));
}

namespace {

// BFS distances from src following out-edges (or in-edges when reversed).
std::vector<int> bfs(const DirectedGraph& g, int src, bool reversed) {
  std::vector<int> dist(g.size(), -1);
  std::deque<int> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    const auto& next = reversed ? g.in_neighbors(u) : g.out_neighbors(u);
    for (int v : next) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

bool is_strongly_connected(const DirectedGraph& g) {
  auto reach = [](const std::vector<int>& d) {
    return std::all_of(d.begin(), d.end(), [](int x) { return x >= 0; });
  };
  return reach(bfs(g, 0, false)) && reach(bfs(g, 0, true));
}

int diameter(const DirectedGraph& g) {
  if (!is_strongly_connected(g)) {
    throw std::invalid_argument("diameter is undefined for a graph that is not strongly connected");
  }
  int best = 1;
  for (int s = 0; s < g.size(); ++s) {
    auto d = bfs(g, s, false);
    best = std::max(best, *std::max_element(d.begin(), d.end()));
  }
  return best;
}

}  // namespace appg
