#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace osteoforge {

/// Capacities are exact 64-bit integers. Real-valued energies are quantised
/// by the caller (see `kCapacityScale` in graphcut.hpp); integer arithmetic
/// keeps max-flow, cut value and energy comparisons exact.
using Capacity = std::int64_t;

/// Directed network with designated terminals. Arcs are stored in pairs
/// (forward, reverse) so that an undirected n-link is a single `add_edge`.
class FlowNetwork {
 public:
  struct Arc {
    std::size_t from;
    std::size_t to;
    Capacity capacity;
  };

  FlowNetwork(std::size_t node_count, std::size_t source, std::size_t sink);

  std::size_t node_count() const { return node_count_; }
  std::size_t source() const { return source_; }
  std::size_t sink() const { return sink_; }

  /// Adds u->v with `capacity` and v->u with `reverse_capacity`.
  void add_edge(std::size_t u, std::size_t v, Capacity capacity,
                Capacity reverse_capacity = 0);

  /// Terminal links for node `n`: source->n and n->sink.
  void add_terminal_edges(std::size_t n, Capacity from_source, Capacity to_sink);

  /// Arcs in insertion order; index 2k is a forward arc, 2k+1 its reverse.
  const std::vector<Arc>& arcs() const { return arcs_; }

  /// Sum of capacities of arcs leaving `source_side` for the complement.
  Capacity cut_capacity(const std::vector<std::uint8_t>& source_side) const;

 private:
  std::size_t node_count_;
  std::size_t source_;
  std::size_t sink_;
  std::vector<Arc> arcs_;
};

struct MaxFlowResult {
  Capacity flow = 0;
  /// 1 for nodes on the source side of the minimum cut: exactly the nodes
  /// reachable from the source in the final residual graph. Ties therefore
  /// resolve to the sink side.
  std::vector<std::uint8_t> source_side;
};

/// Boykov-Kolmogorov augmenting paths with two search trees.
MaxFlowResult max_flow(const FlowNetwork& network);

}  // namespace osteoforge
