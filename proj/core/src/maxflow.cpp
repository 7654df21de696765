#include "osteoforge/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <span>

#include <fmt/format.h>

#include "osteoforge/error.hpp"

namespace osteoforge {

FlowNetwork::FlowNetwork(std::size_t node_count, std::size_t source, std::size_t sink)
    : node_count_(node_count), source_(source), sink_(sink) {
  if (source >= node_count || sink >= node_count) {
    throw ValidationError("flow network terminal out of range");
  }
  if (source == sink) {
    throw ValidationError("flow network source and sink must differ");
  }
}

void FlowNetwork::add_edge(std::size_t u, std::size_t v, Capacity capacity,
                           Capacity reverse_capacity) {
  if (u >= node_count_ || v >= node_count_) {
    throw ValidationError(fmt::format("arc {}->{} references a missing node", u, v));
  }
  if (capacity < 0 || reverse_capacity < 0) {
    throw ValidationError(fmt::format("arc {}->{} has a negative capacity", u, v));
  }
  arcs_.push_back({u, v, capacity});
  arcs_.push_back({v, u, reverse_capacity});
}

void FlowNetwork::add_terminal_edges(std::size_t n, Capacity from_source,
                                     Capacity to_sink) {
  if (from_source > 0) add_edge(source_, n, from_source);
  if (to_sink > 0) add_edge(n, sink_, to_sink);
}

Capacity FlowNetwork::cut_capacity(const std::vector<std::uint8_t>& source_side) const {
  Capacity total = 0;
  for (const Arc& a : arcs_) {
    if (source_side[a.from] && !source_side[a.to]) total += a.capacity;
  }
  return total;
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kTerminal = kNone - 1;
constexpr std::size_t kOrphan = kNone - 2;
constexpr std::size_t kInfiniteDist = std::numeric_limits<std::size_t>::max();

enum class Tree : std::uint8_t { kFree, kSource, kSink };

// Residual graph plus the two search trees. `parent_[n]` is the arc from n
// towards its parent (for both trees), or kTerminal for the roots.
class BkSolver {
 public:
  explicit BkSolver(const FlowNetwork& net)
      : source_(net.source()), sink_(net.sink()), n_(net.node_count()) {
    const auto& arcs = net.arcs();
    residual_.resize(arcs.size());
    head_.resize(arcs.size());
    std::vector<std::size_t> degree(n_ + 1, 0);
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      residual_[a] = arcs[a].capacity;
      head_[a] = arcs[a].to;
      if (arcs[a].from != arcs[a].to) ++degree[arcs[a].from + 1];
    }
    for (std::size_t i = 0; i < n_; ++i) degree[i + 1] += degree[i];
    first_ = degree;
    out_.resize(first_[n_]);
    std::vector<std::size_t> fill(first_.begin(), first_.end() - 1);
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      if (arcs[a].from != arcs[a].to) out_[fill[arcs[a].from]++] = a;
    }

    tree_.assign(n_, Tree::kFree);
    parent_.assign(n_, kNone);
    dist_.assign(n_, 0);
    stamp_.assign(n_, 0);
    queued_.assign(n_, 0);
    tree_[source_] = Tree::kSource;
    tree_[sink_] = Tree::kSink;
    parent_[source_] = parent_[sink_] = kTerminal;
    activate(source_);
    activate(sink_);
  }

  MaxFlowResult run() {
    while (true) {
      const std::size_t bridge = grow();
      if (bridge == kNone) break;
      ++time_;
      augment(bridge);
      adopt();
    }
    MaxFlowResult result;
    result.flow = flow_;
    result.source_side = reachable_from_source();
    return result;
  }

 private:
  static std::size_t sister(std::size_t a) { return a ^ 1U; }

  std::span<const std::size_t> arcs_of(std::size_t node) const {
    return std::span<const std::size_t>(out_).subspan(first_[node],
                                                       first_[node + 1] - first_[node]);
  }

  void activate(std::size_t node) {
    if (!queued_[node]) {
      queued_[node] = 1;
      active_.push_back(node);
    }
  }

  // Expands active nodes until an S-T bridge is found. Returns the bridge arc
  // oriented source-side to sink-side, or kNone when the trees cannot grow.
  std::size_t grow() {
    while (!active_.empty()) {
      const std::size_t p = active_.front();
      if (tree_[p] == Tree::kFree) {
        active_.pop_front();
        queued_[p] = 0;
        continue;
      }
      const bool in_source = tree_[p] == Tree::kSource;
      for (std::size_t a : arcs_of(p)) {
        const std::size_t q = head_[a];
        // Residual capacity in the direction of the tree's flow.
        const Capacity cap = in_source ? residual_[a] : residual_[sister(a)];
        if (cap == 0) continue;
        if (tree_[q] == Tree::kFree) {
          tree_[q] = tree_[p];
          parent_[q] = sister(a);
          dist_[q] = dist_[p] + 1;
          stamp_[q] = stamp_[p];
          activate(q);
        } else if (tree_[q] != tree_[p]) {
          return in_source ? a : sister(a);
        } else if (stamp_[q] <= stamp_[p] && dist_[q] > dist_[p]) {
          parent_[q] = sister(a);
          stamp_[q] = stamp_[p];
          dist_[q] = dist_[p] + 1;
        }
      }
      active_.pop_front();
      queued_[p] = 0;
    }
    return kNone;
  }

  void make_orphan(std::size_t node) {
    parent_[node] = kOrphan;
    orphans_.push_back(node);
  }

  void augment(std::size_t bridge) {
    Capacity bottleneck = residual_[bridge];
    for (std::size_t x = tail(bridge); parent_[x] != kTerminal; x = head_[parent_[x]]) {
      bottleneck = std::min(bottleneck, residual_[sister(parent_[x])]);
    }
    for (std::size_t x = head_[bridge]; parent_[x] != kTerminal; x = head_[parent_[x]]) {
      bottleneck = std::min(bottleneck, residual_[parent_[x]]);
    }

    residual_[bridge] -= bottleneck;
    residual_[sister(bridge)] += bottleneck;
    for (std::size_t x = tail(bridge); parent_[x] != kTerminal;) {
      const std::size_t up = parent_[x];
      const std::size_t down = sister(up);
      const std::size_t next = head_[up];
      residual_[down] -= bottleneck;
      residual_[up] += bottleneck;
      if (residual_[down] == 0) make_orphan(x);
      x = next;
    }
    for (std::size_t x = head_[bridge]; parent_[x] != kTerminal;) {
      const std::size_t up = parent_[x];
      const std::size_t next = head_[up];
      residual_[up] -= bottleneck;
      residual_[sister(up)] += bottleneck;
      if (residual_[up] == 0) make_orphan(x);
      x = next;
    }
    flow_ += bottleneck;
  }

  std::size_t tail(std::size_t a) const { return head_[sister(a)]; }

  // Distance from `node` to its tree root, or kInfiniteDist when the chain
  // ends in an orphan. Marks the visited chain with the current time stamp.
  std::size_t origin_distance(std::size_t node) {
    std::size_t d = 0;
    std::size_t j = node;
    while (true) {
      if (stamp_[j] == time_) {
        d += dist_[j];
        break;
      }
      const std::size_t a = parent_[j];
      if (a == kTerminal) {
        stamp_[j] = time_;
        dist_[j] = 0;
        break;
      }
      if (a == kOrphan) return kInfiniteDist;
      ++d;
      j = head_[a];
    }
    std::size_t remaining = d;
    for (j = node; stamp_[j] != time_; j = head_[parent_[j]]) {
      stamp_[j] = time_;
      dist_[j] = remaining--;
    }
    return d;
  }

  void adopt() {
    while (!orphans_.empty()) {
      const std::size_t p = orphans_.front();
      orphans_.pop_front();
      const bool in_source = tree_[p] == Tree::kSource;

      std::size_t best_arc = kNone;
      std::size_t best_dist = kInfiniteDist;
      for (std::size_t a : arcs_of(p)) {
        const std::size_t q = head_[a];
        if (tree_[q] != tree_[p]) continue;
        const Capacity cap = in_source ? residual_[sister(a)] : residual_[a];
        if (cap == 0) continue;
        const std::size_t d = origin_distance(q);
        if (d < best_dist) {
          best_dist = d;
          best_arc = a;
        }
      }

      if (best_arc != kNone) {
        parent_[p] = best_arc;
        stamp_[p] = time_;
        dist_[p] = best_dist + 1;
        continue;
      }

      for (std::size_t a : arcs_of(p)) {
        const std::size_t q = head_[a];
        if (tree_[q] != tree_[p]) continue;
        const Capacity cap = in_source ? residual_[sister(a)] : residual_[a];
        if (cap > 0) activate(q);
        const std::size_t qa = parent_[q];
        if (qa != kTerminal && qa != kOrphan && head_[qa] == p) make_orphan(q);
      }
      tree_[p] = Tree::kFree;
    }
  }

  std::vector<std::uint8_t> reachable_from_source() const {
    std::vector<std::uint8_t> seen(n_, 0);
    std::vector<std::size_t> stack{source_};
    seen[source_] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t a : arcs_of(u)) {
        const std::size_t v = head_[a];
        if (residual_[a] > 0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return seen;
  }

  std::size_t source_;
  std::size_t sink_;
  std::size_t n_;
  std::vector<Capacity> residual_;
  std::vector<std::size_t> head_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> out_;

  std::vector<Tree> tree_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> dist_;
  std::vector<std::size_t> stamp_;
  std::vector<std::uint8_t> queued_;
  std::deque<std::size_t> active_;
  std::deque<std::size_t> orphans_;
  std::size_t time_ = 0;
  Capacity flow_ = 0;
};

}  // namespace

MaxFlowResult max_flow(const FlowNetwork& network) {
  return BkSolver(network).run();
}

}  // namespace osteoforge
