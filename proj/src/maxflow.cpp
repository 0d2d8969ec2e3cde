#include "selfseg/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "selfseg/error.hpp"

namespace selfseg {

FlowNetwork::FlowNetwork(int node_count, NodeId source, NodeId sink)
    : source_(source), sink_(sink), first_out_(static_cast<std::size_t>(node_count), -1) {
  if (source < 0 || sink < 0 || source >= node_count || sink >= node_count || source == sink) {
    throw invalid_error("flow network needs distinct source and sink nodes");
  }
}

FlowNetwork::NodeId FlowNetwork::add_node() {
  first_out_.push_back(-1);
  return node_count() - 1;
}

FlowNetwork::ArcId FlowNetwork::add_edge(NodeId u, NodeId v, double cap, double rev_cap) {
  if (u < 0 || v < 0 || u >= node_count() || v >= node_count() || u == v) throw invalid_error("bad arc endpoints");
  if (!(cap >= 0.0) || !(rev_cap >= 0.0)) throw invalid_error("arc capacities must be non-negative");
  cap = std::min(cap, kCapacityLimit);
  rev_cap = std::min(rev_cap, kCapacityLimit);
  const ArcId a = arc_count();
  head_.push_back(v);
  next_out_.push_back(first_out_[u]);
  first_out_[u] = a;
  capacity_.push_back(cap);
  residual_.push_back(cap);
  head_.push_back(u);
  next_out_.push_back(first_out_[v]);
  first_out_[v] = a + 1;
  capacity_.push_back(rev_cap);
  residual_.push_back(rev_cap);
  return a;
}

class BkMaxflow {
 public:
  explicit BkMaxflow(FlowNetwork& g)
      : g_(g),
        n_(g.node_count()),
        tree_(n_, Tree::Free),
        parent_(n_, kNone),
        dist_(n_, 0),
        stamp_(n_, 0),
        queued_(n_, false) {}

  double run() {
    const int s = g_.source_, t = g_.sink_;
    tree_[s] = Tree::S;
    tree_[t] = Tree::T;
    parent_[s] = parent_[t] = kTerminal;
    activate(s);
    activate(t);
    double flow = 0.0;
    for (;;) {
      const int middle = grow();
      if (middle < 0) break;
      ++time_;
      flow += augment(middle);
      adopt();
    }
    return flow;
  }

 private:
  enum class Tree : unsigned char { Free, S, T };
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  void activate(int v) {
    if (!queued_[v]) {
      queued_[v] = true;
      active_.push_back(v);
    }
  }

  // Returns an arc from the S tree into the T tree, or -1 when the trees can
  // no longer grow.
  int grow() {
    while (!active_.empty()) {
      const int p = active_.front();
      if (tree_[p] == Tree::Free) {
        active_.pop_front();
        queued_[p] = false;
        continue;
      }
      for (int a = g_.first_out_[p]; a >= 0; a = g_.next_out_[a]) {
        const int q = g_.head_[a];
        if (tree_[p] == Tree::S) {
          if (g_.residual_[a] <= 0.0) continue;
          if (tree_[q] == Tree::Free) {
            attach(q, Tree::S, a, p);
          } else if (tree_[q] == Tree::T) {
            return a;
          }
        } else {
          const int b = a ^ 1;  // q -> p
          if (g_.residual_[b] <= 0.0) continue;
          if (tree_[q] == Tree::Free) {
            attach(q, Tree::T, b, p);
          } else if (tree_[q] == Tree::S) {
            return b;
          }
        }
      }
      active_.pop_front();
      queued_[p] = false;
    }
    return -1;
  }

  void attach(int q, Tree tree, int arc, int p) {
    tree_[q] = tree;
    parent_[q] = arc;
    dist_[q] = dist_[p] + 1;
    stamp_[q] = stamp_[p];
    activate(q);
  }

  double augment(int middle) {
    const int s = g_.source_, t = g_.sink_;
    auto& res = g_.residual_;
    double bottleneck = res[middle];
    for (int v = g_.tail(middle); v != s;) {
      const int a = parent_[v];
      bottleneck = std::min(bottleneck, res[a]);
      v = g_.tail(a);
    }
    for (int v = g_.head(middle); v != t;) {
      const int a = parent_[v];
      bottleneck = std::min(bottleneck, res[a]);
      v = g_.head(a);
    }

    res[middle] -= bottleneck;
    res[middle ^ 1] += bottleneck;
    for (int v = g_.tail(middle); v != s;) {
      const int a = parent_[v];
      const int up = g_.tail(a);
      res[a] -= bottleneck;
      res[a ^ 1] += bottleneck;
      if (res[a] <= 0.0) make_orphan(v);
      v = up;
    }
    for (int v = g_.head(middle); v != t;) {
      const int a = parent_[v];
      const int up = g_.head(a);
      res[a] -= bottleneck;
      res[a ^ 1] += bottleneck;
      if (res[a] <= 0.0) make_orphan(v);
      v = up;
    }
    return bottleneck;
  }

  void make_orphan(int v) {
    parent_[v] = kOrphan;
    orphans_.push_back(v);
  }

  // Distance to the tree's terminal through valid parents, or -1 if the
  // chain hits an orphan or free node.
  int origin_distance(int q) {
    int d = 0;
    int v = q;
    for (;;) {
      if (stamp_[v] == time_) {
        d += dist_[v];
        break;
      }
      const int a = parent_[v];
      if (a == kTerminal) {
        stamp_[v] = time_;
        dist_[v] = 0;
        break;
      }
      if (a < 0) return -1;
      ++d;
      v = tree_[q] == Tree::S ? g_.tail(a) : g_.head(a);
    }
    // Cache distances along the verified chain.
    for (v = q; stamp_[v] != time_;) {
      stamp_[v] = time_;
      dist_[v] = d--;
      v = tree_[q] == Tree::S ? g_.tail(parent_[v]) : g_.head(parent_[v]);
    }
    return dist_[q];
  }

  void adopt() {
    auto& res = g_.residual_;
    while (!orphans_.empty()) {
      const int o = orphans_.front();
      orphans_.pop_front();
      const Tree tree = tree_[o];
      int best_arc = kNone;
      int best_dist = std::numeric_limits<int>::max();
      for (int a = g_.first_out_[o]; a >= 0; a = g_.next_out_[a]) {
        const int q = g_.head_[a];
        if (tree_[q] != tree) continue;
        const int link = tree == Tree::S ? (a ^ 1) : a;  // q->o for S, o->q for T
        if (res[link] <= 0.0) continue;
        const int d = origin_distance(q);
        if (d >= 0 && d < best_dist) {
          best_dist = d;
          best_arc = link;
        }
      }
      if (best_arc != kNone) {
        parent_[o] = best_arc;
        stamp_[o] = time_;
        dist_[o] = best_dist + 1;
        continue;
      }
      for (int a = g_.first_out_[o]; a >= 0; a = g_.next_out_[a]) {
        const int q = g_.head_[a];
        if (tree_[q] != tree) continue;
        const int link = tree == Tree::S ? (a ^ 1) : a;
        if (res[link] > 0.0) activate(q);
        // q's parent arc points through o: o->q in S, q->o in T.
        const int through_o = tree == Tree::S ? a : (a ^ 1);
        if (parent_[q] == through_o) make_orphan(q);
      }
      tree_[o] = Tree::Free;
      parent_[o] = kNone;
    }
  }

  FlowNetwork& g_;
  int n_;
  std::vector<Tree> tree_;
  std::vector<int> parent_;
  std::vector<int> dist_;
  std::vector<long> stamp_;
  std::vector<bool> queued_;
  std::deque<int> active_;
  std::deque<int> orphans_;
  long time_ = 0;
};

MaxflowResult maxflow(FlowNetwork& network) {
  MaxflowResult result;
  result.flow_value = BkMaxflow(network).run();

  const int n = network.node_count();
  result.in_source_side.assign(n, false);
  std::vector<int> stack{network.source()};
  result.in_source_side[network.source()] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    network.for_each_out(u, [&](int a) {
      const int v = network.head(a);
      if (!result.in_source_side[v] && network.residual(a) > 0.0) {
        result.in_source_side[v] = true;
        stack.push_back(v);
      }
    });
  }
  return result;
}

double cut_capacity(const FlowNetwork& network, const std::vector<bool>& source_side) {
  double cap = 0.0;
  for (int a = 0; a < network.arc_count(); ++a) {
    if (source_side[network.tail(a)] && !source_side[network.head(a)]) cap += network.capacity(a);
  }
  return cap;
}

}  // namespace selfseg
