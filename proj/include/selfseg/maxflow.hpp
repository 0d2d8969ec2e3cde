#pragma once

#include <vector>

namespace selfseg {

// Directed network with residual twin arcs. Arc ids come in pairs: `a` and
// `a ^ 1` are each other's reverse. Capacities are clamped to
// kCapacityLimit, which stands in for infinity.
class FlowNetwork {
 public:
  using NodeId = int;
  using ArcId = int;

  static constexpr double kCapacityLimit = 1e9;

  FlowNetwork(int node_count, NodeId source, NodeId sink);

  int node_count() const noexcept { return static_cast<int>(first_out_.size()); }
  int arc_count() const noexcept { return static_cast<int>(head_.size()); }
  NodeId source() const noexcept { return source_; }
  NodeId sink() const noexcept { return sink_; }

  NodeId add_node();
  // Adds u->v with `capacity` and v->u with `reverse_capacity`; returns the
  // id of the forward arc.
  ArcId add_edge(NodeId u, NodeId v, double capacity, double reverse_capacity = 0.0);

  NodeId head(ArcId a) const { return head_[a]; }
  NodeId tail(ArcId a) const { return head_[a ^ 1]; }
  double capacity(ArcId a) const { return capacity_[a]; }
  double residual(ArcId a) const { return residual_[a]; }
  // Net flow along a (capacity minus residual); negative on the twin.
  double flow(ArcId a) const { return capacity_[a] - residual_[a]; }

  template <typename F>
  void for_each_out(NodeId u, F&& f) const {
    for (ArcId a = first_out_[u]; a >= 0; a = next_out_[a]) f(a);
  }

 private:
  friend class BkMaxflow;

  NodeId source_;
  NodeId sink_;
  std::vector<ArcId> first_out_;
  std::vector<NodeId> head_;
  std::vector<ArcId> next_out_;
  std::vector<double> capacity_;
  std::vector<double> residual_;
};

struct MaxflowResult {
  double flow_value = 0.0;
  // in_source_side[v] is true iff v is reachable from the source in the final
  // residual network.
  std::vector<bool> in_source_side;
};

// Augmenting paths over two search trees (rooted at source and sink) that are
// reused between augmentations, with orphan adoption. Mutates the network's
// residuals; call on a fresh network.
MaxflowResult maxflow(FlowNetwork& network);

// Sum of capacities of arcs leaving the source side.
double cut_capacity(const FlowNetwork& network, const std::vector<bool>& source_side);

}  // namespace selfseg
