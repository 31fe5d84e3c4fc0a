#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ctdg/temporal_graph.hpp"

namespace ctdg {

/// event_index marking the anchor's own entry when self-inclusion is on.
inline constexpr std::int64_t kSelfEntry = -1;

/// A node's most recent first-hop interactions strictly before anchor_time,
/// oldest first. With self-inclusion the anchor itself is entry 0.
struct InteractionSequence {
  NodeId anchor = 0;
  double anchor_time = 0.0;
  std::vector<NeighborEntry> entries;
  std::size_t max_len = 1;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool has_self() const { return !entries.empty() && entries.front().event_index == kSelfEntry; }

  /// Time interval anchor_time - timestamp of entry i; 0 for the self entry.
  double delta(std::size_t i) const {
    return entries[i].event_index == kSelfEntry ? 0.0 : anchor_time - entries[i].timestamp;
  }
};

using CountMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Row i of c_src is (occurrences of neighbor i of the source sequence in the
/// source sequence, occurrences in the destination sequence). c_dst has the
/// same two columns for the neighbors of the destination sequence.
struct CooccurrencePair {
  CountMatrix c_src;
  CountMatrix c_dst;
};

/// Keeps the last max_len interactions of `node` with timestamp < t. With
/// include_self the anchor occupies one of the max_len slots.
InteractionSequence extract_first_hop(const NeighborIndex& index, NodeId node, double t,
                                      std::size_t max_len, bool include_self = false);

CooccurrencePair cooccurrence_counts(const InteractionSequence& seq_u,
                                     const InteractionSequence& seq_v);

}  // namespace ctdg
