#include "ctdg/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ctdg/error.hpp"

namespace ctdg {

InteractionSequence extract_first_hop(const NeighborIndex& index, NodeId node, double t,
                                      std::size_t max_len, bool include_self) {
  require(t >= 0.0, ErrorCategory::kInvalidArgument, "anchor time must be nonnegative");
  require(max_len >= 1, ErrorCategory::kInvalidArgument, "max_len must be at least 1");
  const auto history = index.neighbors(node);

  // First entry with timestamp >= t; everything before it is strictly earlier.
  const auto end = std::lower_bound(history.begin(), history.end(), t,
                                    [](const NeighborEntry& e, double time) { return e.timestamp < time; });
  const auto available = static_cast<std::size_t>(end - history.begin());
  const std::size_t capacity = include_self ? max_len - 1 : max_len;
  const std::size_t keep = std::min(available, capacity);

  InteractionSequence seq;
  seq.anchor = node;
  seq.anchor_time = t;
  seq.max_len = max_len;
  seq.entries.reserve(keep + (include_self ? 1 : 0));
  if (include_self) {
    seq.entries.push_back({node, kSelfEntry, std::nextafter(t, -INFINITY)});
  }
  seq.entries.insert(seq.entries.end(), end - static_cast<std::ptrdiff_t>(keep), end);
  return seq;
}

namespace {

std::unordered_map<NodeId, std::int32_t> histogram(const InteractionSequence& seq) {
  std::unordered_map<NodeId, std::int32_t> counts;
  counts.reserve(seq.size() * 2);
  for (const auto& e : seq.entries) ++counts[e.neighbor];
  return counts;
}

std::int32_t count_of(const std::unordered_map<NodeId, std::int32_t>& h, NodeId n) {
  const auto it = h.find(n);
  return it == h.end() ? 0 : it->second;
}

// Columns are always (count in the source sequence, count in the
// destination sequence), whichever side `seq` is.
CountMatrix fill(const InteractionSequence& seq, const std::unordered_map<NodeId, std::int32_t>& in_src,
                 const std::unordered_map<NodeId, std::int32_t>& in_dst) {
  CountMatrix c(static_cast<Eigen::Index>(seq.size()), 2);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const NodeId n = seq.entries[i].neighbor;
    c(static_cast<Eigen::Index>(i), 0) = count_of(in_src, n);
    c(static_cast<Eigen::Index>(i), 1) = count_of(in_dst, n);
  }
  return c;
}

}  // namespace

CooccurrencePair cooccurrence_counts(const InteractionSequence& seq_u, const InteractionSequence& seq_v) {
  require(seq_u.anchor_time == seq_v.anchor_time, ErrorCategory::kInvalidArgument,
          "co-occurrence needs sequences anchored at the same time");
  const auto hu = histogram(seq_u);
  const auto hv = histogram(seq_v);
  return {fill(seq_u, hu, hv), fill(seq_v, hu, hv)};
}

}  // namespace ctdg
