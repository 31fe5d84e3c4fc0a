#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ctdg {

using NodeId = std::int64_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One timestamped interaction. Link features live in
/// TemporalGraph::link_features at the same row index.
struct Event {
  NodeId source = 0;
  NodeId destination = 0;
  double timestamp = 0.0;
  std::optional<int> label;

  friend bool operator==(const Event&, const Event&) = default;
};

/// An event stream sorted by nondecreasing timestamp over dense node ids
/// 0..num_nodes-1. Absent features are stored as zero-width or zero-valued
/// matrices.
struct TemporalGraph {
  std::vector<Event> events;
  Matrix link_features;             // |events| x d_E
  Matrix node_features;             // num_nodes x d_N
  std::vector<std::int64_t> raw_ids;  // dense id -> id used in the source file
  std::size_t num_nodes = 0;

  Eigen::Index d_e() const { return link_features.cols(); }
  Eigen::Index d_n() const { return node_features.cols(); }
  std::size_t size() const { return events.size(); }

  /// Throws ctdg::Error when an invariant is broken.
  void validate() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct SplitView {
  IndexRange train;
  IndexRange val;
  IndexRange test;
  std::vector<NodeId> new_nodes;  // sorted; absent from the train range

  bool is_new(NodeId n) const;
};

/// A (possibly hypothetical) link u-v at time t to be scored.
struct PairQuery {
  NodeId u = 0;
  NodeId v = 0;
  double t = 0.0;

  friend bool operator==(const PairQuery&, const PairQuery&) = default;
};

/// Order-independent key of the node pair {a, b}; ids must fit in 32 bits.
inline std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

struct NeighborEntry {
  NodeId neighbor = 0;
  std::int64_t event_index = 0;
  double timestamp = 0.0;

  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Per-node, timestamp-sorted interaction lists in CSR layout. Every event
/// (u, v, t) appears under both u and v.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(const TemporalGraph& g);

  std::span<const NeighborEntry> neighbors(NodeId node) const;
  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t total_entries() const { return entries_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NeighborEntry> entries_;
};

/// Parses the event CSV (`u,v,t[,label][,f_0..]`) and, optionally, the
/// node-feature CSV (`node,f_0..`). Raw ids are remapped to dense ids in
/// first-appearance order of the time-sorted stream.
TemporalGraph load_events(std::istream& events, std::istream* node_features = nullptr);
TemporalGraph load_events_file(const std::string& events_path,
                               const std::string& node_features_path = {});

void save_events(const TemporalGraph& g, std::ostream& out);
void save_node_features(const TemporalGraph& g, std::ostream& out);

/// Floor-of-cumulative-fraction boundaries, clamped so every range is
/// non-empty.
SplitView chronological_split(const TemporalGraph& g,
                              std::array<double, 3> ratios = {0.70, 0.15, 0.15});

NeighborIndex build_neighbor_index(const TemporalGraph& g);

struct SynthSpec {
  std::size_t num_nodes = 100;
  std::size_t num_events = 20000;
  double recurrence_bias = 0.8;
  Eigen::Index d_e = 0;
  Eigen::Index d_n = 0;
  std::uint64_t seed = 0;
  // Repeats copy a pair from this many most recent events; 0 means
  // 5 * num_nodes.
  std::size_t repeat_window = 0;
  bool with_labels = false;
};

/// Keys: num_nodes, num_events, recurrence_bias, d_E, d_N, seed,
/// repeat_window, with_labels.
void set_synth_spec_value(SynthSpec& spec, std::string_view key, std::string_view value);
SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec_file(const std::string& path);
void save_synth_spec(const SynthSpec& spec, std::ostream& out);

/// Recurrence-driven generator: with probability recurrence_bias an event
/// repeats a pair from the recent window, otherwise it closes a triangle
/// (or, failing that, picks any unseen pair). Labels, when requested, mark
/// events whose pair is new.
TemporalGraph generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Fraction of events after the first whose unordered pair occurred earlier.
double repeat_fraction(const TemporalGraph& g);

}  // namespace ctdg
