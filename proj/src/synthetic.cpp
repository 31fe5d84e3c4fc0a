#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "ctdg/error.hpp"
#include "ctdg/rng.hpp"
#include "ctdg/temporal_graph.hpp"
#include "text.hpp"

namespace ctdg {

namespace {

// Relabels nodes in first-appearance order so that a save/load round trip
// reproduces the graph id-for-id.
TemporalGraph relabel_by_appearance(TemporalGraph g) {
  std::vector<NodeId> dense(g.num_nodes, -1);
  NodeId next = 0;
  auto intern = [&](NodeId n) {
    auto& slot = dense[static_cast<std::size_t>(n)];
    if (slot < 0) slot = next++;
    return slot;
  };
  for (Event& e : g.events) {
    e.source = intern(e.source);
    e.destination = intern(e.destination);
  }
  for (std::size_t n = 0; n < g.num_nodes; ++n) intern(static_cast<NodeId>(n));
  Matrix features(g.node_features.rows(), g.node_features.cols());
  for (std::size_t n = 0; n < g.num_nodes; ++n) {
    features.row(dense[n]) = g.node_features.row(static_cast<Eigen::Index>(n));
  }
  g.node_features = std::move(features);
  g.raw_ids.resize(g.num_nodes);
  for (std::size_t n = 0; n < g.num_nodes; ++n) g.raw_ids[n] = static_cast<std::int64_t>(n);
  return g;
}

}  // namespace

void set_synth_spec_value(SynthSpec& spec, std::string_view key, std::string_view value) {
  auto as_int = [&] {
    const auto x = text::parse_int(value);
    if (!x || *x < 0) fail(ErrorCategory::kParse, "bad integer for " + std::string(key));
    return *x;
  };
  if (key == "num_nodes") spec.num_nodes = static_cast<std::size_t>(as_int());
  else if (key == "num_events") spec.num_events = static_cast<std::size_t>(as_int());
  else if (key == "d_E") spec.d_e = static_cast<Eigen::Index>(as_int());
  else if (key == "d_N") spec.d_n = static_cast<Eigen::Index>(as_int());
  else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "repeat_window") spec.repeat_window = static_cast<std::size_t>(as_int());
  else if (key == "with_labels") spec.with_labels = as_int() != 0;
  else if (key == "recurrence_bias") {
    const auto x = text::parse_double(value);
    if (!x) fail(ErrorCategory::kParse, "bad recurrence_bias");
    spec.recurrence_bias = *x;
  } else {
    fail(ErrorCategory::kParse, "unknown synth key " + std::string(key));
  }
}

SynthSpec parse_synth_spec(std::istream& in) {
  SynthSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    try {
      if (eq == std::string_view::npos) fail(ErrorCategory::kParse, "expected key=value");
      set_synth_spec_value(spec, text::trim(body.substr(0, eq)), text::trim(body.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.category(), "synth spec line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return spec;
}

SynthSpec load_synth_spec_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCategory::kIo, "cannot open " + path);
  return parse_synth_spec(in);
}

void save_synth_spec(const SynthSpec& spec, std::ostream& out) {
  out << "num_nodes=" << spec.num_nodes << '\n'
      << "num_events=" << spec.num_events << '\n'
      << "recurrence_bias=" << text::format_double(spec.recurrence_bias) << '\n'
      << "d_E=" << spec.d_e << '\n'
      << "d_N=" << spec.d_n << '\n'
      << "seed=" << spec.seed << '\n'
      << "repeat_window=" << spec.repeat_window << '\n'
      << "with_labels=" << (spec.with_labels ? 1 : 0) << '\n';
}

TemporalGraph generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.num_nodes >= 2, ErrorCategory::kInvalidArgument, "synthetic graph needs at least 2 nodes");
  require(spec.num_events >= 1, ErrorCategory::kInvalidArgument, "synthetic graph needs at least 1 event");
  require(spec.recurrence_bias >= 0.0 && spec.recurrence_bias <= 1.0, ErrorCategory::kInvalidArgument,
          "recurrence_bias must lie in [0, 1]");

  CounterRng rng(seed, 0x5EED);
  const auto n_nodes = spec.num_nodes;
  const std::size_t window = spec.repeat_window > 0 ? spec.repeat_window : 5 * n_nodes;

  TemporalGraph g;
  g.num_nodes = n_nodes;
  g.events.reserve(spec.num_events);

  std::unordered_set<std::uint64_t> seen;
  std::vector<std::vector<NodeId>> partners(n_nodes);
  const std::size_t max_pairs = n_nodes * (n_nodes - 1) / 2;

  auto random_node = [&] { return static_cast<NodeId>(rng.below(n_nodes)); };

  auto novel_pair = [&]() -> std::optional<std::pair<NodeId, NodeId>> {
    if (seen.size() >= max_pairs) return std::nullopt;
    // Triadic closure first: common neighbors make the new pair predictable.
    for (int attempt = 0; attempt < 64; ++attempt) {
      const NodeId u = random_node();
      const auto& pu = partners[static_cast<std::size_t>(u)];
      if (pu.empty()) continue;
      const NodeId w = pu[rng.below(pu.size())];
      const auto& pw = partners[static_cast<std::size_t>(w)];
      const NodeId v = pw[rng.below(pw.size())];
      if (v != u && !seen.contains(pair_key(u, v))) return std::make_pair(u, v);
    }
    for (int attempt = 0; attempt < 256; ++attempt) {
      const NodeId u = random_node();
      const NodeId v = random_node();
      if (u != v && !seen.contains(pair_key(u, v))) return std::make_pair(u, v);
    }
    std::vector<std::pair<NodeId, NodeId>> unseen;
    for (NodeId a = 0; a < static_cast<NodeId>(n_nodes); ++a) {
      for (NodeId b = a + 1; b < static_cast<NodeId>(n_nodes); ++b) {
        if (!seen.contains(pair_key(a, b))) unseen.emplace_back(a, b);
      }
    }
    return unseen[rng.below(unseen.size())];
  };

  double t = 0.0;
  for (std::size_t i = 0; i < spec.num_events; ++i) {
    if (i > 0) t += static_cast<double>(rng.below(3));
    bool repeat = i > 0 && rng.bernoulli(spec.recurrence_bias);
    std::pair<NodeId, NodeId> uv{0, 1};
    if (!repeat) {
      if (auto fresh = novel_pair()) {
        uv = *fresh;
      } else {
        repeat = true;  // every pair already seen
      }
    }
    if (repeat) {
      const std::size_t lo = i > window ? i - window : 0;
      const Event& past = g.events[lo + rng.below(i - lo)];
      uv = {past.source, past.destination};
    }
    const auto [u, v] = uv;
    if (seen.insert(pair_key(u, v)).second) {
      partners[static_cast<std::size_t>(u)].push_back(v);
      partners[static_cast<std::size_t>(v)].push_back(u);
    }
    Event e{u, v, t, std::nullopt};
    if (spec.with_labels) e.label = repeat ? 0 : 1;
    g.events.push_back(e);
  }

  g.link_features.resize(static_cast<Eigen::Index>(g.events.size()), spec.d_e);
  for (Eigen::Index r = 0; r < g.link_features.rows(); ++r) {
    for (Eigen::Index c = 0; c < spec.d_e; ++c) g.link_features(r, c) = rng.uniform(-1.0, 1.0);
  }
  g.node_features.resize(static_cast<Eigen::Index>(n_nodes), spec.d_n);
  for (Eigen::Index r = 0; r < g.node_features.rows(); ++r) {
    for (Eigen::Index c = 0; c < spec.d_n; ++c) g.node_features(r, c) = rng.uniform(-1.0, 1.0);
  }

  g = relabel_by_appearance(std::move(g));
  g.validate();
  return g;
}

double repeat_fraction(const TemporalGraph& g) {
  if (g.events.size() < 2) return 0.0;
  std::unordered_set<std::uint64_t> seen;
  std::size_t repeats = 0;
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    const bool fresh = seen.insert(pair_key(g.events[i].source, g.events[i].destination)).second;
    if (i > 0 && !fresh) ++repeats;
  }
  return static_cast<double>(repeats) / static_cast<double>(g.events.size() - 1);
}

}  // namespace ctdg
