#include "ctdg/temporal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "ctdg/error.hpp"
#include "text.hpp"

namespace ctdg {

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

struct RawRow {
  std::int64_t u = 0;
  std::int64_t v = 0;
  double t = 0.0;
  std::optional<int> label;
  std::vector<double> features;
};

}  // namespace

void TemporalGraph::validate() const {
  require(link_features.rows() == static_cast<Eigen::Index>(events.size()),
          ErrorCategory::kShapeMismatch, "link feature rows must equal the event count");
  require(node_features.rows() == static_cast<Eigen::Index>(num_nodes),
          ErrorCategory::kShapeMismatch, "node feature rows must equal num_nodes");
  require(raw_ids.empty() || raw_ids.size() == num_nodes, ErrorCategory::kShapeMismatch,
          "raw id table must cover every node");
  double last = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    require(e.timestamp >= 0.0 && std::isfinite(e.timestamp), ErrorCategory::kInvalidArgument,
            "event " + std::to_string(i) + " has an invalid timestamp");
    require(i == 0 || e.timestamp >= last, ErrorCategory::kInvalidArgument,
            "events are not sorted by timestamp at index " + std::to_string(i));
    require(e.source >= 0 && e.destination >= 0 &&
                static_cast<std::size_t>(e.source) < num_nodes &&
                static_cast<std::size_t>(e.destination) < num_nodes,
            ErrorCategory::kUnknownNode, "event " + std::to_string(i) + " references an unknown node");
    last = e.timestamp;
  }
}

bool SplitView::is_new(NodeId n) const {
  return std::binary_search(new_nodes.begin(), new_nodes.end(), n);
}

TemporalGraph load_events(std::istream& in, std::istream* node_features_in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, header_line)) {
    ++line_no;
    if (!text::trim(header_line).empty()) break;
  }
  header = text::split(text::trim(header_line), ',');
  if (header.size() < 3 || header[0] != "u" || header[1] != "v" || header[2] != "t") {
    fail(ErrorCategory::kParse, at_line(line_no) + "header must start with u,v,t");
  }
  const bool has_label = header.size() > 3 && header[3] == "label";
  const std::size_t feature_begin = has_label ? 4 : 3;
  const std::size_t width = header.size();
  const Eigen::Index d_e = static_cast<Eigen::Index>(width - feature_begin);

  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cols = text::split(trimmed, ',');
    if (cols.size() != width) {
      fail(ErrorCategory::kParse, at_line(line_no) + "inconsistent feature width: expected " +
                                      std::to_string(width) + " columns, got " +
                                      std::to_string(cols.size()));
    }
    RawRow row;
    const auto u = text::parse_int(cols[0]);
    const auto v = text::parse_int(cols[1]);
    const auto t = text::parse_double(cols[2]);
    if (!u || !v || *u < 0 || *v < 0) {
      fail(ErrorCategory::kParse, at_line(line_no) + "node ids must be nonnegative integers");
    }
    if (!t || !std::isfinite(*t)) fail(ErrorCategory::kParse, at_line(line_no) + "malformed timestamp");
    if (*t < 0.0) fail(ErrorCategory::kParse, at_line(line_no) + "negative timestamp");
    row.u = *u;
    row.v = *v;
    row.t = *t;
    if (has_label) {
      const auto label = text::parse_int(cols[3]);
      if (!label || (*label != 0 && *label != 1)) {
        fail(ErrorCategory::kParse, at_line(line_no) + "label must be 0 or 1");
      }
      row.label = static_cast<int>(*label);
    }
    row.features.reserve(static_cast<std::size_t>(d_e));
    for (std::size_t c = feature_begin; c < width; ++c) {
      const auto f = text::parse_double(cols[c]);
      if (!f) fail(ErrorCategory::kParse, at_line(line_no) + "malformed feature value");
      row.features.push_back(*f);
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].t < rows[b].t; });

  TemporalGraph g;
  std::unordered_map<std::int64_t, NodeId> dense;
  auto intern = [&](std::int64_t raw) {
    const auto [it, inserted] = dense.try_emplace(raw, static_cast<NodeId>(g.raw_ids.size()));
    if (inserted) g.raw_ids.push_back(raw);
    return it->second;
  };

  g.events.reserve(rows.size());
  g.link_features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), d_e);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const RawRow& r = rows[order[k]];
    Event e;
    e.source = intern(r.u);
    e.destination = intern(r.v);
    e.timestamp = r.t;
    e.label = r.label;
    g.events.push_back(e);
    for (Eigen::Index c = 0; c < d_e; ++c) {
      g.link_features(static_cast<Eigen::Index>(k), c) = r.features[static_cast<std::size_t>(c)];
    }
  }

  std::vector<std::pair<NodeId, std::vector<double>>> node_rows;
  Eigen::Index d_n = 0;
  if (node_features_in != nullptr) {
    std::size_t nline = 0;
    std::string nheader;
    while (std::getline(*node_features_in, nheader)) {
      ++nline;
      if (!text::trim(nheader).empty()) break;
    }
    const auto hcols = text::split(text::trim(nheader), ',');
    if (hcols.empty() || hcols[0] != "node") {
      fail(ErrorCategory::kParse, "node features " + at_line(nline) + "header must start with node");
    }
    d_n = static_cast<Eigen::Index>(hcols.size() - 1);
    while (std::getline(*node_features_in, line)) {
      ++nline;
      const auto trimmed = text::trim(line);
      if (trimmed.empty()) continue;
      const auto cols = text::split(trimmed, ',');
      if (cols.size() != hcols.size()) {
        fail(ErrorCategory::kParse, "node features " + at_line(nline) + "inconsistent feature width");
      }
      const auto raw = text::parse_int(cols[0]);
      if (!raw || *raw < 0) {
        fail(ErrorCategory::kParse, "node features " + at_line(nline) + "node id must be a nonnegative integer");
      }
      std::vector<double> feats;
      for (std::size_t c = 1; c < cols.size(); ++c) {
        const auto f = text::parse_double(cols[c]);
        if (!f) fail(ErrorCategory::kParse, "node features " + at_line(nline) + "malformed feature value");
        feats.push_back(*f);
      }
      node_rows.emplace_back(intern(*raw), std::move(feats));
    }
  }

  g.num_nodes = g.raw_ids.size();
  g.node_features = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes), d_n);
  for (const auto& [node, feats] : node_rows) {
    for (Eigen::Index c = 0; c < d_n; ++c) {
      g.node_features(node, c) = feats[static_cast<std::size_t>(c)];
    }
  }
  g.validate();
  return g;
}

TemporalGraph load_events_file(const std::string& events_path, const std::string& node_features_path) {
  std::ifstream events(events_path);
  require(static_cast<bool>(events), ErrorCategory::kIo, "cannot open " + events_path);
  if (node_features_path.empty()) return load_events(events);
  std::ifstream nodes(node_features_path);
  require(static_cast<bool>(nodes), ErrorCategory::kIo, "cannot open " + node_features_path);
  return load_events(events, &nodes);
}

void save_events(const TemporalGraph& g, std::ostream& out) {
  const bool has_label = std::any_of(g.events.begin(), g.events.end(),
                                     [](const Event& e) { return e.label.has_value(); });
  out << "u,v,t";
  if (has_label) out << ",label";
  for (Eigen::Index c = 0; c < g.d_e(); ++c) out << ",f_" << c;
  out << '\n';
  auto raw = [&](NodeId n) {
    return g.raw_ids.empty() ? n : g.raw_ids[static_cast<std::size_t>(n)];
  };
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    const Event& e = g.events[i];
    out << raw(e.source) << ',' << raw(e.destination) << ',' << text::format_double(e.timestamp);
    if (has_label) out << ',' << e.label.value_or(0);
    for (Eigen::Index c = 0; c < g.d_e(); ++c) {
      out << ',' << text::format_double(g.link_features(static_cast<Eigen::Index>(i), c));
    }
    out << '\n';
  }
}

void save_node_features(const TemporalGraph& g, std::ostream& out) {
  out << "node";
  for (Eigen::Index c = 0; c < g.d_n(); ++c) out << ",f_" << c;
  out << '\n';
  for (std::size_t n = 0; n < g.num_nodes; ++n) {
    out << (g.raw_ids.empty() ? static_cast<std::int64_t>(n) : g.raw_ids[n]);
    for (Eigen::Index c = 0; c < g.d_n(); ++c) {
      out << ',' << text::format_double(g.node_features(static_cast<Eigen::Index>(n), c));
    }
    out << '\n';
  }
}

SplitView chronological_split(const TemporalGraph& g, std::array<double, 3> ratios) {
  const std::size_t n = g.events.size();
  require(n >= 3, ErrorCategory::kInvalidArgument, "chronological split needs at least 3 events");
  for (double r : ratios) {
    require(r > 0.0, ErrorCategory::kInvalidArgument, "split ratios must be positive");
  }
  require(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) < 1e-9, ErrorCategory::kInvalidArgument,
          "split ratios must sum to 1");

  // The small slack keeps e.g. 0.7 * 100 from flooring to 69.
  auto boundary = [&](double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  };
  std::size_t b1 = std::clamp<std::size_t>(boundary(ratios[0]), 1, n - 2);
  std::size_t b2 = std::clamp<std::size_t>(boundary(ratios[0] + ratios[1]), b1 + 1, n - 1);

  SplitView split;
  split.train = {0, b1};
  split.val = {b1, b2};
  split.test = {b2, n};

  std::vector<char> seen(g.num_nodes, 0);
  for (std::size_t i = split.train.begin; i < split.train.end; ++i) {
    seen[static_cast<std::size_t>(g.events[i].source)] = 1;
    seen[static_cast<std::size_t>(g.events[i].destination)] = 1;
  }
  for (std::size_t node = 0; node < g.num_nodes; ++node) {
    if (!seen[node]) split.new_nodes.push_back(static_cast<NodeId>(node));
  }
  return split;
}

NeighborIndex::NeighborIndex(const TemporalGraph& g) {
  offsets_.assign(g.num_nodes + 1, 0);
  for (const Event& e : g.events) {
    ++offsets_[static_cast<std::size_t>(e.source) + 1];
    ++offsets_[static_cast<std::size_t>(e.destination) + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  entries_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Events are time-sorted, so appending in event order keeps each list
  // sorted.
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    const Event& e = g.events[i];
    const auto idx = static_cast<std::int64_t>(i);
    entries_[cursor[static_cast<std::size_t>(e.source)]++] = {e.destination, idx, e.timestamp};
    entries_[cursor[static_cast<std::size_t>(e.destination)]++] = {e.source, idx, e.timestamp};
  }
}

std::span<const NeighborEntry> NeighborIndex::neighbors(NodeId node) const {
  require(node >= 0 && static_cast<std::size_t>(node) < num_nodes(), ErrorCategory::kUnknownNode,
          "unknown node id " + std::to_string(node));
  const auto n = static_cast<std::size_t>(node);
  return {entries_.data() + offsets_[n], offsets_[n + 1] - offsets_[n]};
}

NeighborIndex build_neighbor_index(const TemporalGraph& g) {
  g.validate();
  return NeighborIndex(g);
}

}  // namespace ctdg
