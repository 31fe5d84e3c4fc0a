#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ctdg/error.hpp"
#include "ctdg/rng.hpp"
#include "ctdg/temporal_graph.hpp"

using namespace ctdg;

namespace {

TemporalGraph parse(const std::string& csv) {
  std::istringstream in(csv);
  return load_events(in);
}

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected ctdg::Error");
  return ErrorCategory::kParse;
}

TemporalGraph random_graph(CounterRng& rng, std::size_t n_events, std::size_t n_nodes) {
  TemporalGraph g;
  g.num_nodes = n_nodes;
  double t = 0.0;
  for (std::size_t i = 0; i < n_events; ++i) {
    t += static_cast<double>(rng.below(3));
    g.events.push_back({static_cast<NodeId>(rng.below(n_nodes)), static_cast<NodeId>(rng.below(n_nodes)), t, {}});
  }
  g.link_features = Matrix::Zero(static_cast<Eigen::Index>(n_events), 0);
  g.node_features = Matrix::Zero(static_cast<Eigen::Index>(n_nodes), 0);
  return g;
}

}  // namespace

TEST_CASE("event csv is sorted by time and ids are remapped by first appearance") {
  const TemporalGraph g = parse("u,v,t,label,f_0\n7,3,5.0,1,0.5\n3,9,1.5,0,-1\n9,7,5.0,0,2\n");
  REQUIRE(g.size() == 3);
  CHECK(g.num_nodes == 3);
  CHECK(g.raw_ids == std::vector<std::int64_t>{3, 9, 7});
  CHECK(g.events[0] == Event{0, 1, 1.5, 0});
  // Equal timestamps keep file order.
  CHECK(g.events[1] == Event{2, 0, 5.0, 1});
  CHECK(g.events[2] == Event{1, 2, 5.0, 0});
  CHECK(g.d_e() == 1);
  CHECK(g.link_features(0, 0) == -1.0);
  CHECK(g.link_features(1, 0) == 0.5);
}

TEST_CASE("csv without label or features") {
  const TemporalGraph g = parse("u,v,t\n0,1,0\n1,2,3\n");
  CHECK(g.d_e() == 0);
  CHECK_FALSE(g.events[0].label.has_value());
}

TEST_CASE("node feature csv") {
  std::istringstream ev("u,v,t\n10,20,1\n");
  std::istringstream nf("node,f_0,f_1\n20,1,2\n10,3,4\n");
  const TemporalGraph g = load_events(ev, &nf);
  REQUIRE(g.d_n() == 2);
  CHECK(g.node_features(0, 0) == 3.0);  // raw id 10 is dense id 0
  CHECK(g.node_features(1, 1) == 2.0);
}

TEST_CASE("malformed input is a parse error") {
  CHECK(category_of([] { parse("a,b,c\n1,2,3\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { parse("u,v,t\n1,2\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { parse("u,v,t\n1,2,x\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { parse("u,v,t\n-1,2,3\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { parse("u,v,t\n1,2,-3\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { parse("u,v,t,label\n1,2,3,2\n"); }) == ErrorCategory::kParse);
  CHECK(category_of([] { load_events_file("/nonexistent/events.csv"); }) == ErrorCategory::kIo);
}

TEST_CASE("save and load round trip") {
  SynthSpec spec;
  spec.num_nodes = 20;
  spec.num_events = 300;
  spec.d_e = 3;
  spec.d_n = 2;
  spec.with_labels = true;
  const TemporalGraph g = generate_synthetic(spec, 4);
  std::ostringstream ev;
  std::ostringstream nf;
  save_events(g, ev);
  save_node_features(g, nf);
  std::istringstream ev_in(ev.str());
  std::istringstream nf_in(nf.str());
  const TemporalGraph back = load_events(ev_in, &nf_in);
  CHECK(back.events == g.events);
  CHECK(back.link_features == g.link_features);
  // Nodes that never interact are absent from the event file.
  CHECK(back.node_features == g.node_features.topRows(static_cast<Eigen::Index>(back.num_nodes)));
}

TEST_CASE("validate rejects broken invariants") {
  TemporalGraph g = parse("u,v,t\n0,1,0\n1,2,3\n");
  g.validate();
  TemporalGraph unsorted = g;
  std::swap(unsorted.events[0], unsorted.events[1]);
  CHECK_THROWS_AS(unsorted.validate(), Error);
  TemporalGraph bad_node = g;
  bad_node.events[0].source = 17;
  CHECK_THROWS_AS(bad_node.validate(), Error);
  TemporalGraph bad_features = g;
  bad_features.link_features = Matrix::Zero(5, 1);
  CHECK(category_of([&] { bad_features.validate(); }) == ErrorCategory::kShapeMismatch);
}

TEST_CASE("chronological split contract on randomized graphs") {
  CounterRng rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(3000);
    const TemporalGraph g = random_graph(rng, n, 2 + rng.below(50));
    const SplitView s = chronological_split(g);
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == s.val.begin);
    CHECK(s.val.end == s.test.begin);
    CHECK(s.test.end == n);
    CHECK(s.train.size() >= 1);
    CHECK(s.val.size() >= 1);
    CHECK(s.test.size() >= 1);
    if (n >= 20) {
      CHECK(std::abs(static_cast<double>(s.train.size()) - 0.70 * n) <= 1.0);
      CHECK(std::abs(static_cast<double>(s.val.size()) - 0.15 * n) <= 1.0);
      CHECK(std::abs(static_cast<double>(s.test.size()) - 0.15 * n) <= 1.0);
    }
    CHECK(g.events[s.train.end - 1].timestamp <= g.events[s.val.begin].timestamp);
    CHECK(g.events[s.val.end - 1].timestamp <= g.events[s.test.begin].timestamp);
  }
}

TEST_CASE("new nodes are exactly those absent from train") {
  const TemporalGraph g = parse("u,v,t\n0,1,0\n1,2,1\n0,2,2\n3,0,3\n4,5,4\n0,1,5\n2,1,6\n5,6,7\n1,0,8\n6,7,9\n");
  const SplitView s = chronological_split(g);
  std::set<NodeId> in_train;
  for (std::size_t i = s.train.begin; i < s.train.end; ++i) {
    in_train.insert(g.events[i].source);
    in_train.insert(g.events[i].destination);
  }
  for (NodeId n = 0; n < static_cast<NodeId>(g.num_nodes); ++n) CHECK(s.is_new(n) == !in_train.contains(n));
}

TEST_CASE("split arguments are validated") {
  const TemporalGraph g = parse("u,v,t\n0,1,0\n1,2,1\n");
  CHECK_THROWS_AS(chronological_split(g), Error);
  const TemporalGraph h = parse("u,v,t\n0,1,0\n1,2,1\n2,3,4\n");
  CHECK_THROWS_AS(chronological_split(h, {0.5, 0.5, 0.5}), Error);
  CHECK_THROWS_AS(chronological_split(h, {1.0, 0.0, 0.0}), Error);
}

TEST_CASE("neighbor index lists every event under both endpoints in time order") {
  CounterRng rng(3, 0);
  const TemporalGraph g = random_graph(rng, 500, 15);
  const NeighborIndex idx = build_neighbor_index(g);
  CHECK(idx.total_entries() == 2 * g.size());
  for (NodeId n = 0; n < 15; ++n) {
    const auto list = idx.neighbors(n);
    std::vector<NeighborEntry> expected;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Event& e = g.events[i];
      if (e.source == n) expected.push_back({e.destination, static_cast<std::int64_t>(i), e.timestamp});
      if (e.destination == n) expected.push_back({e.source, static_cast<std::int64_t>(i), e.timestamp});
    }
    CHECK(std::vector<NeighborEntry>(list.begin(), list.end()) == expected);
  }
  CHECK_THROWS_AS(idx.neighbors(15), Error);
}

TEST_CASE("synthetic generator is deterministic and recurrence-driven") {
  SynthSpec spec;
  spec.num_nodes = 50;
  spec.num_events = 4000;
  spec.recurrence_bias = 0.8;
  const TemporalGraph a = generate_synthetic(spec, 0);
  const TemporalGraph b = generate_synthetic(spec, 0);
  const TemporalGraph c = generate_synthetic(spec, 1);
  CHECK(a.events == b.events);
  CHECK(a.events != c.events);
  // Fresh pairs run out late, so the repeat share sits at or above the bias.
  CHECK(repeat_fraction(a) > 0.78);
  spec.num_nodes = 500;
  spec.recurrence_bias = 0.0;
  CHECK(repeat_fraction(generate_synthetic(spec, 0)) < 0.05);
}

TEST_CASE("synthetic spec text round trip") {
  std::istringstream in("# comment\nnum_nodes=12\nnum_events=34\nrecurrence_bias=0.25\nd_E=2\nd_N=1\nseed=9\n");
  const SynthSpec s = parse_synth_spec(in);
  CHECK(s.num_nodes == 12);
  CHECK(s.num_events == 34);
  CHECK(s.recurrence_bias == 0.25);
  CHECK(s.d_e == 2);
  CHECK(s.d_n == 1);
  CHECK(s.seed == 9);
  std::ostringstream out;
  save_synth_spec(s, out);
  std::istringstream again(out.str());
  const SynthSpec t = parse_synth_spec(again);
  CHECK(t.num_nodes == 12);
  CHECK(t.recurrence_bias == 0.25);
  std::istringstream bad("num_nodes=abc\n");
  CHECK_THROWS_AS(parse_synth_spec(bad), Error);
  std::istringstream unknown("colour=red\n");
  CHECK_THROWS_AS(parse_synth_spec(unknown), Error);
}
