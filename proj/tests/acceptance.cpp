// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ctdg/config.hpp"
#include "ctdg/diff/grad_check.hpp"
#include "ctdg/diff/ops.hpp"
#include "ctdg/dygformer.hpp"
#include "ctdg/edgebank.hpp"
#include "ctdg/evaluation.hpp"
#include "ctdg/pipeline.hpp"
#include "ctdg/rng.hpp"
#include "ctdg/sequence.hpp"

using namespace ctdg;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

std::string sci(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Matrix random_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

Eigen::Index dim(CounterRng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// ---------------------------------------------------------------------------
// Shared training runs of the criterion-6 setup.

RunConfig desk_config() {
  std::istringstream in(
      "synth.num_nodes=100\nsynth.num_events=20000\nsynth.recurrence_bias=0.8\nsynth.seed=0\n"
      "model.d=32\nmodel.layers=2\nmodel.heads=2\nmodel.max_len=32\nmodel.patch=1\n"
      "lr=0.0001\nbatch_size=200\nepochs=3\npatience=3\nstrategy=rnd\n");
  return parse_config(in);
}

class DeskRuns {
 public:
  const Dataset& data() {
    if (!data_) data_ = std::make_unique<Dataset>(load_dataset(desk_config()));
    return *data_;
  }

  // Trained model for an ablation name ("" is the full model) and seed.
  TrainResult& get(const std::string& ablation, std::uint64_t seed) {
    const auto key = std::make_pair(ablation, seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    RunConfig c = desk_config();
    if (!ablation.empty()) apply_ablation(c, ablation);
    const auto start = std::chrono::steady_clock::now();
    TrainResult r = train_link_model(c, data(), seed);
    std::cout << "  trained " << (ablation.empty() ? "full" : "w/o " + ablation) << " seed " << seed << " in "
              << fmt(seconds_since(start), 1) << " s (best epoch " << r.best_epoch << ", val AP "
              << fmt(r.best_val.ap) << ")" << std::endl;
    return runs_.emplace(key, std::move(r)).first->second;
  }

  double test_ap(const std::string& ablation, std::uint64_t seed, NegativeStrategy strategy) {
    const auto key = std::make_tuple(ablation, seed, strategy);
    if (auto it = test_ap_.find(key); it != test_ap_.end()) return it->second;
    TrainResult& r = get(ablation, seed);
    const RunConfig c = desk_config();
    const double ap =
        evaluate_link_model(r.params, r.hyper, data(), EvalSplit::kTest, strategy, c.eval_seed, eval_options(c))
            .report.ap;
    test_ap_[key] = ap;
    return ap;
  }

  void note_test_ap(const std::string& ablation, std::uint64_t seed, NegativeStrategy s, double ap) {
    test_ap_[std::make_tuple(ablation, seed, s)] = ap;
  }

  bool has(const std::string& ablation, std::uint64_t seed) const {
    return runs_.contains(std::make_pair(ablation, seed));
  }

 private:
  std::unique_ptr<Dataset> data_;
  std::map<std::pair<std::string, std::uint64_t>, TrainResult> runs_;
  std::map<std::tuple<std::string, std::uint64_t, NegativeStrategy>, double> test_ap_;
};

DeskRuns& desk() {
  static DeskRuns runs;
  return runs;
}

// ---------------------------------------------------------------------------
// 1. Worked co-occurrence example.

InteractionSequence sequence_of(NodeId anchor, const std::vector<NodeId>& neighbors) {
  InteractionSequence s;
  s.anchor = anchor;
  s.anchor_time = 10.0;
  s.max_len = neighbors.size();
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    s.entries.push_back({neighbors[i], static_cast<std::int64_t>(i), static_cast<double>(i)});
  }
  return s;
}

Verdict criterion_1() {
  const NodeId a = 1, b = 2, c = 3;
  const CooccurrencePair p = cooccurrence_counts(sequence_of(10, {a, b, a}), sequence_of(11, {b, b, a, c}));
  CountMatrix cu(3, 2);
  cu << 2, 1, 1, 2, 2, 1;
  CountMatrix cv(4, 2);
  cv << 1, 2, 1, 2, 2, 1, 0, 1;
  std::ostringstream d;
  d << "C_u=" << p.c_src.transpose().format(Eigen::IOFormat(0, 0, ",", ";")) << " C_v="
    << p.c_dst.transpose().format(Eigen::IOFormat(0, 0, ",", ";")) << " (columns shown as rows)";
  return {p.c_src == cu && p.c_dst == cv, d.str()};
}

// ---------------------------------------------------------------------------
// 2. Gradient fidelity.

using diff::Tape;
using diff::Var;

double check_op(CounterRng& rng, Eigen::Index r, Eigen::Index c, const std::function<Var(Tape&, Var)>& op,
                double scale = 1.0) {
  const Matrix x = random_matrix(rng, r, c, scale);
  Tape probe;
  const Var y = op(probe, probe.constant(x));
  const Matrix dir = random_matrix(rng, y.rows(), y.cols());
  return diff::grad_check(
             [&](Tape& t, Var v) { return diff::sum(diff::multiply(op(t, v), t.constant(dir))); }, x)
      .max_rel_error;
}

Verdict criterion_2() {
  const auto start = std::chrono::steady_clock::now();
  CounterRng rng(2, 2);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = dim(rng, 1, 6), k = dim(rng, 2, 6), n = dim(rng, 1, 6);
    const Matrix b = random_matrix(rng, k, n), same = random_matrix(rng, m, k), row = random_matrix(rng, 1, k);
    const Matrix other = random_matrix(rng, m, 2), gain = random_matrix(rng, 1, k), bias = random_matrix(rng, 1, k);
    note("matmul", check_op(rng, m, k, [&](Tape& t, Var x) { return diff::matmul(x, t.constant(b)); }));
    note("transpose", check_op(rng, m, k, [](Tape&, Var x) { return diff::transpose(x); }));
    note("add", check_op(rng, m, k, [&](Tape& t, Var x) { return diff::add(x, t.constant(row)); }));
    note("sub", check_op(rng, m, k, [&](Tape& t, Var x) { return diff::sub(t.constant(same), x); }));
    note("multiply", check_op(rng, m, k, [&](Tape& t, Var x) { return diff::multiply(x, t.constant(same)); }));
    note("scale", check_op(rng, m, k, [](Tape&, Var x) { return diff::scale(x, 1.7); }));
    note("concat_cols", check_op(rng, m, k, [&](Tape& t, Var x) {
      return diff::concat_cols(std::vector<Var>{x, t.constant(other)});
    }));
    note("vstack", check_op(rng, m, k, [](Tape&, Var x) { return diff::vstack(std::vector<Var>{x, x}); }));
    note("slice_rows", check_op(rng, m, k, [&](Tape&, Var x) { return diff::slice_rows(x, m - 1, 1); }));
    note("slice_cols", check_op(rng, m, k, [&](Tape&, Var x) { return diff::slice_cols(x, 1, k - 1); }));
    const std::vector<Eigen::Index> idx{0, -1, m - 1, 0};
    note("gather_rows", check_op(rng, m, k, [&](Tape&, Var x) { return diff::gather_rows(x, idx); }));
    note("reshape", check_op(rng, m, k, [&](Tape&, Var x) { return diff::reshape(x, k, m); }));
    note("sum", check_op(rng, m, k, [](Tape&, Var x) { return diff::sum(x); }));
    note("row_mean", check_op(rng, m, k, [](Tape&, Var x) { return diff::row_mean(x); }));
    const std::vector<std::vector<Eigen::Index>> groups{{0}, {m - 1, 0}};
    note("segment_mean", check_op(rng, m, k, [&](Tape&, Var x) { return diff::segment_mean(x, groups); }));
    note("softmax_rows", check_op(rng, m, k, [](Tape&, Var x) { return diff::softmax_rows(x); }, 3.0));
    note("layer_norm", check_op(rng, m, k, [&](Tape& t, Var x) {
      return diff::layer_norm(x, t.constant(gain), t.constant(bias));
    }));
    note("relu", check_op(rng, m, k, [](Tape&, Var x) { return diff::relu(x); }));
    note("gelu", check_op(rng, m, k, [](Tape&, Var x) { return diff::gelu(x); }, 3.0));
    note("sigmoid", check_op(rng, m, k, [](Tape&, Var x) { return diff::sigmoid(x); }, 4.0));
    const std::uint64_t seed = rng();
    note("dropout", check_op(rng, m, k, [&](Tape&, Var x) {
      CounterRng mask(seed, 0);
      return diff::dropout(x, 0.3, mask, true);
    }));
    Matrix labels(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) labels(i, 0) = static_cast<double>(rng.below(2));
    note("bce_with_logits", check_op(rng, m, 1, [&](Tape&, Var x) { return diff::bce_with_logits(x, labels); }, 5.0));
    const Matrix deltas = random_matrix(rng, m, 1, 5.0).cwiseAbs();
    note("time_encoding", check_op(rng, 1, k, [&](Tape&, Var w) { return diff::time_encoding(deltas, w); }, 0.2));
    const std::vector<diff::RowSegment> segs{{0, 1}, {1, m + 1}};
    const Matrix kk = random_matrix(rng, m + 2, k), vv = random_matrix(rng, m + 2, k);
    note("segment_attention", check_op(rng, m + 2, k, [&](Tape& t, Var q) {
      CounterRng mask(seed, 1);
      return diff::segment_attention(q, t.constant(kk), t.constant(vv), std::span<const diff::RowSegment>(segs), 0.6,
                                     trial % 2 ? 0.2 : 0.0, mask, true);
    }));
  }
  double prim = 0.0;
  std::string worst_name;
  for (const auto& [name, e] : worst) {
    if (e >= prim) {
      prim = e;
      worst_name = name;
    }
  }
  const diff::GradCheckResult model = gradcheck_model(tiny_hyper(), 0);
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << worst.size() << " primitives x 20 trials, max rel error " << sci(prim) << " (" << worst_name
    << "); full model " << sci(model.max_rel_error) << " over " << model.checked << " coordinates; "
    << fmt(elapsed, 1) << " s";
  return {prim <= 1e-6 && model.max_rel_error <= 1e-4 && model.checked > 0 && elapsed <= 60.0, d.str()};
}

// ---------------------------------------------------------------------------
// 3. Oracle suites.

TemporalGraph random_graph(CounterRng& rng, std::size_t max_events, std::size_t max_nodes) {
  TemporalGraph g;
  g.num_nodes = 2 + rng.below(max_nodes);
  const std::size_t n = 1 + rng.below(max_events);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += static_cast<double>(rng.below(3));
    g.events.push_back({static_cast<NodeId>(rng.below(g.num_nodes)), static_cast<NodeId>(rng.below(g.num_nodes)), t, {}});
  }
  g.link_features = Matrix::Zero(static_cast<Eigen::Index>(n), 0);
  g.node_features = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes), 0);
  return g;
}

std::size_t suite_extraction(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TemporalGraph g = random_graph(rng, 80, 12);
    const NeighborIndex idx = build_neighbor_index(g);
    const auto node = static_cast<NodeId>(rng.below(g.num_nodes));
    const double t = static_cast<double>(rng.below(static_cast<std::uint64_t>(g.events.back().timestamp) + 3));
    const std::size_t max_len = 1 + rng.below(12);
    std::vector<NeighborEntry> all;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Event& e = g.events[i];
      if (!(e.timestamp < t)) continue;
      if (e.source == node) all.push_back({e.destination, static_cast<std::int64_t>(i), e.timestamp});
      if (e.destination == node) all.push_back({e.source, static_cast<std::int64_t>(i), e.timestamp});
    }
    if (all.size() > max_len) all.erase(all.begin(), all.end() - static_cast<std::ptrdiff_t>(max_len));
    bad += extract_first_hop(idx, node, t, max_len).entries != all;
  }
  return bad;
}

std::size_t suite_cooccurrence(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<NodeId> nu(rng.below(20)), nv(rng.below(20));
    const auto alphabet = 1 + rng.below(8);
    for (auto& x : nu) x = static_cast<NodeId>(rng.below(alphabet));
    for (auto& x : nv) x = static_cast<NodeId>(rng.below(alphabet));
    std::map<NodeId, int> hu, hv;
    for (NodeId x : nu) ++hu[x];
    for (NodeId x : nv) ++hv[x];
    const auto p = cooccurrence_counts(sequence_of(0, nu), sequence_of(1, nv));
    bool ok = p.c_src.rows() == static_cast<Eigen::Index>(nu.size()) &&
              p.c_dst.rows() == static_cast<Eigen::Index>(nv.size());
    for (std::size_t i = 0; ok && i < nu.size(); ++i) {
      ok = p.c_src(static_cast<Eigen::Index>(i), 0) == hu[nu[i]] && p.c_src(static_cast<Eigen::Index>(i), 1) == hv[nu[i]];
    }
    for (std::size_t i = 0; ok && i < nv.size(); ++i) {
      ok = p.c_dst(static_cast<Eigen::Index>(i), 0) == hu[nv[i]] && p.c_dst(static_cast<Eigen::Index>(i), 1) == hv[nv[i]];
    }
    bad += !ok;
  }
  return bad;
}

std::size_t suite_patching(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = static_cast<Eigen::Index>(rng.below(60));
    const Eigen::Index w = dim(rng, 1, 5);
    const Eigen::Index p = dim(rng, 1, 16);
    const Matrix x = random_matrix(rng, n, w);
    const auto patched = patch(x, p);
    const auto expected_l = static_cast<Eigen::Index>(std::max(1.0, std::ceil(static_cast<double>(n) / p)));
    bad += patched.patches.rows() != expected_l || patched.patches.cols() != w * p || unpatch(patched.patches, w, n) != x;
  }
  return bad;
}

std::size_t suite_transformer(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DyGFormerHyper h;
    h.d = dim(rng, 1, 3);
    h.heads = rng.bernoulli(0.5) ? 1 : 2;
    h.d_t = 2;
    h.d_c = 2;
    h.d_out = 2;
    h.layers = 1;
    ModelParams params = init_params(h, static_cast<std::uint64_t>(trial));
    for (diff::Parameter* p : params.all()) p->value = random_matrix(rng, p->value.rows(), p->value.cols(), 0.5);
    const Eigen::Index n = dim(rng, 1, 6);
    const Matrix z = random_matrix(rng, n, h.width(), 2.0);
    Tape tape;
    const std::vector<Segment> one{{0, n}};
    const Matrix got = transformer_layer(tape, tape.constant(z), params.layers[0], one, 0.0, {}).value();
    bad += (got - transformer_layer(z, params.layers[0])).cwiseAbs().maxCoeff() > 1e-9;
  }
  return bad;
}

std::size_t suite_metrics(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const std::uint64_t levels = 1 + rng.below(trial % 2 ? 1000 : 5);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels));
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    // Rank walk over descending scores, tied items entering together.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    double ap = 0.0;
    int pos_total = 0;
    for (int v : y) pos_total += v;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[order[i]] != 1) continue;
      std::size_t end = i;
      while (end + 1 < n && s[order[end + 1]] == s[order[i]]) ++end;
      int pos_upto = 0;
      for (std::size_t j = 0; j <= end; ++j) pos_upto += y[order[j]];
      ap += static_cast<double>(pos_upto) / static_cast<double>(end + 1);
    }
    ap /= pos_total;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
      }
    }
    bad += std::abs(average_precision(s, y) - ap) > 1e-12 || std::abs(auc_roc(s, y) - wins / pairs) > 1e-12;
  }
  return bad;
}

std::size_t suite_edgebank(CounterRng& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TemporalGraph g = random_graph(rng, 60, 10);
    const double duration = 1.0 + static_cast<double>(rng.below(20));
    const std::size_t k = rng.below(3);
    const double last = g.events.back().timestamp;
    std::map<std::pair<NodeId, NodeId>, std::vector<double>> times;
    for (const Event& e : g.events) {
      times[{std::min(e.source, e.destination), std::max(e.source, e.destination)}].push_back(e.timestamp);
    }
    double total = 0.0;
    int repeated = 0;
    for (const auto& [pair, ts] : times) {
      if (ts.size() < 2) continue;
      double gaps = 0.0;
      for (std::size_t i = 1; i < ts.size(); ++i) gaps += ts[i] - ts[i - 1];
      total += gaps / static_cast<double>(ts.size() - 1);
      ++repeated;
    }
    const double tw_re = repeated ? total / repeated : 0.0;
    std::vector<PairQuery> queries;
    for (int q = 0; q < 20; ++q) {
      queries.push_back({static_cast<NodeId>(rng.below(g.num_nodes)), static_cast<NodeId>(rng.below(g.num_nodes)), 0.0});
    }
    for (EdgeBankVariant v : kAllEdgeBankVariants) {
      const auto pred = edgebank_predict(build_memory(v, g.events, duration, k), queries);
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto it = times.find({std::min(queries[q].u, queries[q].v), std::max(queries[q].u, queries[q].v)});
        int expected = 0;
        if (it != times.end()) {
          const double lo = last - (v == EdgeBankVariant::kTimeWindowRepeat ? tw_re : duration);
          switch (v) {
            case EdgeBankVariant::kInfinite: expected = 1; break;
            case EdgeBankVariant::kThreshold: expected = it->second.size() > k; break;
            default: expected = it->second.back() >= lo; break;
          }
        }
        bad += pred[q] != expected;
      }
    }
  }
  return bad;
}

Verdict criterion_3() {
  const auto start = std::chrono::steady_clock::now();
  CounterRng rng(3, 3);
  const std::vector<std::pair<std::string, std::size_t>> suites{
      {"extraction", suite_extraction(rng)}, {"cooccurrence", suite_cooccurrence(rng)},
      {"patching", suite_patching(rng)},     {"transformer_layer", suite_transformer(rng)},
      {"ap_auc", suite_metrics(rng)},        {"edgebank", suite_edgebank(rng)}};
  std::size_t total = 0;
  std::ostringstream d;
  for (const auto& [name, bad] : suites) {
    d << name << "=" << bad << " ";
    total += bad;
  }
  const double elapsed = seconds_since(start);
  d << "mismatches over 1000 trials each; " << fmt(elapsed, 1) << " s";
  return {total == 0 && elapsed <= 120.0, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Determinism.

Verdict criterion_4() {
  std::vector<std::string> failures;
  SynthSpec spec;
  spec.d_e = 2;
  spec.d_n = 2;
  const TemporalGraph g1 = generate_synthetic(spec, 0);
  const TemporalGraph g2 = generate_synthetic(spec, 0);
  if (g1.events != g2.events || g1.link_features != g2.link_features || g1.node_features != g2.node_features) {
    failures.push_back("dataset");
  }
  DyGFormerHyper h;
  h.d_n = 2;
  h.d_e = 2;
  const ModelParams p1 = init_params(h, 0);
  const ModelParams p2 = init_params(h, 0);
  for (std::size_t i = 0; i < p1.all().size(); ++i) {
    if (p1.all()[i]->value != p2.all()[i]->value) {
      failures.push_back("init");
      break;
    }
  }

  std::istringstream small(
      "synth.num_nodes=30\nsynth.num_events=1200\nsynth.d_E=2\nsynth.d_N=2\n"
      "model.d_t=4\nmodel.d_c=4\nmodel.d=4\nmodel.d_out=8\nmodel.layers=1\nmodel.max_len=8\nmodel.patch=2\n"
      "lr=0.003\nbatch_size=60\nepochs=2\npatience=2\n");
  const RunConfig c = parse_config(small);
  const Dataset data = load_dataset(c);
  const TrainResult a = train_link_model(c, data, 0);
  const TrainResult b = train_link_model(c, data, 0);
  bool same_losses = a.history.size() == b.history.size();
  for (std::size_t i = 0; same_losses && i < a.history.size(); ++i) {
    same_losses = a.history[i].train_loss == b.history[i].train_loss && a.history[i].val.ap == b.history[i].val.ap &&
                  a.history[i].val.auc_roc == b.history[i].val.auc_roc;
  }
  if (!same_losses) failures.push_back("training");
  ModelParams ma = a.params, mb = b.params;
  const auto ra = evaluate_link_model(ma, a.hyper, data, EvalSplit::kTest, NegativeStrategy::kHistorical, 0,
                                      eval_options(c));
  const auto rb = evaluate_link_model(mb, b.hyper, data, EvalSplit::kTest, NegativeStrategy::kHistorical, 0,
                                      eval_options(c));
  if (ra.report.ap != rb.report.ap || ra.report.auc_roc != rb.report.auc_roc) failures.push_back("metrics");

  // EdgeBank over five run seeds on the desk dataset.
  RunConfig eb = desk_config();
  eb.seeds = {0, 1, 2, 3, 4};
  eb.output_dir = (std::filesystem::temp_directory_path() / "ctdg_acceptance_edgebank").string();
  std::ostringstream quiet;
  const auto records = command_edgebank(eb, quiet);
  std::filesystem::remove_all(eb.output_dir);
  double max_std = 0.0;
  std::size_t groups = 0;
  for (const SeedSummary& s : summarize_seeds(records)) {
    if (s.n != 5) failures.push_back("edgebank runs");
    max_std = std::max(max_std, s.stddev);
    ++groups;
  }
  if (max_std != 0.0 || groups == 0) failures.push_back("edgebank variance");

  std::ostringstream d;
  d << "dataset, init, " << a.history.size() << " epoch losses, metric reports; EdgeBank max std over 5 runs "
    << max_std << " across " << groups << " metrics";
  if (!failures.empty()) {
    d << "; differs:";
    for (const auto& f : failures) d << ' ' << f;
  }
  return {failures.empty(), d.str()};
}

// ---------------------------------------------------------------------------
// 5. Split contract.

Verdict criterion_5() {
  CounterRng rng(5, 5);
  std::size_t bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TemporalGraph g = random_graph(rng, 5000, 50);
    if (g.size() < 3) continue;
    const SplitView s = chronological_split(g);
    const double n = static_cast<double>(g.size());
    const double dev = std::max({std::abs(static_cast<double>(s.train.size()) - 0.70 * n),
                                 std::abs(static_cast<double>(s.val.size()) - 0.15 * n),
                                 std::abs(static_cast<double>(s.test.size()) - 0.15 * n)});
    if (g.size() >= 20) worst = std::max(worst, dev);
    const bool ok = s.train.begin == 0 && s.train.end == s.val.begin && s.val.end == s.test.begin &&
                    s.test.end == g.size() && (g.size() < 20 || dev <= 1.0) &&
                    g.events[s.train.end - 1].timestamp <= g.events[s.val.begin].timestamp &&
                    g.events[s.val.end - 1].timestamp <= g.events[s.test.begin].timestamp;
    bad += !ok;
  }
  return {bad == 0, "1000 random graphs, max deviation " + fmt(worst, 2) + " events, " + std::to_string(bad) +
                        " violations"};
}

// ---------------------------------------------------------------------------
// 6. Desk-scale learnability.

Verdict criterion_6() {
  const auto start = std::chrono::steady_clock::now();
  DeskRuns& runs = desk();
  TrainResult& r = runs.get("", 0);
  const double ap = runs.test_ap("", 0, NegativeStrategy::kRandom);
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << "test AP " << fmt(ap) << " (rnd) after " << r.history.size() << " epochs, " << fmt(elapsed, 1)
    << " s including data generation and test evaluation";
  return {ap >= 0.85 && elapsed <= 600.0 && r.history.size() <= 20, d.str()};
}

// ---------------------------------------------------------------------------
// 7. Ablation direction.

Verdict criterion_7() {
  DeskRuns& runs = desk();
  std::map<std::string, double> mean;
  for (const std::string& variant : {std::string(), std::string("ncoe"), std::string("te"), std::string("mixsd")}) {
    double total = 0.0;
    for (std::uint64_t seed : {0, 1, 2}) total += runs.test_ap(variant, seed, NegativeStrategy::kRandom);
    mean[variant] = total / 3.0;
  }
  const double full = mean[""];
  const bool ok = full >= mean["ncoe"] && full >= mean["te"] && full >= mean["mixsd"] && full - mean["ncoe"] >= 0.02;
  std::ostringstream d;
  d << "mean test AP full " << fmt(full) << ", w/o NCoE " << fmt(mean["ncoe"]) << ", w/o TE " << fmt(mean["te"])
    << ", w/o MixSD " << fmt(mean["mixsd"]) << "; full - w/o NCoE " << fmt(full - mean["ncoe"]);
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Negative-strategy hardness.

Verdict criterion_8() {
  DeskRuns& runs = desk();
  double rnd = 0.0, hist = 0.0;
  for (std::uint64_t seed : {0, 1, 2}) {
    rnd += runs.test_ap("", seed, NegativeStrategy::kRandom) / 3.0;
    hist += runs.test_ap("", seed, NegativeStrategy::kHistorical) / 3.0;
  }
  return {hist <= rnd, "mean test AP hist " + fmt(hist) + " vs rnd " + fmt(rnd)};
}

// ---------------------------------------------------------------------------
// 9. Leakage audit.

Verdict criterion_9() {
  DeskRuns& runs = desk();
  const Dataset& data = runs.data();
  const RunConfig c = desk_config();
  ModelParams params;
  DyGFormerHyper hyper;
  if (runs.has("", 0)) {
    params = runs.get("", 0).params;
    hyper = runs.get("", 0).hyper;
  } else {
    hyper = resolve_hyper(c, data.graph);
    params = init_params(hyper, 0);
  }
  LeakageAudit audit;
  EvalOptions opts = eval_options(c);
  opts.audit = &audit;
  opts.max_positives = 500;  // 500 positives + 500 negatives
  evaluate_link_model(params, hyper, data, EvalSplit::kTest, NegativeStrategy::kRandom, 0, opts);
  std::ostringstream d;
  d << audit.links << " links, " << audit.inputs << " inputs, " << audit.violations << " violations";
  return {audit.links >= 1000 && audit.inputs > 0 && audit.violations == 0, d.str()};
}

// ---------------------------------------------------------------------------
// 10. Checkpoint round trip.

Verdict criterion_10() {
  DeskRuns& runs = desk();
  const RunConfig c = desk_config();
  const Dataset& data = runs.data();
  const TrainResult& r = runs.get("", 0);
  const auto path = std::filesystem::temp_directory_path() / "ctdg_acceptance.ckpt";
  diff::save_container(make_checkpoint(r, c, data), path.string());
  LoadedModel m = load_checkpoint(path.string());
  std::filesystem::remove(path);

  bool params_equal = true;
  const auto a = r.params.all();
  const auto b = m.params.all();
  params_equal = a.size() == b.size();
  for (std::size_t i = 0; params_equal && i < a.size(); ++i) {
    params_equal = a[i]->value.size() == b[i]->value.size() &&
                   std::memcmp(a[i]->value.data(), b[i]->value.data(),
                               sizeof(double) * static_cast<std::size_t>(a[i]->value.size())) == 0;
  }
  const EvalResult val =
      evaluate_link_model(m.params, m.hyper, data, EvalSplit::kVal, c.effective_val_strategy(), m.eval_seed,
                          eval_options(c));
  const bool metrics_equal = val.report.ap == r.best_val.ap && val.report.auc_roc == r.best_val.auc_roc;
  std::ostringstream d;
  d << "parameters " << (params_equal ? "bit-identical" : "DIFFER") << "; val AP " << std::setprecision(17)
    << val.report.ap << " vs " << r.best_val.ap << ", AUC " << val.report.auc_roc << " vs " << r.best_val.auc_roc;
  return {params_equal && metrics_equal, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"paper co-occurrence example", criterion_1},
      {"gradient fidelity", criterion_2},
      {"oracle equivalence suites", criterion_3},
      {"determinism", criterion_4},
      {"split contract", criterion_5},
      {"desk-scale learnability", criterion_6},
      {"ablation direction", criterion_7},
      {"negative-strategy hardness", criterion_8},
      {"leakage audit", criterion_9},
      {"checkpoint round trip", criterion_10},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(number)) continue;
    Verdict o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
