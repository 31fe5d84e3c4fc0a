#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "ctdg/dygformer.hpp"
#include "ctdg/error.hpp"
#include "ctdg/pipeline.hpp"
#include "ctdg/rng.hpp"

using namespace ctdg;

namespace {

Matrix random_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

void randomize(ModelParams& params, CounterRng& rng, double scale = 0.5) {
  for (diff::Parameter* p : params.all()) p->value = random_matrix(rng, p->value.rows(), p->value.cols(), scale);
}

// Scalar-loop reference of one pre-LN Transformer block over a single
// segment.
Matrix reference_layer(const Matrix& z, const TransformerLayerParams& p) {
  const Eigen::Index n = z.rows();
  const Eigen::Index w = z.cols();
  auto norm = [&](const Matrix& x, const diff::Parameter& gain, const diff::Parameter& bias) {
    Matrix out(n, w);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mean = 0.0;
      for (Eigen::Index j = 0; j < w; ++j) mean += x(i, j);
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (Eigen::Index j = 0; j < w; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
      var /= static_cast<double>(w);
      for (Eigen::Index j = 0; j < w; ++j) {
        out(i, j) = (x(i, j) - mean) / std::sqrt(var + 1e-5) * gain.value(0, j) + bias.value(0, j);
      }
    }
    return out;
  };
  auto mul = [](const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
      }
    }
    return out;
  };
  const Matrix x = norm(z, p.ln1_gain, p.ln1_bias);
  const Eigen::Index dk = p.w_q[0].value.cols();
  Matrix heads(n, static_cast<Eigen::Index>(p.w_q.size()) * dk);
  for (std::size_t h = 0; h < p.w_q.size(); ++h) {
    const Matrix q = mul(x, p.w_q[h].value), k = mul(x, p.w_k[h].value), v = mul(x, p.w_v[h].value);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> e(static_cast<std::size_t>(n));
      double top = -1e300;
      for (Eigen::Index j = 0; j < n; ++j) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < dk; ++c) dot += q(i, c) * k(j, c);
        e[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(dk));
        top = std::max(top, e[static_cast<std::size_t>(j)]);
      }
      double total = 0.0;
      for (double& t : e) total += (t = std::exp(t - top));
      for (Eigen::Index c = 0; c < dk; ++c) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) acc += e[static_cast<std::size_t>(j)] / total * v(j, c);
        heads(i, static_cast<Eigen::Index>(h) * dk + c) = acc;
      }
    }
  }
  const Matrix o = mul(heads, p.w_o.value) + z;
  const Matrix y = norm(o, p.ln2_gain, p.ln2_bias);
  Matrix hidden = mul(y, p.w_1.value);
  for (Eigen::Index i = 0; i < hidden.rows(); ++i) {
    for (Eigen::Index j = 0; j < hidden.cols(); ++j) {
      const double t = hidden(i, j) + p.b_1.value(0, j);
      hidden(i, j) = 0.5 * t * (1.0 + std::erf(t / std::sqrt(2.0)));
    }
  }
  Matrix out = mul(hidden, p.w_2.value) + o;
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) += p.b_2.value.row(0);
  return out;
}

DyGFormerHyper small_hyper(const TemporalGraph& g) {
  DyGFormerHyper h;
  h.d_n = g.d_n();
  h.d_e = g.d_e();
  h.d_t = 4;
  h.d_c = 4;
  h.d = 4;
  h.d_out = 6;
  h.heads = 2;
  h.layers = 2;
  h.max_len = 8;
  h.patch = 2;
  h.dropout = 0.1;
  return h;
}

TemporalGraph small_graph(std::uint64_t seed) {
  SynthSpec spec;
  spec.num_nodes = 15;
  spec.num_events = 300;
  spec.d_e = 3;
  spec.d_n = 2;
  return generate_synthetic(spec, seed);
}

}  // namespace

TEST_CASE("tape transformer layer matches a scalar-loop reference") {
  CounterRng rng(30, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    DyGFormerHyper h;
    h.d = 1 + static_cast<Eigen::Index>(rng.below(3));
    h.heads = rng.bernoulli(0.5) ? 1 : 2;
    h.d_t = 2;
    h.d_c = 2;
    h.d_out = 2;
    h.layers = 1;
    ModelParams params = init_params(h, static_cast<std::uint64_t>(trial));
    randomize(params, rng);
    TransformerLayerParams& layer = params.layers[0];
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Matrix z = random_matrix(rng, n, h.width(), 2.0);
    const Matrix expected = reference_layer(z, layer);

    diff::Tape tape;
    const std::vector<Segment> one{{0, n}};
    const Matrix got = transformer_layer(tape, tape.constant(z), layer, one, 0.0, {}).value();
    REQUIRE((got - expected).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE((transformer_layer(z, layer) - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("segments of one batched layer are independent") {
  CounterRng rng(31, 0);
  DyGFormerHyper h;
  h.d = 2;
  h.d_t = 2;
  h.d_c = 2;
  h.d_out = 2;
  h.layers = 1;
  ModelParams params = init_params(h, 0);
  randomize(params, rng);
  const Matrix a = random_matrix(rng, 3, h.width());
  const Matrix b = random_matrix(rng, 5, h.width());
  Matrix both(8, h.width());
  both << a, b;
  diff::Tape tape;
  const std::vector<Segment> segs{{0, 3}, {3, 5}};
  const Matrix got = transformer_layer(tape, tape.constant(both), params.layers[0], segs, 0.0, {}).value();
  CHECK((got.topRows(3) - reference_layer(a, params.layers[0])).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((got.bottomRows(5) - reference_layer(b, params.layers[0])).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("full-model gradient check") {
  const DyGFormerHyper h = tiny_hyper();
  CHECK(h.d == 4);
  CHECK(h.d_t == 4);
  CHECK(h.d_c == 4);
  CHECK(h.heads == 2);
  CHECK(h.layers == 2);
  CHECK(h.max_len == 8);
  CHECK(h.patch == 2);
  for (std::uint64_t seed : {0, 1}) {
    const diff::GradCheckResult r = gradcheck_model(h, seed);
    CHECK(r.checked > 0);
    CHECK(r.skipped == 0);
    CHECK(r.max_rel_error <= 1e-4);
  }
  DyGFormerHyper sep = h;
  sep.sep_no = true;
  sep.mix_sequences = false;
  CHECK(gradcheck_model(sep, 2).max_rel_error <= 1e-4);
}

TEST_CASE("batched, single-query and float scoring agree") {
  const TemporalGraph g = small_graph(3);
  const NeighborIndex idx = build_neighbor_index(g);
  const GraphContext ctx{&g, &idx};
  const DyGFormerHyper h = small_hyper(g);
  ModelParams params = init_params(h, 5);
  CounterRng rng(32, 0);
  randomize(params, rng, 0.3);
  std::vector<PairQuery> queries;
  for (int i = 0; i < 40; ++i) {
    const Event& e = g.events[100 + rng.below(200)];
    queries.push_back({e.source, static_cast<NodeId>(rng.below(g.num_nodes)), e.timestamp});
  }
  const auto d = score_links<double>(params, h, ctx, queries, 7);
  const auto d_all = score_links<double>(params, h, ctx, queries, 1000);
  const auto f = score_links<float>(params, h, ctx, queries, 13);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(d[i] == doctest::Approx(d_all[i]).epsilon(1e-12));
    CHECK(std::abs(d[i] - f[i]) < 1e-4);
    const auto [hu, hv] = encode_pair(params, ctx, queries[i].u, queries[i].v, queries[i].t, h);
    const double p = 1.0 / (1.0 + std::exp(-link_logit(hu, hv, params.link_decoder)));
    CHECK(p == doctest::Approx(d[i]).epsilon(1e-10));
  }
}

TEST_CASE("model inputs never come from the query time or later") {
  const TemporalGraph g = small_graph(4);
  const NeighborIndex idx = build_neighbor_index(g);
  const GraphContext ctx{&g, &idx};
  DyGFormerHyper h = small_hyper(g);
  ModelParams params = init_params(h, 1);
  CounterRng rng(33, 0);
  std::vector<PairQuery> queries;
  for (int i = 0; i < 1000; ++i) {
    const Event& e = g.events[rng.below(g.size())];
    queries.push_back({e.source, e.destination, e.timestamp});
  }
  LeakageAudit audit;
  score_links<float>(params, h, ctx, queries, 100, &audit);
  CHECK(audit.links == queries.size());
  CHECK(audit.inputs > 0);
  CHECK(audit.violations == 0);
}

TEST_CASE("ablations cut the expected dependencies") {
  const TemporalGraph g = small_graph(5);
  const NeighborIndex idx = build_neighbor_index(g);
  const GraphContext ctx{&g, &idx};
  CounterRng rng(34, 0);
  const double t = g.events.back().timestamp + 1.0;

  SUBCASE("without co-occurrence encoding the encoder MLP is unused") {
    DyGFormerHyper h = small_hyper(g);
    h.use_ncoe = false;
    ModelParams params = init_params(h, 2);
    randomize(params, rng);
    const auto before = encode_pair(params, ctx, 0, 1, t, h);
    params.encoder.cooc.w_a.value.setRandom();
    params.encoder.proj.w_c.value.setRandom();
    const auto after = encode_pair(params, ctx, 0, 1, t, h);
    CHECK(before.first == after.first);
  }
  SUBCASE("without time encoding the frequencies are unused") {
    DyGFormerHyper h = small_hyper(g);
    h.use_te = false;
    ModelParams params = init_params(h, 2);
    randomize(params, rng);
    const auto before = encode_pair(params, ctx, 0, 1, t, h);
    params.encoder.time.w.value.setRandom();
    const auto after = encode_pair(params, ctx, 0, 1, t, h);
    CHECK(before.first == after.first);
  }
  SUBCASE("without mixing and co-occurrence h_u ignores the destination") {
    DyGFormerHyper h = small_hyper(g);
    h.use_ncoe = false;
    h.mix_sequences = false;
    ModelParams params = init_params(h, 2);
    randomize(params, rng);
    const auto a = encode_pair(params, ctx, 0, 1, t, h);
    const auto b = encode_pair(params, ctx, 0, 2, t, h);
    CHECK((a.first - b.first).cwiseAbs().maxCoeff() < 1e-12);
    h.mix_sequences = true;
    const auto c = encode_pair(params, ctx, 0, 1, t, h);
    const auto d = encode_pair(params, ctx, 0, 2, t, h);
    CHECK((c.first - d.first).cwiseAbs().maxCoeff() > 1e-9);
  }
  SUBCASE("separate occurrence encoding adds a destination MLP") {
    DyGFormerHyper h = small_hyper(g);
    h.sep_no = true;
    ModelParams params = init_params(h, 2);
    CHECK(params.encoder.cooc_dst.has_value());
    CHECK(params.encoder.proj.w_c.value.rows() == 2 * h.d_c * h.patch);
    CHECK_FALSE(init_params(small_hyper(g), 2).encoder.cooc_dst.has_value());
  }
}

TEST_CASE("parameter container round trip is bit-exact") {
  const TemporalGraph g = small_graph(6);
  DyGFormerHyper h = small_hyper(g);
  h.sep_no = true;
  ModelParams params = init_params(h, 3);
  const diff::TensorContainer c = to_container(params, h);
  const DyGFormerHyper back_h = hyper_from_manifest(c.manifest);
  CHECK(hyper_to_manifest(back_h) == hyper_to_manifest(h));
  const ModelParams back = from_container(c, back_h);
  const auto a = params.all();
  const auto b = back.all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    REQUIRE(a[i]->value.size() == b[i]->value.size());
    CHECK(std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(double) * static_cast<std::size_t>(a[i]->size())) ==
          0);
  }
  DyGFormerHyper wrong = h;
  wrong.d = 8;
  CHECK_THROWS_AS(from_container(c, wrong), Error);
}

TEST_CASE("parameter names are unique and init is seeded") {
  DyGFormerHyper h;
  h.d_n = 2;
  h.d_e = 2;
  h.d_t = 4;
  h.d_c = 2;
  h.d = 2;
  h.d_out = 3;
  ModelParams a = init_params(h, 0);
  ModelParams b = init_params(h, 0);
  ModelParams c = init_params(h, 1);
  std::set<std::string> names;
  for (const diff::Parameter* p : a.all()) CHECK(names.insert(p->name).second);
  CHECK(a.all()[0]->value == b.all()[0]->value);
  bool differs = false;
  for (std::size_t i = 0; i < a.all().size(); ++i) differs = differs || a.all()[i]->value != c.all()[i]->value;
  CHECK(differs);
  CHECK(a.link_model().size() == a.backbone().size() + 4);
}

TEST_CASE("hyperparameter validation") {
  DyGFormerHyper h;
  h.validate();
  DyGFormerHyper odd_time = h;
  odd_time.d_t = 3;
  CHECK_THROWS_AS(odd_time.validate(), Error);
  DyGFormerHyper heads = h;
  heads.heads = 3;  // 4d = 200 is not divisible by 3
  CHECK_THROWS_AS(heads.validate(), Error);
  DyGFormerHyper len = h;
  len.max_len = 0;
  CHECK_THROWS_AS(len.validate(), Error);
  DyGFormerHyper drop = h;
  drop.dropout = 1.0;
  CHECK_THROWS_AS(drop.validate(), Error);
}

TEST_CASE("unknown query nodes are rejected") {
  const TemporalGraph g = small_graph(7);
  const NeighborIndex idx = build_neighbor_index(g);
  const GraphContext ctx{&g, &idx};
  const DyGFormerHyper h = small_hyper(g);
  ModelParams params = init_params(h, 0);
  const std::vector<PairQuery> q{{0, static_cast<NodeId>(g.num_nodes), 1.0}};
  CHECK_THROWS_AS(score_links<double>(params, h, ctx, q), Error);
}
