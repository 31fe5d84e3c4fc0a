#include "ctdg/dygformer.hpp"

#include <cmath>
#include <string_view>

#include "text.hpp"

namespace ctdg {

using diff::BasicTape;
using diff::BasicVar;
using diff::Parameter;

void DyGFormerHyper::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCategory::kInvalidArgument, msg); };
  check(d_n >= 0 && d_e >= 0, "feature widths must be non-negative");
  check(d >= 1 && d_c >= 1 && d_out >= 1, "d, d_C and d_out must be positive");
  check(d_t >= 2 && d_t % 2 == 0, "d_T must be a positive even number");
  check(heads >= 1 && width() % heads == 0, "4d must be divisible by the number of heads");
  check(layers >= 1, "at least one Transformer layer is required");
  check(max_len >= 1, "max_len must be at least 1");
  check(patch >= 1, "patch size must be at least 1");
  check(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

std::map<std::string, std::string> hyper_to_manifest(const DyGFormerHyper& h) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"model.d_n", std::to_string(h.d_n)},
      {"model.d_e", std::to_string(h.d_e)},
      {"model.d_t", std::to_string(h.d_t)},
      {"model.d_c", std::to_string(h.d_c)},
      {"model.d", std::to_string(h.d)},
      {"model.d_out", std::to_string(h.d_out)},
      {"model.heads", std::to_string(h.heads)},
      {"model.layers", std::to_string(h.layers)},
      {"model.max_len", std::to_string(h.max_len)},
      {"model.patch", std::to_string(h.patch)},
      {"model.dropout", text::format_double(h.dropout)},
      {"model.use_ncoe", b(h.use_ncoe)},
      {"model.use_te", b(h.use_te)},
      {"model.mix_sequences", b(h.mix_sequences)},
      {"model.sep_no", b(h.sep_no)},
      {"model.include_self", b(h.include_self)},
  };
}

DyGFormerHyper hyper_from_manifest(const std::map<std::string, std::string>& m) {
  auto get = [&m](const std::string& key) -> const std::string& {
    const auto it = m.find(key);
    require(it != m.end(), ErrorCategory::kParse, "checkpoint manifest lacks " + key);
    return it->second;
  };
  auto integer = [&](const std::string& key) {
    const auto v = text::parse_int(get(key));
    require(v.has_value(), ErrorCategory::kParse, "bad integer for " + key);
    return *v;
  };
  auto flag = [&](const std::string& key) {
    const std::string& v = get(key);
    require(v == "true" || v == "false", ErrorCategory::kParse, "bad flag for " + key);
    return v == "true";
  };
  DyGFormerHyper h;
  h.d_n = integer("model.d_n");
  h.d_e = integer("model.d_e");
  h.d_t = integer("model.d_t");
  h.d_c = integer("model.d_c");
  h.d = integer("model.d");
  h.d_out = integer("model.d_out");
  h.heads = integer("model.heads");
  h.layers = integer("model.layers");
  h.max_len = static_cast<std::size_t>(integer("model.max_len"));
  h.patch = integer("model.patch");
  const auto dropout = text::parse_double(get("model.dropout"));
  require(dropout.has_value(), ErrorCategory::kParse, "bad dropout in checkpoint manifest");
  h.dropout = *dropout;
  h.use_ncoe = flag("model.use_ncoe");
  h.use_te = flag("model.use_te");
  h.mix_sequences = flag("model.mix_sequences");
  h.sep_no = flag("model.sep_no");
  h.include_self = flag("model.include_self");
  h.validate();
  return h;
}

namespace {

Parameter zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
  return Parameter(std::move(name), Matrix::Zero(rows, cols));
}

void add_head(std::vector<Parameter*>& out, MlpHeadParams& h) {
  out.insert(out.end(), {&h.w_1, &h.b_1, &h.w_2, &h.b_2});
}

void add_cooc(std::vector<Parameter*>& out, CooccurrenceEncoderParams& c) {
  out.insert(out.end(), {&c.w_a, &c.b_a, &c.w_b, &c.b_b});
}

MlpHeadParams make_head(const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
  return {zeros(prefix + ".w_1", in, hidden), zeros(prefix + ".b_1", 1, hidden), zeros(prefix + ".w_2", hidden, 1),
          zeros(prefix + ".b_2", 1, 1)};
}

CooccurrenceEncoderParams make_cooc(const std::string& prefix, Eigen::Index d_c) {
  return {zeros(prefix + ".w_a", 1, d_c), zeros(prefix + ".b_a", 1, d_c), zeros(prefix + ".w_b", d_c, d_c),
          zeros(prefix + ".b_b", 1, d_c)};
}

std::string_view leaf_name(std::string_view name) {
  const auto dot = name.rfind('.');
  return dot == std::string_view::npos ? name : name.substr(dot + 1);
}

// Per-head tensors are named "<...>.w_q.<h>"; strip the head index.
std::string_view kind_of(std::string_view name) {
  std::string_view leaf = leaf_name(name);
  if (!leaf.empty() && leaf.find_first_not_of("0123456789") == std::string_view::npos) {
    name = name.substr(0, name.size() - leaf.size() - 1);
    leaf = leaf_name(name);
  }
  return leaf;
}

}  // namespace

std::vector<Parameter*> ModelParams::backbone() {
  std::vector<Parameter*> out{&encoder.time.w};
  add_cooc(out, encoder.cooc);
  if (encoder.cooc_dst) add_cooc(out, *encoder.cooc_dst);
  PatchProjectionParams& p = encoder.proj;
  out.insert(out.end(), {&p.w_n, &p.b_n, &p.w_e, &p.b_e, &p.w_t, &p.b_t, &p.w_c, &p.b_c});
  for (TransformerLayerParams& layer : layers) {
    for (std::size_t h = 0; h < layer.w_q.size(); ++h) {
      out.insert(out.end(), {&layer.w_q[h], &layer.w_k[h], &layer.w_v[h]});
    }
    out.insert(out.end(), {&layer.w_o, &layer.w_1, &layer.b_1, &layer.w_2, &layer.b_2, &layer.ln1_gain,
                           &layer.ln1_bias, &layer.ln2_gain, &layer.ln2_bias});
  }
  out.insert(out.end(), {&w_out, &b_out});
  return out;
}

std::vector<Parameter*> ModelParams::link_model() {
  std::vector<Parameter*> out = backbone();
  add_head(out, link_decoder);
  return out;
}

std::vector<Parameter*> ModelParams::node_head() {
  std::vector<Parameter*> out;
  add_head(out, node_classifier);
  return out;
}

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out = link_model();
  add_head(out, node_classifier);
  return out;
}

std::vector<const Parameter*> ModelParams::all() const {
  const auto ptrs = const_cast<ModelParams*>(this)->all();
  return {ptrs.begin(), ptrs.end()};
}

ModelParams init_params(const DyGFormerHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  const Eigen::Index d = hyper.d;
  const Eigen::Index w = hyper.width();
  const Eigen::Index P = hyper.patch;
  const Eigen::Index d_c_in = hyper.sep_no ? 2 * hyper.d_c : hyper.d_c;

  ModelParams m;
  m.encoder.time.w = zeros("encoder.time.w", 1, hyper.d_t / 2);
  m.encoder.cooc = make_cooc("encoder.cooc", hyper.d_c);
  if (hyper.sep_no) m.encoder.cooc_dst = make_cooc("encoder.cooc_dst", hyper.d_c);
  PatchProjectionParams& p = m.encoder.proj;
  p.w_n = zeros("encoder.proj.w_n", hyper.d_n * P, d);
  p.b_n = zeros("encoder.proj.b_n", 1, d);
  p.w_e = zeros("encoder.proj.w_e", hyper.d_e * P, d);
  p.b_e = zeros("encoder.proj.b_e", 1, d);
  p.w_t = zeros("encoder.proj.w_t", hyper.d_t * P, d);
  p.b_t = zeros("encoder.proj.b_t", 1, d);
  p.w_c = zeros("encoder.proj.w_c", d_c_in * P, d);
  p.b_c = zeros("encoder.proj.b_c", 1, d);

  for (Eigen::Index l = 0; l < hyper.layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    TransformerLayerParams layer;
    for (Eigen::Index h = 0; h < hyper.heads; ++h) {
      const std::string idx = "." + std::to_string(h);
      layer.w_q.push_back(zeros(pre + "w_q" + idx, w, hyper.d_k()));
      layer.w_k.push_back(zeros(pre + "w_k" + idx, w, hyper.d_k()));
      layer.w_v.push_back(zeros(pre + "w_v" + idx, w, hyper.d_k()));
    }
    layer.w_o = zeros(pre + "w_o", hyper.heads * hyper.d_k(), w);
    layer.w_1 = zeros(pre + "w_1", w, 4 * w);
    layer.b_1 = zeros(pre + "b_1", 1, 4 * w);
    layer.w_2 = zeros(pre + "w_2", 4 * w, w);
    layer.b_2 = zeros(pre + "b_2", 1, w);
    layer.ln1_gain = zeros(pre + "ln1.gain", 1, w);
    layer.ln1_bias = zeros(pre + "ln1.bias", 1, w);
    layer.ln2_gain = zeros(pre + "ln2.gain", 1, w);
    layer.ln2_bias = zeros(pre + "ln2.bias", 1, w);
    m.layers.push_back(std::move(layer));
  }
  m.w_out = zeros("output.w_out", w, hyper.d_out);
  m.b_out = zeros("output.b_out", 1, hyper.d_out);
  m.link_decoder = make_head("link_decoder", 2 * hyper.d_out, hyper.d_out);
  m.node_classifier = make_head("node_classifier", hyper.d_out, hyper.d_out);

  CounterRng rng(seed, 0x1A17);
  for (Parameter* param : m.all()) {
    Matrix& v = param->value;
    const std::string_view kind = kind_of(param->name);
    if (param->name == "encoder.time.w") {
      const Eigen::Index k = v.cols();
      for (Eigen::Index i = 0; i < k; ++i) {
        v(0, i) = k == 1 ? 1.0 : std::pow(10.0, -9.0 * static_cast<double>(i) / static_cast<double>(k - 1));
      }
    } else if (kind == "gain") {
      v.setOnes();
    } else if (kind == "bias" || kind.starts_with("b_")) {
      v.setZero();
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(v.rows() + v.cols()));
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-a, a);
    }
    param->zero_grad();
  }
  return m;
}

diff::TensorContainer to_container(const ModelParams& params, const DyGFormerHyper& hyper) {
  diff::TensorContainer c;
  c.manifest = hyper_to_manifest(hyper);
  for (const Parameter* p : params.all()) c.tensors.emplace_back(p->name, p->value);
  return c;
}

ModelParams from_container(const diff::TensorContainer& c, const DyGFormerHyper& hyper) {
  ModelParams m = init_params(hyper, 0);
  for (Parameter* p : m.all()) {
    const Matrix* stored = c.find(p->name);
    require(stored != nullptr, ErrorCategory::kParse, "checkpoint lacks tensor " + p->name);
    require(stored->rows() == p->value.rows() && stored->cols() == p->value.cols(), ErrorCategory::kShapeMismatch,
            "checkpoint tensor " + p->name + " has the wrong shape");
    p->value = *stored;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Transformer layer

template <typename S>
BasicVar<S> transformer_layer(BasicTape<S>& tape, BasicVar<S> z, TransformerLayerParams& p,
                              std::span<const Segment> segments, double dropout, const ForwardOptions& opts) {
  using Var = BasicVar<S>;
  const bool use_dropout = opts.train && dropout > 0.0;
  require(!use_dropout || opts.rng != nullptr, ErrorCategory::kInvalidArgument,
          "training with dropout needs a random generator");
  CounterRng unused;
  CounterRng& rng = use_dropout ? *opts.rng : unused;

  const Var x = diff::layer_norm(z, tape.parameter(p.ln1_gain), tape.parameter(p.ln1_bias));
  const auto heads = p.w_q.size();
  std::vector<Var> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var q = diff::matmul(x, tape.parameter(p.w_q[h]));
    const Var k = diff::matmul(x, tape.parameter(p.w_k[h]));
    const Var v = diff::matmul(x, tape.parameter(p.w_v[h]));
    const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    head_out.push_back(diff::segment_attention(q, k, v, segments, s, dropout, rng, use_dropout));
  }
  const Var attended = diff::matmul(diff::concat_cols(head_out), tape.parameter(p.w_o));
  const Var o = diff::add(attended, z);

  const Var y = diff::layer_norm(o, tape.parameter(p.ln2_gain), tape.parameter(p.ln2_bias));
  Var hidden = diff::gelu(diff::add(diff::matmul(y, tape.parameter(p.w_1)), tape.parameter(p.b_1)));
  hidden = diff::dropout(hidden, dropout, rng, use_dropout);
  const Var ffn = diff::add(diff::matmul(hidden, tape.parameter(p.w_2)), tape.parameter(p.b_2));
  return diff::add(ffn, o);
}

namespace {

Matrix layer_norm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + diff::kLayerNormEps)).matrix();
  }
  out.array().rowwise() *= gain.row(0).array();
  out.rowwise() += bias.row(0);
  return out;
}

Matrix softmax_rows(const Matrix& s) {
  Matrix out(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Eigen::RowVectorXd e = (s.row(r).array() - s.row(r).maxCoeff()).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

Matrix transformer_layer(const Matrix& z, const TransformerLayerParams& p) {
  const Matrix x = layer_norm_rows(z, p.ln1_gain.value, p.ln1_bias.value);
  const auto heads = p.w_q.size();
  const Eigen::Index dk = p.w_q.front().value.cols();
  Matrix concat(z.rows(), static_cast<Eigen::Index>(heads) * dk);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix q = x * p.w_q[h].value;
    const Matrix k = x * p.w_k[h].value;
    const Matrix v = x * p.w_v[h].value;
    const Matrix a = softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(dk)));
    concat.middleCols(static_cast<Eigen::Index>(h) * dk, dk) = a * v;
  }
  const Matrix o = concat * p.w_o.value + z;
  const Matrix y = layer_norm_rows(o, p.ln2_gain.value, p.ln2_bias.value);
  Matrix hidden = (y * p.w_1.value).rowwise() + p.b_1.value.row(0);
  hidden = hidden.unaryExpr([](double t) { return 0.5 * t * std::erfc(-t / std::sqrt(2.0)); });
  return ((hidden * p.w_2.value).rowwise() + p.b_2.value.row(0)) + o;
}

// ---------------------------------------------------------------------------
// Batched pair encoding

namespace {

// Inputs of every sequence in a shard laid out for one batched forward:
// sequence 2i is the source of query i and 2i+1 its destination.
struct ShardLayout {
  Eigen::Index patches = 0;
  std::vector<Eigen::Index> offset;  // first patch row per sequence
  std::vector<Eigen::Index> length;  // patches per sequence
  std::vector<std::vector<Eigen::Index>> pooled;  // non-padding patch rows
  std::vector<Eigen::Index> slot;    // patch slot -> entry row, -1 for padding
  Matrix m_n;                        // patches x d_N P
  Matrix m_e;                        // patches x d_E P
  Matrix deltas;                     // entries x 1
  Matrix c_in_src;  // entries x 1: count within the source sequence
  Matrix c_in_dst;  // entries x 1: count within the destination sequence
};

ShardLayout build_layout(const DyGFormerHyper& hyper, const GraphContext& ctx, std::span<const PairQuery> queries,
                         LeakageAudit* audit) {
  const TemporalGraph& g = *ctx.graph;
  const Eigen::Index P = hyper.patch;
  const Eigen::Index d_n = g.d_n();
  const Eigen::Index d_e = g.d_e();

  std::vector<InteractionSequence> seqs;
  std::vector<CountMatrix> counts;
  seqs.reserve(2 * queries.size());
  counts.reserve(2 * queries.size());
  for (const PairQuery& q : queries) {
    const auto n = static_cast<NodeId>(g.num_nodes);
    require(q.u >= 0 && q.u < n && q.v >= 0 && q.v < n, ErrorCategory::kUnknownNode,
            "query node outside the graph");
    InteractionSequence su = extract_first_hop(*ctx.index, q.u, q.t, hyper.max_len, hyper.include_self);
    InteractionSequence sv = extract_first_hop(*ctx.index, q.v, q.t, hyper.max_len, hyper.include_self);
    CooccurrencePair c = cooccurrence_counts(su, sv);
    seqs.push_back(std::move(su));
    seqs.push_back(std::move(sv));
    counts.push_back(std::move(c.c_src));
    counts.push_back(std::move(c.c_dst));
  }

  ShardLayout lay;
  Eigen::Index entries = 0;
  for (const InteractionSequence& s : seqs) {
    const auto n = static_cast<Eigen::Index>(s.size());
    lay.offset.push_back(lay.patches);
    lay.length.push_back(patch_count(n, P));
    lay.patches += lay.length.back();
    entries += n;
  }
  lay.slot.assign(static_cast<std::size_t>(lay.patches * P), -1);
  lay.m_n = Matrix::Zero(lay.patches, d_n * P);
  lay.m_e = Matrix::Zero(lay.patches, d_e * P);
  lay.deltas.resize(entries, 1);
  lay.c_in_src.resize(entries, 1);
  lay.c_in_dst.resize(entries, 1);

  Eigen::Index row = 0;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const InteractionSequence& seq = seqs[s];
    const Eigen::Index base = lay.offset[s];
    std::vector<Eigen::Index> used;
    for (std::size_t i = 0; i < seq.size(); ++i, ++row) {
      const NeighborEntry& e = seq.entries[i];
      const auto ii = static_cast<Eigen::Index>(i);
      const Eigen::Index prow = base + ii / P;
      const Eigen::Index pcol = ii % P;
      lay.slot[static_cast<std::size_t>(prow * P + pcol)] = row;
      if (d_n > 0) lay.m_n.block(prow, pcol * d_n, 1, d_n) = g.node_features.row(e.neighbor);
      if (d_e > 0 && e.event_index != kSelfEntry) {
        lay.m_e.block(prow, pcol * d_e, 1, d_e) = g.link_features.row(e.event_index);
      }
      lay.deltas(row, 0) = seq.delta(i);
      lay.c_in_src(row, 0) = counts[s](ii, 0);
      lay.c_in_dst(row, 0) = counts[s](ii, 1);
      if (used.empty() || used.back() != prow) used.push_back(prow);
      if (audit != nullptr && e.event_index != kSelfEntry) {
        ++audit->inputs;
        if (!(g.events[static_cast<std::size_t>(e.event_index)].timestamp < seq.anchor_time)) ++audit->violations;
      }
    }
    if (used.empty()) {
      for (Eigen::Index r = 0; r < lay.length[s]; ++r) used.push_back(base + r);
    }
    lay.pooled.push_back(std::move(used));
  }
  if (audit != nullptr) audit->links += queries.size();
  return lay;
}

template <typename S>
BasicVar<S> cooccurrence_mlp(BasicTape<S>& tape, const Matrix& x, CooccurrenceEncoderParams& p) {
  const BasicVar<S> hidden = diff::relu(diff::add(
      diff::matmul(tape.constant(x.cast<S>()), tape.parameter(p.w_a)), tape.parameter(p.b_a)));
  return diff::add(diff::matmul(hidden, tape.parameter(p.w_b)), tape.parameter(p.b_b));
}

// Per-entry encodings (entries x w) scattered into patches (patches x w P).
template <typename S>
BasicVar<S> to_patches(BasicVar<S> per_entry, const ShardLayout& lay, Eigen::Index P) {
  const BasicVar<S> slots = diff::gather_rows(per_entry, lay.slot);
  return diff::reshape(slots, lay.patches, per_entry.cols() * P);
}

template <typename S>
BasicVar<S> affine(BasicTape<S>& tape, BasicVar<S> x, Parameter& w, Parameter& b) {
  return diff::add(diff::matmul(x, tape.parameter(w)), tape.parameter(b));
}

}  // namespace

template <typename S>
PairRepresentations<S> encode_pairs(BasicTape<S>& tape, ModelParams& params, const DyGFormerHyper& hyper,
                                    const GraphContext& ctx, std::span<const PairQuery> queries,
                                    const ForwardOptions& opts) {
  using Var = BasicVar<S>;
  using M = diff::MatrixT<S>;
  require(ctx.graph != nullptr && ctx.index != nullptr, ErrorCategory::kInvalidArgument,
          "graph context is incomplete");
  require(!queries.empty(), ErrorCategory::kInvalidArgument, "no queries to encode");
  require(ctx.graph->d_n() == hyper.d_n && ctx.graph->d_e() == hyper.d_e, ErrorCategory::kShapeMismatch,
          "graph feature widths differ from the model's");
  const Eigen::Index P = hyper.patch;
  const Eigen::Index d = hyper.d;
  const ShardLayout lay = build_layout(hyper, ctx, queries, opts.audit);
  PatchProjectionParams& proj = params.encoder.proj;

  std::vector<Var> blocks;
  blocks.push_back(affine(tape, tape.constant(lay.m_n.cast<S>()), proj.w_n, proj.b_n));
  blocks.push_back(affine(tape, tape.constant(lay.m_e.cast<S>()), proj.w_e, proj.b_e));
  if (hyper.use_te) {
    const Var te = diff::time_encoding(lay.deltas, tape.parameter(params.encoder.time.w));
    blocks.push_back(affine(tape, to_patches(te, lay, P), proj.w_t, proj.b_t));
  } else {
    blocks.push_back(tape.constant(M::Zero(lay.patches, d)));
  }
  if (hyper.use_ncoe) {
    Var x_c;
    if (hyper.sep_no) {
      require(params.encoder.cooc_dst.has_value(), ErrorCategory::kInvalidArgument,
              "separate-occurrence encoding needs a destination encoder");
      x_c = diff::concat_cols<S>({cooccurrence_mlp(tape, lay.c_in_src, params.encoder.cooc),
                               cooccurrence_mlp(tape, lay.c_in_dst, *params.encoder.cooc_dst)});
    } else {
      x_c = diff::add(cooccurrence_mlp(tape, lay.c_in_src, params.encoder.cooc),
                      cooccurrence_mlp(tape, lay.c_in_dst, params.encoder.cooc));
    }
    blocks.push_back(affine(tape, to_patches(x_c, lay, P), proj.w_c, proj.b_c));
  } else {
    blocks.push_back(tape.constant(M::Zero(lay.patches, d)));
  }
  Var z = diff::concat_cols(blocks);

  std::vector<Segment> segments;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::size_t su = 2 * i;
    const std::size_t sv = su + 1;
    if (hyper.mix_sequences) {
      segments.push_back({lay.offset[su], lay.length[su] + lay.length[sv]});
    } else {
      segments.push_back({lay.offset[su], lay.length[su]});
      segments.push_back({lay.offset[sv], lay.length[sv]});
    }
  }
  for (TransformerLayerParams& layer : params.layers) {
    z = transformer_layer(tape, z, layer, segments, hyper.dropout, opts);
  }

  const Var pooled = diff::segment_mean(z, lay.pooled);
  const Var h = affine(tape, pooled, params.w_out, params.b_out);
  std::vector<Eigen::Index> even;
  std::vector<Eigen::Index> odd;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    even.push_back(static_cast<Eigen::Index>(2 * i));
    odd.push_back(static_cast<Eigen::Index>(2 * i + 1));
  }
  return {diff::gather_rows(h, even), diff::gather_rows(h, odd)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> encode_pair(ModelParams& params, const GraphContext& ctx, NodeId u,
                                                        NodeId v, double t, const DyGFormerHyper& hyper) {
  diff::Tape tape;
  const PairQuery q{u, v, t};
  const PairRepresentations<double> r = encode_pairs(tape, params, hyper, ctx, std::span(&q, 1));
  return {r.h_u.value().row(0).transpose(), r.h_v.value().row(0).transpose()};
}

template <typename S>
BasicVar<S> link_logits(BasicTape<S>& tape, MlpHeadParams& head, BasicVar<S> h_u, BasicVar<S> h_v) {
  const BasicVar<S> hidden = diff::relu(affine(tape, diff::concat_cols<S>({h_u, h_v}), head.w_1, head.b_1));
  return affine(tape, hidden, head.w_2, head.b_2);
}

template <typename S>
BasicVar<S> node_logits(BasicTape<S>& tape, MlpHeadParams& head, BasicVar<S> h) {
  const BasicVar<S> hidden = diff::relu(affine(tape, h, head.w_1, head.b_1));
  return affine(tape, hidden, head.w_2, head.b_2);
}

namespace {

double mlp_logit(const Eigen::RowVectorXd& x, const MlpHeadParams& head) {
  const Eigen::RowVectorXd hidden = (x * head.w_1.value + head.b_1.value.row(0)).cwiseMax(0.0);
  return (hidden * head.w_2.value)(0, 0) + head.b_2.value(0, 0);
}

}  // namespace

double link_logit(const Eigen::VectorXd& h_u, const Eigen::VectorXd& h_v, const MlpHeadParams& head) {
  Eigen::RowVectorXd x(h_u.size() + h_v.size());
  x << h_u.transpose(), h_v.transpose();
  return mlp_logit(x, head);
}

double node_logit(const Eigen::VectorXd& h, const MlpHeadParams& head) {
  return mlp_logit(h.transpose(), head);
}

template <typename S>
std::vector<double> score_links(ModelParams& params, const DyGFormerHyper& hyper, const GraphContext& ctx,
                                std::span<const PairQuery> queries, std::size_t shard, LeakageAudit* audit) {
  require(shard >= 1, ErrorCategory::kInvalidArgument, "shard size must be positive");
  std::vector<double> out;
  out.reserve(queries.size());
  ForwardOptions opts;
  opts.audit = audit;
  for (std::size_t begin = 0; begin < queries.size(); begin += shard) {
    const auto part = queries.subspan(begin, std::min(shard, queries.size() - begin));
    BasicTape<S> tape;
    const PairRepresentations<S> r = encode_pairs(tape, params, hyper, ctx, part, opts);
    const BasicVar<S> p = diff::sigmoid(link_logits(tape, params.link_decoder, r.h_u, r.h_v));
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back(p.value()(i, 0));
  }
  return out;
}

#define CTDG_INSTANTIATE_MODEL(S)                                                                          \
  template BasicVar<S> transformer_layer(BasicTape<S>&, BasicVar<S>, TransformerLayerParams&,              \
                                         std::span<const Segment>, double, const ForwardOptions&);         \
  template PairRepresentations<S> encode_pairs(BasicTape<S>&, ModelParams&, const DyGFormerHyper&,         \
                                               const GraphContext&, std::span<const PairQuery>,            \
                                               const ForwardOptions&);                                     \
  template BasicVar<S> link_logits(BasicTape<S>&, MlpHeadParams&, BasicVar<S>, BasicVar<S>);               \
  template BasicVar<S> node_logits(BasicTape<S>&, MlpHeadParams&, BasicVar<S>);                            \
  template std::vector<double> score_links<S>(ModelParams&, const DyGFormerHyper&, const GraphContext&,    \
                                              std::span<const PairQuery>, std::size_t, LeakageAudit*);

CTDG_INSTANTIATE_MODEL(double)
CTDG_INSTANTIATE_MODEL(float)

}  // namespace ctdg
