#include "ctdg/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctdg/diff/adam.hpp"
#include "ctdg/error.hpp"
#include "text.hpp"

namespace ctdg {

using diff::BasicTape;
using diff::BasicVar;

namespace {

// Random streams derived from the run seed.
constexpr std::uint64_t kTrainNegativeStream = 0x7E6A;
constexpr std::uint64_t kDropoutStream = 0xD809;
constexpr std::uint64_t kNodeBatchStream = 0x40DE;

std::uint64_t eval_stream(EvalSplit split, NegativeStrategy strategy) {
  return 0xE0 + 4 * static_cast<std::uint64_t>(split) + static_cast<std::uint64_t>(strategy);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::kIo, "cannot write " + path.string());
  out << content;
  require(out.good(), ErrorCategory::kIo, "write failed for " + path.string());
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCategory::kIo, "cannot create directory " + dir.string());
  return dir;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::vector<PairQuery> positives_in(const TemporalGraph& g, IndexRange range) {
  std::vector<PairQuery> out;
  out.reserve(range.size());
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const Event& e = g.events[i];
    out.push_back({e.source, e.destination, e.timestamp});
  }
  return out;
}

std::vector<double> score(Precision p, ModelParams& params, const DyGFormerHyper& hyper, const GraphContext& ctx,
                          std::span<const PairQuery> queries, std::size_t shard, LeakageAudit* audit) {
  if (p == Precision::kFloat32) return score_links<float>(params, hyper, ctx, queries, shard, audit);
  return score_links<double>(params, hyper, ctx, queries, shard, audit);
}

Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::kFloat32;
  if (s == "float64") return Precision::kFloat64;
  fail(ErrorCategory::kParse, "unknown precision '" + s + "'");
}

// Mean BCE of one batch, accumulated into the parameter grads shard by
// shard so that the total equals the loss over the whole batch.
template <typename S>
double link_batch_loss(ModelParams& params, const DyGFormerHyper& hyper, const GraphContext& ctx,
                       std::span<const PairQuery> pos, std::span<const PairQuery> neg, std::size_t shard,
                       CounterRng& dropout_rng) {
  const std::size_t n = pos.size();
  const std::size_t per_tape = std::max<std::size_t>(1, shard / 2);
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += per_tape) {
    const std::size_t m = std::min(per_tape, n - begin);
    std::vector<PairQuery> queries(pos.begin() + begin, pos.begin() + begin + m);
    queries.insert(queries.end(), neg.begin() + begin, neg.begin() + begin + m);
    Matrix labels = Matrix::Zero(2 * m, 1);
    labels.topRows(m).setOnes();

    BasicTape<S> tape;
    ForwardOptions opts;
    opts.train = true;
    opts.rng = &dropout_rng;
    const auto r = encode_pairs(tape, params, hyper, ctx, queries, opts);
    const auto logits = link_logits(tape, params.link_decoder, r.h_u, r.h_v);
    const auto loss = diff::scale(diff::bce_with_logits(logits, labels), static_cast<double>(m) / n);
    total += static_cast<double>(loss.value()(0, 0));
    tape.backward(loss);
  }
  return total;
}

double link_batch(Precision p, ModelParams& params, const DyGFormerHyper& hyper, const GraphContext& ctx,
                  std::span<const PairQuery> pos, std::span<const PairQuery> neg, std::size_t shard,
                  CounterRng& rng) {
  if (p == Precision::kFloat32) return link_batch_loss<float>(params, hyper, ctx, pos, neg, shard, rng);
  return link_batch_loss<double>(params, hyper, ctx, pos, neg, shard, rng);
}

}  // namespace

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, ErrorCategory::kIo, "SHA-1 digest failed");
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

Dataset make_dataset(TemporalGraph graph, const std::array<double, 3>& ratios) {
  graph.validate();
  require(graph.size() >= 3, ErrorCategory::kInvalidArgument, "a dataset needs at least 3 events");
  Dataset d;
  d.graph = std::move(graph);
  d.split = chronological_split(d.graph, ratios);
  d.index = build_neighbor_index(d.graph);
  return d;
}

Dataset load_dataset(const RunConfig& config) {
  std::map<std::string, std::string> hashes;
  TemporalGraph g;
  if (!config.events_path.empty()) {
    const std::string events = read_file(config.events_path);
    hashes["events"] = git_blob_hash(events);
    std::istringstream ev(events);
    if (config.node_features_path.empty()) {
      g = load_events(ev);
    } else {
      const std::string nodes = read_file(config.node_features_path);
      hashes["node_features"] = git_blob_hash(nodes);
      std::istringstream nf(nodes);
      g = load_events(ev, &nf);
    }
  } else {
    g = generate_synthetic(config.synth, config.synth.seed);
    std::ostringstream spec;
    save_synth_spec(config.synth, spec);
    hashes["synth_spec"] = git_blob_hash(spec.str());
    std::ostringstream ev;
    save_events(g, ev);
    hashes["events"] = git_blob_hash(ev.str());
  }
  Dataset d = make_dataset(std::move(g), config.split);
  d.input_hashes = std::move(hashes);
  return d;
}

DyGFormerHyper resolve_hyper(const RunConfig& config, const TemporalGraph& g) {
  DyGFormerHyper h = config.hyper;
  h.d_n = g.d_n();
  h.d_e = g.d_e();
  h.validate();
  return h;
}

EvalOptions eval_options(const RunConfig& config) {
  EvalOptions o;
  o.batch_size = config.batch_size;
  o.shard = config.shard;
  o.precision = config.precision;
  o.historical_train_only = config.historical_train_only;
  o.negative_fallback = config.negative_fallback;
  o.inductive_both_endpoints = config.inductive_both_endpoints;
  return o;
}

EvalQueries evaluation_queries(const Dataset& data, EvalSplit split, NegativeStrategy strategy, std::uint64_t seed,
                               const EvalOptions& opts) {
  require(opts.batch_size >= 1, ErrorCategory::kInvalidArgument, "batch size must be positive");
  NegativePools pools = build_negative_pools(data.graph, data.split, split, opts.historical_train_only);
  pools.allow_fallback = opts.negative_fallback;
  IndexRange range = split == EvalSplit::kVal ? data.split.val : data.split.test;
  if (opts.max_positives > 0) range.end = std::min(range.end, range.begin + opts.max_positives);
  const std::vector<PairQuery> positives = positives_in(data.graph, range);

  auto touches_new = [&](const PairQuery& q) {
    const bool u = data.split.is_new(q.u);
    const bool v = data.split.is_new(q.v);
    return opts.inductive_both_endpoints ? (u && v) : (u || v);
  };

  CounterRng rng(seed, eval_stream(split, strategy));
  EvalQueries out;
  for (std::size_t begin = 0; begin < positives.size(); begin += opts.batch_size) {
    const auto batch = std::span(positives).subspan(begin, std::min(opts.batch_size, positives.size() - begin));
    const std::vector<PairQuery> negatives = sample_negatives(strategy, batch, pools, rng);
    for (int label : {1, 0}) {
      const auto& part = label == 1 ? std::vector<PairQuery>(batch.begin(), batch.end()) : negatives;
      for (std::size_t i = 0; i < part.size(); ++i) {
        out.queries.push_back(part[i]);
        out.labels.push_back(label);
        out.inductive.push_back(touches_new(batch[i]));
      }
    }
  }
  return out;
}

EvalResult evaluate_link_model(ModelParams& params, const DyGFormerHyper& hyper, const Dataset& data,
                               EvalSplit split, NegativeStrategy strategy, std::uint64_t seed,
                               const EvalOptions& opts) {
  EvalQueries q = evaluation_queries(data, split, strategy, seed, opts);
  EvalResult r;
  r.scores = score(opts.precision, params, hyper, data.context(), q.queries, opts.shard, opts.audit);
  r.report = metric_report(r.scores, q.labels);

  std::vector<double> ind_scores;
  std::vector<int> ind_labels;
  for (std::size_t i = 0; i < q.queries.size(); ++i) {
    if (!q.inductive[i]) continue;
    ind_scores.push_back(r.scores[i]);
    ind_labels.push_back(q.labels[i]);
  }
  if (std::count(ind_labels.begin(), ind_labels.end(), 1) > 0 && std::count(ind_labels.begin(), ind_labels.end(), 0) > 0) {
    r.inductive = metric_report(ind_scores, ind_labels);
  }
  r.queries = std::move(q.queries);
  r.labels = std::move(q.labels);
  return r;
}

TrainResult train_link_model(const RunConfig& config, const Dataset& data, std::uint64_t seed,
                             std::ostream* progress) {
  config.validate();
  require(data.split.train.size() > 0, ErrorCategory::kInvalidArgument, "empty train split");
  TrainResult result;
  result.seed = seed;
  result.hyper = resolve_hyper(config, data.graph);
  const DyGFormerHyper& hyper = result.hyper;
  ModelParams params = init_params(hyper, seed);
  const std::vector<diff::Parameter*> trainable = params.link_model();
  diff::AdamState adam = diff::make_adam_state(trainable, {.lr = config.lr});

  const std::vector<PairQuery> positives = positives_in(data.graph, data.split.train);
  NegativePools random_pool;
  random_pool.num_nodes = data.graph.num_nodes;
  const EvalOptions eval_opts = eval_options(config);
  const GraphContext ctx = data.context();

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    CounterRng neg_rng = CounterRng(seed, kTrainNegativeStream).fork(epoch);
    CounterRng dropout_rng = CounterRng(seed, kDropoutStream).fork(epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < positives.size(); begin += config.batch_size) {
      const auto batch = std::span(positives).subspan(begin, std::min(config.batch_size, positives.size() - begin));
      const std::vector<PairQuery> negatives = sample_negatives(NegativeStrategy::kRandom, batch, random_pool, neg_rng);
      for (diff::Parameter* p : trainable) p->zero_grad();
      const double loss =
          link_batch(config.precision, params, hyper, ctx, batch, negatives, config.shard, dropout_rng);
      require(std::isfinite(loss), ErrorCategory::kNumerical,
              "training loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                  std::to_string(batches + 1));
      diff::adam_step(trainable, adam);
      loss_sum += loss;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val = evaluate_link_model(params, hyper, data, EvalSplit::kVal, config.effective_val_strategy(),
                                  config.eval_seed, eval_opts)
                  .report;
    rec.seconds = elapsed(start);
    result.history.push_back(rec);
    if (progress) {
      *progress << "seed " << seed << " epoch " << epoch << " loss " << rec.train_loss << " val_ap " << rec.val.ap
                << " val_auc " << rec.val.auc_roc << " (" << std::fixed << std::setprecision(1) << rec.seconds
                << " s)" << std::defaultfloat << std::setprecision(6) << std::endl;
    }
    if (result.best_epoch == 0 || rec.val.ap > result.best_val.ap) {
      result.best_epoch = epoch;
      result.best_val = rec.val;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  for (diff::Parameter* p : result.params.all()) p->zero_grad();
  return result;
}

namespace {

// Rows of the labeled events in `range` and their labels.
struct LabeledRows {
  std::vector<std::size_t> events;
  Matrix labels;
};

LabeledRows labeled_rows(const TemporalGraph& g, IndexRange range) {
  LabeledRows out;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (g.events[i].label) out.events.push_back(i);
  }
  out.labels.resize(static_cast<Eigen::Index>(out.events.size()), 1);
  for (std::size_t k = 0; k < out.events.size(); ++k) {
    out.labels(static_cast<Eigen::Index>(k), 0) = *g.events[out.events[k]].label != 0 ? 1.0 : 0.0;
  }
  return out;
}

template <typename S>
Matrix source_representations(ModelParams& params, const DyGFormerHyper& hyper, const Dataset& data,
                              const std::vector<std::size_t>& events, std::size_t shard) {
  Matrix out(static_cast<Eigen::Index>(events.size()), hyper.d_out);
  for (std::size_t begin = 0; begin < events.size(); begin += shard) {
    const std::size_t m = std::min(shard, events.size() - begin);
    std::vector<PairQuery> queries;
    for (std::size_t k = begin; k < begin + m; ++k) {
      const Event& e = data.graph.events[events[k]];
      queries.push_back({e.source, e.destination, e.timestamp});
    }
    BasicTape<S> tape;
    const auto r = encode_pairs(tape, params, hyper, data.context(), queries);
    out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(m)) =
        r.h_u.value().template cast<double>();
  }
  return out;
}

std::vector<double> node_scores(MlpHeadParams& head, const Matrix& reps) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(reps.rows()));
  for (Eigen::Index i = 0; i < reps.rows(); ++i) {
    const double z = node_logit(reps.row(i).transpose(), head);
    out.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

std::vector<int> as_ints(const Matrix& labels) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < labels.rows(); ++i) out.push_back(labels(i, 0) > 0.5 ? 1 : 0);
  return out;
}

Matrix representations(Precision p, ModelParams& params, const DyGFormerHyper& hyper, const Dataset& data,
                       const std::vector<std::size_t>& events, std::size_t shard) {
  if (p == Precision::kFloat32) return source_representations<float>(params, hyper, data, events, shard);
  return source_representations<double>(params, hyper, data, events, shard);
}

template <typename S>
double joint_node_batch(ModelParams& params, const DyGFormerHyper& hyper, const Dataset& data,
                        std::span<const std::size_t> events, const Matrix& labels, std::size_t shard,
                        CounterRng& rng) {
  const std::size_t n = events.size();
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += shard) {
    const std::size_t m = std::min(shard, n - begin);
    std::vector<PairQuery> queries;
    for (std::size_t k = begin; k < begin + m; ++k) {
      const Event& e = data.graph.events[events[k]];
      queries.push_back({e.source, e.destination, e.timestamp});
    }
    BasicTape<S> tape;
    ForwardOptions opts;
    opts.train = true;
    opts.rng = &rng;
    const auto r = encode_pairs(tape, params, hyper, data.context(), queries, opts);
    const Matrix y = labels.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(m));
    const auto loss = diff::scale(diff::bce_with_logits(node_logits(tape, params.node_classifier, r.h_u), y),
                                  static_cast<double>(m) / n);
    total += static_cast<double>(loss.value()(0, 0));
    tape.backward(loss);
  }
  return total;
}

}  // namespace

NodeTrainResult train_node_classifier(const RunConfig& config, const Dataset& data, ModelParams backbone,
                                      const DyGFormerHyper& hyper, std::uint64_t seed, std::ostream* progress) {
  config.validate();
  const LabeledRows train = labeled_rows(data.graph, data.split.train);
  const LabeledRows val = labeled_rows(data.graph, data.split.val);
  const LabeledRows test = labeled_rows(data.graph, data.split.test);
  require(!train.events.empty(), ErrorCategory::kInvalidArgument, "no labeled events in the train split");
  auto two_classes = [](const Matrix& y) { return y.size() > 0 && y.minCoeff() < 0.5 && y.maxCoeff() > 0.5; };
  require(two_classes(val.labels) && two_classes(test.labels), ErrorCategory::kInvalidArgument,
          "node classification needs both label classes in validation and test");

  NodeTrainResult result;
  result.hyper = hyper;
  ModelParams params = std::move(backbone);
  // A fresh head on every run, seeded independently of the backbone.
  const ModelParams fresh = init_params(hyper, seed ^ 0x40DEull);
  params.node_classifier = fresh.node_classifier;
  std::vector<diff::Parameter*> trainable = config.node_joint ? params.backbone() : std::vector<diff::Parameter*>{};
  for (diff::Parameter* p : params.node_head()) trainable.push_back(p);
  diff::AdamState adam = diff::make_adam_state(trainable, {.lr = config.lr});

  Matrix train_reps;
  Matrix val_reps;
  Matrix test_reps;
  auto refresh = [&] {
    val_reps = representations(config.precision, params, hyper, data, val.events, config.shard);
    test_reps = representations(config.precision, params, hyper, data, test.events, config.shard);
  };
  if (!config.node_joint) {
    train_reps = representations(config.precision, params, hyper, data, train.events, config.shard);
    refresh();
  }

  std::size_t since_best = 0;
  const std::size_t n = train.events.size();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    CounterRng rng = CounterRng(seed, kNodeBatchStream).fork(epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t m = std::min(config.batch_size, n - begin);
      const Matrix y = train.labels.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(m));
      for (diff::Parameter* p : trainable) p->zero_grad();
      double loss = 0.0;
      if (config.node_joint) {
        const auto part = std::span(train.events).subspan(begin, m);
        loss = config.precision == Precision::kFloat32
                   ? joint_node_batch<float>(params, hyper, data, part, y, config.shard, rng)
                   : joint_node_batch<double>(params, hyper, data, part, y, config.shard, rng);
      } else {
        diff::Tape tape;
        const auto h = tape.constant(
            train_reps.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(m)));
        const auto l = diff::bce_with_logits(node_logits(tape, params.node_classifier, h), y);
        loss = l.value()(0, 0);
        tape.backward(l);
      }
      require(std::isfinite(loss), ErrorCategory::kNumerical,
              "node classification loss is not finite at epoch " + std::to_string(epoch));
      diff::adam_step(trainable, adam);
      loss_sum += loss;
      ++batches;
    }
    if (config.node_joint) refresh();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val = metric_report(node_scores(params.node_classifier, val_reps), as_ints(val.labels));
    rec.seconds = elapsed(start);
    result.history.push_back(rec);
    if (progress) {
      *progress << "seed " << seed << " epoch " << epoch << " loss " << rec.train_loss << " val_auc "
                << rec.val.auc_roc << std::endl;
    }
    if (result.best_epoch == 0 || rec.val.auc_roc > result.best_val_auc) {
      result.best_epoch = epoch;
      result.best_val_auc = rec.val.auc_roc;
      result.test_auc = auc_roc(node_scores(params.node_classifier, test_reps), as_ints(test.labels));
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  for (diff::Parameter* p : result.params.all()) p->zero_grad();
  return result;
}

std::vector<EdgeBankResult> run_edgebank(const RunConfig& config, const Dataset& data, std::uint64_t seed) {
  const SplitView& s = data.split;
  const std::size_t memory_end = config.edgebank_train_only ? s.train.end : s.test.begin;
  const auto observed = std::span(data.graph.events).first(memory_end);
  const double test_span = data.graph.events[s.test.end - 1].timestamp - data.graph.events[s.test.begin].timestamp;
  // A zero-length test range keeps only pairs seen at the last timestamp.
  const double duration = test_span > 0.0 ? test_span : std::numeric_limits<double>::min();

  EvalOptions opts = eval_options(config);
  const EvalQueries q = evaluation_queries(data, EvalSplit::kTest, config.strategy, seed, opts);
  std::vector<EdgeBankResult> out;
  for (EdgeBankVariant v : config.edgebank_variants) {
    const EdgeMemory memory = build_memory(v, observed, duration, config.edgebank_threshold);
    const std::vector<int> predicted = edgebank_predict(memory, q.queries);
    const std::vector<double> scores(predicted.begin(), predicted.end());
    out.push_back({v, metric_report(scores, q.labels)});
  }
  return out;
}

diff::TensorContainer make_checkpoint(const TrainResult& result, const RunConfig& config, const Dataset& data) {
  diff::TensorContainer c = to_container(result.params, result.hyper);
  auto& m = c.manifest;
  m["task"] = std::string(to_string(config.task));
  m["seed"] = std::to_string(result.seed);
  m["best_epoch"] = std::to_string(result.best_epoch);
  m["best_val.ap"] = text::format_double(result.best_val.ap);
  m["best_val.auc_roc"] = text::format_double(result.best_val.auc_roc);
  m["val_strategy"] = std::string(to_string(config.effective_val_strategy()));
  m["eval.seed"] = std::to_string(config.eval_seed);
  m["eval.precision"] = std::string(to_string(config.precision));
  m["eval.batch_size"] = std::to_string(config.batch_size);
  m["eval.shard"] = std::to_string(config.shard);
  m["eval.historical_pool"] = config.historical_train_only ? "train_only" : "before_split";
  m["eval.negative_fallback"] = config.negative_fallback ? "true" : "false";
  m["eval.inductive_filter"] = config.inductive_both_endpoints ? "two_sided" : "one_sided";
  for (const auto& [name, hash] : data.input_hashes) m["input." + name] = hash;
  return c;
}

LoadedModel model_from_container(const diff::TensorContainer& c) {
  LoadedModel out;
  out.manifest = c.manifest;
  out.hyper = hyper_from_manifest(c.manifest);
  out.params = from_container(c, out.hyper);
  const auto it = c.manifest.find("seed");
  if (it != c.manifest.end()) {
    const auto s = text::parse_int(it->second);
    require(s.has_value() && *s >= 0, ErrorCategory::kParse, "bad seed in checkpoint manifest");
    out.seed = static_cast<std::uint64_t>(*s);
  }
  out.eval_seed = out.seed;
  if (const auto e = c.manifest.find("eval.seed"); e != c.manifest.end()) {
    const auto s = text::parse_int(e->second);
    require(s.has_value() && *s >= 0, ErrorCategory::kParse, "bad eval.seed in checkpoint manifest");
    out.eval_seed = static_cast<std::uint64_t>(*s);
  }
  return out;
}

LoadedModel load_checkpoint(const std::string& path) { return model_from_container(diff::load_container(path)); }

namespace {

// Evaluation settings recorded by the trainer; fall back to the config.
EvalOptions checkpoint_eval_options(const LoadedModel& model, const RunConfig& config) {
  EvalOptions o = eval_options(config);
  const auto& m = model.manifest;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
  };
  auto count = [](const std::string& s) {
    const auto x = text::parse_int(s);
    require(x.has_value() && *x >= 1, ErrorCategory::kParse, "bad count in checkpoint manifest");
    return static_cast<std::size_t>(*x);
  };
  if (const auto* v = get("eval.precision")) o.precision = parse_precision(*v);
  if (const auto* v = get("eval.batch_size")) o.batch_size = count(*v);
  if (const auto* v = get("eval.shard")) o.shard = count(*v);
  if (const auto* v = get("eval.historical_pool")) o.historical_train_only = *v == "train_only";
  if (const auto* v = get("eval.negative_fallback")) o.negative_fallback = *v == "true";
  if (const auto* v = get("eval.inductive_filter")) o.inductive_both_endpoints = *v == "two_sided";
  return o;
}

void check_dims(const DyGFormerHyper& h, const TemporalGraph& g) {
  require(h.d_n == g.d_n() && h.d_e == g.d_e(), ErrorCategory::kShapeMismatch,
          "checkpoint feature widths (" + std::to_string(h.d_n) + ", " + std::to_string(h.d_e) +
              ") do not match the dataset (" + std::to_string(g.d_n()) + ", " + std::to_string(g.d_e()) + ")");
}

}  // namespace

DyGFormerHyper tiny_hyper() {
  DyGFormerHyper h;
  h.d = 4;
  h.d_t = 4;
  h.d_c = 4;
  h.d_out = 4;
  h.heads = 2;
  h.layers = 2;
  h.max_len = 8;
  h.patch = 2;
  h.dropout = 0.0;
  return h;
}

diff::GradCheckResult gradcheck_model(const DyGFormerHyper& hyper_in, std::uint64_t seed) {
  SynthSpec spec;
  spec.num_nodes = 8;
  spec.num_events = 60;
  spec.d_e = 2;
  spec.d_n = 2;
  const Dataset data = make_dataset(generate_synthetic(spec, seed), {0.7, 0.15, 0.15});
  DyGFormerHyper hyper = hyper_in;
  hyper.d_n = data.graph.d_n();
  hyper.d_e = data.graph.d_e();
  hyper.validate();
  ModelParams params = init_params(hyper, seed);
  // Zero-initialised biases meet zero counts exactly at the ReLU kink; check
  // at a nearby generic point instead.
  CounterRng jitter(seed, 0x6A);
  for (diff::Parameter* p : params.link_model()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += jitter.uniform(-0.1, 0.1);
  }

  std::vector<PairQuery> queries;
  Matrix labels(6, 1);
  CounterRng rng(seed, 0x6C);
  for (int i = 0; i < 3; ++i) {
    const Event& e = data.graph.events[data.graph.size() - 1 - static_cast<std::size_t>(i) * 7];
    queries.push_back({e.source, e.destination, e.timestamp});
    labels(i, 0) = 1.0;
  }
  for (int i = 0; i < 3; ++i) {
    queries.push_back({queries[static_cast<std::size_t>(i)].u, static_cast<NodeId>(rng.below(spec.num_nodes)),
                       queries[static_cast<std::size_t>(i)].t});
    labels(3 + i, 0) = 0.0;
  }
  const GraphContext ctx = data.context();
  auto loss = [&](diff::Tape& tape) {
    const auto r = encode_pairs(tape, params, hyper, ctx, queries);
    return diff::bce_with_logits(link_logits(tape, params.link_decoder, r.h_u, r.h_v), labels);
  };
  const std::vector<diff::Parameter*> all = params.link_model();
  return diff::grad_check_parameters(loss, all, 1e-5);
}

AnalysisTable analyze_models(LoadedModel& a, LoadedModel& b, const Dataset& data, NegativeStrategy strategy,
                             std::uint64_t seed, const EvalOptions& opts) {
  check_dims(a.hyper, data.graph);
  check_dims(b.hyper, data.graph);
  const EvalQueries q = evaluation_queries(data, EvalSplit::kTest, strategy, seed, opts);
  const auto ctx = data.context();
  const std::vector<double> sa = score(opts.precision, a.params, a.hyper, ctx, q.queries, opts.shard, nullptr);
  const std::vector<double> sb = score(opts.precision, b.params, b.hyper, ctx, q.queries, opts.shard, nullptr);
  std::vector<std::optional<double>> cnrs;
  cnrs.reserve(q.queries.size());
  for (const PairQuery& p : q.queries) {
    const auto su = extract_first_hop(data.index, p.u, p.t, a.hyper.max_len);
    const auto sv = extract_first_hop(data.index, p.v, p.t, a.hyper.max_len);
    cnrs.push_back(common_neighbor_ratio(su, sv));
  }
  return confusion_analysis(sa, sb, q.labels, cnrs);
}

std::vector<SeedSummary> summarize_seeds(const std::vector<MetricRecord>& records) {
  std::vector<SeedSummary> out;
  std::vector<std::vector<double>> values;
  for (const MetricRecord& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SeedSummary& s) {
      return s.split == r.split && s.strategy == r.strategy && s.metric == r.metric;
    });
    if (it == out.end()) {
      out.push_back({r.split, r.strategy, r.metric, 0.0, 0.0, 0});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    // Offsets from the first value keep identical runs at exactly zero spread.
    double offset = 0.0;
    for (double x : v) offset += x - v.front();
    const double mean = v.front() + offset / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[i].mean = mean;
    out[i].stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out[i].n = v.size();
  }
  return out;
}

void write_summary_csv(const std::vector<SeedSummary>& summary, std::ostream& out) {
  out << "split,strategy,metric,mean,std,n\n";
  for (const SeedSummary& s : summary) {
    out << s.split << ',' << s.strategy << ',' << s.metric << ',' << text::format_double(s.mean) << ','
        << text::format_double(s.stddev) << ',' << s.n << '\n';
  }
}

void write_run_manifest(const RunConfig& config, const Dataset& data, std::ostream& out) {
  std::ostringstream resolved;
  save_config(config, resolved);
  std::string combined = resolved.str();
  out << "# resolved config\n" << resolved.str() << "# inputs\n";
  for (const auto& [name, hash] : data.input_hashes) {
    out << "input." << name << '=' << hash << '\n';
    combined += name + '=' + hash + '\n';
  }
  out << "run_hash=" << git_blob_hash(combined) << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

std::filesystem::path seed_checkpoint(const RunConfig& config, std::uint64_t seed) {
  return std::filesystem::path(config.output_dir) / ("seed_" + std::to_string(seed)) / "model.ckpt";
}

void append_report(std::vector<MetricRecord>& out, const std::string& split, const std::string& strategy,
                   const std::string& prefix, const MetricReport& r, std::uint64_t seed) {
  out.push_back({split, strategy, prefix + "ap", r.ap, seed});
  out.push_back({split, strategy, prefix + "auc_roc", r.auc_roc, seed});
}

void write_outputs(const RunConfig& config, const Dataset& data, const std::vector<MetricRecord>& records,
                   const std::string& metrics_name) {
  const auto dir = ensure_dir(config.output_dir);
  std::ostringstream metrics;
  write_metrics_log(records, metrics);
  write_file(dir / metrics_name, metrics.str());
  std::ostringstream summary;
  write_summary_csv(summarize_seeds(records), summary);
  write_file(dir / "summary.csv", summary.str());
  std::ostringstream manifest;
  write_run_manifest(config, data, manifest);
  write_file(dir / "manifest.txt", manifest.str());
}

void print_summary(const std::vector<MetricRecord>& records, std::ostream& log) {
  for (const SeedSummary& s : summarize_seeds(records)) {
    log << s.split << ' ' << s.strategy << ' ' << s.metric << ": " << std::fixed << std::setprecision(4) << s.mean
        << " +- " << s.stddev << std::defaultfloat << std::setprecision(6) << " (n=" << s.n << ")\n";
  }
}

LoadedModel checkpoint_for(const RunConfig& config, std::uint64_t seed) {
  if (!config.checkpoint_path.empty()) return load_checkpoint(config.checkpoint_path);
  return load_checkpoint(seed_checkpoint(config, seed).string());
}

}  // namespace

std::vector<MetricRecord> command_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Dataset data = load_dataset(config);
  std::vector<MetricRecord> records;
  if (config.task == Task::kEdgeBank) return command_edgebank(config, log);

  for (std::uint64_t seed : config.seeds) {
    if (config.task == Task::kNodeClassification) {
      ModelParams backbone;
      DyGFormerHyper hyper;
      if (!config.checkpoint_path.empty()) {
        LoadedModel m = load_checkpoint(config.checkpoint_path);
        check_dims(m.hyper, data.graph);
        backbone = std::move(m.params);
        hyper = m.hyper;
      } else {
        hyper = resolve_hyper(config, data.graph);
        backbone = init_params(hyper, seed);
        require(config.node_joint, ErrorCategory::kInvalidArgument,
                "node classification needs a link-prediction checkpoint unless node.joint=true");
      }
      const NodeTrainResult r = train_node_classifier(config, data, std::move(backbone), hyper, seed, &log);
      records.push_back({"val", "none", "auc_roc", r.best_val_auc, seed});
      records.push_back({"test", "none", "auc_roc", r.test_auc, seed});
      diff::TensorContainer c = to_container(r.params, r.hyper);
      c.manifest["task"] = std::string(to_string(config.task));
      c.manifest["seed"] = std::to_string(seed);
      c.manifest["best_epoch"] = std::to_string(r.best_epoch);
      c.manifest["best_val.auc_roc"] = text::format_double(r.best_val_auc);
      const auto path = seed_checkpoint(config, seed);
      ensure_dir(path.parent_path());
      diff::save_container(c, path.string());
      continue;
    }

    const TrainResult r = train_link_model(config, data, seed, &log);
    const auto path = seed_checkpoint(config, seed);
    ensure_dir(path.parent_path());
    diff::save_container(make_checkpoint(r, config, data), path.string());

    const std::string val_strategy(to_string(config.effective_val_strategy()));
    const std::string strategy(to_string(config.strategy));
    append_report(records, "val", val_strategy, "", r.best_val, seed);
    for (const auto& e : r.history) records.push_back({"train", "rnd", "loss", e.train_loss, seed});
    ModelParams best = r.params;
    const EvalResult test =
        evaluate_link_model(best, r.hyper, data, EvalSplit::kTest, config.strategy, config.eval_seed,
                            eval_options(config));
    append_report(records, "test", strategy, "", test.report, seed);
    if (test.inductive) append_report(records, "test", strategy, "inductive.", *test.inductive, seed);
    log << "seed " << seed << " best epoch " << r.best_epoch << " val_ap " << r.best_val.ap << " test_ap "
        << test.report.ap << "\n";
  }
  write_outputs(config, data, records, "metrics.csv");
  print_summary(records, log);
  return records;
}

std::vector<MetricRecord> command_evaluate(const RunConfig& config, std::optional<std::uint64_t> seed,
                                           std::ostream& log) {
  config.validate();
  const Dataset data = load_dataset(config);
  std::vector<MetricRecord> records;
  std::vector<std::uint64_t> seeds = config.seeds;
  if (!config.checkpoint_path.empty()) seeds = {0};
  for (std::uint64_t s : seeds) {
    LoadedModel model = checkpoint_for(config, s);
    check_dims(model.hyper, data.graph);
    const std::uint64_t eval_seed = seed.value_or(model.eval_seed);
    const EvalOptions opts = checkpoint_eval_options(model, config);
    NegativeStrategy val_strategy = config.effective_val_strategy();
    if (const auto it = model.manifest.find("val_strategy"); it != model.manifest.end() && !config.val_strategy) {
      val_strategy = parse_strategy(it->second);
    }
    const EvalResult val = evaluate_link_model(model.params, model.hyper, data, EvalSplit::kVal, val_strategy,
                                               eval_seed, opts);
    const EvalResult test = evaluate_link_model(model.params, model.hyper, data, EvalSplit::kTest, config.strategy,
                                                eval_seed, opts);
    append_report(records, "val", std::string(to_string(val_strategy)), "", val.report, eval_seed);
    append_report(records, "test", std::string(to_string(config.strategy)), "", test.report, eval_seed);
    if (test.inductive) {
      append_report(records, "test", std::string(to_string(config.strategy)), "inductive.", *test.inductive,
                    eval_seed);
    }
  }
  write_outputs(config, data, records, "eval_metrics.csv");
  print_summary(records, log);
  return records;
}

std::vector<MetricRecord> command_edgebank(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Dataset data = load_dataset(config);
  std::vector<MetricRecord> records;
  const std::string strategy(to_string(config.strategy));
  for (std::uint64_t seed : config.seeds) {
    // No training is involved, so every run seed scores the same queries.
    const std::vector<EdgeBankResult> results = run_edgebank(config, data, config.eval_seed);
    const EdgeBankResult* best = nullptr;
    for (const EdgeBankResult& r : results) {
      append_report(records, "test", strategy, "edgebank." + std::string(to_string(r.variant)) + ".", r.report, seed);
      if (!best || r.report.ap > best->report.ap) best = &r;
    }
    if (best) {
      records.push_back({"test", strategy, "edgebank.best." + std::string(to_string(best->variant)) + ".ap",
                         best->report.ap, seed});
    }
  }
  write_outputs(config, data, records, "edgebank_metrics.csv");
  print_summary(records, log);
  return records;
}

void command_analyze(const RunConfig& config, std::optional<std::uint64_t> seed, std::ostream& log) {
  config.validate();
  require(!config.checkpoint_path.empty() && !config.compare_checkpoint.empty(), ErrorCategory::kInvalidArgument,
          "analyze needs checkpoint and compare_checkpoint");
  const Dataset data = load_dataset(config);
  LoadedModel a = load_checkpoint(config.checkpoint_path);
  LoadedModel b = load_checkpoint(config.compare_checkpoint);
  const AnalysisTable table =
      analyze_models(a, b, data, config.strategy, seed.value_or(a.eval_seed), checkpoint_eval_options(a, config));
  const auto dir = ensure_dir(config.output_dir);
  std::ostringstream csv;
  write_analysis_csv(table, csv);
  write_file(dir / "analysis.csv", csv.str());
  log << csv.str();
}

void command_synth(const RunConfig& config, std::optional<std::uint64_t> seed, std::ostream& log) {
  SynthSpec spec = config.synth;
  if (seed) spec.seed = *seed;
  const TemporalGraph g = generate_synthetic(spec, spec.seed);
  const auto dir = ensure_dir(config.output_dir);
  std::ostringstream events;
  save_events(g, events);
  write_file(dir / "events.csv", events.str());
  if (g.d_n() > 0) {
    std::ostringstream nodes;
    save_node_features(g, nodes);
    write_file(dir / "node_features.csv", nodes.str());
  }
  std::ostringstream s;
  save_synth_spec(spec, s);
  write_file(dir / "synth_spec.txt", s.str());
  log << "wrote " << g.size() << " events over " << g.num_nodes << " nodes to " << dir.string()
      << " (repeat fraction " << repeat_fraction(g) << ")\n";
}

bool command_gradcheck(std::optional<std::uint64_t> seed, std::ostream& log) {
  const diff::GradCheckResult r = gradcheck_model(tiny_hyper(), seed.value_or(0));
  const bool ok = r.max_rel_error <= 1e-4;
  log << "max relative error " << std::scientific << r.max_rel_error << std::defaultfloat << " over " << r.checked
      << " coordinates (" << r.skipped << " skipped at kinks): " << (ok ? "pass" : "FAIL") << '\n';
  return ok;
}

}  // namespace ctdg
