#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctdg/config.hpp"
#include "ctdg/diff/grad_check.hpp"
#include "ctdg/dygformer.hpp"
#include "ctdg/edgebank.hpp"
#include "ctdg/evaluation.hpp"
#include "ctdg/temporal_graph.hpp"

namespace ctdg {

/// A loaded dataset with its chronological split and neighbor index.
struct Dataset {
  TemporalGraph graph;
  SplitView split;
  NeighborIndex index;
  /// Git blob hashes of the inputs, keyed "events" and "node_features".
  std::map<std::string, std::string> input_hashes;

  GraphContext context() const { return {&graph, &index}; }
};

/// Reads the event CSV named by the config, or generates the synthetic
/// stream described by its synth.* keys.
Dataset load_dataset(const RunConfig& config);
Dataset make_dataset(TemporalGraph graph, const std::array<double, 3>& ratios);

/// SHA-1 over "blob <size>\0" + content, as lowercase hex.
std::string git_blob_hash(std::string_view content);

/// The config's hyperparameters with feature widths taken from the data.
DyGFormerHyper resolve_hyper(const RunConfig& config, const TemporalGraph& g);

struct EvalResult {
  MetricReport report;
  std::optional<MetricReport> inductive;  // links touching nodes unseen in train
  std::vector<PairQuery> queries;         // positives then negatives, per batch
  std::vector<double> scores;
  std::vector<int> labels;
};

struct EvalOptions {
  std::size_t batch_size = 200;
  std::size_t shard = 100;
  Precision precision = Precision::kFloat32;
  bool historical_train_only = false;
  bool negative_fallback = true;
  bool inductive_both_endpoints = false;
  LeakageAudit* audit = nullptr;
  /// Score at most this many positives (0 means the whole split).
  std::size_t max_positives = 0;
};

EvalOptions eval_options(const RunConfig& config);

/// The positive links of a split with their sampled negatives, drawn from
/// a stream fixed by (seed, split, strategy).
struct EvalQueries {
  std::vector<PairQuery> queries;
  std::vector<int> labels;
  std::vector<bool> inductive;  // per query: belongs to the inductive subset
};
EvalQueries evaluation_queries(const Dataset& data, EvalSplit split, NegativeStrategy strategy, std::uint64_t seed,
                               const EvalOptions& opts);

/// Scores every query and reports AP/AUC over all of them and over the
/// inductive subset.
EvalResult evaluate_link_model(ModelParams& params, const DyGFormerHyper& hyper, const Dataset& data,
                               EvalSplit split, NegativeStrategy strategy, std::uint64_t seed,
                               const EvalOptions& opts);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  MetricReport val;
  double seconds = 0.0;
};

struct TrainResult {
  DyGFormerHyper hyper;
  ModelParams params;  // best-validation parameters
  std::size_t best_epoch = 0;
  MetricReport best_val;
  std::vector<EpochRecord> history;
  std::uint64_t seed = 0;
};

/// Link prediction: chronological batches, one random negative per
/// positive, BCE, Adam, early stopping on validation AP.
TrainResult train_link_model(const RunConfig& config, const Dataset& data, std::uint64_t seed,
                             std::ostream* progress = nullptr);

struct NodeTrainResult {
  DyGFormerHyper hyper;
  ModelParams params;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  double test_auc = 0.0;
  std::vector<EpochRecord> history;
};

/// Dynamic node classification on event labels from the source node's
/// representation. Starts from `backbone`; the backbone stays frozen
/// unless config.node_joint.
NodeTrainResult train_node_classifier(const RunConfig& config, const Dataset& data, ModelParams backbone,
                                      const DyGFormerHyper& hyper, std::uint64_t seed,
                                      std::ostream* progress = nullptr);

struct EdgeBankResult {
  EdgeBankVariant variant = EdgeBankVariant::kInfinite;
  MetricReport report;
};

/// Test-split metrics for each configured variant, memory built from the
/// events before the test range (train only when config.edgebank_train_only).
/// `eval_seed` fixes the sampled negatives.
std::vector<EdgeBankResult> run_edgebank(const RunConfig& config, const Dataset& data, std::uint64_t eval_seed);

/// Checkpoint container: parameters, hyperparameters, seed and the best
/// validation metrics as exact text.
diff::TensorContainer make_checkpoint(const TrainResult& result, const RunConfig& config,
                                      const Dataset& data);

struct LoadedModel {
  DyGFormerHyper hyper;
  ModelParams params;
  std::map<std::string, std::string> manifest;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;  // evaluation-negative seed used by the trainer
};
LoadedModel load_checkpoint(const std::string& path);
LoadedModel model_from_container(const diff::TensorContainer& c);

/// Finite-difference check of the full BCE link loss on a small model in
/// double precision.
diff::GradCheckResult gradcheck_model(const DyGFormerHyper& hyper, std::uint64_t seed);
DyGFormerHyper tiny_hyper();

/// Model A vs model B on the same test links.
AnalysisTable analyze_models(LoadedModel& a, LoadedModel& b, const Dataset& data, NegativeStrategy strategy,
                             std::uint64_t seed, const EvalOptions& opts);

struct SeedSummary {
  std::string split;
  std::string strategy;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for one seed
  std::size_t n = 0;
};
/// Groups records by (split, strategy, metric) across seeds.
std::vector<SeedSummary> summarize_seeds(const std::vector<MetricRecord>& records);
void write_summary_csv(const std::vector<SeedSummary>& summary, std::ostream& out);

/// Resolved config, input hashes and a hash over both.
void write_run_manifest(const RunConfig& config, const Dataset& data, std::ostream& out);

/// The subcommand drivers behind the command-line tool. Each writes its
/// outputs under config.output_dir and returns the metrics it produced.
std::vector<MetricRecord> command_train(const RunConfig& config, std::ostream& log);
std::vector<MetricRecord> command_evaluate(const RunConfig& config, std::optional<std::uint64_t> seed,
                                           std::ostream& log);
std::vector<MetricRecord> command_edgebank(const RunConfig& config, std::ostream& log);
void command_analyze(const RunConfig& config, std::optional<std::uint64_t> seed, std::ostream& log);
void command_synth(const RunConfig& config, std::optional<std::uint64_t> seed, std::ostream& log);
/// Returns true when the relative error is within 1e-4.
bool command_gradcheck(std::optional<std::uint64_t> seed, std::ostream& log);

}  // namespace ctdg
