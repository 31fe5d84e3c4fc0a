#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ctdg/rng.hpp"
#include "ctdg/sequence.hpp"
#include "ctdg/temporal_graph.hpp"

namespace ctdg {

enum class NegativeStrategy { kRandom, kHistorical, kInductive };

std::string_view to_string(NegativeStrategy s);  // "rnd", "hist", "ind"
NegativeStrategy parse_strategy(std::string_view s);

enum class EvalSplit { kVal, kTest };
std::string_view to_string(EvalSplit s);  // "val", "test"

/// Candidate destinations per source node for the historical and inductive
/// strategies. Partner lists are sorted and duplicate-free.
struct NegativePools {
  std::size_t num_nodes = 0;
  std::unordered_map<NodeId, std::vector<NodeId>> historical;
  std::unordered_map<NodeId, std::vector<NodeId>> inductive;
  bool allow_fallback = true;
};

/// Historical pool: partners (either role) in events before the evaluated
/// range, or in the train range only when `train_only_history`. Inductive
/// pool: pairs inside the evaluated range that never occur in train.
NegativePools build_negative_pools(const TemporalGraph& g, const SplitView& split, EvalSplit which,
                                   bool train_only_history = false);

/// One destination-corrupted negative per positive. Random negatives avoid
/// pairs positive at the same timestamp; pool negatives avoid pairs
/// positive anywhere in the batch and fall back to random sampling when the
/// pool is exhausted.
std::vector<PairQuery> sample_negatives(NegativeStrategy strategy, std::span<const PairQuery> positives,
                                        const NegativePools& pools, CounterRng& rng);

struct MetricReport {
  double ap = 0.0;
  double auc_roc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Mean over positives of the precision among all items scoring at least as
/// high; tied items are ranked together.
double average_precision(std::span<const double> scores, std::span<const int> labels);
/// Probability that a random positive outscores a random negative, ties
/// counting one half.
double auc_roc(std::span<const double> scores, std::span<const int> labels);
MetricReport metric_report(std::span<const double> scores, std::span<const int> labels);

/// Jaccard ratio of the distinct neighbor ids (self entries ignored);
/// nullopt when both sides are empty.
std::optional<double> common_neighbor_ratio(const InteractionSequence& seq_u, const InteractionSequence& seq_v);

enum class Outcome { kTP, kTN, kFN, kFP };
std::string_view to_string(Outcome o);

struct TransitionStats {
  Outcome from = Outcome::kFN;
  Outcome to = Outcome::kTP;
  std::size_t original = 0;  // links with outcome `from` under A
  std::size_t changed = 0;   // ... that have outcome `to` under B
  double clr = 0.0;
  std::optional<double> mean_cnr;  // over the changed links
};

struct OutcomeStats {
  Outcome outcome = Outcome::kTP;
  std::size_t count = 0;
  double lr = 0.0;
  std::optional<double> mean_cnr;
};

struct AnalysisTable {
  std::array<TransitionStats, 4> transitions;  // FN->TP, FP->TN, TP->FN, TN->FP
  std::array<OutcomeStats, 4> outcomes_a;      // TP, TN, FN, FP
  std::array<OutcomeStats, 4> outcomes_b;
};

/// A link is predicted positive when its score is at least `threshold`.
AnalysisTable confusion_analysis(std::span<const double> scores_a, std::span<const double> scores_b,
                                 std::span<const int> labels, std::span<const std::optional<double>> cnrs,
                                 double threshold = 0.5);

void write_analysis_csv(const AnalysisTable& table, std::ostream& out);

struct MetricRecord {
  std::string split;
  std::string strategy;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

/// `split,strategy,metric,value,seed` lines; values round-trip exactly.
void write_metrics_log(std::span<const MetricRecord> records, std::ostream& out, bool header = true);
std::vector<MetricRecord> read_metrics_log(std::istream& in);

}  // namespace ctdg
