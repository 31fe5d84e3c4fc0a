#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctdg/dygformer.hpp"
#include "ctdg/edgebank.hpp"
#include "ctdg/evaluation.hpp"
#include "ctdg/temporal_graph.hpp"

namespace ctdg {

enum class Task { kLinkPrediction, kNodeClassification, kEdgeBank };
std::string_view to_string(Task t);

enum class Precision { kFloat32, kFloat64 };
std::string_view to_string(Precision p);

/// Supported (max_len, patch) pairs, named "32&1" ... "4096&128".
struct LengthPreset {
  std::size_t max_len;
  Eigen::Index patch;
};
inline constexpr std::pair<std::string_view, LengthPreset> kLengthPresets[] = {
    {"32&1", {32, 1}},       {"64&2", {64, 2}},         {"128&4", {128, 4}},       {"256&8", {256, 8}},
    {"512&16", {512, 16}},   {"1024&32", {1024, 32}},   {"2048&64", {2048, 64}},   {"4096&128", {4096, 128}},
};
LengthPreset find_preset(std::string_view name);

struct RunConfig {
  // Data: an event CSV, or a synthetic spec when `events_path` is empty.
  std::string events_path;
  std::string node_features_path;
  SynthSpec synth;
  std::array<double, 3> split = {0.70, 0.15, 0.15};

  Task task = Task::kLinkPrediction;
  DyGFormerHyper hyper;  // d_n and d_e are taken from the data
  std::string preset;    // informational once applied

  double lr = 1e-4;
  std::size_t batch_size = 200;
  std::size_t epochs = 100;
  std::size_t patience = 20;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::uint64_t eval_seed = 0;  // evaluation negatives; shared by every run seed
  std::size_t shard = 100;  // queries per tape
  Precision precision = Precision::kFloat32;

  NegativeStrategy strategy = NegativeStrategy::kRandom;
  std::optional<NegativeStrategy> val_strategy;  // defaults to `strategy`
  bool historical_train_only = false;
  bool negative_fallback = true;
  bool inductive_both_endpoints = false;

  std::vector<EdgeBankVariant> edgebank_variants = {std::begin(kAllEdgeBankVariants),
                                                   std::end(kAllEdgeBankVariants)};
  bool edgebank_train_only = false;
  std::size_t edgebank_threshold = 1;

  bool node_joint = false;           // train the backbone with the node head
  std::string checkpoint_path;       // input checkpoint for evaluate/analyze/node classification
  std::string compare_checkpoint;    // second model for analyze
  std::string output_dir = "runs";

  NegativeStrategy effective_val_strategy() const { return val_strategy.value_or(strategy); }

  /// Throws ctdg::Error(kInvalidArgument) on inconsistent settings.
  void validate() const;
};

/// key=value lines, '#' comments. Unknown keys are a parse error.
RunConfig parse_config(std::istream& in);
RunConfig load_config_file(const std::string& path);
/// Applies one key=value pair (also used for command-line overrides).
void set_config_value(RunConfig& c, std::string_view key, std::string_view value);
void apply_preset(RunConfig& c, std::string_view name);
/// Applies an ablation name: ncoe, te, mixsd or sepno.
void apply_ablation(RunConfig& c, std::string_view name);

/// Every field in a form parse_config accepts, keys sorted.
std::map<std::string, std::string> config_to_map(const RunConfig& c);
void save_config(const RunConfig& c, std::ostream& out);

}  // namespace ctdg
