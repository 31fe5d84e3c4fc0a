#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctdg/temporal_graph.hpp"

namespace ctdg {

enum class EdgeBankVariant { kInfinite, kTimeWindowTest, kTimeWindowRepeat, kThreshold };

std::string_view to_string(EdgeBankVariant v);  // "infinite", "tw_ts", "tw_re", "threshold"
EdgeBankVariant parse_edgebank_variant(std::string_view s);

inline constexpr EdgeBankVariant kAllEdgeBankVariants[] = {
    EdgeBankVariant::kInfinite, EdgeBankVariant::kTimeWindowTest, EdgeBankVariant::kTimeWindowRepeat,
    EdgeBankVariant::kThreshold};

struct PairStats {
  std::size_t count = 0;
  double first_seen = 0.0;
  double last_seen = 0.0;
};

/// The retained pairs of one EdgeBank variant. Time windows end at the last
/// observed timestamp.
struct EdgeMemory {
  EdgeBankVariant variant = EdgeBankVariant::kInfinite;
  std::unordered_map<std::uint64_t, PairStats> pairs;
  std::optional<double> window;
  std::optional<std::size_t> threshold_k;

  bool contains(NodeId u, NodeId v) const { return pairs.contains(pair_key(u, v)); }
};

/// Mean over pairs seen at least twice of their mean gap between
/// consecutive occurrences; nullopt when no pair repeats.
std::optional<double> mean_repeat_interval(std::span<const Event> observed);

/// `test_duration` is required for kTimeWindowTest and `threshold_k` for
/// kThreshold. Events must be sorted by timestamp.
EdgeMemory build_memory(EdgeBankVariant variant, std::span<const Event> observed,
                        std::optional<double> test_duration = std::nullopt,
                        std::optional<std::size_t> threshold_k = std::nullopt);

/// 1 for queries whose unordered pair is retained, else 0.
std::vector<int> edgebank_predict(const EdgeMemory& memory, std::span<const PairQuery> queries);

}  // namespace ctdg
