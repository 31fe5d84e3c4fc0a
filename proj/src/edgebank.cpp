#include "ctdg/edgebank.hpp"

#include <algorithm>
#include <string>

#include "ctdg/error.hpp"

namespace ctdg {

std::string_view to_string(EdgeBankVariant v) {
  switch (v) {
    case EdgeBankVariant::kInfinite: return "infinite";
    case EdgeBankVariant::kTimeWindowTest: return "tw_ts";
    case EdgeBankVariant::kTimeWindowRepeat: return "tw_re";
    case EdgeBankVariant::kThreshold: return "threshold";
  }
  return "infinite";
}

EdgeBankVariant parse_edgebank_variant(std::string_view s) {
  for (EdgeBankVariant v : kAllEdgeBankVariants) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCategory::kInvalidArgument, "unknown EdgeBank variant '" + std::string(s) + "'");
}

namespace {

std::unordered_map<std::uint64_t, PairStats> collect(std::span<const Event> observed) {
  std::unordered_map<std::uint64_t, PairStats> stats;
  for (const Event& e : observed) {
    auto [it, inserted] = stats.try_emplace(pair_key(e.source, e.destination));
    PairStats& s = it->second;
    if (inserted) s.first_seen = e.timestamp;
    ++s.count;
    s.last_seen = e.timestamp;
  }
  return stats;
}

}  // namespace

std::optional<double> mean_repeat_interval(std::span<const Event> observed) {
  const auto stats = collect(observed);
  double total = 0.0;
  std::size_t repeated = 0;
  for (const auto& [key, s] : stats) {
    if (s.count < 2) continue;
    // Consecutive gaps telescope to (last - first) / (count - 1).
    total += (s.last_seen - s.first_seen) / static_cast<double>(s.count - 1);
    ++repeated;
  }
  if (repeated == 0) return std::nullopt;
  return total / static_cast<double>(repeated);
}

EdgeMemory build_memory(EdgeBankVariant variant, std::span<const Event> observed,
                        std::optional<double> test_duration, std::optional<std::size_t> threshold_k) {
  for (std::size_t i = 1; i < observed.size(); ++i) {
    require(observed[i - 1].timestamp <= observed[i].timestamp, ErrorCategory::kInvalidArgument,
            "EdgeBank needs time-sorted events");
  }
  EdgeMemory m;
  m.variant = variant;
  auto all = collect(observed);
  switch (variant) {
    case EdgeBankVariant::kInfinite:
      m.pairs = std::move(all);
      return m;
    case EdgeBankVariant::kTimeWindowTest:
      require(test_duration.has_value() && *test_duration > 0.0, ErrorCategory::kInvalidArgument,
              "tw_ts needs a positive test duration");
      m.window = *test_duration;
      break;
    case EdgeBankVariant::kTimeWindowRepeat:
      // Without repeats the window collapses to zero length.
      m.window = mean_repeat_interval(observed).value_or(0.0);
      break;
    case EdgeBankVariant::kThreshold:
      require(threshold_k.has_value(), ErrorCategory::kInvalidArgument, "threshold variant needs k");
      m.threshold_k = *threshold_k;
      for (auto& [key, s] : all) {
        if (s.count > *threshold_k) m.pairs.emplace(key, s);
      }
      return m;
  }
  if (observed.empty()) return m;
  const double start = observed.back().timestamp - *m.window;
  for (auto& [key, s] : all) {
    if (s.last_seen >= start) m.pairs.emplace(key, s);
  }
  return m;
}

std::vector<int> edgebank_predict(const EdgeMemory& memory, std::span<const PairQuery> queries) {
  std::vector<int> out;
  out.reserve(queries.size());
  for (const PairQuery& q : queries) out.push_back(memory.contains(q.u, q.v) ? 1 : 0);
  return out;
}

}  // namespace ctdg
