#include "ctdg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "ctdg/error.hpp"
#include "text.hpp"

namespace ctdg {

std::string_view to_string(NegativeStrategy s) {
  switch (s) {
    case NegativeStrategy::kRandom: return "rnd";
    case NegativeStrategy::kHistorical: return "hist";
    case NegativeStrategy::kInductive: return "ind";
  }
  return "rnd";
}

NegativeStrategy parse_strategy(std::string_view s) {
  if (s == "rnd" || s == "random") return NegativeStrategy::kRandom;
  if (s == "hist" || s == "historical") return NegativeStrategy::kHistorical;
  if (s == "ind" || s == "inductive") return NegativeStrategy::kInductive;
  fail(ErrorCategory::kInvalidArgument, "unknown negative sampling strategy '" + std::string(s) + "'");
}

std::string_view to_string(EvalSplit s) { return s == EvalSplit::kVal ? "val" : "test"; }

namespace {

using PartnerSets = std::unordered_map<NodeId, std::set<NodeId>>;

void add_partners(PartnerSets& sets, const Event& e) {
  sets[e.source].insert(e.destination);
  sets[e.destination].insert(e.source);
}

std::unordered_map<NodeId, std::vector<NodeId>> flatten(const PartnerSets& sets) {
  std::unordered_map<NodeId, std::vector<NodeId>> out;
  for (const auto& [node, partners] : sets) out.emplace(node, std::vector<NodeId>(partners.begin(), partners.end()));
  return out;
}

}  // namespace

NegativePools build_negative_pools(const TemporalGraph& g, const SplitView& split, EvalSplit which,
                                   bool train_only_history) {
  const IndexRange range = which == EvalSplit::kVal ? split.val : split.test;
  NegativePools pools;
  pools.num_nodes = g.num_nodes;

  PartnerSets history;
  const std::size_t history_end = train_only_history ? split.train.end : range.begin;
  for (std::size_t i = 0; i < history_end; ++i) add_partners(history, g.events[i]);
  pools.historical = flatten(history);

  std::unordered_set<std::uint64_t> train_pairs;
  for (std::size_t i = split.train.begin; i < split.train.end; ++i) {
    train_pairs.insert(pair_key(g.events[i].source, g.events[i].destination));
  }
  PartnerSets unseen;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const Event& e = g.events[i];
    if (!train_pairs.contains(pair_key(e.source, e.destination))) add_partners(unseen, e);
  }
  pools.inductive = flatten(unseen);
  return pools;
}

namespace {

// Positive pairs of a batch with the timestamps at which they occur.
class BatchPositives {
 public:
  explicit BatchPositives(std::span<const PairQuery> positives) {
    for (const PairQuery& q : positives) times_[pair_key(q.u, q.v)].push_back(q.t);
  }

  bool positive_at(NodeId u, NodeId v, double t) const {
    const auto it = times_.find(pair_key(u, v));
    return it != times_.end() && std::find(it->second.begin(), it->second.end(), t) != it->second.end();
  }

  bool positive_anywhere(NodeId u, NodeId v) const { return times_.contains(pair_key(u, v)); }

 private:
  std::unordered_map<std::uint64_t, std::vector<double>> times_;
};

constexpr int kRejectionTries = 32;

NodeId sample_random(const PairQuery& q, const BatchPositives& batch, std::size_t num_nodes, CounterRng& rng) {
  for (int i = 0; i < kRejectionTries; ++i) {
    const auto v = static_cast<NodeId>(rng.below(num_nodes));
    if (!batch.positive_at(q.u, v, q.t)) return v;
  }
  std::vector<NodeId> allowed;
  for (NodeId v = 0; v < static_cast<NodeId>(num_nodes); ++v) {
    if (!batch.positive_at(q.u, v, q.t)) allowed.push_back(v);
  }
  require(!allowed.empty(), ErrorCategory::kInvalidArgument, "every destination is a positive at this time");
  return allowed[rng.below(allowed.size())];
}

std::optional<NodeId> sample_pool(const PairQuery& q, const std::vector<NodeId>& pool, const BatchPositives& batch,
                                  CounterRng& rng) {
  if (pool.empty()) return std::nullopt;
  for (int i = 0; i < kRejectionTries; ++i) {
    const NodeId v = pool[rng.below(pool.size())];
    if (!batch.positive_anywhere(q.u, v)) return v;
  }
  std::vector<NodeId> allowed;
  for (NodeId v : pool) {
    if (!batch.positive_anywhere(q.u, v)) allowed.push_back(v);
  }
  if (allowed.empty()) return std::nullopt;
  return allowed[rng.below(allowed.size())];
}

}  // namespace

std::vector<PairQuery> sample_negatives(NegativeStrategy strategy, std::span<const PairQuery> positives,
                                        const NegativePools& pools, CounterRng& rng) {
  require(pools.num_nodes > 0, ErrorCategory::kInvalidArgument, "negative sampling needs at least one node");
  const BatchPositives batch(positives);
  static const std::vector<NodeId> kEmpty;
  std::vector<PairQuery> out;
  out.reserve(positives.size());
  for (const PairQuery& q : positives) {
    std::optional<NodeId> v;
    if (strategy != NegativeStrategy::kRandom) {
      const auto& pools_by_node = strategy == NegativeStrategy::kHistorical ? pools.historical : pools.inductive;
      const auto it = pools_by_node.find(q.u);
      v = sample_pool(q, it == pools_by_node.end() ? kEmpty : it->second, batch, rng);
      require(v.has_value() || pools.allow_fallback, ErrorCategory::kInvalidArgument,
              "negative candidate pool exhausted and fallback disabled");
    }
    if (!v) v = sample_random(q, batch, pools.num_nodes, rng);
    out.push_back({q.u, *v, q.t});
  }
  return out;
}

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCategory::kShapeMismatch, "scores and labels differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorCategory::kNumerical, "non-finite score");
    require(labels[i] == 0 || labels[i] == 1, ErrorCategory::kInvalidArgument, "labels must be 0 or 1");
  }
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  require(n_pos > 0, ErrorCategory::kInvalidArgument, "average precision needs a positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total = 0.0;
  std::size_t seen = 0;
  std::size_t seen_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_pos += labels[order[j++]];
    seen += j - i;
    seen_pos += group_pos;
    total += static_cast<double>(group_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
    i = j;
  }
  return total / static_cast<double>(n_pos);
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCategory::kInvalidArgument, "AUC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_pos += labels[order[j++]];
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    pos_rank_sum += mid_rank * static_cast<double>(group_pos);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

MetricReport metric_report(std::span<const double> scores, std::span<const int> labels) {
  MetricReport r;
  r.ap = average_precision(scores, labels);
  r.auc_roc = auc_roc(scores, labels);
  r.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  r.n_neg = labels.size() - r.n_pos;
  return r;
}

std::optional<double> common_neighbor_ratio(const InteractionSequence& seq_u, const InteractionSequence& seq_v) {
  auto ids = [](const InteractionSequence& s) {
    std::set<NodeId> out;
    for (const NeighborEntry& e : s.entries) {
      if (e.event_index != kSelfEntry) out.insert(e.neighbor);
    }
    return out;
  };
  const std::set<NodeId> a = ids(seq_u);
  const std::set<NodeId> b = ids(seq_v);
  std::vector<NodeId> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  const std::size_t uni = a.size() + b.size() - both.size();
  if (uni == 0) return std::nullopt;
  return static_cast<double>(both.size()) / static_cast<double>(uni);
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kTP: return "TP";
    case Outcome::kTN: return "TN";
    case Outcome::kFN: return "FN";
    case Outcome::kFP: return "FP";
  }
  return "TP";
}

namespace {

Outcome classify(double score, int label, double threshold) {
  const bool predicted = score >= threshold;
  if (label == 1) return predicted ? Outcome::kTP : Outcome::kFN;
  return predicted ? Outcome::kFP : Outcome::kTN;
}

struct CnrMean {
  double sum = 0.0;
  std::size_t n = 0;

  void add(const std::optional<double>& c) {
    if (c) {
      sum += *c;
      ++n;
    }
  }
  std::optional<double> value() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

std::array<OutcomeStats, 4> outcome_table(const std::vector<Outcome>& outcomes,
                                          std::span<const std::optional<double>> cnrs) {
  constexpr Outcome kOrder[] = {Outcome::kTP, Outcome::kTN, Outcome::kFN, Outcome::kFP};
  std::array<std::size_t, 4> count{};
  std::array<CnrMean, 4> cnr{};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto k = static_cast<std::size_t>(outcomes[i]);
    ++count[k];
    cnr[k].add(cnrs[i]);
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  const std::size_t pos = count[0] + count[2];
  const std::size_t neg = count[1] + count[3];
  std::array<OutcomeStats, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const Outcome o = kOrder[i];
    const auto k = static_cast<std::size_t>(o);
    const bool positive_class = o == Outcome::kTP || o == Outcome::kFN;
    out[i] = {o, count[k], ratio(count[k], positive_class ? pos : neg), cnr[k].value()};
  }
  return out;
}

}  // namespace

AnalysisTable confusion_analysis(std::span<const double> scores_a, std::span<const double> scores_b,
                                 std::span<const int> labels, std::span<const std::optional<double>> cnrs,
                                 double threshold) {
  const std::size_t n = labels.size();
  require(scores_a.size() == n && scores_b.size() == n && cnrs.size() == n, ErrorCategory::kShapeMismatch,
          "analysis inputs differ in length");
  std::vector<Outcome> a(n);
  std::vector<Outcome> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] == 0 || labels[i] == 1, ErrorCategory::kInvalidArgument, "labels must be 0 or 1");
    a[i] = classify(scores_a[i], labels[i], threshold);
    b[i] = classify(scores_b[i], labels[i], threshold);
  }
  AnalysisTable t;
  constexpr std::array<std::pair<Outcome, Outcome>, 4> kTransitions = {{{Outcome::kFN, Outcome::kTP},
                                                                        {Outcome::kFP, Outcome::kTN},
                                                                        {Outcome::kTP, Outcome::kFN},
                                                                        {Outcome::kTN, Outcome::kFP}}};
  for (std::size_t k = 0; k < kTransitions.size(); ++k) {
    const auto [from, to] = kTransitions[k];
    TransitionStats s;
    s.from = from;
    s.to = to;
    CnrMean cnr;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] != from) continue;
      ++s.original;
      if (b[i] == to) {
        ++s.changed;
        cnr.add(cnrs[i]);
      }
    }
    s.clr = s.original == 0 ? 0.0 : static_cast<double>(s.changed) / static_cast<double>(s.original);
    s.mean_cnr = cnr.value();
    t.transitions[k] = s;
  }
  t.outcomes_a = outcome_table(a, cnrs);
  t.outcomes_b = outcome_table(b, cnrs);
  return t;
}

void write_analysis_csv(const AnalysisTable& table, std::ostream& out) {
  auto cnr = [](const std::optional<double>& c) { return c ? text::format_double(*c) : std::string(); };
  out << "table,category,count,ratio,mean_cnr\n";
  for (const TransitionStats& s : table.transitions) {
    out << "clr," << to_string(s.from) << "->" << to_string(s.to) << ',' << s.changed << ','
        << text::format_double(s.clr) << ',' << cnr(s.mean_cnr) << '\n';
  }
  for (const auto& [name, rows] : {std::pair{"lr_a", &table.outcomes_a}, std::pair{"lr_b", &table.outcomes_b}}) {
    for (const OutcomeStats& s : *rows) {
      out << name << ',' << to_string(s.outcome) << ',' << s.count << ',' << text::format_double(s.lr) << ','
          << cnr(s.mean_cnr) << '\n';
    }
  }
}

void write_metrics_log(std::span<const MetricRecord> records, std::ostream& out, bool header) {
  if (header) out << "split,strategy,metric,value,seed\n";
  for (const MetricRecord& r : records) {
    out << r.split << ',' << r.strategy << ',' << r.metric << ',' << text::format_double(r.value) << ',' << r.seed
        << '\n';
  }
}

std::vector<MetricRecord> read_metrics_log(std::istream& in) {
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line.starts_with("split,")) continue;
    const auto f = text::split(line, ',');
    const std::string where = "metrics log line " + std::to_string(line_no);
    require(f.size() == 5, ErrorCategory::kParse, where + ": expected split,strategy,metric,value,seed");
    const double value = text::parse_double(f[3]).value_or(std::nan(""));
    const std::int64_t seed = text::parse_int(f[4]).value_or(-1);
    require(!std::isnan(value) && seed >= 0, ErrorCategory::kParse, where + ": bad value or seed");
    out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), value, static_cast<std::uint64_t>(seed)});
  }
  return out;
}

}  // namespace ctdg
