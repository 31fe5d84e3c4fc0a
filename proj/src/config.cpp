#include "ctdg/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "ctdg/error.hpp"
#include "text.hpp"

namespace ctdg {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kLinkPrediction: return "link_prediction";
    case Task::kNodeClassification: return "node_classification";
    case Task::kEdgeBank: return "edgebank";
  }
  return "link_prediction";
}

std::string_view to_string(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

LengthPreset find_preset(std::string_view name) {
  for (const auto& [key, preset] : kLengthPresets) {
    if (key == name) return preset;
  }
  fail(ErrorCategory::kInvalidArgument, "unknown length preset '" + std::string(name) + "'");
}

void apply_preset(RunConfig& c, std::string_view name) {
  const LengthPreset p = find_preset(name);
  c.hyper.max_len = p.max_len;
  c.hyper.patch = p.patch;
  c.preset = std::string(name);
}

void apply_ablation(RunConfig& c, std::string_view name) {
  if (name == "ncoe") c.hyper.use_ncoe = false;
  else if (name == "te") c.hyper.use_te = false;
  else if (name == "mixsd") c.hyper.mix_sequences = false;
  else if (name == "sepno") c.hyper.sep_no = true;
  else fail(ErrorCategory::kInvalidArgument, "unknown ablation '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCategory::kInvalidArgument, msg); };
  check(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  check(batch_size >= 1, "batch_size must be at least 1");
  check(epochs >= 1, "epochs must be at least 1");
  check(patience <= epochs, "patience must not exceed epochs");
  check(!seeds.empty(), "at least one seed is required");
  check(shard >= 1, "shard must be at least 1");
  check(!edgebank_variants.empty(), "at least one EdgeBank variant is required");
  double total = 0.0;
  for (double r : split) {
    check(r > 0.0, "split ratios must be positive");
    total += r;
  }
  check(std::abs(total - 1.0) < 1e-9, "split ratios must sum to 1");
  hyper.validate();
}

namespace {

std::int64_t to_int(std::string_view key, std::string_view value) {
  const auto x = text::parse_int(value);
  require(x.has_value() && *x >= 0, ErrorCategory::kParse, "bad integer for " + std::string(key));
  return *x;
}

double to_double(std::string_view key, std::string_view value) {
  const auto x = text::parse_double(value);
  require(x.has_value(), ErrorCategory::kParse, "bad number for " + std::string(key));
  return *x;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCategory::kParse, "bad flag for " + std::string(key));
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? "," : "") + std::to_string(seeds[i]);
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view value) {
  std::vector<std::uint64_t> out;
  for (std::string_view item : text::split(value, ',')) {
    const auto dash = item.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      const auto lo = to_int("seeds", text::trim(item.substr(0, dash)));
      const auto hi = to_int("seeds", text::trim(item.substr(dash + 1)));
      require(lo <= hi, ErrorCategory::kParse, "empty seed range");
      for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
    } else {
      out.push_back(static_cast<std::uint64_t>(to_int("seeds", item)));
    }
  }
  return out;
}

}  // namespace

void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  DyGFormerHyper& h = c.hyper;
  if (key.starts_with("synth.")) {
    set_synth_spec_value(c.synth, key.substr(6), value);
  } else if (key == "events") {
    c.events_path = std::string(value);
  } else if (key == "node_features") {
    c.node_features_path = std::string(value);
  } else if (key == "split") {
    const auto parts = text::split(value, ',');
    require(parts.size() == 3, ErrorCategory::kParse, "split needs three ratios");
    for (std::size_t i = 0; i < 3; ++i) c.split[i] = to_double(key, parts[i]);
  } else if (key == "task") {
    if (value == "link_prediction") c.task = Task::kLinkPrediction;
    else if (value == "node_classification") c.task = Task::kNodeClassification;
    else if (value == "edgebank") c.task = Task::kEdgeBank;
    else fail(ErrorCategory::kParse, "unknown task '" + std::string(value) + "'");
  } else if (key == "model.d_t") {
    h.d_t = to_int(key, value);
  } else if (key == "model.d_c") {
    h.d_c = to_int(key, value);
  } else if (key == "model.d") {
    h.d = to_int(key, value);
  } else if (key == "model.d_out") {
    h.d_out = to_int(key, value);
  } else if (key == "model.heads") {
    h.heads = to_int(key, value);
  } else if (key == "model.layers") {
    h.layers = to_int(key, value);
  } else if (key == "model.max_len") {
    h.max_len = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "model.patch") {
    h.patch = to_int(key, value);
  } else if (key == "model.dropout") {
    h.dropout = to_double(key, value);
  } else if (key == "model.use_ncoe") {
    h.use_ncoe = to_bool(key, value);
  } else if (key == "model.use_te") {
    h.use_te = to_bool(key, value);
  } else if (key == "model.mix_sequences") {
    h.mix_sequences = to_bool(key, value);
  } else if (key == "model.sep_no") {
    h.sep_no = to_bool(key, value);
  } else if (key == "model.include_self") {
    h.include_self = to_bool(key, value);
  } else if (key == "preset") {
    if (!value.empty()) apply_preset(c, value);
  } else if (key == "lr") {
    c.lr = to_double(key, value);
  } else if (key == "batch_size") {
    c.batch_size = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "epochs") {
    c.epochs = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "patience") {
    c.patience = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "seeds") {
    c.seeds = parse_seeds(value);
  } else if (key == "eval_seed") {
    c.eval_seed = static_cast<std::uint64_t>(to_int("eval_seed", value));
  } else if (key == "shard") {
    c.shard = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "precision") {
    if (value == "float32") c.precision = Precision::kFloat32;
    else if (value == "float64") c.precision = Precision::kFloat64;
    else fail(ErrorCategory::kParse, "precision must be float32 or float64");
  } else if (key == "strategy") {
    c.strategy = parse_strategy(value);
  } else if (key == "val_strategy") {
    if (value.empty() || value == "same") c.val_strategy.reset();
    else c.val_strategy = parse_strategy(value);
  } else if (key == "historical_pool") {
    if (value == "before_split") c.historical_train_only = false;
    else if (value == "train_only") c.historical_train_only = true;
    else fail(ErrorCategory::kParse, "historical_pool must be before_split or train_only");
  } else if (key == "negative_fallback") {
    c.negative_fallback = to_bool(key, value);
  } else if (key == "inductive_filter") {
    if (value == "one_sided") c.inductive_both_endpoints = false;
    else if (value == "two_sided") c.inductive_both_endpoints = true;
    else fail(ErrorCategory::kParse, "inductive_filter must be one_sided or two_sided");
  } else if (key == "edgebank.variants") {
    c.edgebank_variants.clear();
    for (std::string_view v : text::split(value, ',')) c.edgebank_variants.push_back(parse_edgebank_variant(v));
  } else if (key == "edgebank.memory") {
    if (value == "train_val") c.edgebank_train_only = false;
    else if (value == "train") c.edgebank_train_only = true;
    else fail(ErrorCategory::kParse, "edgebank.memory must be train_val or train");
  } else if (key == "edgebank.threshold") {
    c.edgebank_threshold = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "node.joint") {
    c.node_joint = to_bool(key, value);
  } else if (key == "checkpoint") {
    c.checkpoint_path = std::string(value);
  } else if (key == "compare_checkpoint") {
    c.compare_checkpoint = std::string(value);
  } else if (key == "output_dir") {
    c.output_dir = std::string(value);
  } else {
    fail(ErrorCategory::kParse, "unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    try {
      if (eq == std::string_view::npos) fail(ErrorCategory::kParse, "expected key=value");
      set_config_value(c, text::trim(body.substr(0, eq)), text::trim(body.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.category(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::kIo, "cannot open config " + path);
  return parse_config(in);
}

std::map<std::string, std::string> config_to_map(const RunConfig& c) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  const DyGFormerHyper& h = c.hyper;
  std::map<std::string, std::string> m = {
      {"events", c.events_path},
      {"node_features", c.node_features_path},
      {"split", text::format_double(c.split[0]) + "," + text::format_double(c.split[1]) + "," +
                    text::format_double(c.split[2])},
      {"task", std::string(to_string(c.task))},
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
      {"lr", text::format_double(c.lr)},
      {"batch_size", std::to_string(c.batch_size)},
      {"epochs", std::to_string(c.epochs)},
      {"patience", std::to_string(c.patience)},
      {"seeds", join_seeds(c.seeds)},
      {"eval_seed", std::to_string(c.eval_seed)},
      {"shard", std::to_string(c.shard)},
      {"precision", std::string(to_string(c.precision))},
      {"strategy", std::string(to_string(c.strategy))},
      {"val_strategy", c.val_strategy ? std::string(to_string(*c.val_strategy)) : "same"},
      {"historical_pool", c.historical_train_only ? "train_only" : "before_split"},
      {"negative_fallback", b(c.negative_fallback)},
      {"inductive_filter", c.inductive_both_endpoints ? "two_sided" : "one_sided"},
      {"edgebank.memory", c.edgebank_train_only ? "train" : "train_val"},
      {"edgebank.threshold", std::to_string(c.edgebank_threshold)},
      {"node.joint", b(c.node_joint)},
      {"checkpoint", c.checkpoint_path},
      {"compare_checkpoint", c.compare_checkpoint},
      {"output_dir", c.output_dir},
  };
  std::string variants;
  for (std::size_t i = 0; i < c.edgebank_variants.size(); ++i) {
    variants += (i ? "," : "") + std::string(to_string(c.edgebank_variants[i]));
  }
  m["edgebank.variants"] = variants;
  if (c.events_path.empty()) {
    const SynthSpec& s = c.synth;
    m["synth.num_nodes"] = std::to_string(s.num_nodes);
    m["synth.num_events"] = std::to_string(s.num_events);
    m["synth.recurrence_bias"] = text::format_double(s.recurrence_bias);
    m["synth.d_E"] = std::to_string(s.d_e);
    m["synth.d_N"] = std::to_string(s.d_n);
    m["synth.seed"] = std::to_string(s.seed);
    m["synth.repeat_window"] = std::to_string(s.repeat_window);
    m["synth.with_labels"] = s.with_labels ? "1" : "0";
  }
  return m;
}

void save_config(const RunConfig& c, std::ostream& out) {
  for (const auto& [key, value] : config_to_map(c)) out << key << '=' << value << '\n';
}

}  // namespace ctdg
