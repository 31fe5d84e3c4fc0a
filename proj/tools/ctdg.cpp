// Command-line front end: ctdg <subcommand> --config <path> [options].
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctdg/config.hpp"
#include "ctdg/error.hpp"
#include "ctdg/pipeline.hpp"

namespace {

int exit_code(ctdg::ErrorCategory c) {
  switch (c) {
    case ctdg::ErrorCategory::kParse: return 3;
    case ctdg::ErrorCategory::kInvalidArgument: return 4;
    case ctdg::ErrorCategory::kShapeMismatch: return 5;
    case ctdg::ErrorCategory::kIo: return 6;
    case ctdg::ErrorCategory::kNumerical: return 7;
    case ctdg::ErrorCategory::kUnknownNode: return 8;
  }
  return 1;
}

int report(std::string_view category, const std::string& message, int code) {
  std::cerr << "error[" << category << "]: " << message << '\n';
  return code;
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string preset;
  std::vector<std::string> ablations;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string output_dir;
};

ctdg::RunConfig resolve(const Options& o, bool seed_selects_run) {
  ctdg::RunConfig c;
  if (!o.config_path.empty()) c = ctdg::load_config_file(o.config_path);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    ctdg::require(eq != std::string::npos, ctdg::ErrorCategory::kParse, "--set expects key=value, got '" + kv + "'");
    ctdg::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.preset.empty()) ctdg::apply_preset(c, o.preset);
  for (const std::string& a : o.ablations) ctdg::apply_ablation(c, a);
  if (!o.strategy.empty()) c.strategy = ctdg::parse_strategy(o.strategy);
  if (!o.checkpoint.empty()) c.checkpoint_path = o.checkpoint;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (seed_selects_run && o.seed) c.seeds = {*o.seed};
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time dynamic graph learning with DyGFormer and EdgeBank"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", o.config_path, "key=value run configuration");
    if (needs_config) cfg->required();
    sub->add_option("--seed", o.seed, "run seed (replaces the configured seed list)");
    sub->add_option("--strategy", o.strategy, "negative sampling strategy")
        ->check(CLI::IsMember({"rnd", "hist", "ind"}));
    sub->add_option("--preset", o.preset, "sequence length and patch size, e.g. 64&2");
    sub->add_option("--ablate", o.ablations, "ncoe, te, mixsd or sepno (repeatable)")
        ->check(CLI::IsMember({"ncoe", "te", "mixsd", "sepno"}));
    sub->add_option("--set", o.overrides, "extra key=value config override (repeatable)");
    sub->add_option("--out", o.output_dir, "output directory");
  };

  CLI::App* train = app.add_subcommand("train", "train one model per seed and evaluate it");
  add_common(train, true);
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate saved checkpoints on validation and test");
  add_common(evaluate, true);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file (default: one per configured seed)");
  CLI::App* edgebank = app.add_subcommand("edgebank", "evaluate the EdgeBank variants");
  add_common(edgebank, true);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the model gradients");
  add_common(gradcheck, false);
  CLI::App* analyze = app.add_subcommand("analyze", "compare two checkpoints link by link");
  add_common(analyze, true);
  analyze->add_option("--checkpoint", o.checkpoint, "checkpoint of model A");
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic event stream");
  add_common(synth, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage_error", e.what(), 2);
  }

  try {
    if (gradcheck->parsed()) {
      return ctdg::command_gradcheck(o.seed, std::cout) ? 0
                                                        : report("numerical_error", "gradient check failed", 7);
    }
    if (train->parsed()) {
      ctdg::command_train(resolve(o, true), std::cout);
    } else if (evaluate->parsed()) {
      const ctdg::RunConfig c = resolve(o, true);
      // With an explicit checkpoint --seed picks the negative-sampling seed;
      // otherwise it picks the run whose checkpoint is evaluated.
      ctdg::command_evaluate(c, c.checkpoint_path.empty() ? std::nullopt : o.seed, std::cout);
    } else if (edgebank->parsed()) {
      ctdg::command_edgebank(resolve(o, true), std::cout);
    } else if (analyze->parsed()) {
      ctdg::command_analyze(resolve(o, false), o.seed, std::cout);
    } else if (synth->parsed()) {
      ctdg::command_synth(resolve(o, false), o.seed, std::cout);
    }
  } catch (const ctdg::Error& e) {
    return report(ctdg::to_string(e.category()), e.what(), exit_code(e.category()));
  } catch (const std::exception& e) {
    return report("internal_error", e.what(), 1);
  }
  return 0;
}
