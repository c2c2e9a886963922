#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "wran/error.hpp"

using namespace wran::cli;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "random seed (overrides run.seed / WRAN_SEED)");
  app->add_option("--out-dir", c.out_dir, "output directory (overrides run.out_dir / WRAN_OUT_DIR)");
  app->add_option("--set", c.sets, "override a config key, e.g. --set train.epochs_adapt=20");
}

RunConfig resolve(const CLI::App* app, const Common& c) {
  Overrides o;
  if (!c.config.empty()) o.config_path = c.config;
  if (app->count("--seed")) o.seed = c.seed;
  if (!c.out_dir.empty()) o.out_dir = c.out_dir;
  o.assignments = c.sets;
  return load_run_config(o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted relation adversarial network: synthetic data, training and evaluation"};
  app.require_subcommand(1);

  Common c;
  std::string data, ckpt, weights, out, out_ckpt;
  AdaptFlags flags;
  double sm = 0.0;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus (re) or knowledge graph (kgc)");
  add_common(gen, c);
  gen->add_option("--out", out, "dataset directory (default: out-dir)");

  auto* pre = app.add_subcommand("pretrain", "stage 1: train the source encoder and classifier");
  add_common(pre, c);
  pre->add_option("--data", data, "dataset directory")->required();
  pre->add_option("--out", out, "checkpoint path");

  auto* wts = app.add_subcommand("weights", "stages 2-3: relation, instance and gated weights");
  add_common(wts, c);
  wts->add_option("--checkpoint", ckpt, "pretrained checkpoint")->required();
  wts->add_option("--data", data, "dataset directory")->required();
  wts->add_option("--out", out, "weight table path");
  wts->add_option("--out-checkpoint", out_ckpt, "checkpoint path after stage 3");

  auto* adp = app.add_subcommand("adapt", "stage 4: weighted adversarial adaptation");
  add_common(adp, c);
  adp->add_option("--checkpoint", ckpt, "checkpoint after the weights command")->required();
  adp->add_option("--weights", weights, "frozen weight table")->required();
  adp->add_option("--data", data, "dataset directory")->required();
  adp->add_option("--out", out, "adapted checkpoint path");
  adp->add_flag("--no-relation-weights", flags.no_relation, "drop the relation weight component");
  adp->add_flag("--no-instance-weights", flags.no_instance, "drop the instance weight component");
  adp->add_flag("--no-gate", flags.no_gate, "replace the learned gate by --fixed-alpha");
  adp->add_option("--fixed-alpha", flags.fixed_alpha, "gate value used with --no-gate");
  adp->add_option("--sm-coeff", sm, "semantic transfer coefficient (overrides train.sm_coeff)");
  adp->add_option("--fine-tune-frac", flags.fine_tune_frac, "fraction of labeled target data for fine-tuning");

  auto* ev = app.add_subcommand("eval", "score a checkpoint on the held-out target data");
  add_common(ev, c);
  ev->add_option("--checkpoint", ckpt, "checkpoint")->required();
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--out", out, "metrics csv path");

  auto* th = app.add_subcommand("theory", "check the weighted minimax identity numerically");
  add_common(th, c);
  th->add_option("--out", out, "output directory (default: out-dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig cfg = resolve(sub, c);
    std::string result;
    if (sub == gen) {
      result = cmd_gen(cfg, out);
    } else if (sub == pre) {
      result = cmd_pretrain(cfg, data, out);
    } else if (sub == wts) {
      result = cmd_weights(cfg, ckpt, data, out, out_ckpt);
    } else if (sub == adp) {
      if (adp->count("--sm-coeff")) flags.sm_coeff = sm;
      result = cmd_adapt(cfg, ckpt, weights, data, out, flags);
    } else if (sub == ev) {
      result = cmd_eval(cfg, ckpt, data, out);
    } else {
      result = cmd_theory(cfg, out);
    }
    std::cerr << "wrote " << result << '\n';
  } catch (const wran::ParseError& e) {
    std::cerr << "wran: parse error: " << e.what() << '\n';
    return 2;
  } catch (const wran::ContractError& e) {
    std::cerr << "wran: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wran: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
