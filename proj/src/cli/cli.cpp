#include "cli/cli.hpp"

#include <functional>
#include <memory>

#include "cli/commands.hpp"
#include "cli/config.hpp"

namespace halluc::cli {

namespace {

// A leaf subcommand: its parameter set and the action run once parsing and
// config merging are done.
struct Leaf {
  CLI::App* app = nullptr;
  std::string name;
  ParamSet params;
  std::function<int(RunContext&)> action;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative-error bounds: simulations, property suites and grading"};
  app.require_subcommand(1);

  GlobalOptions global;
  ParamSet global_params;
  global_params.add(app, "seed", global.seed, "Top-level seed; every random draw derives from it");
  app.add_option("--config", global.config, "JSON config file with a schema_version field");
  global_params.add(app, "out_dir", global.out_dir, "Directory for artifacts and manifest.json");
  global_params.add(app, "format", global.format, "Report printed to stdout")
      ->check(CLI::IsMember({"json", "csv"}));
  global_params.add_flag(app, "serial", global.serial, "Use the serial reference kernels");
  app.fallthrough();

  std::vector<std::unique_ptr<Leaf>> leaves;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    auto l = std::make_unique<Leaf>();
    l->app = parent->add_subcommand(name, help);
    l->name = parent == &app ? name : parent->get_name() + " " + name;
    l->app->fallthrough();
    leaves.push_back(std::move(l));
    return leaves.back().get();
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Seeded simulations")->require_subcommand(1);
  CLI::App* verify = app.add_subcommand("verify", "Property suites")->require_subcommand(1);
  CLI::App* demo = app.add_subcommand("demo", "Worked examples")->require_subcommand(1);
  for (CLI::App* group : {simulate, verify, demo}) group->fallthrough();

  SimulateParams sim;
  {
    Leaf* l = leaf(simulate, "arbitrary-facts", "Arbitrary-facts trials for a learner");
    l->params.add(*l->app, "n_prompts", sim.n_prompts, "Number of prompts");
    l->params.add(*l->app, "response_set_size", sim.response_set_size,
                  "Responses per prompt, abstain included");
    l->params.add(*l->app, "alpha", sim.alpha, "Answer probability");
    l->params.add(*l->app, "n", sim.n, "Training examples per trial");
    l->params.add(*l->app, "trials", sim.trials, "Number of trials (>= 100)");
    l->params.add(*l->app, "learner", sim.learner, "memorizer, uniform or oracle");
    l->params.add_flag(*l->app, "check_delta_z", sim.check_delta_z,
                       "Also evaluate δ at every attained model probability");
    l->params.add_flag(*l->app, "save_world", sim.save_world,
                       "Write world.json and training.json of trial 0");
    l->action = [&](RunContext& ctx) { return cmd_simulate_arbitrary_facts(ctx, sim); };
  }

  MainBoundParams mb;
  {
    Leaf* l = leaf(verify, "main-bound", "Error vs misclassification bound on random instances");
    l->params.add(*l->app, "instances", mb.instances, "Number of random instances");
    l->action = [&](RunContext& ctx) { return cmd_verify_main_bound(ctx, mb); };
  }

  GoodTuringParams gt;
  {
    Leaf* l = leaf(verify, "good-turing", "Concentration of singleton-rate estimators");
    l->params.add(*l->app, "source", gt.source, "arbitrary-facts or zipf")
        ->check(CLI::IsMember({"arbitrary-facts", "zipf"}));
    l->params.add(*l->app, "trials", gt.trials, "Number of trials (>= 100)");
    l->params.add(*l->app, "n", gt.n, "Sample size (0: source default)");
    l->params.add(*l->app, "gamma", gt.gamma, "Failure probability (0: source default)");
    l->params.add(*l->app, "n_prompts", gt.n_prompts, "Prompts (arbitrary-facts)");
    l->params.add(*l->app, "response_set_size", gt.response_set_size,
                  "Responses per prompt (arbitrary-facts)");
    l->params.add(*l->app, "alpha", gt.alpha, "Answer probability (arbitrary-facts)");
    l->params.add(*l->app, "items", gt.items, "Support size (zipf)");
    l->params.add(*l->app, "exponent", gt.exponent, "Zipf exponent");
    l->action = [&](RunContext& ctx) { return cmd_verify_good_turing(ctx, gt); };
  }

  MultipleChoiceParams mc;
  {
    Leaf* l = leaf(verify, "multiple-choice", "Threshold sweep on pure multiple-choice instances");
    l->params.add(*l->app, "instances", mc.instances, "Number of random instances");
    l->action = [&](RunContext& ctx) { return cmd_verify_multiple_choice(ctx, mc); };
  }

  DerivativeParams dv;
  {
    Leaf* l = leaf(verify, "derivative", "δ against the cross-entropy rescaling derivative");
    l->params.add(*l->app, "instances", dv.instances, "Number of random instances");
    l->action = [&](RunContext& ctx) { return cmd_verify_derivative(ctx, dv); };
  }

  MisalignedParams ms;
  {
    Leaf* l = leaf(verify, "misaligned", "Binary grading never rewards abstention");
    l->params.add(*l->app, "trials", ms.trials, "Number of random belief profiles");
    l->action = [&](RunContext& ctx) { return cmd_verify_misaligned(ctx, ms); };
  }

  CryptoParams cr;
  {
    Leaf* l = leaf(verify, "crypto", "Decryption-error bound in a one-time-pad world");
    l->params.add(*l->app, "message_count", cr.message_count,
                  "Responses per prompt: plaintexts plus abstain");
    l->action = [&](RunContext& ctx) { return cmd_verify_crypto(ctx, cr); };
  }

  TrigramParams tg;
  {
    Leaf* l = leaf(demo, "trigram", "Two-prompt trigram universe");
    l->params.add(*l->app, "models", tg.models, "Grid size for p̂(r1 | c)");
    l->action = [&](RunContext& ctx) { return cmd_demo_trigram(ctx, tg); };
  }

  GradeParams gr;
  {
    Leaf* l = leaf(&app, "grade", "Score JSONL records under confidence targets");
    l->params.add(*l->app, "input", gr.input, "JSONL records");
    l->params.add(*l->app, "targets", gr.targets, "Comma-separated targets")->delimiter(',');
    l->action = [&](RunContext& ctx) { return cmd_grade(ctx, gr); };
  }

  AuditParams au;
  {
    Leaf* l = leaf(&app, "audit", "Behavioral-calibration audit across targets");
    l->params.add(*l->app, "runs", au.runs, "t:path, one per target (repeatable)");
    l->params.add(*l->app, "slack_failure_probability", au.slack_failure_probability,
                  "Hoeffding failure probability for the finite-sample slack");
    l->params.add_flag(*l->app, "no_slack", au.no_slack, "Disable the finite-sample slack");
    l->action = [&](RunContext& ctx) { return cmd_audit(ctx, au); };
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kConfigError;
  }

  Leaf* chosen = nullptr;
  for (auto& l : leaves) {
    if (l->app->parsed()) chosen = l.get();
  }
  if (chosen == nullptr) {
    err << "error: no command given\n";
    return kConfigError;
  }

  try {
    if (!global.config.empty()) apply_config(load_config_file(global.config), global_params,
                                             chosen->params);
    nlohmann::json echo = global_params.echo();
    const nlohmann::json own = chosen->params.echo();
    for (const auto& [k, v] : own.items()) echo[k] = v;
    echo.erase("format");
    echo.erase("out_dir");
    echo.erase("serial");
    RunContext ctx{global, chosen->name, echo, out, err};
    return chosen->action(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace halluc::cli
