#include "cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "cli/config.hpp"
#include "halluc/estimators.hpp"
#include "halluc/grading.hpp"
#include "halluc/instances.hpp"
#include "halluc/learners.hpp"
#include "halluc/reduction.hpp"
#include "halluc/rng.hpp"
#include "halluc/serialize.hpp"

namespace halluc::cli {

using nlohmann::json;

namespace {

std::string fmt(double x) { return format_double(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "true" : "false"; }
std::string fmt(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

json opt_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// Prints the summary or the main table, then writes the manifest.
int finish(RunContext& ctx, ArtifactWriter& w, const json& summary, const std::string& csv,
           int code) {
  if (ctx.global.format == "csv") {
    ctx.out << csv;
  } else {
    ctx.out << summary.dump(2) << '\n';
  }
  w.write_manifest(ctx.command, ctx.global.seed, ctx.config, code);
  return code;
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

ArtifactWriter::ArtifactWriter(std::string out_dir) : dir_(std::move(out_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("out_dir", "cannot create '" + dir_ + "': " + ec.message());
}

void ArtifactWriter::write(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::path(dir_) / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw ConfigError("out_dir", "cannot write '" + path.string() + "'");
  hashes_[name] = "fnv1a64:" + hex64(fnv1a64(content));
}

void ArtifactWriter::write_manifest(const std::string& command, std::uint64_t seed,
                                    const json& config, int exit_code) {
  const json m = {{"schema", "halluc.manifest"},
                  {"schema_version", kSchemaVersion},
                  {"command", command},
                  {"seed", seed},
                  {"config", config},
                  {"artifacts", hashes_},
                  {"exit_code", exit_code}};
  const auto path = std::filesystem::path(dir_) / "manifest.json";
  std::ofstream f(path, std::ios::binary);
  f << m.dump(2) << '\n';
  if (!f) throw ConfigError("out_dir", "cannot write '" + path.string() + "'");
}

int cmd_simulate_arbitrary_facts(RunContext& ctx, const SimulateParams& p) {
  require(p.n_prompts >= 1 && p.n_prompts <= kMaxPrompts, "n_prompts",
          "must lie in [1, " + std::to_string(kMaxPrompts) + "]");
  require(p.response_set_size >= 3, "response_set_size", "must be at least 3");
  require(p.alpha >= 0.0 && p.alpha <= 1.0, "alpha", "must lie in [0, 1]");
  require(p.n >= 1, "n", "must be positive");
  require(p.trials >= 100, "trials", "must be at least 100");
  LearnerKind kind;
  try {
    kind = parse_learner(p.learner);
  } catch (const InvalidInput& e) {
    throw ConfigError("learner", e.what());
  }

  ArbitraryFactsTrialConfig cfg;
  cfg.n_prompts = p.n_prompts;
  cfg.response_set_size = p.response_set_size;
  cfg.alpha = p.alpha;
  cfg.n = p.n;
  cfg.trials = p.trials;
  cfg.seed = ctx.global.seed;
  cfg.check_delta_z = p.check_delta_z;
  const auto outcomes = run_arbitrary_facts_trials(cfg, learner_for(kind), ctx.global.execution());
  const TrialSummary s = summarize(outcomes);

  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"trial", "seed", "sr", "err", "delta", "lower_bound_rhs", "upper_bound_rhs",
                  "lower_holds", "upper_holds", "lower_vacuous", "max_delta_z"});
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    table.row({fmt(i), std::to_string(o.seed), fmt(o.sr), fmt(o.err), fmt(o.delta),
               fmt(o.lower_bound_rhs), fmt(o.upper_bound_rhs), fmt(o.lower_holds),
               fmt(o.upper_holds), fmt(o.lower_vacuous), fmt(o.max_delta_z)});
  }
  const std::string csv = table.str();
  w.write("trials.csv", csv);

  if (p.save_world) {
    const std::uint64_t ts = derive_seed(ctx.global.seed, 0);
    ArbitraryFactsSpec spec;
    spec.n_prompts = p.n_prompts;
    spec.response_set_size = p.response_set_size;
    spec.alpha = p.alpha;
    spec.seed = derive_seed(ts, 0);
    const World world = build_arbitrary_facts(spec);
    w.write("world.json", to_json(world).dump() + "\n");
    w.write("training.json", to_json(sample_training(world, p.n, derive_seed(ts, 1))).dump() + "\n");
  }

  const bool memorizer = kind == LearnerKind::memorizer;
  const bool delta_z_ok = !(memorizer && p.check_delta_z) || s.max_delta_z <= kProbTolerance;
  const bool pass = s.lower_pass && (!memorizer || s.upper_pass) && delta_z_ok;
  json warnings = json::array();
  if (s.vacuous_lower > 0) {
    const double dn = static_cast<double>(p.n);
    warnings.push_back("lower bound vacuous: (35 + 6 ln N)/sqrt(N) = " +
                       fmt((35.0 + 6.0 * std::log(dn)) / std::sqrt(dn)) + " > 1");
    ctx.err << "warning: " << warnings.back().get<std::string>() << '\n';
  }
  const json summary = {{"command", ctx.command},
                        {"config", ctx.config},
                        {"learner", p.learner},
                        {"trials", s.trials},
                        {"mean_sr", s.mean_sr},
                        {"mean_err", s.mean_err},
                        {"min_lower_bound_rhs", s.min_lower_rhs},
                        {"lower_violations", s.lower_violations},
                        {"upper_violations", s.upper_violations},
                        {"allowed_violations", s.allowed_violations},
                        {"lower_pass", s.lower_pass},
                        {"upper_pass", s.upper_pass},
                        {"upper_bound_applies", memorizer},
                        {"max_delta_z", s.max_delta_z},
                        {"vacuous_lower_trials", s.vacuous_lower},
                        {"warnings", warnings},
                        {"pass", pass}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, pass ? kPass : kViolation);
}

int cmd_verify_main_bound(RunContext& ctx, const MainBoundParams& p) {
  require(p.instances >= 1, "instances", "must be positive");
  const auto rows = verify_main_bound(p.instances, ctx.global.seed, ctx.global.execution());
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"instance", "seed", "err", "cerr", "delta", "ratio_term", "rhs", "holds"});
  std::size_t violations = 0;
  double min_slack = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const BoundReport& r = rows[i].report;
    violations += r.holds ? 0 : 1;
    const double slack = r.lhs - r.rhs;
    if (i == 0 || slack < min_slack) min_slack = slack;
    table.row({fmt(i), std::to_string(rows[i].seed), fmt(r.err), fmt(r.cerr), fmt(r.delta),
               fmt(r.ratio_term), fmt(r.rhs), fmt(r.holds)});
  }
  const std::string csv = table.str();
  w.write("main_bound.csv", csv);
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"instances", rows.size()}, {"violations", violations},
                        {"min_margin", min_slack}, {"pass", violations == 0}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, violations == 0 ? kPass : kViolation);
}

int cmd_verify_good_turing(RunContext& ctx, const GoodTuringParams& p) {
  require(p.trials >= 100, "trials", "must be at least 100");
  ConcentrationReport rep;
  if (p.source == "arbitrary-facts") {
    MissingMassConfig cfg;
    cfg.n_prompts = p.n_prompts;
    cfg.response_set_size = p.response_set_size;
    cfg.alpha = p.alpha;
    cfg.n = p.n == 0 ? 1'000'000 : p.n;
    cfg.gamma = p.gamma == 0.0 ? 0.01 : p.gamma;
    cfg.trials = p.trials;
    cfg.seed = ctx.global.seed;
    require(cfg.n_prompts >= 1 && cfg.n_prompts <= kMaxPrompts, "n_prompts", "out of range");
    require(cfg.response_set_size >= 2, "response_set_size", "must be at least 2");
    require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "alpha", "must lie in [0, 1]");
    require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma", "must lie in (0, 1)");
    rep = verify_mm_concentration(cfg, ctx.global.execution());
  } else if (p.source == "zipf") {
    ZipfConfig cfg;
    cfg.items = p.items;
    cfg.exponent = p.exponent;
    cfg.n = p.n == 0 ? 100'000 : p.n;
    cfg.gamma = p.gamma == 0.0 ? 0.05 : p.gamma;
    cfg.trials = p.trials;
    cfg.seed = ctx.global.seed;
    require(cfg.items >= 1, "items", "must be positive");
    require(cfg.exponent > 0.0, "exponent", "must be positive");
    require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma", "must lie in (0, 1)");
    rep = verify_gt_concentration(cfg, ctx.global.execution());
  } else {
    throw ConfigError("source", "must be arbitrary-facts or zipf");
  }
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"trial", "seed", "estimate", "truth", "deviation", "violated"});
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const auto& s = rep.samples[i];
    table.row({fmt(i), std::to_string(s.seed), fmt(s.estimate), fmt(s.truth), fmt(s.deviation),
               fmt(s.violated)});
  }
  const std::string csv = table.str();
  w.write("good_turing.csv", csv);
  CsvTable one({"trials", "gamma", "bound", "violations", "allowed_violations", "pass"});
  one.row({fmt(rep.trials), fmt(rep.gamma), fmt(rep.bound), fmt(rep.violations),
           fmt(rep.allowed_violations), fmt(rep.pass)});
  w.write("good_turing_summary.csv", one.str());
  const json summary = {{"command", ctx.command},
                        {"config", ctx.config},
                        {"source", p.source},
                        {"trials", rep.trials},
                        {"gamma", rep.gamma},
                        {"bound", rep.bound},
                        {"violations", rep.violations},
                        {"empirical_failure_rate", rep.empirical_failure_rate},
                        {"allowed_violations", rep.allowed_violations},
                        {"vacuous", rep.vacuous},
                        {"pass", rep.pass}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, rep.pass ? kPass : kViolation);
}

int cmd_verify_multiple_choice(RunContext& ctx, const MultipleChoiceParams& p) {
  require(p.instances >= 1, "instances", "must be positive");
  const auto rows = verify_multiple_choice(p.instances, ctx.global.seed, ctx.global.execution());
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"instance", "seed", "err", "choices", "best_t", "cerr_at_best_t",
                  "expected_cerr", "factor", "holds", "expectation_identity_gap"});
  std::size_t violations = 0;
  double min_gap = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].report;
    const bool ok = r.holds && r.expectation_identity_gap >= -kCompareTolerance;
    violations += ok ? 0 : 1;
    if (i == 0 || r.expectation_identity_gap < min_gap) min_gap = r.expectation_identity_gap;
    table.row({fmt(i), std::to_string(rows[i].seed), fmt(r.err), fmt(std::size_t{r.choices}),
               fmt(r.best_t), fmt(r.cerr_at_best_t), fmt(r.expected_cerr), fmt(r.factor),
               fmt(r.holds), fmt(r.expectation_identity_gap)});
  }
  const std::string csv = table.str();
  w.write("multiple_choice.csv", csv);
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"instances", rows.size()}, {"violations", violations},
                        {"min_expectation_identity_gap", min_gap}, {"pass", violations == 0}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, violations == 0 ? kPass : kViolation);
}

int cmd_verify_derivative(RunContext& ctx, const DerivativeParams& p) {
  require(p.instances >= 1, "instances", "must be positive");
  const auto rows = verify_delta_derivative(p.instances, ctx.global.seed, ctx.global.execution());
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"instance", "seed", "threshold", "delta", "finite_difference",
                  "analytic_derivative", "agree"});
  std::size_t violations = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].report;
    violations += r.agree ? 0 : 1;
    table.row({fmt(i), std::to_string(rows[i].seed), fmt(rows[i].threshold), fmt(r.delta),
               fmt(r.finite_difference), fmt(r.analytic_derivative), fmt(r.agree)});
  }
  const std::string csv = table.str();
  w.write("derivative.csv", csv);
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"instances", rows.size()}, {"violations", violations},
                        {"pass", violations == 0}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, violations == 0 ? kPass : kViolation);
}

int cmd_verify_misaligned(RunContext& ctx, const MisalignedParams& p) {
  require(p.trials >= 1, "trials", "must be positive");
  const MisalignedReport rep = verify_observation_misaligned(p.trials, ctx.global.seed);
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"trial", "seed", "candidates", "confidence", "answered"});
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    table.row({fmt(i), std::to_string(r.seed), fmt(r.candidates), fmt(r.confidence),
               fmt(r.answered)});
  }
  const std::string csv = table.str();
  w.write("misaligned.csv", csv);
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"trials", rep.trials}, {"violations", rep.violations},
                        {"pass", rep.pass}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, rep.pass ? kPass : kViolation);
}

int cmd_verify_crypto(RunContext& ctx, const CryptoParams& p) {
  require(p.message_count >= 3, "message_count", "must be at least 3");
  const CryptoWorld cw = crypto_world(p.message_count, ctx.global.seed);
  const DecryptionCheck d = check_decryption_bound(cw, cw.uniform_baseline);
  std::vector<double> ts = attained_probabilities(cw.uniform_baseline);
  for (int i = 0; i <= 100; ++i) ts.push_back(i / 100.0);
  const auto deltas = delta_profile(cw.uniform_baseline, cw.p, cw.world.mu, ts);
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable sweep({"threshold", "delta"});
  double max_delta = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sweep.row({fmt(ts[i]), fmt(deltas[i])});
    max_delta = std::max(max_delta, deltas[i]);
  }
  w.write("crypto_thresholds.csv", sweep.str());
  CsvTable table({"message_count", "err", "cerr", "beta", "delta", "bound", "holds",
                  "max_delta_any_threshold"});
  table.row({fmt(std::size_t{p.message_count}), fmt(d.err), fmt(d.cerr), fmt(d.beta),
             fmt(d.delta), fmt(d.bound), fmt(d.holds), fmt(max_delta)});
  const std::string csv = table.str();
  w.write("crypto.csv", csv);
  const bool pass = d.holds && max_delta <= kProbTolerance;
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"err", d.err},           {"cerr", d.cerr},
                        {"beta", d.beta},         {"delta", d.delta},
                        {"bound", d.bound},       {"holds", d.holds},
                        {"max_delta_any_threshold", max_delta},
                        {"pass", pass}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, pass ? kPass : kViolation);
}

int cmd_demo_trigram(RunContext& ctx, const TrigramParams& p) {
  require(p.models >= 2, "models", "must be at least 2");
  const TrigramUniverse u = trigram_world();
  const IIVMixture mixture(u.p, u.partition, u.mu);
  const FamilyOptimum fo = family_optimum(u.trigram_family, mixture);
  const double full_context = misclassification(
      [&](PromptId c, ResponseId r) { return u.partition.is_valid(c, r); }, mixture);
  // Multiple choice with C = 2 answers per prompt: err >= 2 (1 - 1/C) opt(G).
  const double bound = 2.0 * (1.0 - 1.0 / 2.0) * fo.opt;
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable fam({"member", "misclassification"});
  for (std::size_t m = 0; m < u.trigram_family.size(); ++m) {
    fam.row({u.trigram_family.name(m), fmt(fo.per_member[m])});
  }
  w.write("trigram_family.csv", fam.str());
  CsvTable table({"p_r1", "err", "bound", "holds"});
  bool all_hold = true;
  double min_err = 1.0;
  for (std::size_t i = 0; i < p.models; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(p.models - 1);
    const double err = error_rate(trigram_model(a), u.partition, u.mu);
    const bool holds = err >= 0.5 - kCompareTolerance && err >= bound - kCompareTolerance;
    all_hold = all_hold && holds;
    min_err = std::min(min_err, err);
    table.row({fmt(a), fmt(err), fmt(bound), fmt(holds)});
  }
  const std::string csv = table.str();
  w.write("trigram_models.csv", csv);
  const bool opt_exact = fo.opt == 0.5;
  const bool pass = opt_exact && all_hold && full_context == 0.0;
  const json summary = {{"command", ctx.command},    {"config", ctx.config},
                        {"opt", fo.opt},             {"opt_is_one_half", opt_exact},
                        {"bound", bound},            {"min_model_err", min_err},
                        {"full_context_cerr", full_context}, {"pass", pass}};
  w.write("summary.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, pass ? kPass : kViolation);
}

namespace {

CsvTable audit_table(const AuditReport& a) {
  CsvTable t({"target", "n_records", "n_answered", "answered_fraction",
              "accuracy_among_answered", "slack", "calibrated_at_t", "vacuous", "undefined",
              "monotone_ok"});
  for (const auto& r : a.rows) {
    t.row({fmt(r.target), fmt(r.n_records), fmt(r.n_answered), fmt(r.answered_fraction),
           fmt(r.accuracy_among_answered), fmt(r.slack), fmt(r.calibrated_at_t),
           fmt(r.vacuous), fmt(r.undefined), fmt(r.monotone_ok)});
  }
  return t;
}

json audit_json(const AuditReport& a) {
  json rows = json::array();
  for (const auto& r : a.rows) {
    rows.push_back({{"target", r.target},
                    {"n_records", r.n_records},
                    {"n_answered", r.n_answered},
                    {"answered_fraction", opt_json(r.answered_fraction)},
                    {"accuracy_among_answered", opt_json(r.accuracy_among_answered)},
                    {"slack", r.slack},
                    {"calibrated_at_t", r.calibrated_at_t},
                    {"vacuous", r.vacuous},
                    {"undefined", r.undefined},
                    {"monotone_ok", r.monotone_ok}});
  }
  return {{"rows", rows}, {"monotone", a.monotone}, {"all_calibrated", a.all_calibrated}};
}

std::vector<EvalRecord> read_records(const std::string& path, const char* field) {
  try {
    return parse_records_file(path);
  } catch (const RecordError& e) {
    throw ConfigError(field, std::string(path) + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

int cmd_grade(RunContext& ctx, const GradeParams& p) {
  require(!p.input.empty(), "input", "is required");
  require(!p.targets.empty(), "targets", "must list at least one target");
  std::vector<GraderConfig> graders;
  for (double t : p.targets) {
    require(t >= 0.0 && t < 1.0, "targets", "every target must lie in [0, 1)");
    graders.push_back(GraderConfig::with_target(t));
  }
  const auto records = read_records(p.input, "input");
  ArtifactWriter w(ctx.global.out_dir);
  CsvTable table({"target", "penalty", "n_items", "n_abstained", "n_correct", "n_wrong",
                  "total_score", "mean_score", "accuracy_among_answered"});
  json reports = json::array();
  std::map<double, std::vector<EvalRecord>> runs;
  for (const auto& g : graders) {
    const ScoreReport s = score(records, g);
    table.row({fmt(s.target), fmt(s.penalty), fmt(s.n_items), fmt(s.n_abstained),
               fmt(s.n_correct), fmt(s.n_wrong), fmt(s.total_score), fmt(s.mean_score),
               fmt(s.accuracy_among_answered)});
    reports.push_back({{"target", s.target},
                       {"penalty", s.penalty},
                       {"n_items", s.n_items},
                       {"n_abstained", s.n_abstained},
                       {"n_correct", s.n_correct},
                       {"n_wrong", s.n_wrong},
                       {"total_score", s.total_score},
                       {"mean_score", s.mean_score},
                       {"accuracy_among_answered", opt_json(s.accuracy_among_answered)},
                       {"accuracy_defined", s.accuracy_among_answered.has_value()}});
    runs[g.target()] = records;
  }
  const std::string csv = table.str();
  w.write("scores.csv", csv);
  const AuditReport audit = behavioral_calibration_audit(runs);
  w.write("audit.csv", audit_table(audit).str());
  const json summary = {{"command", ctx.command}, {"config", ctx.config},
                        {"reports", reports}, {"audit", audit_json(audit)}};
  w.write("scores.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, kPass);
}

int cmd_audit(RunContext& ctx, const AuditParams& p) {
  require(!p.runs.empty(), "runs", "at least one --runs t:path is required");
  require(p.slack_failure_probability > 0.0 && p.slack_failure_probability < 1.0,
          "slack_failure_probability", "must lie in (0, 1)");
  std::map<double, std::vector<EvalRecord>> runs;
  for (const auto& spec : p.runs) {
    const auto colon = spec.find(':');
    require(colon != std::string::npos && colon > 0, "runs", "expected t:path, got '" + spec + "'");
    double t = 0.0;
    std::size_t used = 0;
    try {
      t = std::stod(spec.substr(0, colon), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == colon, "runs", "bad target in '" + spec + "'");
    require(t >= 0.0 && t < 1.0, "runs", "target must lie in [0, 1) in '" + spec + "'");
    require(runs.count(t) == 0, "runs", "duplicate target in '" + spec + "'");
    runs[t] = read_records(spec.substr(colon + 1), "runs");
  }
  AuditConfig cfg;
  cfg.slack_failure_probability = p.slack_failure_probability;
  cfg.finite_sample_slack = !p.no_slack;
  const AuditReport audit = behavioral_calibration_audit(runs, cfg);
  ArtifactWriter w(ctx.global.out_dir);
  const std::string csv = audit_table(audit).str();
  w.write("audit.csv", csv);
  const bool pass = audit.all_calibrated && audit.monotone;
  json summary = {{"command", ctx.command}, {"config", ctx.config}, {"pass", pass}};
  summary["audit"] = audit_json(audit);
  w.write("audit.json", summary.dump(2) + "\n");
  return finish(ctx, w, summary, csv, pass ? kPass : kViolation);
}

}  // namespace halluc::cli
