#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "halluc/numeric.hpp"
#include "json.hpp"

namespace halluc::cli {

enum ExitCode : int { kPass = 0, kViolation = 1, kConfigError = 2 };

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string config;
  std::string out_dir = "halluc-out";
  std::string format = "json";
  bool serial = false;

  Execution execution() const { return serial ? Execution::serial : Execution::parallel; }
};

/// Writes artifacts into the output directory, remembering their hashes for
/// the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string out_dir);
  void write(const std::string& name, const std::string& content);
  void write_manifest(const std::string& command, std::uint64_t seed,
                      const nlohmann::json& config, int exit_code);

 private:
  std::string dir_;
  nlohmann::json hashes_ = nlohmann::json::object();
};

struct RunContext {
  const GlobalOptions& global;
  std::string command;
  nlohmann::json config;  // echo of every effective parameter
  std::ostream& out;
  std::ostream& err;
};

struct SimulateParams {
  std::size_t n_prompts = 5'000'000;
  std::uint32_t response_set_size = 366;
  double alpha = 1.0;
  std::size_t n = 1'000'000;
  std::size_t trials = 300;
  std::string learner = "memorizer";
  bool check_delta_z = false;
  bool save_world = false;  // world.json and training.json of trial 0
};

struct MainBoundParams {
  std::size_t instances = 1000;
};

struct GoodTuringParams {
  std::string source = "arbitrary-facts";
  std::size_t trials = 1000;
  std::size_t n = 0;       // 0: 10^6 for arbitrary-facts, 10^5 for zipf
  double gamma = 0.0;      // 0: 0.01 for arbitrary-facts, 0.05 for zipf
  std::size_t n_prompts = 5'000'000;
  std::uint32_t response_set_size = 366;
  double alpha = 0.8;
  std::size_t items = 10'000;
  double exponent = 1.1;
};

struct MultipleChoiceParams {
  std::size_t instances = 500;
};

struct DerivativeParams {
  std::size_t instances = 100;
};

struct MisalignedParams {
  std::size_t trials = 10'000;
};

struct CryptoParams {
  std::uint32_t message_count = 101;
};

struct TrigramParams {
  std::size_t models = 11;  // p̂(r1 | c) on an even grid over [0, 1]
};

struct GradeParams {
  std::string input;
  std::vector<double> targets{0.0, 0.5, 0.75, 0.9};
};

struct AuditParams {
  std::vector<std::string> runs;  // "t:path"
  double slack_failure_probability = 0.05;
  bool no_slack = false;
};

int cmd_simulate_arbitrary_facts(RunContext& ctx, const SimulateParams& p);
int cmd_verify_main_bound(RunContext& ctx, const MainBoundParams& p);
int cmd_verify_good_turing(RunContext& ctx, const GoodTuringParams& p);
int cmd_verify_multiple_choice(RunContext& ctx, const MultipleChoiceParams& p);
int cmd_verify_derivative(RunContext& ctx, const DerivativeParams& p);
int cmd_verify_misaligned(RunContext& ctx, const MisalignedParams& p);
int cmd_verify_crypto(RunContext& ctx, const CryptoParams& p);
int cmd_demo_trigram(RunContext& ctx, const TrigramParams& p);
int cmd_grade(RunContext& ctx, const GradeParams& p);
int cmd_audit(RunContext& ctx, const AuditParams& p);

}  // namespace halluc::cli
