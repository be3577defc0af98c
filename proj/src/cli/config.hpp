#pragma once

// Named parameters shared between command-line flags and JSON config files.
// A parameter keyed "n_prompts" is the flag --n-prompts and the config key
// "n_prompts"; flags given on the command line win over file values.

#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "halluc/world.hpp"
#include "json.hpp"

namespace halluc::cli {

class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string field, const std::string& message);
  std::string field;
};

class ParamSet {
 public:
  template <class T>
  CLI::Option* add(CLI::App& app, const std::string& key, T& var, const std::string& help) {
    std::string flag = "--" + key;
    for (char& ch : flag) {
      if (ch == '_') ch = '-';
    }
    CLI::Option* opt = app.add_option(flag, var, help)->capture_default_str();
    params_.push_back(Param{
        key, opt,
        [&var, key](const nlohmann::json& j) {
          try {
            var = j.get<T>();
          } catch (const nlohmann::json::exception&) {
            throw ConfigError(key, "has the wrong type");
          }
        },
        [&var]() { return nlohmann::json(var); }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App& app, const std::string& key, bool& var, const std::string& help);

  bool knows(const std::string& key) const;
  /// Assigns file values for keys whose flag was not given.
  void apply(const nlohmann::json& file) const;
  /// Current values of every parameter, keyed by name.
  nlohmann::json echo() const;

 private:
  struct Param {
    std::string key;
    CLI::Option* option;
    std::function<void(const nlohmann::json&)> assign;
    std::function<nlohmann::json()> value;
  };
  std::vector<Param> params_;
};

/// Reads a config file. It must be a JSON object with "schema_version": 1.
nlohmann::json load_config_file(const std::string& path);

/// Applies `file` to the global and command parameter sets; any key known to
/// neither set is a ConfigError naming it.
void apply_config(const nlohmann::json& file, const ParamSet& global, const ParamSet& command);

}  // namespace halluc::cli
