#include "cli/config.hpp"

#include <fstream>

#include "halluc/serialize.hpp"

namespace halluc::cli {

using nlohmann::json;

ConfigError::ConfigError(std::string name, const std::string& message)
    : InvalidInput("field '" + name + "': " + message), field(std::move(name)) {}

CLI::Option* ParamSet::add_flag(CLI::App& app, const std::string& key, bool& var,
                                const std::string& help) {
  std::string flag = "--" + key;
  for (char& ch : flag) {
    if (ch == '_') ch = '-';
  }
  CLI::Option* opt = app.add_flag(flag, var, help);
  params_.push_back(Param{key, opt,
                          [&var, key](const json& j) {
                            if (!j.is_boolean()) throw ConfigError(key, "must be a boolean");
                            var = j.get<bool>();
                          },
                          [&var]() { return json(var); }});
  return opt;
}

bool ParamSet::knows(const std::string& key) const {
  for (const auto& p : params_) {
    if (p.key == key) return true;
  }
  return false;
}

void ParamSet::apply(const json& file) const {
  for (const auto& p : params_) {
    const auto it = file.find(p.key);
    if (it == file.end() || p.option->count() > 0) continue;
    p.assign(*it);
  }
}

json ParamSet::echo() const {
  json j = json::object();
  for (const auto& p : params_) j[p.key] = p.value();
  return j;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  const auto v = j.find("schema_version");
  if (v == j.end()) throw ConfigError("schema_version", "is required");
  if (!v->is_number_integer() || v->get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported value (expected 1)");
  }
  return j;
}

void apply_config(const json& file, const ParamSet& global, const ParamSet& command) {
  for (const auto& [key, value] : file.items()) {
    if (key == "schema_version") continue;
    if (!global.knows(key) && !command.knows(key)) throw ConfigError(key, "unknown field");
  }
  global.apply(file);
  command.apply(file);
}

}  // namespace halluc::cli
