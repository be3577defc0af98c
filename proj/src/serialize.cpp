#include "halluc/serialize.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace halluc {

using nlohmann::json;

namespace {

void require_schema(const json& j, const char* schema) {
  if (!j.is_object()) throw InvalidInput(std::string(schema) + ": expected a JSON object");
  const auto s = j.find("schema");
  if (s == j.end() || !s->is_string() || s->get<std::string>() != schema) {
    throw InvalidInput(std::string("expected schema '") + schema + "'");
  }
  const auto v = j.find("schema_version");
  if (v == j.end() || !v->is_number_integer() || v->get<int>() != kSchemaVersion) {
    throw InvalidInput(std::string(schema) + ": unsupported schema_version");
  }
}

template <class T>
T field(const json& obj, const char* name, const std::string& where) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw InvalidInput(where + ": missing field '" + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(where + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace

std::string prompt_name(PromptId c) { return "c" + std::to_string(c); }

PromptId parse_prompt_name(std::string_view name) {
  if (name.size() < 2 || name[0] != 'c') {
    throw InvalidInput("bad prompt id '" + std::string(name) + "'");
  }
  PromptId c = 0;
  const char* first = name.data() + 1;
  const char* last = name.data() + name.size();
  const auto [ptr, ec] = std::from_chars(first, last, c);
  if (ec != std::errc() || ptr != last || (name.size() > 2 && name[1] == '0')) {
    throw InvalidInput("bad prompt id '" + std::string(name) + "'");
  }
  return c;
}

json to_json(const World& world) {
  json prompts = json::array();
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    prompts.push_back({{"id", prompt_name(static_cast<PromptId>(c))},
                       {"mu", world.mu[c]},
                       {"responses", world.response_count[c]},
                       {"alpha", world.alpha[c]},
                       {"answer", world.answer[c]}});
  }
  return {{"schema", "halluc.world"},
          {"schema_version", kSchemaVersion},
          {"abstain_token", world.abstain_token},
          {"prompts", std::move(prompts)}};
}

World world_from_json(const json& j) {
  require_schema(j, "halluc.world");
  World w;
  w.abstain_token = field<ResponseId>(j, "abstain_token", "world");
  const auto it = j.find("prompts");
  if (it == j.end() || !it->is_array()) throw InvalidInput("world: missing array 'prompts'");
  std::size_t index = 0;
  for (const auto& p : *it) {
    const std::string where = "world prompt " + std::to_string(index);
    if (!p.is_object()) throw InvalidInput(where + ": expected an object");
    if (parse_prompt_name(field<std::string>(p, "id", where)) != index) {
      throw InvalidInput(where + ": prompt ids must be c0, c1, ... in order");
    }
    w.mu.push_back(field<double>(p, "mu", where));
    w.response_count.push_back(field<std::uint32_t>(p, "responses", where));
    w.alpha.push_back(field<double>(p, "alpha", where));
    w.answer.push_back(field<ResponseId>(p, "answer", where));
    ++index;
  }
  w.validate();
  return w;
}

json to_json(const TrainingSet& training) {
  json pairs = json::array();
  for (const auto& pair : training.pairs) {
    pairs.push_back(json::array({prompt_name(pair.prompt), pair.response}));
  }
  return {{"schema", "halluc.training"},
          {"schema_version", kSchemaVersion},
          {"pairs", std::move(pairs)}};
}

TrainingSet training_from_json(const json& j) {
  require_schema(j, "halluc.training");
  const auto it = j.find("pairs");
  if (it == j.end() || !it->is_array()) throw InvalidInput("training: missing array 'pairs'");
  TrainingSet t;
  t.pairs.reserve(it->size());
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& p = (*it)[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_number_unsigned()) {
      throw InvalidInput("training pair " + std::to_string(i) + ": expected [\"c<i>\", response]");
    }
    t.pairs.push_back({parse_prompt_name(p[0].get<std::string>()), p[1].get<ResponseId>()});
  }
  return t;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::logic_error("CSV row width mismatch");
  rows_.push_back(std::move(cells));
  return *this;
}

namespace {

void append_cell(std::string& out, const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) {
    out += cell;
    return;
  }
  out += '"';
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
}

void append_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    append_cell(out, cells[i]);
  }
  out += '\n';
}

}  // namespace

std::string CsvTable::str() const {
  std::string out;
  append_line(out, header_);
  for (const auto& r : rows_) append_line(out, r);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace halluc
