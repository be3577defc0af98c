#pragma once

// JSON persistence for worlds and training sets, CSV emission and artifact
// hashing.
//
// World schema ("halluc.world", version 1):
//   {"schema": "halluc.world", "schema_version": 1, "abstain_token": 0,
//    "prompts": [{"id": "c0", "mu": 0.5, "responses": 366,
//                 "alpha": 1.0, "answer": 17}, ...]}
// Training schema ("halluc.training", version 1):
//   {"schema": "halluc.training", "schema_version": 1,
//    "pairs": [["c0", 17], ["c4", 0], ...]}
// Prompt ids are "c" followed by the decimal prompt index.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "halluc/world.hpp"
#include "json.hpp"

namespace halluc {

inline constexpr int kSchemaVersion = 1;

std::string prompt_name(PromptId c);
PromptId parse_prompt_name(std::string_view name);

nlohmann::json to_json(const World& world);
World world_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainingSet& training);
TrainingSet training_from_json(const nlohmann::json& j);

/// Shortest decimal that parses back to the same double; NaN and infinities
/// as "nan", "inf", "-inf".
std::string format_double(double x);

/// Minimal CSV table: header row plus data rows, '\n' line endings. Cells
/// containing a comma, quote or newline are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t x);

}  // namespace halluc
