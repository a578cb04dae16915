#pragma once

#include "glmfunk/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace glmfunk::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Rows keyed by integer unit ids (node indices of the full unit graph).
struct Design {
  std::vector<Index> units;
  std::vector<std::string> feature_names;
  Matrix X;
};

struct Outcomes {
  std::vector<Index> units;
  Vector y;
  Vector offsets;
  std::vector<std::string> split;  // empty when the file has no split column
  bool has_y = false;
};

// `unit_id,<feature>...`
Design read_design(const fs::path& path);
// `unit_id[,y][,offset][,split]`, columns identified by header names.
Outcomes read_outcomes(const fs::path& path, bool require_y);

// Outcome rows reordered to follow `units`; every unit must be present.
Outcomes align_outcomes(const Outcomes& o, const std::vector<Index>& units, const fs::path& source);

std::string format_double(double v);

// Writes rows of already formatted cells.
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_json(const fs::path& path, const json& value);
json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Two-column numeric CSV (`key,value` with header) as written by write_csv.
std::vector<std::pair<std::string, double>> read_key_values(const fs::path& path);

}  // namespace glmfunk::cli
