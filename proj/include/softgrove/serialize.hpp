#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "softgrove/data.hpp"
#include "softgrove/tree.hpp"

namespace softgrove {

using Json = nlohmann::ordered_json;

// {kind, input_dim, output_dim, task, root}; each soft node is
// {gamma, w, v?, rho, left?, right?}. Hardened trees add "hard_threshold".
Json to_json(const SoftTree& tree);
SoftTree soft_tree_from_json(const Json& j);

// Hard trees use kind "hard"; internal nodes are
// {attr, threshold, rho, left, right}, leaves {rho}.
Json to_json(const HardTree& tree);
HardTree hard_tree_from_json(const Json& j);

// A trained model plus what is needed to apply it to raw CSV data.
struct ModelFile {
  std::variant<SoftTree, HardTree> model;
  std::optional<NormalizationStats> normalization;
  std::vector<std::string> classes;

  Task task() const;
  int input_dim() const;
  std::size_t size() const;
};

Json to_json(const ModelFile& file);
ModelFile model_from_json(const Json& j);

std::string dump_model(const ModelFile& file);
ModelFile parse_model(std::string_view text);
void save_model(const ModelFile& file, const std::filesystem::path& path);
// Throws DataError when the file is missing, unreadable or malformed.
ModelFile load_model(const std::filesystem::path& path);

}  // namespace softgrove
