#include "softgrove/serialize.hpp"

#include <fstream>
#include <sstream>

#include "softgrove/errors.hpp"

namespace softgrove {

namespace {

Json node_json(const SoftNode& n, bool distributed) {
  Json j;
  j["gamma"] = n.gamma;
  j["w"] = n.w;
  if (distributed) j["v"] = n.v;
  j["rho"] = n.rho;
  if (n.left) j["left"] = node_json(*n.left, distributed);
  if (n.right) j["right"] = node_json(*n.right, distributed);
  return j;
}

SoftNode node_from_json(const Json& j) {
  SoftNode n;
  n.gamma = j.at("gamma").get<double>();
  n.w = j.at("w").get<std::vector<double>>();
  if (j.contains("v")) n.v = j.at("v").get<std::vector<double>>();
  n.rho = j.at("rho").get<std::vector<double>>();
  if (j.contains("left")) n.left = std::make_unique<SoftNode>(node_from_json(j.at("left")));
  if (j.contains("right")) n.right = std::make_unique<SoftNode>(node_from_json(j.at("right")));
  return n;
}

Json hard_node_json(const HardNode& n) {
  Json j;
  if (!n.is_leaf()) {
    j["attr"] = n.attr;
    j["threshold"] = n.threshold;
  }
  j["rho"] = n.rho;
  if (n.left) j["left"] = hard_node_json(*n.left);
  if (n.right) j["right"] = hard_node_json(*n.right);
  return j;
}

HardNode hard_node_from_json(const Json& j) {
  HardNode n;
  if (j.contains("attr")) {
    n.attr = j.at("attr").get<int>();
    n.threshold = j.at("threshold").get<double>();
  }
  n.rho = j.at("rho").get<std::vector<double>>();
  if (j.contains("left")) n.left = std::make_unique<HardNode>(hard_node_from_json(j.at("left")));
  if (j.contains("right")) n.right = std::make_unique<HardNode>(hard_node_from_json(j.at("right")));
  return n;
}

Json stats_json(const NormalizationStats& s) {
  Json j;
  j["feature_mean"] = s.feature_mean;
  j["feature_std"] = s.feature_std;
  j["target_mean"] = s.target_mean;
  j["target_std"] = s.target_std;
  return j;
}

NormalizationStats stats_from_json(const Json& j) {
  NormalizationStats s;
  s.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  s.feature_std = j.at("feature_std").get<std::vector<double>>();
  s.target_mean = j.at("target_mean").get<std::vector<double>>();
  s.target_std = j.at("target_std").get<std::vector<double>>();
  if (s.feature_mean.size() != s.feature_std.size() || s.target_mean.size() != s.target_std.size()) {
    throw DataError("normalization statistics have inconsistent lengths");
  }
  return s;
}

}  // namespace

Json to_json(const SoftTree& tree) {
  Json j;
  j["kind"] = std::string(to_string(tree.kind));
  j["input_dim"] = tree.input_dim;
  j["output_dim"] = tree.output_dim;
  j["task"] = std::string(to_string(tree.task));
  if (tree.hard_threshold) j["hard_threshold"] = *tree.hard_threshold;
  j["root"] = node_json(tree.root, tree.kind == TreeKind::distributed);
  return j;
}

SoftTree soft_tree_from_json(const Json& j) {
  SoftTree t;
  t.kind = parse_tree_kind(j.at("kind").get<std::string>());
  t.input_dim = j.at("input_dim").get<int>();
  t.output_dim = j.at("output_dim").get<int>();
  t.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("hard_threshold")) t.hard_threshold = j.at("hard_threshold").get<double>();
  t.root = node_from_json(j.at("root"));
  validate(t);
  return t;
}

Json to_json(const HardTree& tree) {
  Json j;
  j["kind"] = "hard";
  j["input_dim"] = tree.input_dim;
  j["output_dim"] = tree.output_dim;
  j["task"] = std::string(to_string(tree.task));
  j["root"] = hard_node_json(tree.root);
  return j;
}

HardTree hard_tree_from_json(const Json& j) {
  if (j.at("kind").get<std::string>() != "hard") throw DataError("not a hard tree");
  HardTree t;
  t.input_dim = j.at("input_dim").get<int>();
  t.output_dim = j.at("output_dim").get<int>();
  t.task = parse_task(j.at("task").get<std::string>());
  t.root = hard_node_from_json(j.at("root"));
  validate(t);
  return t;
}

Task ModelFile::task() const {
  return std::visit([](const auto& m) { return m.task; }, model);
}

int ModelFile::input_dim() const {
  return std::visit([](const auto& m) { return m.input_dim; }, model);
}

std::size_t ModelFile::size() const {
  return std::visit([](const auto& m) { return tree_size(m); }, model);
}

Json to_json(const ModelFile& file) {
  Json j = std::visit([](const auto& m) { return to_json(m); }, file.model);
  if (!file.classes.empty()) j["classes"] = file.classes;
  if (file.normalization) j["normalization"] = stats_json(*file.normalization);
  return j;
}

ModelFile model_from_json(const Json& j) {
  ModelFile f;
  if (j.at("kind").get<std::string>() == "hard") {
    f.model = hard_tree_from_json(j);
  } else {
    f.model = soft_tree_from_json(j);
  }
  if (j.contains("classes")) f.classes = j.at("classes").get<std::vector<std::string>>();
  if (j.contains("normalization")) f.normalization = stats_from_json(j.at("normalization"));
  return f;
}

std::string dump_model(const ModelFile& file) { return to_json(file).dump(1, '\t') + "\n"; }

ModelFile parse_model(std::string_view text) {
  try {
    return model_from_json(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  } catch (const StructuralError& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_model(file);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace softgrove
