#include "umdqn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "umdqn/errors.hpp"

namespace umdqn {

using nlohmann::json;

void save_checkpoint(const std::string& path, const UmnnModel& model,
                     const std::map<std::string, std::string>& meta) {
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["meta"] = meta;
  json params = json::array();
  for (const Parameter* p : model.parameters()) {
    json entry;
    entry["name"] = p->name;
    entry["rows"] = p->value.rows;
    entry["cols"] = p->value.cols;
    entry["data"] = p->value.data;
    params.push_back(std::move(entry));
  }
  doc["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw ValidationError("save_checkpoint: cannot write \"" + path + "\"");
  out << doc.dump();
}

namespace {

json load_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("checkpoint: cannot open \"" + path + "\"");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint: invalid JSON in \"" + path + "\": " + e.what());
  }
  if (!doc.contains("format_version") ||
      doc["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw ValidationError("checkpoint: unsupported format version in \"" + path + "\"");
  }
  return doc;
}

}  // namespace

std::map<std::string, std::string> load_checkpoint(const std::string& path, UmnnModel& model) {
  const json doc = load_doc(path);
  auto params = model.parameters();
  const json& stored = doc.at("params");
  if (stored.size() != params.size()) {
    throw ValidationError("checkpoint: parameter count mismatch (stored " +
                          std::to_string(stored.size()) + ", model " +
                          std::to_string(params.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = stored[i];
    Parameter& p = *params[i];
    if (entry.at("name").get<std::string>() != p.name ||
        entry.at("rows").get<int>() != p.value.rows ||
        entry.at("cols").get<int>() != p.value.cols) {
      throw ValidationError("checkpoint: shape mismatch for parameter \"" + p.name + "\"");
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != p.value.size()) {
      throw ValidationError("checkpoint: data length mismatch for \"" + p.name + "\"");
    }
    p.value.data = data;
  }
  return doc.at("meta").get<std::map<std::string, std::string>>();
}

std::map<std::string, std::string> read_checkpoint_meta(const std::string& path) {
  return load_doc(path).at("meta").get<std::map<std::string, std::string>>();
}

}  // namespace umdqn
