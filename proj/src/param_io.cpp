#include "pavesage/param_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pavesage/error.hpp"

namespace pavesage {

namespace {
constexpr const char* kFormat = "pavesage-params";
constexpr int kVersion = 1;
}  // namespace

const DenseMatrix& ParamContainer::matrix(const std::string& name) const {
  auto it = matrices.find(name);
  if (it == matrices.end()) throw DataError("parameter container (" + kind + ") lacks matrix '" + name + "'");
  return it->second;
}

const std::string& ParamContainer::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("parameter container (" + kind + ") lacks field '" + key + "'");
  return it->second;
}

std::string serialize(const ParamContainer& container) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["kind"] = container.kind;
  doc["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : container.meta) doc["meta"][k] = v;
  doc["matrices"] = nlohmann::ordered_json::object();
  for (const auto& [name, m] : container.matrices) {
    nlohmann::ordered_json entry;
    entry["rows"] = m.rows();
    entry["cols"] = m.cols();
    entry["data"] = std::vector<double>(m.values().begin(), m.values().end());
    doc["matrices"][name] = std::move(entry);
  }
  return doc.dump(1) + "\n";
}

ParamContainer deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("parameter container is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw DataError("not a pavesage parameter container");
    if (doc.at("version").get<int>() != kVersion) {
      throw DataError("unsupported container version " + doc.at("version").dump());
    }
    ParamContainer out;
    out.kind = doc.at("kind").get<std::string>();
    for (const auto& [k, v] : doc.at("meta").items()) out.meta[k] = v.get<std::string>();
    for (const auto& [name, entry] : doc.at("matrices").items()) {
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) {
        throw ShapeError("matrix '" + name + "' declares " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " but carries " + std::to_string(data.size()) + " values");
      }
      out.matrices.emplace(name, DenseMatrix(rows, cols, std::move(data)));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parameter container: ") + e.what());
  }
}

void save_container(const std::filesystem::path& path, const ParamContainer& container) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << serialize(container);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ParamContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace pavesage
