#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pavesage/matrix.hpp"

namespace pavesage {

/// Tagged parameter container shared by every model kind. On disk it is a
/// JSON document: {"format": "pavesage-params", "version": 1, "kind": ...,
/// "meta": {string: string}, "matrices": {name: {"rows", "cols", "data"}}}.
/// Doubles are written with round-trip precision, so save/load is bitwise.
struct ParamContainer {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::map<std::string, DenseMatrix> matrices;

  const DenseMatrix& matrix(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
};

std::string serialize(const ParamContainer& container);
ParamContainer deserialize(const std::string& text);

void save_container(const std::filesystem::path& path, const ParamContainer& container);
ParamContainer load_container(const std::filesystem::path& path);

}  // namespace pavesage
