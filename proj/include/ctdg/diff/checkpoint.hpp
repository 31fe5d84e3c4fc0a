#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctdg/diff/tape.hpp"

namespace ctdg::diff {

/// Versioned binary container of named f64 tensors plus a key=value
/// manifest.
///
/// Layout (all integers little-endian):
///   "CTDGCKPT" | u32 version | u64 manifest bytes | manifest text
///   | u64 tensor count | per tensor: u32 name bytes, name, u32 ndim,
///   u64 dims[ndim], f64 payload (row-major)
struct TensorContainer {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> manifest;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* find(const std::string& name) const;
};

void write_container(const TensorContainer& c, std::ostream& out);
TensorContainer read_container(std::istream& in);

void save_container(const TensorContainer& c, const std::string& path);
TensorContainer load_container(const std::string& path);

}  // namespace ctdg::diff
