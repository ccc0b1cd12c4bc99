#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "twostream/tensor.hpp"

namespace twostream {

/// Ordered named tensors plus free-form string metadata.
///
/// File layout ("CKPT1"):
///   CKPT1 <n_meta> <n_tensors>\n
///   meta <key> <value>\n                      (n_meta lines)
///   tensor <name> <offset> <length>\n          (n_tensors lines)
///   <payload>                                  concatenated TSR1 records
/// Offsets and lengths are in bytes, relative to the start of the payload.
/// Names and meta keys contain no whitespace; meta values run to end of line.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(std::string name, Tensor t) { tensors.emplace_back(std::move(name), std::move(t)); }
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::string& meta_at(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace twostream
