#pragma once

#include <string>
#include <vector>

#include "warpgrad/tensor.hpp"

namespace wg {

// Single-file checkpoint: an 8-byte little-endian header length, a JSON
// header listing {name, shape, byte_offset} per tensor (offsets into the
// payload) plus an embedded config string, then the payload of raw
// little-endian 8-byte floats. The loader validates the total length.
struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config_json;  // "{}" when absent

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors,
                     const std::string& config_json = "{}");

Checkpoint load_checkpoint(const std::string& path);

}  // namespace wg
