#pragma once

// Checkpoint format: a JSON manifest plus a sibling binary blob.
//
//   <name>.json   manifest: format tag, embedded model config, data file
//                 name, CRC-32 of the blob, and one entry per tensor
//                 (lexicographic by name: name, kind, dtype, shape, byte
//                 offset, byte length)
//   <name>.bin    all tensor data, float32 little-endian, contiguous in
//                 manifest order
//
// Batch-norm running statistics are stored alongside parameters (kind
// "buffer"), so save -> load round-trips bitwise.

#include <string>

#include "sviptr/backbone.hpp"

namespace sviptr {

struct CheckpointMeta {
  VariantConfig cfg;
  uint64_t seed = 0;
  int64_t input_height = 32;
  int64_t input_width = 96;
};

void save_checkpoint(const std::string& manifest_path, const CheckpointMeta& meta,
                     const ParamStore<float>& store);

CheckpointMeta read_checkpoint_meta(const std::string& manifest_path);

// The store must already have exactly the tensors the manifest lists (build
// the model from the manifest's config first); name, shape and checksum
// mismatches throw.
void load_checkpoint_into(const std::string& manifest_path, ParamStore<float>& store);

// Convenience: rebuild the model from the embedded config and load weights.
Model<float> load_checkpoint_model(const std::string& manifest_path);

}  // namespace sviptr
