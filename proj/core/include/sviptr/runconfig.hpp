#pragma once

// JSON run configuration: model structure, alphabet, seed, optimizer and
// training settings. Parsing is strict — unknown keys anywhere are an error,
// so typos fail loudly instead of silently using defaults.
//
// The environment variable VIPTR_SEED, when set, overrides the configured
// seed (useful for sweeps without editing files).

#include <cstdint>
#include <string>

#include "sviptr/registry.hpp"
#include "sviptr/trainer.hpp"

namespace sviptr {

struct RunConfig {
  std::string variant;       // registry name used as the base, or empty
  VariantConfig model;       // fully resolved structure (num_classes still 0 until
                             // an alphabet is attached via resolve_classes)
  std::string alphabet_path; // empty = built-in digits+lowercase alphabet
  uint64_t seed = 42;
  int64_t input_height = 32;
  int64_t input_width = 96;
  OptimConfig optim;
  TrainConfig train;
};

// Defaults: sviptr-v1-t structure, built-in alphabet, seed 42.
RunConfig default_run_config();

// Loads and validates a config file. Top-level keys: variant, channels,
// depths, heads, permutation, pe_kind, alphabet_path, seed, input_height,
// input_width, optimizer, train. Keys override the variant's values.
RunConfig load_run_config(const std::string& path);

// Loads the configured alphabet (or the default) and fixes num_classes.
Alphabet resolve_alphabet(RunConfig& rc);

// Model-structure (de)serialisation shared with the checkpoint format.
std::string model_config_to_json(const VariantConfig& cfg, uint64_t seed, int64_t input_height,
                                 int64_t input_width);
void model_config_from_json(const std::string& text, VariantConfig* cfg, uint64_t* seed,
                            int64_t* input_height, int64_t* input_width);

PeKind parse_pe_kind(const std::string& s);

}  // namespace sviptr
