#pragma once

#include "planlab/policy.hpp"

#include <json.hpp>

#include <filesystem>

namespace planlab {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  Vocab vocab;
  nlohmann::json meta;  // free-form provenance (stage, config, seed)
};

// JSON container:
//   {"format": "planlab-policy", "version": 1,
//    "shape": {context_dim, hidden, vocab, max_len},
//    "vocab": {grid_size, n_waypoints, words: [...]},
//    "tensors": [{name, offset, rows, cols}, ...],   column-major
//    "values": [...], "meta": {...}}
// Doubles are written in shortest round-trip form, so reloading is bit-exact.
nlohmann::json checkpoint_to_json(const PolicyParams& params, const Vocab& vocab,
                                  const nlohmann::json& meta = nlohmann::json::object());
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const Vocab& vocab, const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace planlab
