#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phonation/adam.hpp"
#include "phonation/model.hpp"
#include "phonation/training.hpp"

namespace phonation {

constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

// Versioned container: magic + version, a JSON header carrying the configs
// and counters, then named little-endian float64 tensor payloads (parameters
// followed by the adam.m.* / adam.v.* accumulators).
struct CheckpointRecord {
  std::uint32_t format_version = kCheckpointVersion;
  NetworkConfig config;
  TrainConfig train;
  int epoch = 0;
  std::int64_t adam_step_count = 0;
  std::string rng_state;
  std::vector<TensorEntry> tensors;
};

CheckpointRecord make_checkpoint(PhonationNet& model, const AdamState& adam,
                                 const TrainConfig& train, int epoch,
                                 const std::string& rng_state = "");

void save_checkpoint(const std::string& path, const CheckpointRecord& record);
CheckpointRecord load_checkpoint(const std::string& path);

// Rebuilds the network and optimizer state; shapes are validated against the
// stored config. Round-tripping reproduces forward outputs bit-exactly.
PhonationNet restore_network(const CheckpointRecord& record, AdamState* adam_out = nullptr);

}  // namespace phonation
