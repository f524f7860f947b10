#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "ain/nets.hpp"
#include "ain/train.hpp"

namespace ain {

// A checkpoint is a directory holding manifest.json and one tensor file per
// parameter, buffer and optimizer slot.

struct CheckpointInfo {
    std::size_t epoch = 0;   // epochs completed
    nlohmann::json extra;    // free-form run metadata
};

void save_checkpoint(const std::filesystem::path& dir, Network<float>& net, const CheckpointInfo& info,
                     Optimizer<float>* optimizer = nullptr, const LrSchedule* schedule = nullptr);

struct LoadedCheckpoint {
    std::unique_ptr<Network<float>> network;
    CheckpointInfo info;
    nlohmann::json manifest;
};

/// Rebuilds the network from the stored spec and loads every tensor; a
/// parameter missing from the manifest or with the wrong shape is a FormatError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Restores optimizer slots and schedule state saved alongside `manifest`.
void restore_training_state(const std::filesystem::path& dir, const nlohmann::json& manifest,
                            Optimizer<float>& optimizer, LrSchedule* schedule);

bool is_checkpoint(const std::filesystem::path& dir);

}  // namespace ain
