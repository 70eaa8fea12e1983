#pragma once

#include <string>

#include "json.hpp"
#include "model/model.h"

namespace pa {

// Model config <-> JSON. Strict mode (checkpoint manifests) requires every
// field; lenient mode (user configs) fills missing fields with defaults.
// Unknown keys are rejected in both modes.
nlohmann::json model_to_json(const PortraitModelConfig& c);
PortraitModelConfig model_from_json(const nlohmann::json& j, bool strict = true);

// Checkpoint directory layout:
//   manifest.json  — format version, stage tag, step count, model config
//   params.bin     — every non-temporal parameter
//   temporal.bin   — temporal parameters (present only when inserted)
// Temporal weights live in their own blob so stage 2 can address them as a
// set and so stage-1 checkpoints stay loadable after temporal insertion.

struct CheckpointManifest {
    int format_version = 1;
    std::string stage;  // "stage1" | "gaze_ft" | "stage2"
    int64_t steps = 0;
    bool has_temporal = false;
    PortraitModelConfig model;
};

void save_checkpoint(const PortraitModel& m, const std::string& dir, const std::string& stage,
                     int64_t steps);

CheckpointManifest read_manifest(const std::string& dir);

// Builds nothing; loads parameter values into an already-built compatible
// model. Every non-temporal parameter must be covered by the blob. A model
// with temporal layers accepts a checkpoint without them (zero init kept).
CheckpointManifest load_checkpoint(PortraitModel& m, const std::string& dir);

// Convenience: reconstruct the model a checkpoint was written by.
PortraitModelConfig model_config_from_checkpoint(const std::string& dir);

}  // namespace pa
