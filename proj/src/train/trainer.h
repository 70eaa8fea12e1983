#pragma once

#include <string>
#include <vector>

#include "data/sampler.h"
#include "model/model.h"
#include "train/diffusion.h"

namespace pa {

// Training phases. Stage 1 and the gaze fine-tune update the motion encoder,
// denoising UNet and reference UNet; stage 2 updates only the temporal
// layers. The context (image) encoder is frozen in every stage.
enum class Stage { stage1, gaze_ft, stage2 };

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);
// Stage tag a checkpoint must carry to start this stage; empty = fresh start.
std::string required_predecessor(Stage s);

std::vector<std::string> stage_trainable_names(const PortraitModel& m, Stage s);
std::vector<std::string> stage_frozen_names(const PortraitModel& m, Stage s);

// Noise-prediction objective with explicit randomness, so tests and the
// finite-difference oracle can pin (t, eps). Encodes the target clip, noises
// it, builds the conditioning bundle from the sample's reference, and
// compares the denoiser's prediction against eps.
Var diffusion_loss_at(const PortraitModel& m, const TrainingSample& sample,
                      const NoiseSchedule& schedule, int64_t t, const Tensor& eps,
                      std::string* debug_warning = nullptr);
// Draws t uniform over the schedule and eps standard normal from rng.
Var diffusion_loss(const PortraitModel& m, const TrainingSample& sample,
                   const NoiseSchedule& schedule, Rng& rng);

struct StageRunConfig {
    Stage stage = Stage::stage1;
    int64_t steps = 100;
    float lr = 1e-4f;
    uint64_t seed = 1;
    int64_t schedule_T = 100;
    SamplerConfig data;
    int64_t log_every = 25;  // JSONL record cadence (every step is recorded in-memory)
};

struct StageResult {
    std::vector<float> losses;  // one entry per completed step
    int64_t nonfinite_skipped = 0;
    std::string checkpoint_dir;
};

// Runs one phase end to end: enforces stage ordering via the input
// checkpoint's manifest tag, freezes everything outside the stage's
// trainable set (optimizer masking + requires_grad), verifies frozen
// parameter hashes afterwards, writes <out_dir>/{manifest.json, params.bin,
// temporal.bin, train_log.jsonl}. Stage 2 inserts temporal layers if the
// model does not have them yet.
StageResult run_stage(PortraitModel& m, const std::vector<VideoClip>& corpus,
                      const StageRunConfig& cfg, const std::string& out_dir,
                      const std::string& input_checkpoint = "");

}  // namespace pa
