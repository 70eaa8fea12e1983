#pragma once

#include <utility>
#include <vector>

#include "data/clips.h"

namespace pa {

struct SamplerConfig {
    int64_t clip_length = 16;
    int64_t stride = 2;
    MixProportions mix;
    AugmentConfig augment;
    // Plugin per mixture category. An empty name means the category has no
    // source pool; such draws fall back to untouched "real" samples.
    std::string swap_plugin = "warp_swap";
    std::string style_plugin = "posterize_style";
    // When > 0, restricts sampling to the clip starts whose gaze-change
    // score lands in the top fraction of all candidates (fine-tune stage).
    double gaze_top_fraction = 0.0;
};

// Turns a corpus into an endless stream of TrainingSamples:
//   draw mixture tag -> sample clip -> perturb identity -> mask faces ->
//   augment. The target keeps the original frames bitwise; the reference is
//   a clean unperturbed frame of the same clip plus its face-box mask.
class SampleStream {
public:
    SampleStream(std::vector<VideoClip> corpus, SamplerConfig cfg, Rng rng);

    TrainingSample next();

    // Videos dropped because they cannot fit one clip at (length, stride).
    int64_t skipped_too_short() const { return skipped_; }
    // Gaze filtering diagnostics: all candidate starts and the kept subset.
    int64_t gaze_candidates() const { return gaze_candidates_; }
    const std::vector<std::pair<size_t, int64_t>>& gaze_pool() const { return gaze_pool_; }

private:
    std::vector<VideoClip> corpus_;
    SamplerConfig cfg_;
    Rng rng_;
    std::vector<size_t> sampleable_;
    std::vector<std::pair<size_t, int64_t>> gaze_pool_;  // (video index, first frame)
    int64_t skipped_ = 0;
    int64_t gaze_candidates_ = 0;
};

}  // namespace pa
