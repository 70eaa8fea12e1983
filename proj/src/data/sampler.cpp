#include "data/sampler.h"

#include <algorithm>

namespace pa {

SampleStream::SampleStream(std::vector<VideoClip> corpus, SamplerConfig cfg, Rng rng)
    : corpus_(std::move(corpus)), cfg_(cfg), rng_(rng) {
    PA_CHECK(!corpus_.empty(), "sampler: empty corpus");
    for (size_t v = 0; v < corpus_.size(); ++v) {
        if (can_sample(corpus_[v], cfg_.clip_length, cfg_.stride))
            sampleable_.push_back(v);
        else
            ++skipped_;
    }
    PA_CHECK(!sampleable_.empty(), "sampler: no video long enough for length " +
                                       std::to_string(cfg_.clip_length) + " stride " +
                                       std::to_string(cfg_.stride));

    if (cfg_.gaze_top_fraction > 0.0) {
        // Score every candidate start from metadata alone, keep the top
        // fraction; ties and ordering are deterministic.
        std::vector<std::pair<size_t, int64_t>> candidates;
        std::vector<float> scores;
        const int64_t span = (cfg_.clip_length - 1) * cfg_.stride + 1;
        for (size_t v : sampleable_) {
            const VideoClip& video = corpus_[v];
            for (int64_t f0 = 0; f0 + span <= video.length(); ++f0) {
                std::vector<GazeAngles> g;
                g.reserve((size_t)cfg_.clip_length);
                for (int64_t i = 0; i < cfg_.clip_length; ++i)
                    g.push_back(video.gaze[(size_t)(f0 + i * cfg_.stride)]);
                candidates.emplace_back(v, f0);
                scores.push_back(gaze_change_score(g));
            }
        }
        gaze_candidates_ = (int64_t)candidates.size();
        for (size_t i : filter_top_fraction(scores, cfg_.gaze_top_fraction))
            gaze_pool_.push_back(candidates[i]);
    }
}

TrainingSample SampleStream::next() {
    const SourceTag want = draw_mix_tag(cfg_.mix, rng_);

    VideoClip clip;
    int64_t ref_idx = 0;
    if (!gaze_pool_.empty()) {
        const auto& [v, f0] = gaze_pool_[rng_.uniform_index(gaze_pool_.size())];
        clip = sample_clip_at(corpus_[v], f0, cfg_.clip_length, cfg_.stride);
        ref_idx = (int64_t)rng_.uniform_index((uint64_t)cfg_.clip_length);
    } else {
        const size_t v = sampleable_[rng_.uniform_index(sampleable_.size())];
        clip = sample_clip(corpus_[v], cfg_.clip_length, cfg_.stride, rng_, &ref_idx);
    }

    TrainingSample s;
    s.target = clip.clone();  // stays the original real frames, bitwise
    s.reference_index = ref_idx;
    const int64_t H = clip.height(), W = clip.width(), frame_elems = 3 * H * W;
    s.reference = Tensor::from_data(
        {3, H, W}, std::vector<float>(clip.frames.data() + ref_idx * frame_elems,
                                      clip.frames.data() + (ref_idx + 1) * frame_elems));
    s.fg_mask = box_mask(clip.face_box[(size_t)ref_idx], H, W);

    std::string plugin = "none";
    if (want == SourceTag::swapped && !cfg_.swap_plugin.empty()) plugin = cfg_.swap_plugin;
    if (want == SourceTag::stylized && !cfg_.style_plugin.empty()) plugin = cfg_.style_plugin;

    s.driving = std::move(clip);
    perturb_identity(s.driving, plugin, rng_);
    mask_clip(s.driving);
    augment_driving(s.driving, cfg_.augment, rng_);
    s.source_tag = s.driving.source_tag;
    return s;
}

}  // namespace pa
