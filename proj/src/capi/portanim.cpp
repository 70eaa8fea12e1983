#include "portanim.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <set>
#include <string>

#include "audit/checks.h"
#include "core/error.h"
#include "data/synth.h"
#include "infer/animate.h"
#include "io/image_io.h"
#include "json.hpp"
#include "model/model.h"
#include "train/checkpoint.h"
#include "train/trainer.h"

using nlohmann::json;
namespace fs = std::filesystem;

struct pa_model {
    pa::PortraitModel impl;
    explicit pa_model(const pa::PortraitModelConfig& cfg) : impl(cfg) {}
};

namespace {

thread_local std::string g_last_error;

// Carries an explicit status through the catch-all wrapper; core pa::Error
// maps to PA_ERR_INVALID_ARGUMENT unless rethrown through one of these.
struct StatusError : std::runtime_error {
    pa_status status;
    StatusError(pa_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

template <typename Fn>
pa_status guarded(Fn&& fn) {
    try {
        fn();
        return PA_OK;
    } catch (const StatusError& e) {
        g_last_error = e.what();
        return e.status;
    } catch (const pa::Error& e) {
        g_last_error = e.what();
        return PA_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PA_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PA_ERR_INTERNAL;
    }
}

void require(bool ok, pa_status status, const std::string& msg) {
    if (!ok) throw StatusError(status, msg);
}

json parse_json(const char* text, const char* what) {
    require(text != nullptr, PA_ERR_INVALID_ARGUMENT, std::string(what) + ": null config");
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw StatusError(PA_ERR_INVALID_ARGUMENT, std::string(what) + ": " + e.what());
    }
}

void emit(char** out, const json& j) {
    if (!out) return;
    std::string s = j.dump(2);
    char* buf = (char*)std::malloc(s.size() + 1);
    require(buf != nullptr, PA_ERR_INTERNAL, "out of memory");
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
    require(j.is_object(), PA_ERR_INVALID_ARGUMENT, std::string(what) + ": expected an object");
    for (const auto& [key, v] : j.items())
        require(known.count(key) > 0, PA_ERR_INVALID_ARGUMENT,
                std::string(what) + ": unknown field \"" + key + "\"");
}

template <typename T>
void opt(const json& j, const char* key, T& slot, const char* what) {
    if (!j.contains(key)) return;
    try {
        slot = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw StatusError(PA_ERR_INVALID_ARGUMENT,
                          std::string(what) + ": field \"" + key + "\": " + e.what());
    }
}

pa::SamplerConfig sampler_from_json(const json& j) {
    reject_unknown(j,
                   {"clip_length", "stride", "mix", "augment", "swap_plugin", "style_plugin",
                    "gaze_top_fraction"},
                   "data config");
    pa::SamplerConfig c;
    opt(j, "clip_length", c.clip_length, "data config");
    opt(j, "stride", c.stride, "data config");
    opt(j, "swap_plugin", c.swap_plugin, "data config");
    opt(j, "style_plugin", c.style_plugin, "data config");
    opt(j, "gaze_top_fraction", c.gaze_top_fraction, "data config");
    if (j.contains("mix")) {
        const json& m = j.at("mix");
        reject_unknown(m, {"swapped", "stylized", "real"}, "data config mix");
        opt(m, "swapped", c.mix.swapped, "data config mix");
        opt(m, "stylized", c.mix.stylized, "data config mix");
        opt(m, "real", c.mix.real, "data config mix");
    }
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        reject_unknown(a, {"p_gray", "scale_lo", "scale_hi"}, "data config augment");
        opt(a, "p_gray", c.augment.p_gray, "data config augment");
        opt(a, "scale_lo", c.augment.scale_lo, "data config augment");
        opt(a, "scale_hi", c.augment.scale_hi, "data config augment");
    }
    return c;
}

json sampler_to_json(const pa::SamplerConfig& c) {
    return json{{"clip_length", c.clip_length},
                {"stride", c.stride},
                {"mix", {{"swapped", c.mix.swapped}, {"stylized", c.mix.stylized},
                         {"real", c.mix.real}}},
                {"augment", {{"p_gray", c.augment.p_gray}, {"scale_lo", c.augment.scale_lo},
                             {"scale_hi", c.augment.scale_hi}}},
                {"swap_plugin", c.swap_plugin},
                {"style_plugin", c.style_plugin},
                {"gaze_top_fraction", c.gaze_top_fraction}};
}

pa::StageRunConfig run_config_from_json(const json& j) {
    reject_unknown(j, {"steps", "lr", "seed", "schedule_T", "log_every", "data"},
                   "run config");
    pa::StageRunConfig c;
    opt(j, "steps", c.steps, "run config");
    opt(j, "lr", c.lr, "run config");
    opt(j, "seed", c.seed, "run config");
    opt(j, "schedule_T", c.schedule_T, "run config");
    opt(j, "log_every", c.log_every, "run config");
    if (j.contains("data")) c.data = sampler_from_json(j.at("data"));
    return c;
}

pa::PortraitModelConfig model_config_from_text(const char* text) {
    json j = parse_json(text, "model config");
    try {
        return pa::model_from_json(j, /*strict=*/false);
    } catch (const pa::Error& e) {
        throw StatusError(PA_ERR_INVALID_ARGUMENT, e.what());
    }
}

pa::Tensor clamp01(const pa::Tensor& t) {
    pa::Tensor out = t.clone();
    for (int64_t i = 0; i < out.numel(); i++) out[i] = std::min(1.0f, std::max(0.0f, out[i]));
    return out;
}

}  // namespace

extern "C" {

const char* pa_api_version(void) { return "1.0.0"; }

const char* pa_last_error(void) { return g_last_error.c_str(); }

void pa_string_free(char* s) { std::free(s); }

pa_status pa_model_create(const char* model_config_json, pa_model** out) {
    return guarded([&] {
        require(out != nullptr, PA_ERR_INVALID_ARGUMENT, "pa_model_create: null out pointer");
        pa::PortraitModelConfig cfg = model_config_from_text(model_config_json);
        *out = new pa_model(cfg);
    });
}

pa_status pa_model_open(const char* checkpoint_dir, pa_model** out) {
    return guarded([&] {
        require(out != nullptr && checkpoint_dir != nullptr, PA_ERR_INVALID_ARGUMENT,
                "pa_model_open: null argument");
        require(fs::exists(fs::path(checkpoint_dir) / "manifest.json"), PA_ERR_IO,
                std::string("no checkpoint at ") + checkpoint_dir);
        pa::PortraitModelConfig cfg = pa::model_config_from_checkpoint(checkpoint_dir);
        auto m = std::make_unique<pa_model>(cfg);
        pa::load_checkpoint(m->impl, checkpoint_dir);
        *out = m.release();
    });
}

void pa_model_free(pa_model* m) { delete m; }

pa_status pa_model_describe(const pa_model* m, char** json_out) {
    return guarded([&] {
        require(m != nullptr && json_out != nullptr, PA_ERR_INVALID_ARGUMENT,
                "pa_model_describe: null argument");
        json sites = json::array();
        for (const auto& s : m->impl.denoiser->sites())
            sites.push_back({{"site_id", s.site_id},
                             {"resolution", s.resolution},
                             {"channels", s.channels},
                             {"injection", s.injection}});
        emit(json_out, json{{"config", pa::model_to_json(m->impl.config())},
                            {"parameters", m->impl.params.total_elements()},
                            {"c_lat", m->impl.c_lat()},
                            {"latent_hw", m->impl.latent_hw()},
                            {"bundle_channels", m->impl.channel_plan().total()},
                            {"temporal", m->impl.has_temporal()},
                            {"attention_sites", sites}});
    });
}

pa_status pa_synth_corpus(const char* synth_config_json, const char* out_dir,
                          char** summary_json) {
    return guarded([&] {
        require(out_dir != nullptr, PA_ERR_INVALID_ARGUMENT, "pa_synth_corpus: null out_dir");
        json j = parse_json(synth_config_json, "synth config");
        reject_unknown(j, {"n_videos", "frames_per_video", "height", "width", "seed"},
                       "synth config");
        pa::SynthConfig cfg;
        opt(j, "n_videos", cfg.n_videos, "synth config");
        opt(j, "frames_per_video", cfg.frames_per_video, "synth config");
        opt(j, "height", cfg.height, "synth config");
        opt(j, "width", cfg.width, "synth config");
        opt(j, "seed", cfg.seed, "synth config");
        pa::synth_corpus(cfg, out_dir);
        emit(summary_json, json{{"command", "synth"},
                                {"out_dir", out_dir},
                                {"videos", cfg.n_videos},
                                {"frames_per_video", cfg.frames_per_video},
                                {"height", cfg.height},
                                {"width", cfg.width},
                                {"seed", cfg.seed}});
    });
}

pa_status pa_corpus_stats(const char* corpus_dir, const char* data_config_json,
                          char** summary_json) {
    return guarded([&] {
        require(corpus_dir != nullptr, PA_ERR_INVALID_ARGUMENT, "pa_corpus_stats: null dir");
        require(fs::exists(fs::path(corpus_dir) / "manifest.jsonl"), PA_ERR_IO,
                std::string("no corpus at ") + corpus_dir);
        json j = parse_json(data_config_json, "preprocess config");
        reject_unknown(j, {"data", "samples", "seed"}, "preprocess config");
        pa::SamplerConfig dc;
        if (j.contains("data")) dc = sampler_from_json(j.at("data"));
        int64_t samples = 50;
        uint64_t seed = 1;
        opt(j, "samples", samples, "preprocess config");
        opt(j, "seed", seed, "preprocess config");

        std::vector<pa::VideoClip> corpus = pa::load_corpus(corpus_dir);
        int64_t frames = 0;
        std::set<std::string> identities;
        for (const auto& c : corpus) {
            frames += c.length();
            identities.insert(c.identity_id);
        }

        pa::SampleStream stream(corpus, dc, pa::Rng(seed));
        int64_t mask_violations = 0, length_mismatches = 0;
        json tag_counts = {{"real", 0}, {"swapped", 0}, {"stylized", 0}};
        for (int64_t k = 0; k < samples; k++) {
            pa::TrainingSample s = stream.next();
            tag_counts[pa::to_string(s.source_tag)] = tag_counts[pa::to_string(s.source_tag)]
                                                          .get<int64_t>() + 1;
            if (s.driving.length() != s.target.length()) length_mismatches++;
            const int64_t fh = s.driving.height(), fw = s.driving.width();
            for (int64_t f = 0; f < s.driving.length() && mask_violations == 0; f++) {
                const pa::FaceBox& box = s.driving.face_box[(size_t)f];
                const float* fr = s.driving.frames.data() + f * 3 * fh * fw;
                for (int64_t p = 0; p < fh * fw; p++) {
                    if (box.inside(p % fw, p / fw)) continue;
                    if (fr[p] != 0.0f || fr[fh * fw + p] != 0.0f || fr[2 * fh * fw + p] != 0.0f) {
                        mask_violations++;
                        break;
                    }
                }
            }
        }
        emit(summary_json,
             json{{"command", "preprocess"},
                  {"corpus_dir", corpus_dir},
                  {"videos", (int64_t)corpus.size()},
                  {"frames", frames},
                  {"identities", (int64_t)identities.size()},
                  {"skipped_too_short", stream.skipped_too_short()},
                  {"gaze_candidates", stream.gaze_candidates()},
                  {"gaze_pool", (int64_t)stream.gaze_pool().size()},
                  {"samples_checked", samples},
                  {"tag_counts", tag_counts},
                  {"mask_violations", mask_violations},
                  {"length_mismatches", length_mismatches},
                  {"seed", seed},
                  {"data", sampler_to_json(dc)}});
    });
}

pa_status pa_train_stage(pa_model* m, const char* stage, const char* corpus_dir,
                         const char* run_config_json, const char* out_dir,
                         const char* input_checkpoint_dir, char** summary_json) {
    return guarded([&] {
        require(m != nullptr && stage != nullptr && corpus_dir != nullptr && out_dir != nullptr,
                PA_ERR_INVALID_ARGUMENT, "pa_train_stage: null argument");
        pa::Stage st;
        try {
            st = pa::stage_from_name(stage);
        } catch (const pa::Error& e) {
            throw StatusError(PA_ERR_INVALID_ARGUMENT, e.what());
        }
        require(fs::exists(fs::path(corpus_dir) / "manifest.jsonl"), PA_ERR_IO,
                std::string("no corpus at ") + corpus_dir);

        pa::StageRunConfig rc;
        if (run_config_json && *run_config_json)
            rc = run_config_from_json(parse_json(run_config_json, "run config"));
        rc.stage = st;

        // Stage-ordering violations surface as PA_ERR_STATE with the
        // required stage named, before any training work starts.
        std::string input = input_checkpoint_dir ? input_checkpoint_dir : "";
        std::string want = pa::required_predecessor(st);
        if (want.empty()) {
            require(input.empty(), PA_ERR_STATE,
                    "stage1 starts fresh and takes no input checkpoint");
        } else {
            require(!input.empty(), PA_ERR_STATE,
                    std::string(stage) + " requires a checkpoint from " + want);
            require(fs::exists(fs::path(input) / "manifest.json"), PA_ERR_IO,
                    "no checkpoint at " + input);
            pa::CheckpointManifest man = pa::read_manifest(input);
            require(man.stage == want, PA_ERR_STATE,
                    std::string(stage) + " requires a " + want + " checkpoint, got " + man.stage);
        }

        std::vector<pa::VideoClip> corpus = pa::load_corpus(corpus_dir);
        pa::StageResult res = pa::run_stage(m->impl, corpus, rc, out_dir, input);

        double tail = 0.0;
        size_t tail_n = std::min<size_t>(25, res.losses.size());
        for (size_t i = res.losses.size() - tail_n; i < res.losses.size(); i++)
            tail += res.losses[i];
        emit(summary_json,
             json{{"command", "train"},
                  {"stage", stage},
                  {"steps", rc.steps},
                  {"completed_steps", (int64_t)res.losses.size()},
                  {"nonfinite_skipped", res.nonfinite_skipped},
                  {"final_loss", res.losses.empty() ? 0.0 : (double)res.losses.back()},
                  {"mean_loss_tail", tail_n ? tail / (double)tail_n : 0.0},
                  {"checkpoint_dir", res.checkpoint_dir},
                  {"corpus_dir", corpus_dir},
                  {"input_checkpoint", input},
                  {"seed", rc.seed},
                  {"lr", rc.lr},
                  {"schedule_T", rc.schedule_T},
                  {"log_every", rc.log_every},
                  {"data", sampler_to_json(rc.data)},
                  {"model", pa::model_to_json(m->impl.config())}});
    });
}

pa_status pa_animate_video(pa_model* m, const char* animate_config_json, char** summary_json) {
    return guarded([&] {
        require(m != nullptr, PA_ERR_INVALID_ARGUMENT, "pa_animate_video: null model");
        json j = parse_json(animate_config_json, "animate config");
        reject_unknown(j,
                       {"reference_video", "reference_frame", "reference_image", "reference_box",
                        "driving_video", "output_dir", "window", "overlap", "steps", "schedule_T",
                        "seed", "appearance_plugin", "write_pngs"},
                       "animate config");

        std::string driving_dir, output_dir;
        opt(j, "driving_video", driving_dir, "animate config");
        opt(j, "output_dir", output_dir, "animate config");
        require(!driving_dir.empty(), PA_ERR_INVALID_ARGUMENT,
                "animate config: \"driving_video\" is required");
        require(!output_dir.empty(), PA_ERR_INVALID_ARGUMENT,
                "animate config: \"output_dir\" is required");

        pa::AnimateConfig cfg;
        opt(j, "window", cfg.window, "animate config");
        opt(j, "overlap", cfg.overlap, "animate config");
        opt(j, "steps", cfg.steps, "animate config");
        opt(j, "schedule_T", cfg.schedule_T, "animate config");
        opt(j, "seed", cfg.seed, "animate config");
        opt(j, "appearance_plugin", cfg.appearance_plugin, "animate config");
        bool write_pngs = true;
        opt(j, "write_pngs", write_pngs, "animate config");

        // Reference: a corpus video frame (face box from metadata) or a PNG
        // plus an explicit face box.
        std::string ref_video, ref_image;
        int64_t ref_frame = 0;
        opt(j, "reference_video", ref_video, "animate config");
        opt(j, "reference_image", ref_image, "animate config");
        opt(j, "reference_frame", ref_frame, "animate config");
        require(ref_video.empty() != ref_image.empty(), PA_ERR_INVALID_ARGUMENT,
                "animate config: set exactly one of \"reference_video\" / \"reference_image\"");
        require(fs::exists(fs::path(driving_dir) / "frames.rgbv"), PA_ERR_IO,
                "no driving video at " + driving_dir);

        pa::Tensor reference;
        pa::FaceBox ref_box;
        if (!ref_video.empty()) {
            require(fs::exists(fs::path(ref_video) / "frames.rgbv"), PA_ERR_IO,
                    "no reference video at " + ref_video);
            pa::VideoClip rc = pa::load_video_dir(ref_video);
            require(ref_frame >= 0 && ref_frame < rc.length(), PA_ERR_INVALID_ARGUMENT,
                    "animate config: reference_frame out of range");
            reference = pa::Tensor({3, rc.height(), rc.width()});
            std::memcpy(reference.data(), rc.frames.data() + ref_frame * reference.numel(),
                        (size_t)reference.numel() * sizeof(float));
            ref_box = rc.face_box[(size_t)ref_frame];
        } else {
            require(fs::exists(ref_image), PA_ERR_IO, "no reference image at " + ref_image);
            reference = pa::read_png(ref_image);
            require(j.contains("reference_box"), PA_ERR_INVALID_ARGUMENT,
                    "animate config: \"reference_box\" [x,y,w,h] is required with an image");
            std::vector<int64_t> box = j.at("reference_box").get<std::vector<int64_t>>();
            require(box.size() == 4, PA_ERR_INVALID_ARGUMENT,
                    "animate config: \"reference_box\" must be [x,y,w,h]");
            ref_box = pa::FaceBox{box[0], box[1], box[2], box[3]};
        }
        pa::Tensor ref_mask = pa::box_mask(ref_box, reference.dim(1), reference.dim(2));

        pa::VideoClip driving = pa::load_video_dir(driving_dir);
        pa::Tensor out = pa::animate(m->impl, reference, ref_mask, driving, cfg);
        pa::Tensor clamped = clamp01(out);

        fs::create_directories(output_dir);
        pa::write_video_raw((fs::path(output_dir) / "frames.rgbv").string(), clamped);
        if (write_pngs) {
            const int64_t fsz = 3 * out.dim(2) * out.dim(3);
            for (int64_t f = 0; f < out.dim(0); f++) {
                pa::Tensor frame({3, out.dim(2), out.dim(3)});
                std::memcpy(frame.data(), clamped.data() + f * fsz,
                            (size_t)fsz * sizeof(float));
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%04d.png", (int)f);
                pa::write_png((fs::path(output_dir) / name).string(), frame);
            }
        }

        pa::WindowPlan plan = pa::plan_windows(driving.length(), cfg.window, cfg.overlap);
        emit(summary_json, json{{"command", "animate"},
                                {"frames", out.dim(0)},
                                {"windows", (int64_t)plan.windows.size()},
                                {"window", cfg.window},
                                {"overlap", cfg.overlap},
                                {"steps", cfg.steps},
                                {"schedule_T", cfg.schedule_T},
                                {"seed", cfg.seed},
                                {"appearance_plugin", cfg.appearance_plugin},
                                {"driving_video", driving_dir},
                                {"output_dir", output_dir},
                                {"model", pa::model_to_json(m->impl.config())}});
    });
}

pa_status pa_audit(const char* model_config_json, char** report_json) {
    return guarded([&] {
        pa::PortraitModelConfig cfg = model_config_from_text(model_config_json);
        std::vector<pa::AuditCheck> checks = pa::run_audit(cfg);
        json arr = json::array();
        for (const auto& c : checks)
            arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        emit(report_json, json{{"command", "audit"},
                               {"model", pa::model_to_json(cfg)},
                               {"checks", arr},
                               {"all_pass", pa::all_pass(checks)}});
    });
}

}  // extern "C"
