#include "train/trainer.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/error.h"
#include "json.hpp"
#include "model/temporal.h"
#include "train/adam.h"
#include "train/checkpoint.h"

namespace pa {

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::stage1: return "stage1";
        case Stage::gaze_ft: return "gaze_ft";
        case Stage::stage2: return "stage2";
    }
    throw Error("unknown stage");
}

Stage stage_from_name(const std::string& name) {
    if (name == "stage1") return Stage::stage1;
    if (name == "gaze_ft") return Stage::gaze_ft;
    if (name == "stage2") return Stage::stage2;
    throw Error("unknown stage name: " + name);
}

std::string required_predecessor(Stage s) {
    switch (s) {
        case Stage::stage1: return "";
        case Stage::gaze_ft: return "stage1";
        case Stage::stage2: return "gaze_ft";
    }
    throw Error("unknown stage");
}

std::vector<std::string> stage_trainable_names(const PortraitModel& m, Stage s) {
    std::vector<std::string> out;
    for (const auto& name : m.params.names()) {
        bool temporal = is_temporal_param(name);
        if (s == Stage::stage2) {
            if (temporal) out.push_back(name);
            continue;
        }
        // Stage 1 and the gaze fine-tune train the motion encoder and both
        // UNets; the context encoder stays frozen, temporal layers excluded.
        if (temporal || name.rfind("context.", 0) == 0) continue;
        out.push_back(name);
    }
    return out;
}

std::vector<std::string> stage_frozen_names(const PortraitModel& m, Stage s) {
    std::vector<std::string> train = stage_trainable_names(m, s);
    std::set<std::string> t(train.begin(), train.end());
    std::vector<std::string> out;
    for (const auto& name : m.params.names())
        if (!t.count(name)) out.push_back(name);
    return out;
}

Var diffusion_loss_at(const PortraitModel& m, const TrainingSample& sample,
                      const NoiseSchedule& schedule, int64_t t, const Tensor& eps,
                      std::string* debug_warning) {
    PA_CHECK(t >= 0 && t < schedule.T, "diffusion loss: timestep out of schedule range");
    sample.target.validate();
    sample.driving.validate();
    PA_CHECK(sample.driving.length() == sample.target.length(),
             "diffusion loss: driving/target frame counts differ");

    Tensor z0 = m.codec->encode(sample.target.frames);
    PA_CHECK(eps.same_shape(z0), "diffusion loss: eps must match the latent volume");

    PortraitModel::Conditioning cond = m.condition(sample.reference, sample.fg_mask);
    Tensor z_t = schedule.noisy_latent(z0, eps, t);

    Var motion_feats =
        m.motion->motion_features(leaf(sample.driving.frames), leaf(sample.reference),
                                  m.latent_hw(), m.latent_hw(), debug_warning);
    Var x = assemble(leaf(z_t), motion_feats, cond.ref_latent, leaf(cond.mask_lat));
    Var eps_hat = m.denoiser->forward(x, t, leaf(cond.context_tokens), &cond.bank);
    return mse(eps_hat, leaf(eps));
}

Var diffusion_loss(const PortraitModel& m, const TrainingSample& sample,
                   const NoiseSchedule& schedule, Rng& rng) {
    int64_t t = (int64_t)rng.uniform_index((uint64_t)schedule.T);
    int64_t F = sample.target.length();
    Tensor eps({F, m.c_lat(), m.latent_hw(), m.latent_hw()});
    rng.fill_normal(eps.data(), eps.numel());
    return diffusion_loss_at(m, sample, schedule, t, eps);
}

StageResult run_stage(PortraitModel& m, const std::vector<VideoClip>& corpus,
                      const StageRunConfig& cfg, const std::string& out_dir,
                      const std::string& input_checkpoint) {
    const std::string want = required_predecessor(cfg.stage);
    if (cfg.stage == Stage::stage1) {
        PA_CHECK(input_checkpoint.empty(), "stage1 starts fresh and takes no input checkpoint");
    } else {
        PA_CHECK(!input_checkpoint.empty(),
                 stage_name(cfg.stage) + " requires a checkpoint from " + want);
        CheckpointManifest man = load_checkpoint(m, input_checkpoint);
        PA_CHECK(man.stage == want, stage_name(cfg.stage) + " requires a " + want +
                                        " checkpoint, got " + man.stage);
    }
    if (cfg.stage == Stage::stage2 && !m.has_temporal()) m.insert_temporal();

    auto trainable = stage_trainable_names(m, cfg.stage);
    auto frozen = stage_frozen_names(m, cfg.stage);
    PA_CHECK(!trainable.empty(), "stage has no trainable parameters");
    uint64_t frozen_before = m.params.hash_named(frozen);

    // Freeze at both levels: the optimizer only sees the stage's parameters,
    // and frozen leaves drop out of the backward pass entirely.
    std::vector<Var> train_vars;
    for (const auto& n : trainable) train_vars.push_back(m.params.get(n));
    std::vector<std::pair<Var, bool>> saved_flags;
    for (const auto& p : m.params.all()) saved_flags.emplace_back(p, p->requires_grad);
    for (const auto& n : frozen) m.params.get(n)->requires_grad = false;
    for (const auto& p : train_vars) p->requires_grad = true;

    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir + "/train_log.jsonl", std::ios::trunc);
    PA_CHECK(log.is_open(), "cannot open training log in " + out_dir);

    Adam opt(train_vars, AdamConfig{cfg.lr});
    NoiseSchedule schedule = NoiseSchedule::linear(cfg.schedule_T);
    Rng master(cfg.seed);
    Rng diff_rng = master.child("diffusion");
    SampleStream stream(corpus, cfg.data, master.child("data"));

    StageResult result;
    result.checkpoint_dir = out_dir;
    int64_t consecutive_bad = 0;
    for (int64_t step = 1; step <= cfg.steps; step++) {
        TrainingSample sample = stream.next();
        m.params.zero_grads();
        Var loss = diffusion_loss(m, sample, schedule, diff_rng);
        float lv = loss->value[0];
        if (!std::isfinite(lv)) {
            result.nonfinite_skipped++;
            PA_CHECK(++consecutive_bad < 20, "training diverged: 20 consecutive non-finite losses");
            log << nlohmann::json{{"step", step},
                                  {"stage", stage_name(cfg.stage)},
                                  {"event", "nonfinite_loss_skipped"}}
                    .dump()
                << "\n";
            continue;
        }
        consecutive_bad = 0;
        backward(loss);
        opt.step();
        result.losses.push_back(lv);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
            log << nlohmann::json{{"step", step},
                                  {"stage", stage_name(cfg.stage)},
                                  {"loss", lv},
                                  {"lr", cfg.lr}}
                    .dump()
                << "\n";
            log.flush();
        }
    }

    for (auto& [p, flag] : saved_flags) p->requires_grad = flag;
    PA_CHECK(m.params.hash_named(frozen) == frozen_before,
             "frozen parameters changed during " + stage_name(cfg.stage));
    save_checkpoint(m, out_dir, stage_name(cfg.stage), cfg.steps);
    return result;
}

}  // namespace pa
