// Command-line front end. Talks to the core exclusively through the C API in
// portanim.h, so it exercises the same surface any other binding would.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "portanim.h"

using nlohmann::json;

namespace {

int fail(pa_status st, const std::string& context) {
    std::cerr << "error";
    if (!context.empty()) std::cerr << " (" << context << ")";
    std::cerr << ": " << pa_last_error() << "\n";
    return (int)st;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f.is_open()) {
        std::cerr << "error: cannot open config file " << path << "\n";
        std::exit((int)PA_ERR_IO);
    }
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        std::cerr << "error: " << path << ": " << e.what() << "\n";
        std::exit((int)PA_ERR_INVALID_ARGUMENT);
    }
}

// "a.b.c=value" — value parsed as JSON when possible, else taken as a string.
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        size_t eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --set expects key.path=value, got \"" << s << "\"\n";
            std::exit((int)PA_ERR_INVALID_ARGUMENT);
        }
        std::string path = s.substr(0, eq), value = s.substr(eq + 1);
        json* node = &cfg;
        size_t pos = 0;
        while (true) {
            size_t dot = path.find('.', pos);
            std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
            if (dot == std::string::npos) {
                json v;
                try {
                    v = json::parse(value);
                } catch (const json::exception&) {
                    v = value;
                }
                (*node)[key] = v;
                break;
            }
            node = &(*node)[key];
            pos = dot + 1;
        }
    }
}

// Objects merge recursively; anything else in `over` replaces.
json deep_merge(json base, const json& over) {
    if (!base.is_object() || !over.is_object()) return over;
    for (const auto& [k, v] : over.items())
        base[k] = base.contains(k) ? deep_merge(base[k], v) : v;
    return base;
}

json profile_model(const std::string& profile) {
    if (profile == "toy")
        return json{{"codec_id", "space_to_depth"}, {"image_hw", 64},
                    {"base_channels", 32},          {"channel_mult", {1, 2, 4}},
                    {"norm_groups", 8},             {"heads", 4},
                    {"context_dim", 64},            {"temb_dim", 128},
                    {"context_patch", 8}};
    if (profile == "full")  // paper-scale dims; expressible but far beyond CPU budgets
        return json{{"codec_id", "learned_tiny"}, {"image_hw", 512},
                    {"base_channels", 320},       {"channel_mult", {1, 2, 4, 4}},
                    {"norm_groups", 32},          {"heads", 8},
                    {"context_dim", 768},         {"temb_dim", 1280},
                    {"context_patch", 32},        {"context_heads", 8},
                    {"context_depth", 2}};
    std::cerr << "error: unknown profile \"" << profile << "\" (toy|full)\n";
    std::exit((int)PA_ERR_INVALID_ARGUMENT);
}

// The stage presets that differ from sampler defaults: gaze fine-tuning reads
// the corpus at a sparse stride and keeps only the most eye-active clips.
json stage_defaults(const std::string& stage) {
    if (stage == "gaze_ft")
        return json{{"data", {{"stride", 12}, {"gaze_top_fraction", 0.05}}}};
    return json::object();
}

json effective_run_config(const json& cfg, const std::string& stage) {
    json run = stage_defaults(stage);
    if (cfg.contains("data")) run = deep_merge(run, json{{"data", cfg.at("data")}});
    if (cfg.contains("stages") && cfg.at("stages").contains(stage))
        run = deep_merge(run, cfg.at("stages").at(stage));
    if (!run.contains("seed") && cfg.contains("seed")) run["seed"] = cfg.at("seed");
    return run;
}

void write_summary(const char* summary, const std::string& summary_path,
                   const std::string& config_file, const std::string& profile) {
    json j = summary ? json::parse(summary) : json::object();
    if (!config_file.empty()) j["config_file"] = config_file;
    if (!profile.empty()) j["profile"] = profile;
    std::string text = j.dump(2);
    std::cout << text << "\n";
    if (!summary_path.empty()) {
        std::ofstream f(summary_path, std::ios::trunc);
        if (!f.is_open()) {
            std::cerr << "error: cannot write summary to " << summary_path << "\n";
            std::exit((int)PA_ERR_IO);
        }
        f << text << "\n";
    }
}

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { pa_string_free(p); }
};

struct OwnedModel {
    pa_model* m = nullptr;
    ~OwnedModel() { pa_model_free(m); }
};

int run_train(const std::string& stage, const json& cfg, const std::string& model_json,
              const std::string& corpus, const std::string& out, const std::string& input,
              const std::string& summary_path, const std::string& config_file,
              const std::string& profile) {
    OwnedModel model;
    pa_status st;
    if (input.empty()) {
        st = pa_model_create(model_json.c_str(), &model.m);
    } else {
        st = pa_model_open(input.c_str(), &model.m);
    }
    if (st != PA_OK) return fail(st, stage);

    std::string run = effective_run_config(cfg, stage).dump();
    OwnedString summary;
    st = pa_train_stage(model.m, stage.c_str(), corpus.c_str(), run.c_str(), out.c_str(),
                        input.empty() ? nullptr : input.c_str(), &summary.p);
    if (st != PA_OK) return fail(st, stage);
    write_summary(summary.p, summary_path, config_file, profile);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"portanim — conditional-diffusion portrait animation"};
    app.require_subcommand(1);

    std::string config_file, profile = "toy", summary_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_file, "JSON config file")->expected(1);
    app.add_option("--profile", profile, "model preset: toy|full")->expected(1);
    app.add_option("--set", sets, "override config keys, e.g. --set stages.stage1.steps=50");
    app.add_option("--summary", summary_path, "also write the run summary JSON here");

    std::string corpus, out_dir, input_ckpt, checkpoint;
    std::string ref_video, ref_image, driving;
    int64_t ref_frame = -1;
    std::vector<int64_t> ref_box;

    CLI::App* c_synth = app.add_subcommand("synth", "render a synthetic corpus");
    c_synth->fallthrough();
    c_synth->add_option("--out", out_dir, "corpus output directory")->required();

    CLI::App* c_pre = app.add_subcommand("preprocess", "validate a corpus and report sampler stats");
    c_pre->fallthrough();
    c_pre->add_option("--corpus", corpus, "corpus directory")->required();

    auto add_train = [&](const char* name, const char* desc, bool needs_input) {
        CLI::App* c = app.add_subcommand(name, desc);
        c->fallthrough();
        c->add_option("--corpus", corpus, "corpus directory")->required();
        c->add_option("--out", out_dir, "checkpoint output directory")->required();
        if (needs_input)
            c->add_option("--input", input_ckpt, "input checkpoint directory")->required();
        return c;
    };
    add_train("train-stage1", "train appearance/motion conditioning from scratch", false);
    add_train("finetune-gaze", "fine-tune on eye-motion-heavy clips", true);
    add_train("train-stage2", "train temporal layers only", true);

    CLI::App* c_anim = app.add_subcommand("animate", "drive a reference portrait with a video");
    c_anim->fallthrough();
    c_anim->add_option("--checkpoint", checkpoint, "trained checkpoint directory")->required();
    c_anim->add_option("--driving", driving, "driving video directory");
    c_anim->add_option("--reference-video", ref_video, "corpus video directory for the reference");
    c_anim->add_option("--reference-frame", ref_frame, "frame index inside --reference-video");
    c_anim->add_option("--reference-image", ref_image, "reference PNG");
    c_anim->add_option("--reference-box", ref_box, "face box x y w h for --reference-image")
        ->expected(4);
    c_anim->add_option("--out", out_dir, "output directory");

    CLI::App* c_audit = app.add_subcommand("audit", "run the structural invariant suite");
    c_audit->fallthrough();

    CLI11_PARSE(app, argc, argv);

    json cfg = load_config_file(config_file);
    apply_overrides(cfg, sets);
    if (cfg.contains("profile")) profile = cfg.at("profile").get<std::string>();

    json model_cfg = profile_model(profile);
    if (cfg.contains("model")) model_cfg = deep_merge(model_cfg, cfg.at("model"));
    std::string model_json = model_cfg.dump();

    if (c_synth->parsed()) {
        json s = cfg.contains("synth") ? cfg.at("synth") : json::object();
        if (!s.contains("seed") && cfg.contains("seed")) s["seed"] = cfg.at("seed");
        OwnedString summary;
        pa_status st = pa_synth_corpus(s.dump().c_str(), out_dir.c_str(), &summary.p);
        if (st != PA_OK) return fail(st, "synth");
        write_summary(summary.p, summary_path, config_file, "");
        return 0;
    }

    if (c_pre->parsed()) {
        json p = cfg.contains("preprocess") ? cfg.at("preprocess") : json::object();
        if (cfg.contains("data")) p["data"] = deep_merge(cfg.at("data"), p.value("data", json::object()));
        if (!p.contains("seed") && cfg.contains("seed")) p["seed"] = cfg.at("seed");
        OwnedString summary;
        pa_status st = pa_corpus_stats(corpus.c_str(), p.dump().c_str(), &summary.p);
        if (st != PA_OK) return fail(st, "preprocess");
        write_summary(summary.p, summary_path, config_file, "");
        return 0;
    }

    if (app.get_subcommand("train-stage1")->parsed())
        return run_train("stage1", cfg, model_json, corpus, out_dir, "", summary_path,
                         config_file, profile);
    if (app.get_subcommand("finetune-gaze")->parsed())
        return run_train("gaze_ft", cfg, model_json, corpus, out_dir, input_ckpt, summary_path,
                         config_file, profile);
    if (app.get_subcommand("train-stage2")->parsed())
        return run_train("stage2", cfg, model_json, corpus, out_dir, input_ckpt, summary_path,
                         config_file, profile);

    if (c_anim->parsed()) {
        OwnedModel model;
        pa_status st = pa_model_open(checkpoint.c_str(), &model.m);
        if (st != PA_OK) return fail(st, "animate");
        json a = cfg.contains("animate") ? cfg.at("animate") : json::object();
        if (!driving.empty()) a["driving_video"] = driving;
        if (!ref_video.empty()) a["reference_video"] = ref_video;
        if (ref_frame >= 0) a["reference_frame"] = ref_frame;
        if (!ref_image.empty()) a["reference_image"] = ref_image;
        if (!ref_box.empty()) a["reference_box"] = ref_box;
        if (!out_dir.empty()) a["output_dir"] = out_dir;
        if (!a.contains("seed") && cfg.contains("seed")) a["seed"] = cfg.at("seed");
        OwnedString summary;
        st = pa_animate_video(model.m, a.dump().c_str(), &summary.p);
        if (st != PA_OK) return fail(st, "animate");
        write_summary(summary.p, summary_path, config_file, "");
        return 0;
    }

    if (c_audit->parsed()) {
        OwnedString report;
        pa_status st = pa_audit(model_json.c_str(), &report.p);
        if (st != PA_OK) return fail(st, "audit");
        json r = json::parse(report.p);
        for (const auto& c : r.at("checks"))
            std::cout << "check " << c.at("name").get<std::string>() << ": "
                      << (c.at("pass").get<bool>() ? "PASS" : "FAIL") << " — "
                      << c.at("detail").get<std::string>() << "\n";
        write_summary(report.p, summary_path, config_file, profile);
        return r.at("all_pass").get<bool>() ? 0 : 1;
    }
    return 0;
}
