// Exercises the C ABI end to end: model lifecycle, corpus synthesis, the
// three-stage training chain with its ordering guarantees, animation, and the
// audit report. Links only the shared library, like any external consumer.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "portanim.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// 32x32 model small enough that every training call here stays sub-second.
const char* kTinyModel = R"({
  "image_hw": 32, "base_channels": 16, "channel_mult": [1, 2],
  "norm_groups": 4, "heads": 2, "context_dim": 32, "temb_dim": 32,
  "seed": 7
})";

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pa_capi_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str(const char* sub = nullptr) const {
        return sub ? (path / sub).string() : path.string();
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

struct Str {
    char* p = nullptr;
    ~Str() { pa_string_free(p); }
    json parse() const { return json::parse(p); }
};

struct Model {
    pa_model* m = nullptr;
    ~Model() { pa_model_free(m); }
};

std::string synth_small(const TempDir& tmp, int videos = 3, int frames = 40) {
    std::string dir = tmp.str("corpus");
    json cfg = {{"n_videos", videos}, {"frames_per_video", frames},
                {"height", 32},       {"width", 32},
                {"seed", 5}};
    Str s;
    REQUIRE(pa_synth_corpus(cfg.dump().c_str(), dir.c_str(), &s.p) == PA_OK);
    return dir;
}

json run_cfg(int steps) {
    return json{{"steps", steps},
                {"lr", 1e-4},
                {"seed", 3},
                {"schedule_T", 100},
                {"log_every", 2},
                {"data", {{"clip_length", 4}, {"stride", 2}}}};
}

}  // namespace

TEST_CASE("version and error strings") {
    CHECK(std::string(pa_api_version()) == "1.0.0");
    CHECK(pa_last_error() != nullptr);  // never null, even before any error

    pa_model* m = nullptr;
    CHECK(pa_model_create("{ not json", &m) == PA_ERR_INVALID_ARGUMENT);
    CHECK(std::string(pa_last_error()).find("model config") != std::string::npos);
    CHECK(pa_model_create(R"({"image_hw": 40})", &m) == PA_ERR_INVALID_ARGUMENT);
    CHECK(pa_model_create(R"({"imagehw": 32})", &m) == PA_ERR_INVALID_ARGUMENT);
    CHECK(std::string(pa_last_error()).find("imagehw") != std::string::npos);
    CHECK(m == nullptr);

    pa_string_free(nullptr);  // must be a no-op
    pa_model_free(nullptr);
}

TEST_CASE("model create and describe") {
    Model m;
    REQUIRE(pa_model_create(kTinyModel, &m.m) == PA_OK);
    REQUIRE(m.m != nullptr);

    Str d;
    REQUIRE(pa_model_describe(m.m, &d.p) == PA_OK);
    json j = d.parse();
    CHECK(j.at("c_lat") == 48);
    CHECK(j.at("latent_hw") == 8);
    CHECK(j.at("bundle_channels") == 2 * 48 + 128 + 1);
    CHECK(j.at("temporal") == false);
    CHECK(j.at("config").at("image_hw") == 32);
    CHECK(j.at("parameters").get<int64_t>() > 0);

    bool saw_mid = false;
    for (const auto& s : j.at("attention_sites")) {
        if (s.at("site_id") == "mid") {
            saw_mid = true;
            CHECK(s.at("injection") == true);
        }
        if (s.at("site_id").get<std::string>().rfind("down", 0) == 0)
            CHECK(s.at("injection") == false);
    }
    CHECK(saw_mid);

    CHECK(pa_model_describe(nullptr, &d.p) == PA_ERR_INVALID_ARGUMENT);
}

TEST_CASE("synth corpus and stats") {
    TempDir tmp;
    std::string corpus = synth_small(tmp);
    CHECK(fs::exists(fs::path(corpus) / "manifest.jsonl"));
    CHECK(fs::exists(fs::path(corpus) / "video_000" / "frames.rgbv"));

    json pc = {{"samples", 25}, {"seed", 2}, {"data", {{"clip_length", 8}, {"stride", 2}}}};
    Str s;
    REQUIRE(pa_corpus_stats(corpus.c_str(), pc.dump().c_str(), &s.p) == PA_OK);
    json j = s.parse();
    CHECK(j.at("videos") == 3);
    CHECK(j.at("frames") == 120);
    CHECK(j.at("identities") == 3);
    CHECK(j.at("samples_checked") == 25);
    CHECK(j.at("mask_violations") == 0);
    CHECK(j.at("length_mismatches") == 0);
    int64_t total = 0;
    for (const auto& [k, v] : j.at("tag_counts").items()) total += v.get<int64_t>();
    CHECK(total == 25);

    CHECK(pa_corpus_stats(tmp.str("nowhere").c_str(), "{}", &s.p) == PA_ERR_IO);
    CHECK(std::string(pa_last_error()).find("nowhere") != std::string::npos);
}

TEST_CASE("training chain with stage ordering") {
    TempDir tmp;
    std::string corpus = synth_small(tmp);
    Model m;
    REQUIRE(pa_model_create(kTinyModel, &m.m) == PA_OK);

    std::string ck1 = tmp.str("ck1"), ckg = tmp.str("ckg"), ck2 = tmp.str("ck2");

    SUBCASE("stage2 without any checkpoint is a state error") {
        Str s;
        CHECK(pa_train_stage(m.m, "stage2", corpus.c_str(), run_cfg(1).dump().c_str(),
                             ck2.c_str(), nullptr, &s.p) == PA_ERR_STATE);
        CHECK(std::string(pa_last_error()).find("gaze_ft") != std::string::npos);
    }

    SUBCASE("unknown stage name") {
        Str s;
        CHECK(pa_train_stage(m.m, "stage9", corpus.c_str(), run_cfg(1).dump().c_str(),
                             ck2.c_str(), nullptr, &s.p) == PA_ERR_INVALID_ARGUMENT);
    }

    SUBCASE("missing corpus is an io error naming the path") {
        Str s;
        CHECK(pa_train_stage(m.m, "stage1", tmp.str("missing").c_str(),
                             run_cfg(1).dump().c_str(), ck1.c_str(), nullptr,
                             &s.p) == PA_ERR_IO);
        CHECK(std::string(pa_last_error()).find("missing") != std::string::npos);
    }

    SUBCASE("full chain, then reopen and animate") {
        Str s1;
        REQUIRE(pa_train_stage(m.m, "stage1", corpus.c_str(), run_cfg(3).dump().c_str(),
                               ck1.c_str(), nullptr, &s1.p) == PA_OK);
        json j1 = s1.parse();
        CHECK(j1.at("stage") == "stage1");
        CHECK(j1.at("completed_steps") == 3);
        CHECK(j1.at("seed") == 3);
        CHECK(j1.at("model").at("image_hw") == 32);
        CHECK(fs::exists(fs::path(ck1) / "manifest.json"));

        // stage2 directly on stage1: rejected, names the required stage
        Str bad;
        CHECK(pa_train_stage(m.m, "stage2", corpus.c_str(), run_cfg(1).dump().c_str(),
                             ck2.c_str(), ck1.c_str(), &bad.p) == PA_ERR_STATE);
        std::string msg = pa_last_error();
        CHECK(msg.find("gaze_ft") != std::string::npos);
        CHECK(msg.find("stage1") != std::string::npos);

        Str sg;
        REQUIRE(pa_train_stage(m.m, "gaze_ft", corpus.c_str(), run_cfg(2).dump().c_str(),
                               ckg.c_str(), ck1.c_str(), &sg.p) == PA_OK);
        Str s2;
        REQUIRE(pa_train_stage(m.m, "stage2", corpus.c_str(), run_cfg(2).dump().c_str(),
                               ck2.c_str(), ckg.c_str(), &s2.p) == PA_OK);
        CHECK(s2.parse().at("stage") == "stage2");

        Model reopened;
        REQUIRE(pa_model_open(ck2.c_str(), &reopened.m) == PA_OK);
        Str d;
        REQUIRE(pa_model_describe(reopened.m, &d.p) == PA_OK);
        CHECK(d.parse().at("temporal") == true);

        json ac = {{"reference_video", corpus + "/video_000"},
                   {"reference_frame", 0},
                   {"driving_video", corpus + "/video_001"},
                   {"output_dir", tmp.str("anim")},
                   {"window", 4},
                   {"overlap", 2},
                   {"steps", 2},
                   {"seed", 9},
                   {"write_pngs", false}};
        Str as;
        REQUIRE(pa_animate_video(reopened.m, ac.dump().c_str(), &as.p) == PA_OK);
        json aj = as.parse();
        CHECK(aj.at("frames") == 40);
        CHECK(aj.at("seed") == 9);
        CHECK(fs::exists(fs::path(tmp.str("anim")) / "frames.rgbv"));
    }

    SUBCASE("stage1 refuses an input checkpoint") {
        Str s;
        CHECK(pa_train_stage(m.m, "stage1", corpus.c_str(), run_cfg(1).dump().c_str(),
                             ck1.c_str(), tmp.str("whatever").c_str(), &s.p) == PA_ERR_STATE);
    }
}

TEST_CASE("model open failures") {
    TempDir tmp;
    pa_model* m = nullptr;
    CHECK(pa_model_open(tmp.str("nope").c_str(), &m) == PA_ERR_IO);
    CHECK(std::string(pa_last_error()).find("nope") != std::string::npos);
    CHECK(m == nullptr);
}

TEST_CASE("animate input validation") {
    Model m;
    REQUIRE(pa_model_create(kTinyModel, &m.m) == PA_OK);
    Str s;
    // both reference kinds set
    json both = {{"reference_video", "a"}, {"reference_image", "b.png"},
                 {"driving_video", "c"},   {"output_dir", "d"}};
    CHECK(pa_animate_video(m.m, both.dump().c_str(), &s.p) == PA_ERR_INVALID_ARGUMENT);
    // missing driving video on disk
    TempDir tmp;
    json miss = {{"reference_video", tmp.str("r")},
                 {"driving_video", tmp.str("gone")},
                 {"output_dir", tmp.str("o")}};
    CHECK(pa_animate_video(m.m, miss.dump().c_str(), &s.p) == PA_ERR_IO);
    CHECK(std::string(pa_last_error()).find("gone") != std::string::npos);
    // unknown key
    json unk = {{"driving", "x"}};
    CHECK(pa_animate_video(m.m, unk.dump().c_str(), &s.p) == PA_ERR_INVALID_ARGUMENT);
    CHECK(std::string(pa_last_error()).find("driving") != std::string::npos);
}

TEST_CASE("animate from a png reference") {
    TempDir tmp;
    std::string corpus = synth_small(tmp, 2, 12);
    Model m;
    REQUIRE(pa_model_create(kTinyModel, &m.m) == PA_OK);

    // The synthetic corpus stores rgbv only, so produce a png to use as the
    // reference by running one animate pass that writes frames.
    json ac0 = {{"reference_video", corpus + "/video_000"},
                {"reference_frame", 0},
                {"driving_video", corpus + "/video_001"},
                {"output_dir", tmp.str("seed_anim")},
                {"window", 4},  {"overlap", 2}, {"steps", 1}, {"write_pngs", true}};
    Str s0;
    REQUIRE(pa_animate_video(m.m, ac0.dump().c_str(), &s0.p) == PA_OK);
    std::string png = tmp.str("seed_anim") + "/frame_0000.png";
    REQUIRE(fs::exists(png));

    json ac = {{"reference_image", png},
               {"reference_box", {8, 8, 16, 16}},
               {"driving_video", corpus + "/video_001"},
               {"output_dir", tmp.str("anim2")},
               {"window", 4},  {"overlap", 2}, {"steps", 1}, {"write_pngs", false}};
    Str s;
    REQUIRE(pa_animate_video(m.m, ac.dump().c_str(), &s.p) == PA_OK);
    CHECK(s.parse().at("frames") == 12);

    json nobox = ac;
    nobox.erase("reference_box");
    nobox["output_dir"] = tmp.str("anim3");
    CHECK(pa_animate_video(m.m, nobox.dump().c_str(), &s.p) == PA_ERR_INVALID_ARGUMENT);
    CHECK(std::string(pa_last_error()).find("reference_box") != std::string::npos);
}

TEST_CASE("audit reports every structural check") {
    Str r;
    REQUIRE(pa_audit(kTinyModel, &r.p) == PA_OK);
    json j = r.parse();
    CHECK(j.at("all_pass") == true);
    REQUIRE(j.at("checks").size() == 4);
    std::set<std::string> names;
    for (const auto& c : j.at("checks")) {
        names.insert(c.at("name").get<std::string>());
        CHECK(c.at("pass") == true);
        CHECK(!c.at("detail").get<std::string>().empty());
    }
    CHECK(names == std::set<std::string>{"conditioning_neutrality", "temporal_identity",
                                         "injection_sites", "freeze_verification"});
}
