#include "train/checkpoint.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "core/error.h"
#include "io/params_io.h"
#include "json.hpp"
#include "model/temporal.h"

namespace pa {

using nlohmann::json;

json model_to_json(const PortraitModelConfig& c) {
    return json{{"codec_id", c.codec_id},
                {"codec_seed", c.codec_seed},
                {"image_hw", c.image_hw},
                {"base_channels", c.base_channels},
                {"channel_mult", c.channel_mult},
                {"norm_groups", c.norm_groups},
                {"heads", c.heads},
                {"context_dim", c.context_dim},
                {"temb_dim", c.temb_dim},
                {"context_patch", c.context_patch},
                {"context_heads", c.context_heads},
                {"context_depth", c.context_depth},
                {"seed", c.seed},
                {"temporal", c.temporal}};
}

PortraitModelConfig model_from_json(const json& j, bool strict) {
    PA_CHECK(j.is_object(), "model config must be a JSON object");
    static const std::set<std::string> known = {
        "codec_id",    "codec_seed",    "image_hw",      "base_channels", "channel_mult",
        "norm_groups", "heads",         "context_dim",   "temb_dim",      "context_patch",
        "context_heads", "context_depth", "seed",        "temporal"};
    for (const auto& [key, v] : j.items())
        PA_CHECK(known.count(key), "model config: unknown field \"" + key + "\"");

    PortraitModelConfig c;
    auto want = [&](const char* key) {
        bool present = j.contains(key);
        PA_CHECK(present || !strict, std::string("model config: missing field \"") + key + "\"");
        return present;
    };
    try {
        if (want("codec_id")) c.codec_id = j.at("codec_id").get<std::string>();
        if (want("codec_seed")) c.codec_seed = j.at("codec_seed").get<uint64_t>();
        if (want("image_hw")) c.image_hw = j.at("image_hw").get<int64_t>();
        if (want("base_channels")) c.base_channels = j.at("base_channels").get<int64_t>();
        if (want("channel_mult")) c.channel_mult = j.at("channel_mult").get<std::vector<int64_t>>();
        if (want("norm_groups")) c.norm_groups = j.at("norm_groups").get<int64_t>();
        if (want("heads")) c.heads = j.at("heads").get<int64_t>();
        if (want("context_dim")) c.context_dim = j.at("context_dim").get<int64_t>();
        if (want("temb_dim")) c.temb_dim = j.at("temb_dim").get<int64_t>();
        if (want("context_patch")) c.context_patch = j.at("context_patch").get<int64_t>();
        if (want("context_heads")) c.context_heads = j.at("context_heads").get<int64_t>();
        if (want("context_depth")) c.context_depth = j.at("context_depth").get<int64_t>();
        if (want("seed")) c.seed = j.at("seed").get<uint64_t>();
        if (want("temporal")) c.temporal = j.at("temporal").get<bool>();
    } catch (const json::exception& e) {
        throw Error(std::string("model config: ") + e.what());
    }
    return c;
}

void save_checkpoint(const PortraitModel& m, const std::string& dir, const std::string& stage,
                     int64_t steps) {
    std::filesystem::create_directories(dir);
    save_params(m.params, non_temporal_param_names(m.params), dir + "/params.bin");
    auto tnames = temporal_param_names(m.params);
    if (!tnames.empty()) save_params(m.params, tnames, dir + "/temporal.bin");

    json j{{"format_version", 1},
           {"stage", stage},
           {"steps", steps},
           {"has_temporal", !tnames.empty()},
           {"model", model_to_json(m.config())}};
    std::ofstream f(dir + "/manifest.json", std::ios::trunc);
    PA_CHECK(f.is_open(), "cannot write checkpoint manifest in " + dir);
    f << j.dump(2) << "\n";
    PA_CHECK(f.good(), "checkpoint manifest write failed in " + dir);
}

CheckpointManifest read_manifest(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    PA_CHECK(f.is_open(), "missing checkpoint manifest: " + dir + "/manifest.json");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw Error("unreadable checkpoint manifest in " + dir + ": " + e.what());
    }
    CheckpointManifest man;
    man.format_version = j.at("format_version").get<int>();
    PA_CHECK(man.format_version == 1, "unsupported checkpoint format version");
    man.stage = j.at("stage").get<std::string>();
    man.steps = j.at("steps").get<int64_t>();
    man.has_temporal = j.at("has_temporal").get<bool>();
    man.model = model_from_json(j.at("model"));
    return man;
}

PortraitModelConfig model_config_from_checkpoint(const std::string& dir) {
    return read_manifest(dir).model;
}

CheckpointManifest load_checkpoint(PortraitModel& m, const std::string& dir) {
    CheckpointManifest man = read_manifest(dir);
    PA_CHECK(!man.has_temporal || m.has_temporal(),
             "checkpoint " + dir + " carries temporal layers; build the model with temporal=true");

    LoadReport rep = load_params(m.params, dir + "/params.bin", /*strict=*/true);
    std::set<std::string> loaded(rep.loaded.begin(), rep.loaded.end());
    for (const auto& name : non_temporal_param_names(m.params))
        PA_CHECK(loaded.count(name), "checkpoint " + dir + " does not cover parameter " + name);

    if (man.has_temporal) {
        LoadReport trep = load_params(m.params, dir + "/temporal.bin", /*strict=*/true);
        std::set<std::string> tloaded(trep.loaded.begin(), trep.loaded.end());
        for (const auto& name : temporal_param_names(m.params))
            PA_CHECK(tloaded.count(name),
                     "checkpoint " + dir + " does not cover temporal parameter " + name);
    }
    return man;
}

}  // namespace pa
