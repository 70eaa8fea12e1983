#include "model/temporal.h"

#include <algorithm>
#include <cstring>
#include <map>
#include <set>

#include "core/error.h"
#include "io/params_io.h"

namespace pa {

bool is_temporal_param(const std::string& name) {
    return name.find(".temporal.") != std::string::npos;
}

namespace {

std::vector<std::string> select(const ParamStore& ps, const std::string& prefix, bool temporal) {
    std::vector<std::string> out;
    for (const auto& name : ps.names()) {
        if (!prefix.empty() && name.rfind(prefix + ".", 0) != 0) continue;
        if (is_temporal_param(name) == temporal) out.push_back(name);
    }
    return out;
}

}  // namespace

std::vector<std::string> temporal_param_names(const ParamStore& ps, const std::string& prefix) {
    return select(ps, prefix, true);
}

std::vector<std::string> non_temporal_param_names(const ParamStore& ps, const std::string& prefix) {
    return select(ps, prefix, false);
}

void load_temporal_init(ParamStore& ps, const std::string& blob_path) {
    auto entries = read_param_blob(blob_path);
    std::set<std::string> wanted;
    for (const auto& n : temporal_param_names(ps)) wanted.insert(n);
    PA_CHECK(!wanted.empty(), "temporal init: store has no temporal layers");

    // Validate the whole file before touching anything so a rejected load
    // leaves every parameter bitwise intact.
    std::vector<std::string> problems;
    std::map<std::string, const Tensor*> staged;
    for (const auto& [name, t] : entries) {
        if (!is_temporal_param(name)) {
            problems.push_back(name + ": not a temporal parameter");
            continue;
        }
        if (!wanted.count(name)) {
            problems.push_back(name + ": unknown temporal parameter");
            continue;
        }
        if (ps.get(name)->value.shape() != t.shape()) {
            problems.push_back(name + ": file " + t.shape_str() + " vs store " +
                               ps.get(name)->value.shape_str());
            continue;
        }
        staged[name] = &t;
    }
    for (const auto& name : wanted)
        if (!staged.count(name) &&
            std::find_if(problems.begin(), problems.end(),
                         [&](const std::string& p) { return p.rfind(name + ":", 0) == 0; }) ==
                problems.end())
            problems.push_back(name + ": missing from file");

    if (!problems.empty()) {
        std::string msg = "temporal init rejected:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(msg);
    }

    for (const auto& [name, t] : staged)
        std::memcpy(ps.get(name)->value.data(), t->data(), (size_t)t->numel() * sizeof(float));
}

}  // namespace pa
