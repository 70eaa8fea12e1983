#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "core/graph.h"
#include "core/rng.h"

namespace pa {

// Flat registry of named parameters in deterministic (insertion) order.
// Names are hierarchical paths like "backbone.down0.res.conv1.weight".
class ParamStore {
public:
    Var add(const std::string& name, Tensor init, bool trainable = true);
    Var get(const std::string& name) const;
    bool has(const std::string& name) const { return by_name_.count(name) > 0; }
    const std::vector<Var>& all() const { return params_; }
    size_t size() const { return params_.size(); }

    std::vector<std::string> names() const;
    std::vector<Var> with_prefix(const std::string& prefix) const;

    void zero_grads();
    int64_t total_elements() const;

    // Content hash of one parameter / a set of parameters (used by the
    // freeze-verification checks and by reproducibility tests).
    static uint64_t hash_param(const Var& p);
    uint64_t hash_named(const std::vector<std::string>& names) const;

private:
    std::vector<Var> params_;
    std::unordered_map<std::string, Var> by_name_;
};

}  // namespace pa
