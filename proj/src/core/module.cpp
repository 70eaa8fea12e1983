#include "core/module.h"

#include "core/error.h"

namespace pa {

Var ParamStore::add(const std::string& name, Tensor init, bool trainable) {
    PA_CHECK(!by_name_.count(name), "duplicate parameter name: " + name);
    Var p = leaf(std::move(init), trainable, name);
    params_.push_back(p);
    by_name_[name] = p;
    return p;
}

Var ParamStore::get(const std::string& name) const {
    auto it = by_name_.find(name);
    PA_CHECK(it != by_name_.end(), "unknown parameter: " + name);
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->name);
    return out;
}

std::vector<Var> ParamStore::with_prefix(const std::string& prefix) const {
    std::vector<Var> out;
    for (const auto& p : params_)
        if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

int64_t ParamStore::total_elements() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
}

uint64_t ParamStore::hash_param(const Var& p) {
    return fnv1a64(p->value.data(), (size_t)p->value.numel() * sizeof(float));
}

uint64_t ParamStore::hash_named(const std::vector<std::string>& names) const {
    uint64_t h = 14695981039346656037ull;
    for (const auto& name : names) {
        Var p = get(name);
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(p->value.data(), (size_t)p->value.numel() * sizeof(float), h);
    }
    return h;
}

}  // namespace pa
