#include "io/params_io.h"

#include <cstring>
#include <fstream>

#include "core/error.h"

namespace pa {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'B', 'L', 'O', 'B', '1', '\n'};

template <class T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    PA_CHECK(f.good(), "param blob: truncated file");
    return v;
}

}  // namespace

void save_params(const ParamStore& ps, const std::vector<std::string>& names,
                 const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    PA_CHECK(f.is_open(), "cannot open for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    put<uint64_t>(f, names.size());
    for (const auto& name : names) {
        Var p = ps.get(name);
        put<uint32_t>(f, (uint32_t)name.size());
        f.write(name.data(), (std::streamsize)name.size());
        const auto& shape = p->value.shape();
        put<uint32_t>(f, (uint32_t)shape.size());
        for (int64_t d : shape) put<int64_t>(f, d);
        f.write(reinterpret_cast<const char*>(p->value.data()),
                (std::streamsize)(p->value.numel() * (int64_t)sizeof(float)));
    }
    PA_CHECK(f.good(), "write failed: " + path);
}

void save_all_params(const ParamStore& ps, const std::string& path) {
    save_params(ps, ps.names(), path);
}

std::vector<std::pair<std::string, Tensor>> read_param_blob(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    PA_CHECK(f.is_open(), "cannot open param blob: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    PA_CHECK(f.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
             "not a param blob: " + path);
    const uint64_t count = get<uint64_t>(f);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = get<uint32_t>(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t rank = get<uint32_t>(f);
        std::vector<int64_t> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = get<int64_t>(f);
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()), (std::streamsize)(t.numel() * (int64_t)sizeof(float)));
        PA_CHECK(f.good(), "param blob: truncated tensor " + name);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

LoadReport load_params(ParamStore& ps, const std::string& path, bool strict) {
    LoadReport rep;
    for (auto& [name, t] : read_param_blob(path)) {
        if (!ps.has(name)) {
            PA_CHECK(!strict, "param blob has unknown parameter: " + name);
            rep.missing_in_store.push_back(name);
            continue;
        }
        Var p = ps.get(name);
        if (p->value.shape() != t.shape()) {
            std::string msg = name + ": file " + t.shape_str() + " vs store " + p->value.shape_str();
            PA_CHECK(!strict, "param blob shape mismatch: " + msg);
            rep.shape_mismatch.push_back(msg);
            continue;
        }
        std::memcpy(p->value.data(), t.data(), (size_t)t.numel() * sizeof(float));
        rep.loaded.push_back(name);
    }
    return rep;
}

}  // namespace pa
