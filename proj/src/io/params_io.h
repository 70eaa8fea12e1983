#pragma once

#include <string>
#include <vector>

#include "core/module.h"

namespace pa {

// Binary container for named float32 tensors:
//   magic "PABLOB1\n", then u64 count, then per tensor:
//   u32 name_len, name bytes, u32 rank, rank × i64 dims, numel × f32 data.
// Little-endian, written/read on the same platform class.
void save_params(const ParamStore& ps, const std::vector<std::string>& names,
                 const std::string& path);
void save_all_params(const ParamStore& ps, const std::string& path);

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> missing_in_store;  // in file, not in store
    std::vector<std::string> shape_mismatch;    // name: file-shape vs store-shape
};

// Copies stored tensors into same-named parameters. With strict=true any
// missing name or shape mismatch throws; otherwise it is reported.
LoadReport load_params(ParamStore& ps, const std::string& path, bool strict = true);

// Raw blob contents in file order, without touching any store. Lets callers
// validate a whole file before mutating anything.
std::vector<std::pair<std::string, Tensor>> read_param_blob(const std::string& path);

}  // namespace pa
