#pragma once

#include <string>
#include <vector>

#include "core/module.h"

namespace pa {

// Parameter bookkeeping for the frame-axis attention layers. Layer insertion
// itself lives on UNet (insert_temporal_layers); these helpers address the
// inserted parameters as a set, which is what stage-2 training, checkpoint
// grouping and external initialisation need.

// True for parameters declared by a temporal layer.
bool is_temporal_param(const std::string& name);

// All / complement of temporal parameter names currently in the store,
// restricted to names starting with `prefix.` when prefix is non-empty.
std::vector<std::string> temporal_param_names(const ParamStore& ps, const std::string& prefix = "");
std::vector<std::string> non_temporal_param_names(const ParamStore& ps,
                                                  const std::string& prefix = "");

// Replaces every temporal parameter from a blob written by save_params.
// The blob must cover the store's temporal set exactly (same names, same
// shapes); any deviation rejects the whole load, listing each offending
// layer, and leaves the store untouched. Non-temporal parameters are never
// written.
void load_temporal_init(ParamStore& ps, const std::string& blob_path);

}  // namespace pa
