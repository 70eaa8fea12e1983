#pragma once

#include <string>
#include <vector>

#include "model/model.h"

namespace pa {

// One invariant verdict; `detail` carries the measured quantity (max
// deviation, site list, hash status) or the failure message.
struct AuditCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AuditOptions {
    int64_t bundles = 10;      // conditioning-neutrality probes
    int64_t stage_steps = 2;   // length of the freeze-verification mini runs
    int64_t clip_length = 2;   // frames per training sample in those runs
    std::string scratch_dir;   // empty: system temp; always cleaned up
};

// Structural invariant suite over a model configuration. Builds fresh
// models internally (never mutates caller state):
//   conditioning_neutrality — widened input channels are inert at init
//   temporal_identity       — inserting temporal layers is a no-op at init
//   injection_sites         — reference tokens reach exactly mid+up attention
//   freeze_verification     — short stage runs leave frozen parameters intact
std::vector<AuditCheck> run_audit(const PortraitModelConfig& cfg, const AuditOptions& opts = {});

bool all_pass(const std::vector<AuditCheck>& checks);

}  // namespace pa
