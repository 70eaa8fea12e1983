#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pa {

// One attention invocation observed during a forward pass. kind is "self",
// "cross" or "temporal"; reference-token injection widens kv_len of "self"
// events only, which is what the injection-site audit inspects.
struct AttentionEvent {
    std::string site_id;
    std::string kind;
    int64_t q_len = 0;
    int64_t kv_len = 0;
};

struct AttentionAudit {
    std::vector<AttentionEvent> events;

    std::vector<std::string> self_sites_with_extra_kv() const {
        std::vector<std::string> out;
        for (const auto& e : events)
            if (e.kind == "self" && e.kv_len > e.q_len) out.push_back(e.site_id);
        return out;
    }
};

}  // namespace pa
