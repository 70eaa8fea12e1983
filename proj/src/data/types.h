#pragma once

#include <string>
#include <vector>

#include "core/error.h"
#include "core/tensor.h"

namespace pa {

// Axis-aligned pixel rectangle, [x, x+w) × [y, y+h).
struct FaceBox {
    int64_t x = 0, y = 0, w = 0, h = 0;
    bool inside(int64_t px, int64_t py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
};

struct GazeAngles {
    float yaw = 0.0f;    // degrees, + right
    float pitch = 0.0f;  // degrees, + down
};

enum class SourceTag { real, swapped, stylized };

inline const char* to_string(SourceTag t) {
    switch (t) {
        case SourceTag::real: return "real";
        case SourceTag::swapped: return "swapped";
        case SourceTag::stylized: return "stylized";
    }
    return "?";
}

struct VideoClip {
    Tensor frames;                  // (F,3,H,W), float32 in [0,1]
    std::vector<FaceBox> face_box;  // one per frame
    std::vector<GazeAngles> gaze;   // one per frame
    std::string identity_id;
    SourceTag source_tag = SourceTag::real;

    int64_t length() const { return frames.defined() ? frames.dim(0) : 0; }
    int64_t height() const { return frames.dim(2); }
    int64_t width() const { return frames.dim(3); }

    void validate() const {
        PA_CHECK(frames.defined() && frames.ndim() == 4 && frames.dim(1) == 3,
                 "clip frames must be (F,3,H,W)");
        PA_CHECK(length() >= 1, "clip must have at least one frame");
        PA_CHECK((int64_t)face_box.size() == length() && (int64_t)gaze.size() == length(),
                 "clip metadata must cover every frame");
        for (const auto& b : face_box)
            PA_CHECK(b.x >= 0 && b.y >= 0 && b.w >= 0 && b.h >= 0 && b.x + b.w <= width() &&
                         b.y + b.h <= height(),
                     "face_box out of frame bounds");
    }

    // Deep copy (frames buffer included).
    VideoClip clone() const {
        VideoClip c = *this;
        c.frames = frames.clone();
        return c;
    }
};

// One unit of training data. `target` stays the original real frames no
// matter what was done to `driving`; the model must reconstruct reality
// from a perturbed pilot signal.
struct TrainingSample {
    VideoClip driving;        // perturbed, masked, augmented
    Tensor reference;         // (3,H,W) clean frame from the same clip
    Tensor fg_mask;           // (1,H,W), 1 inside the reference face box
    VideoClip target;         // original frames, bitwise
    SourceTag source_tag = SourceTag::real;
    int64_t reference_index = 0;  // position of the reference inside the clip
};

}  // namespace pa
