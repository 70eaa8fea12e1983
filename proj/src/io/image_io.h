#pragma once

#include <string>

#include "core/tensor.h"

namespace pa {

// PNG, 8-bit RGB. Tensors are (3,H,W) float32 in [0,1]; writing quantizes
// with round(v*255), reading maps back as v/255.
void write_png(const std::string& path, const Tensor& frame);
Tensor read_png(const std::string& path);

// Raw video container (one file per clip): magic "RGBV1\n\0\0", u32 F,H,W,
// then F frames of planar CHW u8 RGB. Same quantization as PNG, so a frame
// written through either path reads back identically.
void write_video_raw(const std::string& path, const Tensor& frames);
Tensor read_video_raw(const std::string& path);

// Quantize to the u8 grid in-place semantics: returns round(v*255)/255 so
// in-memory pixels match what a write/read round trip would produce.
Tensor quantize_frames(const Tensor& frames);

}  // namespace pa
