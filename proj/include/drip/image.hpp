#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drip/common.hpp"
#include "drip/tensor.hpp"

namespace drip {

// Interleaved 8-bit RGB image.
struct ImageU8 {
    int h = 0, w = 0;
    std::vector<std::uint8_t> rgb;  // h*w*3

    ImageU8() = default;
    ImageU8(int h_, int w_) : h(h_), w(w_), rgb(static_cast<std::size_t>(h_) * w_ * 3, 0) {}

    std::uint8_t* px(int y, int x) { return rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3; }
    const std::uint8_t* px(int y, int x) const {
        return rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    }
};

// Binary PPM (P6, maxval 255).
void write_ppm(const ImageU8& img, const std::string& path);
ImageU8 read_ppm(const std::string& path);

// Binary PGM (P5, maxval 255) for heat maps.
void write_pgm(const std::vector<std::uint8_t>& gray, int h, int w, const std::string& path);

// Quantize a [0,1] float frame (1,h,w,3) to bytes, round half up.
ImageU8 quantize_frame(const Tensor4& frame);

// Byte image to [0,1] float tensor (1,h,w,3).
Tensor4 frame_from_bytes(const ImageU8& img);

// Bilinear resample to (out_h, out_w), pixel-center convention. Scale 1 is the
// identity. Samples falling outside the source are clamped to the edge.
ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w);
Tensor4 resize_bilinear(const Tensor4& src, int out_h, int out_w);

// Largest centered square crop.
ImageU8 center_crop_square(const ImageU8& src);

}  // namespace drip
