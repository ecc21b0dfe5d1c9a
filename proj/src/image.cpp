#include "drip/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace drip {

void write_ppm(const ImageU8& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!f) throw IoError("short write: " + path);
}

namespace {
int read_pnm_int(std::istream& f) {
    // skip whitespace and '#' comments
    int ch = f.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = f.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = f.get();
    }
    int val = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        val = val * 10 + (ch - '0');
        any = true;
        ch = f.get();
    }
    if (!any) throw FormatError("PNM header: expected integer");
    return val;
}
}  // namespace

ImageU8 read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '6') throw FormatError("not a P6 PPM: " + path);
    const int w = read_pnm_int(f);
    const int h = read_pnm_int(f);
    const int maxval = read_pnm_int(f);
    if (maxval != 255) throw FormatError("PPM maxval must be 255: " + path);
    if (w < 1 || h < 1) throw FormatError("PPM with empty dims: " + path);
    ImageU8 img(h, w);
    f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.rgb.size()))
        throw IoError("truncated PPM payload: " + path);
    return img;
}

void write_pgm(const std::vector<std::uint8_t>& gray, int h, int w, const std::string& path) {
    if (gray.size() != static_cast<std::size_t>(h) * w) throw ShapeError("write_pgm: size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!f) throw IoError("short write: " + path);
}

ImageU8 quantize_frame(const Tensor4& frame) {
    if (frame.n != 1 || frame.c != 3) throw ShapeError("quantize_frame: expected (1,h,w,3)");
    ImageU8 img(frame.h, frame.w);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) {
        const float v = std::clamp(frame.v[i], 0.0f, 1.0f);
        img.rgb[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
}

Tensor4 frame_from_bytes(const ImageU8& img) {
    if (img.h < 1 || img.w < 1) throw ParamError("frame_from_bytes: empty image");
    Tensor4 t(1, img.h, img.w, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) t.v[i] = img.rgb[i] / 255.0f;
    return t;
}

namespace {
// src coordinate of a dst pixel center; clamped sampling weights
struct Tap {
    int i0, i1;
    float f;
};
Tap tap_for(int dst, int dst_size, int src_size) {
    const float scale = static_cast<float>(src_size) / dst_size;
    float s = (dst + 0.5f) * scale - 0.5f;
    s = std::clamp(s, 0.0f, static_cast<float>(src_size - 1));
    Tap t;
    t.i0 = static_cast<int>(s);
    t.i1 = std::min(t.i0 + 1, src_size - 1);
    t.f = s - t.i0;
    return t;
}
}  // namespace

ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ParamError("resize_bilinear: empty target");
    if (out_h == src.h && out_w == src.w) return src;
    ImageU8 dst(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const Tap ty = tap_for(y, out_h, src.h);
        for (int x = 0; x < out_w; ++x) {
            const Tap tx = tap_for(x, out_w, src.w);
            const std::uint8_t* p00 = src.px(ty.i0, tx.i0);
            const std::uint8_t* p01 = src.px(ty.i0, tx.i1);
            const std::uint8_t* p10 = src.px(ty.i1, tx.i0);
            const std::uint8_t* p11 = src.px(ty.i1, tx.i1);
            std::uint8_t* o = dst.px(y, x);
            for (int c = 0; c < 3; ++c) {
                const float top = p00[c] + (p01[c] - p00[c]) * tx.f;
                const float bot = p10[c] + (p11[c] - p10[c]) * tx.f;
                o[c] = static_cast<std::uint8_t>(std::lround(top + (bot - top) * ty.f));
            }
        }
    }
    return dst;
}

Tensor4 resize_bilinear(const Tensor4& src, int out_h, int out_w) {
    if (src.n != 1) throw ShapeError("resize_bilinear: single-frame tensors only");
    if (out_h < 1 || out_w < 1) throw ParamError("resize_bilinear: empty target");
    if (out_h == src.h && out_w == src.w) return src;
    Tensor4 dst(1, out_h, out_w, src.c);
    for (int y = 0; y < out_h; ++y) {
        const Tap ty = tap_for(y, out_h, src.h);
        for (int x = 0; x < out_w; ++x) {
            const Tap tx = tap_for(x, out_w, src.w);
            for (int c = 0; c < src.c; ++c) {
                const float p00 = src.at(0, ty.i0, tx.i0, c);
                const float p01 = src.at(0, ty.i0, tx.i1, c);
                const float p10 = src.at(0, ty.i1, tx.i0, c);
                const float p11 = src.at(0, ty.i1, tx.i1, c);
                const float top = p00 + (p01 - p00) * tx.f;
                const float bot = p10 + (p11 - p10) * tx.f;
                dst.at(0, y, x, c) = top + (bot - top) * ty.f;
            }
        }
    }
    return dst;
}

ImageU8 center_crop_square(const ImageU8& src) {
    if (src.h < 1 || src.w < 1) throw ParamError("center_crop_square: empty image");
    const int side = std::min(src.h, src.w);
    const int off_y = (src.h - side) / 2;
    const int off_x = (src.w - side) / 2;
    if (side == src.h && side == src.w) return src;
    ImageU8 dst(side, side);
    for (int y = 0; y < side; ++y)
        std::copy(src.px(off_y + y, off_x), src.px(off_y + y, off_x) + side * 3, dst.px(y, 0));
    return dst;
}

}  // namespace drip
