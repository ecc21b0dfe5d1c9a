#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "drip/common.hpp"

namespace drip {

// Dense rank-4 tensor, row-major (batch, row, col, channel).
template <typename T>
struct Tensor4T {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor4T() = default;
    Tensor4T(int n_, int h_, int w_, int c_, T fill = T(0))
        : n(n_), h(h_), w(w_), c(c_), v(static_cast<std::size_t>(n_) * h_ * w_ * c_, fill) {
        if (n_ < 1 || h_ < 1 || w_ < 1 || c_ < 1)
            throw ShapeError("Tensor4: all dims must be >= 1");
    }

    std::size_t size() const { return v.size(); }

    T& at(int in, int ih, int iw, int ic) {
        return v[((static_cast<std::size_t>(in) * h + ih) * w + iw) * c + ic];
    }
    T at(int in, int ih, int iw, int ic) const {
        return v[((static_cast<std::size_t>(in) * h + ih) * w + iw) * c + ic];
    }

    bool same_dims(const Tensor4T& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    Tensor4T<U> cast() const {
        Tensor4T<U> out(n, h, w, c);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using Tensor4 = Tensor4T<float>;

template <typename T>
inline void require_same_dims(const Tensor4T<T>& a, const Tensor4T<T>& b, const char* who) {
    if (!a.same_dims(b)) throw ShapeError(std::string(who) + ": tensor dims differ");
}

}  // namespace drip
