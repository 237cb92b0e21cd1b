#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lensless/errors.hpp"

namespace lensless {

/// Dense 2D array, row-major (y outer, x inner).
template <typename T>
struct Image {
    int ny = 0;
    int nx = 0;
    std::vector<T> v;

    Image() = default;
    Image(int ny_, int nx_, T fill = T(0)) : ny(ny_), nx(nx_), v(size_t(ny_) * nx_, fill) {}

    T& at(int y, int x) { return v[size_t(y) * nx + x]; }
    const T& at(int y, int x) const { return v[size_t(y) * nx + x]; }
    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
};

/// Dense 3D array, contiguous, z slowest then y then x.
template <typename T>
struct Tensor3 {
    int nz = 0;
    int ny = 0;
    int nx = 0;
    std::vector<T> v;

    Tensor3() = default;
    Tensor3(int nz_, int ny_, int nx_, T fill = T(0))
        : nz(nz_), ny(ny_), nx(nx_), v(size_t(nz_) * ny_ * nx_, fill) {}

    T& at(int z, int y, int x) { return v[(size_t(z) * ny + y) * nx + x]; }
    const T& at(int z, int y, int x) const { return v[(size_t(z) * ny + y) * nx + x]; }
    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    T* slice(int z) { return v.data() + size_t(z) * ny * nx; }
    const T* slice(int z) const { return v.data() + size_t(z) * ny * nx; }

    bool same_shape(const Tensor3& o) const { return nz == o.nz && ny == o.ny && nx == o.nx; }
};

template <typename T>
void require_shape(const Tensor3<T>& t, int nz, int ny, int nx, const std::string& what) {
    if (t.nz != nz || t.ny != ny || t.nx != nx)
        throw ValidationError(what + ": expected shape [" + std::to_string(nz) + ", " +
                              std::to_string(ny) + ", " + std::to_string(nx) + "], got [" +
                              std::to_string(t.nz) + ", " + std::to_string(t.ny) + ", " +
                              std::to_string(t.nx) + "]");
}

/// Dot product with 64-bit accumulation.
template <typename T>
double dot(const std::vector<T>& a, const std::vector<T>& b) {
    double s = 0.0;
    size_t n = a.size() < b.size() ? a.size() : b.size();
    for (size_t i = 0; i < n; ++i) s += double(a[i]) * double(b[i]);
    return s;
}

template <typename T>
double sq_norm(const std::vector<T>& a) {
    double s = 0.0;
    for (const T& x : a) s += double(x) * double(x);
    return s;
}

template <typename T>
double norm2(const std::vector<T>& a) {
    return std::sqrt(sq_norm(a));
}

template <typename T>
Tensor3<double> to_double(const Tensor3<T>& t) {
    Tensor3<double> out(t.nz, t.ny, t.nx);
    for (size_t i = 0; i < t.size(); ++i) out.v[i] = double(t.v[i]);
    return out;
}

template <typename T>
Image<double> to_double(const Image<T>& t) {
    Image<double> out(t.ny, t.nx);
    for (size_t i = 0; i < t.size(); ++i) out.v[i] = double(t.v[i]);
    return out;
}

}  // namespace lensless
