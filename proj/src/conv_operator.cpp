#include "lensless/conv_operator.hpp"

#include <cmath>

#include "lensless/errors.hpp"

namespace lensless {

template <typename T>
ConvOperator<T>::ConvOperator(const PsfStack& stack)
    : nz_(stack.nz()), ny_(stack.ny()), nx_(stack.nx()),
      fft_(stack.nz(), 2 * stack.ny(), 2 * stack.nx()) {
    validate_stack(stack);

    // Kernel on the padded lattice: slice k sits at lateral offset
    // (ny/2, nx/2), the index of the on-axis voxel, so that a centered unit
    // voxel at depth k reproduces slice k exactly.
    const int cy = ny_ / 2, cx = nx_ / 2;
    std::vector<T> kernel(fft_.real_count(), T(0));
    for (int k = 0; k < nz_; ++k) {
        const auto& s = stack.slices[k];
        for (int y = 0; y < ny_; ++y) {
            T* row = kernel.data() + (size_t(k) * pad_ny() + (y + cy)) * pad_nx() + cx;
            for (int x = 0; x < nx_; ++x) row[x] = T(s.at(y, x));
        }
    }
    otf_.resize(fft_.spec_count());
    fft_.forward(kernel.data(), otf_.data());
    otf_power_.resize(otf_.size());
    for (size_t i = 0; i < otf_.size(); ++i) otf_power_[i] = std::norm(otf_[i]);
}

template <typename T>
Tensor3<T> ConvOperator<T>::embed(const Tensor3<T>& x) const {
    require_shape(x, nz_, ny_, nx_, "volume");
    Tensor3<T> xp(nz_, pad_ny(), pad_nx());
    for (int k = 0; k < nz_; ++k)
        for (int y = 0; y < ny_; ++y)
            std::copy_n(&x.at(k, y, 0), nx_, &xp.at(k, y, 0));
    return xp;
}

template <typename T>
Tensor3<T> ConvOperator<T>::restrict_window(const Tensor3<T>& xp) const {
    require_shape(xp, nz_, pad_ny(), pad_nx(), "padded volume");
    Tensor3<T> x(nz_, ny_, nx_);
    for (int k = 0; k < nz_; ++k)
        for (int y = 0; y < ny_; ++y)
            std::copy_n(&xp.at(k, y, 0), nx_, &x.at(k, y, 0));
    return x;
}

template <typename T>
Tensor3<T> ConvOperator<T>::embed_sensor(const Image<T>& b) const {
    if (b.ny != ny_ || b.nx != nx_) throw ValidationError("sensor image shape mismatch");
    Tensor3<T> bp(nz_, pad_ny(), pad_nx());
    for (int y = 0; y < ny_; ++y) std::copy_n(&b.at(y, 0), nx_, &bp.at(0, y, 0));
    return bp;
}

template <typename T>
Image<T> ConvOperator<T>::crop_sensor(const Tensor3<T>& xp) const {
    require_shape(xp, nz_, pad_ny(), pad_nx(), "padded volume");
    Image<T> b(ny_, nx_);
    for (int y = 0; y < ny_; ++y) std::copy_n(&xp.at(0, y, 0), nx_, &b.at(y, 0));
    return b;
}

template <typename T>
void ConvOperator<T>::conv_padded(const Tensor3<T>& xp, Tensor3<T>& out) const {
    require_shape(xp, nz_, pad_ny(), pad_nx(), "padded volume");
    std::vector<std::complex<T>> spec(fft_.spec_count());
    fft_.forward(xp.v.data(), spec.data());
    // y(t) = sum_u x(u) h(t+u)  <=>  Y = H · conj(X)
    for (size_t i = 0; i < spec.size(); ++i) spec[i] = otf_[i] * std::conj(spec[i]);
    if (!out.same_shape(xp)) out = Tensor3<T>(nz_, pad_ny(), pad_nx());
    fft_.inverse(spec.data(), out.v.data());
}

template <typename T>
Image<T> ConvOperator<T>::apply(const Tensor3<T>& x) const {
    Tensor3<T> xp = embed(x);
    Tensor3<T> yp;
    conv_padded(xp, yp);
    return crop_sensor(yp);
}

template <typename T>
Tensor3<T> ConvOperator<T>::adjoint(const Image<T>& b) const {
    Tensor3<T> bp = embed_sensor(b);
    Tensor3<T> yp;
    conv_padded(bp, yp);
    return restrict_window(yp);
}

namespace {
inline int wrap_up(int i, int n) { return i + 1 < n ? i + 1 : 0; }
inline int wrap_dn(int i, int n) { return i > 0 ? i - 1 : n - 1; }
}  // namespace

template <typename T>
PsiCoeffs<T> psi_apply(const Tensor3<T>& x, PsiMode mode) {
    PsiCoeffs<T> g;
    if (mode == PsiMode::Identity) {
        g.c.push_back(x);
        return g;
    }
    const int nz = x.nz, ny = x.ny, nx = x.nx;
    g.c.assign(3, Tensor3<T>(nz, ny, nx));
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int xx = 0; xx < nx; ++xx) {
                T v = x.at(z, y, xx);
                g.c[0].at(z, y, xx) = x.at(z, y, wrap_up(xx, nx)) - v;
                g.c[1].at(z, y, xx) = x.at(z, wrap_up(y, ny), xx) - v;
                g.c[2].at(z, y, xx) = x.at(wrap_up(z, nz), y, xx) - v;
            }
        }
    }
    return g;
}

template <typename T>
Tensor3<T> psi_adjoint(const PsiCoeffs<T>& g, PsiMode mode) {
    if (mode == PsiMode::Identity) {
        if (g.c.size() != 1) throw ValidationError("identity coefficients need 1 component");
        return g.c[0];
    }
    if (g.c.size() != 3) throw ValidationError("tv3d coefficients need 3 components");
    const int nz = g.c[0].nz, ny = g.c[0].ny, nx = g.c[0].nx;
    Tensor3<T> x(nz, ny, nx);
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int xx = 0; xx < nx; ++xx) {
                // adjoint of the forward difference: g(i-1) - g(i), circular
                x.at(z, y, xx) = g.c[0].at(z, y, wrap_dn(xx, nx)) - g.c[0].at(z, y, xx) +
                                 g.c[1].at(z, wrap_dn(y, ny), xx) - g.c[1].at(z, y, xx) +
                                 g.c[2].at(wrap_dn(z, nz), y, xx) - g.c[2].at(z, y, xx);
            }
        }
    }
    return x;
}

template <typename T>
std::vector<T> psi_gram_spectrum(int nz, int ny, int nx, PsiMode mode) {
    const int nxh = nx / 2 + 1;
    std::vector<T> s(size_t(nz) * ny * nxh);
    if (mode == PsiMode::Identity) {
        std::fill(s.begin(), s.end(), T(1));
        return s;
    }
    constexpr double kPi = 3.14159265358979323846;
    auto axis = [](int k, int n) {
        double t = std::sin(kPi * k / n);
        return 4.0 * t * t;
    };
    size_t i = 0;
    for (int kz = 0; kz < nz; ++kz)
        for (int ky = 0; ky < ny; ++ky)
            for (int kx = 0; kx < nxh; ++kx, ++i)
                s[i] = T(axis(kz, nz) + axis(ky, ny) + axis(kx, nx));
    return s;
}

template class ConvOperator<float>;
template class ConvOperator<double>;
template PsiCoeffs<float> psi_apply(const Tensor3<float>&, PsiMode);
template PsiCoeffs<double> psi_apply(const Tensor3<double>&, PsiMode);
template Tensor3<float> psi_adjoint(const PsiCoeffs<float>&, PsiMode);
template Tensor3<double> psi_adjoint(const PsiCoeffs<double>&, PsiMode);
template std::vector<float> psi_gram_spectrum<float>(int, int, int, PsiMode);
template std::vector<double> psi_gram_spectrum<double>(int, int, int, PsiMode);

}  // namespace lensless
