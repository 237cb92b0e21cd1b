#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace lensless {

/// Real-to-complex 3D FFT plan pair for a fixed (nz, ny, nx) lattice.
///
/// forward: r2c, unnormalized. inverse: c2r, scaled by 1/(nz*ny*nx) so that
/// inverse(forward(x)) == x. The half spectrum is laid out (nz, ny, nx/2+1),
/// z slowest. Plans are created once and may be executed concurrently on
/// distinct buffers; inverse() overwrites its input spectrum (FFTW c2r).
template <typename T>
class Fft3 {
public:
    Fft3(int nz, int ny, int nx);
    ~Fft3();
    Fft3(const Fft3&) = delete;
    Fft3& operator=(const Fft3&) = delete;
    Fft3(Fft3&&) noexcept;
    Fft3& operator=(Fft3&&) noexcept;

    int nz() const { return nz_; }
    int ny() const { return ny_; }
    int nx() const { return nx_; }
    int nxh() const { return nx_ / 2 + 1; }
    size_t real_count() const { return size_t(nz_) * ny_ * nx_; }
    size_t spec_count() const { return size_t(nz_) * ny_ * nxh(); }

    void forward(const T* in, std::complex<T>* out) const;
    /// Destroys `in`. Output is the normalized inverse transform.
    void inverse(std::complex<T>* in, T* out) const;

private:
    int nz_, ny_, nx_;
    void* plan_fwd_ = nullptr;
    void* plan_inv_ = nullptr;
};

extern template class Fft3<float>;
extern template class Fft3<double>;

}  // namespace lensless
