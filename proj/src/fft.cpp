#include "lensless/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "lensless/errors.hpp"

namespace lensless {

namespace {
// FFTW planner routines are not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

template <typename T>
struct FftwApi;

template <>
struct FftwApi<float> {
    using plan = fftwf_plan;
    using cplx = fftwf_complex;
    static plan plan_r2c(int n0, int n1, int n2, float* in, cplx* out, unsigned flags) {
        return fftwf_plan_dft_r2c_3d(n0, n1, n2, in, out, flags);
    }
    static plan plan_c2r(int n0, int n1, int n2, cplx* in, float* out, unsigned flags) {
        return fftwf_plan_dft_c2r_3d(n0, n1, n2, in, out, flags);
    }
    static void execute_r2c(plan p, float* in, cplx* out) { fftwf_execute_dft_r2c(p, in, out); }
    static void execute_c2r(plan p, cplx* in, float* out) { fftwf_execute_dft_c2r(p, in, out); }
    static void destroy(plan p) { fftwf_destroy_plan(p); }
};

template <>
struct FftwApi<double> {
    using plan = fftw_plan;
    using cplx = fftw_complex;
    static plan plan_r2c(int n0, int n1, int n2, double* in, cplx* out, unsigned flags) {
        return fftw_plan_dft_r2c_3d(n0, n1, n2, in, out, flags);
    }
    static plan plan_c2r(int n0, int n1, int n2, cplx* in, double* out, unsigned flags) {
        return fftw_plan_dft_c2r_3d(n0, n1, n2, in, out, flags);
    }
    static void execute_r2c(plan p, double* in, cplx* out) { fftw_execute_dft_r2c(p, in, out); }
    static void execute_c2r(plan p, cplx* in, double* out) { fftw_execute_dft_c2r(p, in, out); }
    static void destroy(plan p) { fftw_destroy_plan(p); }
};

template <typename T>
Fft3<T>::Fft3(int nz, int ny, int nx) : nz_(nz), ny_(ny), nx_(nx) {
    if (nz < 1 || ny < 1 || nx < 1) throw ValidationError("Fft3: lattice dimensions must be >= 1");
    using Api = FftwApi<T>;
    std::vector<T> re(real_count());
    std::vector<std::complex<T>> sp(spec_count());
    std::lock_guard<std::mutex> lock(planner_mutex());
    // FFTW_UNALIGNED: plans stay valid for any buffer passed to the new-array
    // execute functions, so callers can use plain std::vector storage.
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plan_fwd_ = Api::plan_r2c(nz, ny, nx, re.data(),
                              reinterpret_cast<typename Api::cplx*>(sp.data()), flags);
    plan_inv_ = Api::plan_c2r(nz, ny, nx, reinterpret_cast<typename Api::cplx*>(sp.data()),
                              re.data(), flags);
    if (!plan_fwd_ || !plan_inv_) throw NumericalError("Fft3: FFTW plan creation failed");
}

template <typename T>
Fft3<T>::~Fft3() {
    using Api = FftwApi<T>;
    if (plan_fwd_) Api::destroy(static_cast<typename Api::plan>(plan_fwd_));
    if (plan_inv_) Api::destroy(static_cast<typename Api::plan>(plan_inv_));
}

template <typename T>
Fft3<T>::Fft3(Fft3&& o) noexcept
    : nz_(o.nz_), ny_(o.ny_), nx_(o.nx_), plan_fwd_(o.plan_fwd_), plan_inv_(o.plan_inv_) {
    o.plan_fwd_ = nullptr;
    o.plan_inv_ = nullptr;
}

template <typename T>
Fft3<T>& Fft3<T>::operator=(Fft3&& o) noexcept {
    if (this != &o) {
        this->~Fft3();
        nz_ = o.nz_;
        ny_ = o.ny_;
        nx_ = o.nx_;
        plan_fwd_ = o.plan_fwd_;
        plan_inv_ = o.plan_inv_;
        o.plan_fwd_ = nullptr;
        o.plan_inv_ = nullptr;
    }
    return *this;
}

template <typename T>
void Fft3<T>::forward(const T* in, std::complex<T>* out) const {
    using Api = FftwApi<T>;
    Api::execute_r2c(static_cast<typename Api::plan>(plan_fwd_), const_cast<T*>(in),
                     reinterpret_cast<typename Api::cplx*>(out));
}

template <typename T>
void Fft3<T>::inverse(std::complex<T>* in, T* out) const {
    using Api = FftwApi<T>;
    Api::execute_c2r(static_cast<typename Api::plan>(plan_inv_),
                     reinterpret_cast<typename Api::cplx*>(in), out);
    const T scale = T(1) / T(real_count());
    for (size_t i = 0; i < real_count(); ++i) out[i] *= scale;
}

template class Fft3<float>;
template class Fft3<double>;

}  // namespace lensless
