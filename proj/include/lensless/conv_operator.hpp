#pragma once

#include <complex>
#include <vector>

#include "lensless/fft.hpp"
#include "lensless/psf_stack.hpp"
#include "lensless/tensor.hpp"

namespace lensless {

enum class PsiMode { Identity, Tv3d };

/// Sparsifying-transform coefficients: one component for identity mode,
/// three stacked circular forward-difference fields (x, y, z) for 3D TV.
template <typename T>
struct PsiCoeffs {
    std::vector<Tensor3<T>> c;
};

/// Measurement operator b = crop(M·embed(x)) where M is a single circular 3D
/// convolution on the padded lattice (Nz, 2Ny, 2Nx) built from the caustic
/// stack. The 2x lateral padding makes the lateral convolution linear; depth
/// is summed by reading the output at z-slice 0. The object-space lateral
/// inversion is absorbed in the index convention, which makes M symmetric,
/// so the adjoint reuses the same convolution.
template <typename T>
class ConvOperator {
  public:
    explicit ConvOperator(const PsfStack& stack);

    int nz() const { return nz_; }
    int ny() const { return ny_; }
    int nx() const { return nx_; }
    int pad_ny() const { return 2 * ny_; }
    int pad_nx() const { return 2 * nx_; }

    /// b = crop(M embed(x)), x on the (nz, ny, nx) grid.
    Image<T> apply(const Tensor3<T>& x) const;
    /// x = restrict(M embed_sensor(b)); exact adjoint of apply.
    Tensor3<T> adjoint(const Image<T>& b) const;

    // Padded-lattice pieces, used by the solver and by the oracle tests.
    Tensor3<T> embed(const Tensor3<T>& x) const;
    Tensor3<T> restrict_window(const Tensor3<T>& xp) const;
    Tensor3<T> embed_sensor(const Image<T>& b) const;
    Image<T> crop_sensor(const Tensor3<T>& xp) const;
    /// out = M xp on the padded lattice.
    void conv_padded(const Tensor3<T>& xp, Tensor3<T>& out) const;

    /// Half-spectrum of the padded kernel, layout (nz, 2ny, nx+1).
    const std::vector<std::complex<T>>& spectrum() const { return otf_; }
    /// |spectrum|^2, the frequency-domain multiplier of M^T M.
    const std::vector<T>& power_spectrum() const { return otf_power_; }
    Fft3<T>& fft() const { return fft_; }

  private:
    int nz_, ny_, nx_;
    mutable Fft3<T> fft_;  // new-array execution on caller buffers is thread-safe
    std::vector<std::complex<T>> otf_;
    std::vector<T> otf_power_;
};

/// identity -> x; tv3d -> circular forward differences along x, y, z.
template <typename T>
PsiCoeffs<T> psi_apply(const Tensor3<T>& x, PsiMode mode);

/// Exact adjoint of psi_apply (negated circular divergence for tv3d).
template <typename T>
Tensor3<T> psi_adjoint(const PsiCoeffs<T>& g, PsiMode mode);

/// Frequency multiplier of Psi^T Psi on an (nz, ny, nx) circular lattice:
/// 0 for identity minus... identity -> all ones; tv3d -> sum over axes of
/// 4 sin^2(pi k / N) (the circular Laplacian). Layout matches Fft3 half
/// spectra of that shape.
template <typename T>
std::vector<T> psi_gram_spectrum(int nz, int ny, int nx, PsiMode mode);

extern template class ConvOperator<float>;
extern template class ConvOperator<double>;
extern template PsiCoeffs<float> psi_apply(const Tensor3<float>&, PsiMode);
extern template PsiCoeffs<double> psi_apply(const Tensor3<double>&, PsiMode);
extern template Tensor3<float> psi_adjoint(const PsiCoeffs<float>&, PsiMode);
extern template Tensor3<double> psi_adjoint(const PsiCoeffs<double>&, PsiMode);
extern template std::vector<float> psi_gram_spectrum<float>(int, int, int, PsiMode);
extern template std::vector<double> psi_gram_spectrum<double>(int, int, int, PsiMode);

}  // namespace lensless
