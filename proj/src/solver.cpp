#include "lensless/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace lensless {

namespace {

template <typename T>
void check_finite(const std::vector<T>& v, const char* field) {
    for (T x : v) {
        if (!std::isfinite(double(x))) {
            throw NumericalError(std::string("non-finite values in ") + field);
        }
    }
}

template <typename T>
double coeffs_sq_norm(const PsiCoeffs<T>& g) {
    double acc = 0.0;
    for (const auto& c : g.c) acc += sq_norm(c.v);
    return acc;
}

// ||g||_1 under the mode: sum of per-voxel vector magnitudes for isotropic
// TV, plain L1 otherwise.
template <typename T>
double coeffs_l1(const PsiCoeffs<T>& g, PsiMode mode, bool anisotropic) {
    double acc = 0.0;
    if (mode == PsiMode::Tv3d && !anisotropic) {
        const auto& a = g.c[0].v;
        const auto& b = g.c[1].v;
        const auto& c = g.c[2].v;
        for (size_t i = 0; i < a.size(); ++i) {
            acc += std::sqrt(double(a[i]) * a[i] + double(b[i]) * b[i] + double(c[i]) * c[i]);
        }
    } else {
        for (const auto& comp : g.c)
            for (T v : comp.v) acc += std::abs(double(v));
    }
    return acc;
}

template <typename T>
struct Workspace {
    std::vector<std::complex<T>> spec_a, spec_c, spec_x;
    std::vector<T> psihat;
    Tensor3<T> dtb, areal, tmp;
    Tensor3<T> v_old, w_old;
    PsiCoeffs<T> u_old, ctmp;

    Workspace(const ConvOperator<T>& op, const SolverConfig& cfg) {
        const size_t S = op.fft().spec_count();
        spec_a.resize(S);
        spec_c.resize(S);
        spec_x.resize(S);
        psihat = psi_gram_spectrum<T>(op.nz(), op.pad_ny(), op.pad_nx(), cfg.psi);
        dtb = Tensor3<T>(op.nz(), op.pad_ny(), op.pad_nx());
        areal = dtb;
        tmp = dtb;
    }
};

// ||M y||_2 from the half spectrum of y via Parseval; kx = 0 and the Nyquist
// column appear once, every other column twice.
template <typename T>
double conv_norm_from_spectrum(const ConvOperator<T>& op,
                               const std::vector<std::complex<T>>& spec) {
    const auto& pw = op.power_spectrum();
    const int nxh = op.pad_nx() / 2 + 1;
    const size_t P = size_t(op.nz()) * op.pad_ny() * op.pad_nx();
    double acc = 0.0;
    size_t i = 0;
    for (int kz = 0; kz < op.nz(); ++kz) {
        for (int ky = 0; ky < op.pad_ny(); ++ky) {
            for (int kx = 0; kx < nxh; ++kx, ++i) {
                double m = double(pw[i]) * std::norm(std::complex<double>(spec[i]));
                acc += (kx == 0 || kx == nxh - 1) ? m : 2.0 * m;
            }
        }
    }
    return std::sqrt(acc / double(P));
}

template <typename T>
void step_impl(AdmmState<T>& st, const ConvOperator<T>& op, const Image<T>& b,
               const SolverConfig& cfg, double lambda, Workspace<T>& ws) {
    if (!(st.mu1 > 0.0 && st.mu2 > 0.0 && st.mu3 > 0.0)) {
        throw ValidationError("penalty parameters must be positive");
    }
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    const int nz = op.nz(), ny = op.ny(), nx = op.nx();
    const int pny = op.pad_ny(), pnx = op.pad_nx();
    const size_t P = st.x.v.size();
    const T mu1 = T(st.mu1), mu2 = T(st.mu2), mu3 = T(st.mu3);

    // u-update: shrink Psi x + eta / mu2
    ws.u_old = st.u;
    ws.ctmp = st.psix;
    for (size_t c = 0; c < ws.ctmp.c.size(); ++c)
        for (size_t i = 0; i < P; ++i)
            ws.ctmp.c[c].v[i] += st.eta.c[c].v[i] / mu2;
    st.u = soft_threshold(ws.ctmp, lambda / st.mu2, cfg.psi, cfg.anisotropic_tv);
    for (const auto& c : st.u.c) check_finite(c.v, "u");

    // v-update: (D^T D + mu1 I)^-1 (xi + mu1 Mx + D^T b); D^T D is the 0/1
    // window mask, so this is a pointwise division
    std::fill(ws.dtb.v.begin(), ws.dtb.v.end(), T(0));
    for (int y = 0; y < ny; ++y)
        std::copy_n(&b.at(y, 0), nx, &ws.dtb.at(0, y, 0));
    ws.v_old = st.v;
    {
        const T inv_masked = T(1) / (T(1) + mu1);
        const T inv_free = T(1) / mu1;
        for (int k = 0; k < nz; ++k) {
            for (int y = 0; y < pny; ++y) {
                const bool in_win_row = (k == 0 && y < ny);
                T* vp = &st.v.at(k, y, 0);
                const T* xip = &st.xi.at(k, y, 0);
                const T* mxp = &st.mx.at(k, y, 0);
                const T* dbp = &ws.dtb.at(k, y, 0);
                for (int x = 0; x < pnx; ++x) {
                    const T num = xip[x] + mu1 * mxp[x] + dbp[x];
                    vp[x] = num * ((in_win_row && x < nx) ? inv_masked : inv_free);
                }
            }
        }
    }
    check_finite(st.v.v, "v");

    // w-update: projection onto the nonnegativity constraint
    ws.w_old = st.w;
    for (size_t i = 0; i < P; ++i) {
        T w = st.x.v[i] + st.rho.v[i] / mu3;
        st.w.v[i] = cfg.nonneg ? std::max(T(0), w) : w;
    }
    check_finite(st.w.v, "w");

    // x-update: invert (mu1 M^T M + mu2 Psi^T Psi + mu3 I) in frequency space
    for (size_t c = 0; c < ws.ctmp.c.size(); ++c)
        for (size_t i = 0; i < P; ++i)
            ws.ctmp.c[c].v[i] = mu2 * st.u.c[c].v[i] - st.eta.c[c].v[i];
    ws.areal = psi_adjoint(ws.ctmp, cfg.psi);
    for (size_t i = 0; i < P; ++i)
        ws.areal.v[i] += mu3 * st.w.v[i] - st.rho.v[i];
    op.fft().forward(ws.areal.v.data(), ws.spec_a.data());
    for (size_t i = 0; i < P; ++i) ws.tmp.v[i] = mu1 * st.v.v[i] - st.xi.v[i];
    op.fft().forward(ws.tmp.v.data(), ws.spec_c.data());
    const auto& otf = op.spectrum();
    const auto& pw = op.power_spectrum();
    for (size_t i = 0; i < ws.spec_x.size(); ++i) {
        const std::complex<T> num = ws.spec_a[i] + otf[i] * std::conj(ws.spec_c[i]);
        ws.spec_x[i] = num / (mu1 * pw[i] + mu2 * ws.psihat[i] + mu3);
    }
    for (size_t i = 0; i < ws.spec_x.size(); ++i)
        ws.spec_c[i] = otf[i] * std::conj(ws.spec_x[i]);  // spectrum of M x, kept
    op.fft().inverse(ws.spec_x.data(), st.x.v.data());
    op.fft().inverse(ws.spec_c.data(), st.mx.v.data());
    st.psix = psi_apply(st.x, cfg.psi);
    check_finite(st.x.v, "x");

    // primal/dual residuals and their tolerances
    double pv = 0.0, pu = 0.0, pwr = 0.0;
    for (size_t i = 0; i < P; ++i) {
        double d = double(st.mx.v[i]) - st.v.v[i];
        pv += d * d;
        d = double(st.x.v[i]) - st.w.v[i];
        pwr += d * d;
    }
    for (size_t c = 0; c < st.u.c.size(); ++c)
        for (size_t i = 0; i < P; ++i) {
            double d = double(st.psix.c[c].v[i]) - st.u.c[c].v[i];
            pu += d * d;
        }
    st.primal[0] = std::sqrt(pv);
    st.primal[1] = std::sqrt(pu);
    st.primal[2] = std::sqrt(pwr);

    for (size_t i = 0; i < P; ++i) ws.tmp.v[i] = st.v.v[i] - ws.v_old.v[i];
    op.fft().forward(ws.tmp.v.data(), ws.spec_a.data());
    st.dual[0] = st.mu1 * conv_norm_from_spectrum(op, ws.spec_a);
    for (size_t c = 0; c < ws.ctmp.c.size(); ++c)
        for (size_t i = 0; i < P; ++i)
            ws.ctmp.c[c].v[i] = st.u.c[c].v[i] - ws.u_old.c[c].v[i];
    st.dual[1] = st.mu2 * std::sqrt(sq_norm(psi_adjoint(ws.ctmp, cfg.psi).v));
    double dw = 0.0;
    for (size_t i = 0; i < P; ++i) {
        double d = double(st.w.v[i]) - ws.w_old.v[i];
        dw += d * d;
    }
    st.dual[2] = st.mu3 * std::sqrt(dw);

    const double rtP = std::sqrt(double(P));
    const double rtU = std::sqrt(double(P) * st.u.c.size());
    st.eps_pri[0] = rtP * cfg.eps_abs +
                    cfg.eps_rel * std::max(std::sqrt(sq_norm(st.mx.v)), std::sqrt(sq_norm(st.v.v)));
    st.eps_pri[1] = rtU * cfg.eps_abs +
                    cfg.eps_rel * std::max(std::sqrt(coeffs_sq_norm(st.psix)),
                                           std::sqrt(coeffs_sq_norm(st.u)));
    st.eps_pri[2] = rtP * cfg.eps_abs +
                    cfg.eps_rel * std::max(std::sqrt(sq_norm(st.x.v)), std::sqrt(sq_norm(st.w.v)));
    st.eps_dual[0] = rtP * cfg.eps_abs + cfg.eps_rel * std::sqrt(sq_norm(st.xi.v));
    st.eps_dual[1] = rtU * cfg.eps_abs + cfg.eps_rel * std::sqrt(coeffs_sq_norm(st.eta));
    st.eps_dual[2] = rtP * cfg.eps_abs + cfg.eps_rel * std::sqrt(sq_norm(st.rho.v));

    // dual ascent
    for (size_t i = 0; i < P; ++i) {
        st.xi.v[i] += mu1 * (st.mx.v[i] - st.v.v[i]);
        st.rho.v[i] += mu3 * (st.x.v[i] - st.w.v[i]);
    }
    for (size_t c = 0; c < st.u.c.size(); ++c)
        for (size_t i = 0; i < P; ++i)
            st.eta.c[c].v[i] += mu2 * (st.psix.c[c].v[i] - st.u.c[c].v[i]);

    // objective of the original problem, using the true crop
    double data = 0.0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            double d = double(b.at(y, x)) - st.mx.at(0, y, x);
            data += d * d;
        }
    st.objective = 0.5 * data + lambda * coeffs_l1(st.psix, cfg.psi, cfg.anisotropic_tv);
    ++st.iteration;
}

}  // namespace

template <typename T>
PsiCoeffs<T> soft_threshold(const PsiCoeffs<T>& g, double nu, PsiMode mode, bool anisotropic) {
    if (!(nu >= 0.0)) throw ValidationError("shrinkage threshold must be >= 0");
    PsiCoeffs<T> out = g;
    if (mode == PsiMode::Tv3d && !anisotropic) {
        if (g.c.size() != 3) throw ValidationError("tv3d coefficients need 3 components");
        for (size_t i = 0; i < g.c[0].v.size(); ++i) {
            double a = g.c[0].v[i], b = g.c[1].v[i], c = g.c[2].v[i];
            double mag = std::sqrt(a * a + b * b + c * c);
            double scale = mag > nu ? (mag - nu) / mag : 0.0;
            out.c[0].v[i] = T(a * scale);
            out.c[1].v[i] = T(b * scale);
            out.c[2].v[i] = T(c * scale);
        }
        return out;
    }
    for (auto& comp : out.c) {
        for (auto& v : comp.v) {
            double a = double(v);
            v = T(a > nu ? a - nu : (a < -nu ? a + nu : 0.0));
        }
    }
    return out;
}

template <typename T>
AdmmState<T> init_state(const ConvOperator<T>& op, const SolverConfig& cfg) {
    if (cfg.max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(cfg.mu1 > 0.0 && cfg.mu2 > 0.0 && cfg.mu3 > 0.0)) {
        throw ValidationError("initial penalties must be positive");
    }
    AdmmState<T> st;
    const Tensor3<T> zero(op.nz(), op.pad_ny(), op.pad_nx());
    st.x = zero;
    st.v = zero;
    st.w = zero;
    st.xi = zero;
    st.rho = zero;
    st.mx = zero;
    const size_t ncomp = cfg.psi == PsiMode::Tv3d ? 3 : 1;
    st.u.c.assign(ncomp, zero);
    st.eta.c.assign(ncomp, zero);
    st.psix.c.assign(ncomp, zero);
    st.mu1 = cfg.mu1;
    st.mu2 = cfg.mu2;
    st.mu3 = cfg.mu3;
    return st;
}

template <typename T>
void admm_step(AdmmState<T>& state, const ConvOperator<T>& op, const Image<T>& b,
               const SolverConfig& cfg, double lambda) {
    Workspace<T> ws(op, cfg);
    step_impl(state, op, b, cfg, lambda, ws);
}

template <typename T>
void tune_penalties(AdmmState<T>& state, const SolverConfig& cfg) {
    auto rescale = [](Tensor3<T>& dual, double f) {
        for (auto& v : dual.v) v = T(v * f);
    };
    auto rescale_c = [](PsiCoeffs<T>& dual, double f) {
        for (auto& c : dual.c)
            for (auto& v : c.v) v = T(v * f);
    };
    for (int i = 0; i < 3; ++i) {
        // a constraint already inside its tolerances is left untouched
        if (state.primal[i] <= state.eps_pri[i] && state.dual[i] <= state.eps_dual[i]) continue;
        double f = 1.0;
        if (state.primal[i] > cfg.tune_ratio * state.dual[i]) {
            f = cfg.tune_factor;
        } else if (state.dual[i] > cfg.tune_ratio * state.primal[i]) {
            f = 1.0 / cfg.tune_factor;
        } else {
            continue;
        }
        switch (i) {
            case 0: state.mu1 *= f; rescale(state.xi, 1.0 / f); break;
            case 1: state.mu2 *= f; rescale_c(state.eta, 1.0 / f); break;
            case 2: state.mu3 *= f; rescale(state.rho, 1.0 / f); break;
        }
    }
}

template <typename T>
std::pair<Tensor3<T>, ConvergenceTrace> solve(const Image<T>& b, const ConvOperator<T>& op,
                                              const SolverConfig& cfg) {
    if (b.ny != op.ny() || b.nx != op.nx()) {
        throw ValidationError("measurement shape does not match the operator");
    }
    for (T v : b.v) {
        if (!std::isfinite(double(v)) || v < T(0)) {
            throw ValidationError("measurement must be finite and nonnegative");
        }
    }

    ConvergenceTrace trace;
    double lambda = cfg.lambda;
    if (lambda < 0.0) {
        // data-scaled heuristic: a fraction of the brightest backprojection
        Tensor3<T> atb = op.adjoint(b);
        double mx = 0.0;
        for (T v : atb.v) mx = std::max(mx, double(v));
        lambda = 1e-3 * mx;
    }
    trace.lambda_used = lambda;

    AdmmState<T> st = init_state(op, cfg);
    Workspace<T> ws(op, cfg);
    const double obj0 = 0.5 * sq_norm(b.v);
    const double blowup = cfg.divergence_factor * (obj0 > 0.0 ? obj0 : 1.0);
    int high = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int it = 0; it < cfg.max_iters; ++it) {
        step_impl(st, op, b, cfg, lambda, ws);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        trace.rows.push_back({st.iteration, st.objective, st.primal[0], st.primal[1],
                              st.primal[2],
                              std::sqrt(st.dual[0] * st.dual[0] + st.dual[1] * st.dual[1] +
                                        st.dual[2] * st.dual[2]),
                              st.mu1, st.mu2, st.mu3, secs});
        if (st.objective > blowup) {
            if (++high >= cfg.divergence_iters) {
                throw SolverDivergence(
                    "solver diverged: objective exceeded " +
                        std::to_string(cfg.divergence_factor) + "x its initial value for " +
                        std::to_string(cfg.divergence_iters) + " iterations",
                    std::move(trace));
            }
        } else {
            high = 0;
        }
        if (st.converged()) {
            trace.converged = true;
            trace.stop_reason = "residual tolerances met";
            break;
        }
        if (cfg.adaptive_penalties) tune_penalties(st, cfg);
    }
    if (!trace.converged) trace.stop_reason = "iteration limit reached";
    return {op.restrict_window(st.w), std::move(trace)};
}

std::string trace_csv(const ConvergenceTrace& trace) {
    std::ostringstream os;
    os << "iteration,objective,primal_v,primal_u,primal_w,dual,mu1,mu2,mu3,seconds\n";
    os << std::setprecision(10);
    for (const auto& r : trace.rows) {
        os << r.iteration << ',' << r.objective << ',' << r.primal_v << ',' << r.primal_u << ','
           << r.primal_w << ',' << r.dual << ',' << r.mu1 << ',' << r.mu2 << ',' << r.mu3 << ','
           << r.seconds << '\n';
    }
    return os.str();
}

template PsiCoeffs<float> soft_threshold(const PsiCoeffs<float>&, double, PsiMode, bool);
template PsiCoeffs<double> soft_threshold(const PsiCoeffs<double>&, double, PsiMode, bool);
template struct AdmmState<float>;
template struct AdmmState<double>;
template AdmmState<float> init_state(const ConvOperator<float>&, const SolverConfig&);
template AdmmState<double> init_state(const ConvOperator<double>&, const SolverConfig&);
template void admm_step(AdmmState<float>&, const ConvOperator<float>&, const Image<float>&,
                        const SolverConfig&, double);
template void admm_step(AdmmState<double>&, const ConvOperator<double>&, const Image<double>&,
                        const SolverConfig&, double);
template void tune_penalties(AdmmState<float>&, const SolverConfig&);
template void tune_penalties(AdmmState<double>&, const SolverConfig&);
template std::pair<Tensor3<float>, ConvergenceTrace> solve(const Image<float>&,
                                                           const ConvOperator<float>&,
                                                           const SolverConfig&);
template std::pair<Tensor3<double>, ConvergenceTrace> solve(const Image<double>&,
                                                            const ConvOperator<double>&,
                                                            const SolverConfig&);

}  // namespace lensless
