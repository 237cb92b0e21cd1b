#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lensless/conv_operator.hpp"
#include "lensless/errors.hpp"
#include "lensless/tensor.hpp"

namespace lensless {

struct SolverConfig {
    double lambda = -1.0;          // < 0: auto, 1e-3 · max(A^T b)
    PsiMode psi = PsiMode::Tv3d;
    bool anisotropic_tv = false;   // per-component shrinkage instead of vectorial
    int max_iters = 200;
    double eps_abs = 1e-5;
    double eps_rel = 1e-4;
    double mu1 = 1.0;              // measurement split  v = Mx
    double mu2 = 1.0;              // sparsity split     u = Psi x
    double mu3 = 1.0;              // nonnegativity split w = x
    bool adaptive_penalties = true;
    double tune_factor = 2.0;
    double tune_ratio = 10.0;
    bool nonneg = true;
    double divergence_factor = 1e6;
    int divergence_iters = 10;
};

struct ConvergenceTrace {
    struct Row {
        int iteration;
        double objective;
        double primal_v, primal_u, primal_w;
        double dual;  // root-sum-square of the three per-constraint duals
        double mu1, mu2, mu3;
        double seconds;  // cumulative wall time
    };
    std::vector<Row> rows;
    bool converged = false;
    std::string stop_reason;
    double lambda_used = 0.0;
};

/// CSV with header: iteration,objective,primal_v,primal_u,primal_w,dual,mu1,mu2,mu3,seconds
std::string trace_csv(const ConvergenceTrace& trace);

/// Thrown when the objective blows past divergence_factor x its initial value
/// for divergence_iters consecutive iterations; carries the partial trace.
struct SolverDivergence : NumericalError {
    ConvergenceTrace trace;
    SolverDivergence(const std::string& what, ConvergenceTrace t)
        : NumericalError(what), trace(std::move(t)) {}
};

/// Identity mode: elementwise sign(g)·max(|g|-nu, 0). Tv3d: vectorial
/// shrinkage of the per-voxel 3-vector (or per-component if anisotropic).
template <typename T>
PsiCoeffs<T> soft_threshold(const PsiCoeffs<T>& g, double nu, PsiMode mode,
                            bool anisotropic = false);

/// Splitting state. Everything lives on the operator's padded circular
/// lattice so both M and Psi are diagonalized by one 3D transform; the
/// solution handed back to callers is w restricted to the grid window.
template <typename T>
struct AdmmState {
    Tensor3<T> x, v, w;       // padded: (nz, 2ny, 2nx)
    PsiCoeffs<T> u;
    Tensor3<T> xi, rho;       // duals for v and w
    PsiCoeffs<T> eta;         // dual for u
    Tensor3<T> mx;            // cached M x
    PsiCoeffs<T> psix;        // cached Psi x
    double mu1 = 1.0, mu2 = 1.0, mu3 = 1.0;
    int iteration = 0;

    // set by admm_step
    double objective = 0.0;
    double primal[3] = {0, 0, 0};    // v, u, w constraint violations
    double dual[3] = {0, 0, 0};
    double eps_pri[3] = {0, 0, 0};
    double eps_dual[3] = {0, 0, 0};

    bool converged() const {
        for (int i = 0; i < 3; ++i)
            if (primal[i] > eps_pri[i] || dual[i] > eps_dual[i]) return false;
        return true;
    }
};

template <typename T>
AdmmState<T> init_state(const ConvOperator<T>& op, const SolverConfig& cfg);

/// One full iteration: u, v, w, x updates (each a closed-form block
/// minimizer), then dual ascent; residuals and objective are refreshed.
/// lambda must already be resolved (>= 0).
template <typename T>
void admm_step(AdmmState<T>& state, const ConvOperator<T>& op, const Image<T>& b,
               const SolverConfig& cfg, double lambda);

/// Residual balancing: a penalty doubles when its primal residual exceeds
/// tune_ratio x its dual residual (the dual variable is halved to match),
/// and vice versa. Constraints already within tolerance are left alone.
template <typename T>
void tune_penalties(AdmmState<T>& state, const SolverConfig& cfg);

template <typename T>
std::pair<Tensor3<T>, ConvergenceTrace> solve(const Image<T>& b, const ConvOperator<T>& op,
                                              const SolverConfig& cfg);

extern template PsiCoeffs<float> soft_threshold(const PsiCoeffs<float>&, double, PsiMode, bool);
extern template PsiCoeffs<double> soft_threshold(const PsiCoeffs<double>&, double, PsiMode, bool);
extern template struct AdmmState<float>;
extern template struct AdmmState<double>;
extern template AdmmState<float> init_state(const ConvOperator<float>&, const SolverConfig&);
extern template AdmmState<double> init_state(const ConvOperator<double>&, const SolverConfig&);
extern template void admm_step(AdmmState<float>&, const ConvOperator<float>&, const Image<float>&,
                               const SolverConfig&, double);
extern template void admm_step(AdmmState<double>&, const ConvOperator<double>&,
                               const Image<double>&, const SolverConfig&, double);
extern template void tune_penalties(AdmmState<float>&, const SolverConfig&);
extern template void tune_penalties(AdmmState<double>&, const SolverConfig&);
extern template std::pair<Tensor3<float>, ConvergenceTrace> solve(
    const Image<float>&, const ConvOperator<float>&, const SolverConfig&);
extern template std::pair<Tensor3<double>, ConvergenceTrace> solve(
    const Image<double>&, const ConvOperator<double>&, const SolverConfig&);

}  // namespace lensless
