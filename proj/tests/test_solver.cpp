#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "lensless/solver.hpp"
#include "oracles.hpp"

using namespace lensless;

namespace {

// Padded circular-convolution matrix built independently of the operator:
// M[t][u] = kernel[(t + u) mod shape], kernel = slices embedded at the
// window-center offset.
Eigen::MatrixXd dense_padded_conv(const PsfStack& stack) {
    const int nz = stack.nz(), ny = stack.ny(), nx = stack.nx();
    const int pny = 2 * ny, pnx = 2 * nx;
    const int P = nz * pny * pnx;
    std::vector<double> kern(P, 0.0);
    for (int k = 0; k < nz; ++k)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                kern[(size_t(k) * pny + y + ny / 2) * pnx + x + nx / 2] =
                    double(stack.slices[k].at(y, x));
    Eigen::MatrixXd M(P, P);
    auto idx = [&](int z, int y, int x) { return (size_t(z) * pny + y) * pnx + x; };
    for (int tz = 0; tz < nz; ++tz)
        for (int ty = 0; ty < pny; ++ty)
            for (int tx = 0; tx < pnx; ++tx)
                for (int uz = 0; uz < nz; ++uz)
                    for (int uy = 0; uy < pny; ++uy)
                        for (int ux = 0; ux < pnx; ++ux)
                            M(idx(tz, ty, tx), idx(uz, uy, ux)) =
                                kern[idx((tz + uz) % nz, (ty + uy) % pny, (tx + ux) % pnx)];
    return M;
}

// rows of the padded conv matrix belonging to the sensor window at z = 0
Eigen::MatrixXd dense_sensor_rows(const Eigen::MatrixXd& M, int nz, int ny, int nx) {
    (void)nz;
    Eigen::MatrixXd A(ny * nx, M.cols());
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) A.row(y * nx + x) = M.row(size_t(y) * 2 * nx + x);
    return A;
}

template <typename T>
void randomize(Tensor3<T>& t, unsigned seed) {
    auto r = oracles::random_volume<T>(t.nz, t.ny, t.nx, seed);
    t = r;
}

double coeff_norm1_iso(const PsiCoeffs<double>& g) {
    double acc = 0.0;
    for (size_t i = 0; i < g.c[0].v.size(); ++i)
        acc += std::sqrt(g.c[0].v[i] * g.c[0].v[i] + g.c[1].v[i] * g.c[1].v[i] +
                         g.c[2].v[i] * g.c[2].v[i]);
    return acc;
}

}  // namespace

TEST_CASE("soft threshold: scalar definition") {
    PsiCoeffs<double> g;
    g.c.emplace_back(1, 1, 3);
    g.c[0].v = {3.0, -0.5, 0.0};
    auto s = soft_threshold(g, 1.0, PsiMode::Identity);
    CHECK(s.c[0].v[0] == 2.0);
    CHECK(s.c[0].v[1] == 0.0);
    CHECK(s.c[0].v[2] == 0.0);
    auto id = soft_threshold(g, 0.0, PsiMode::Identity);
    CHECK(id.c[0].v[1] == -0.5);
}

TEST_CASE("soft threshold: vectorial shrinkage") {
    PsiCoeffs<double> g;
    for (int c = 0; c < 3; ++c) g.c.emplace_back(1, 1, 1);
    g.c[0].v[0] = 3.0;
    g.c[1].v[0] = 4.0;
    g.c[2].v[0] = 0.0;
    auto s = soft_threshold(g, 1.0, PsiMode::Tv3d);
    CHECK(s.c[0].v[0] == doctest::Approx(2.4).epsilon(1e-15));
    CHECK(s.c[1].v[0] == doctest::Approx(3.2).epsilon(1e-15));
    CHECK(s.c[2].v[0] == 0.0);

    // below the threshold the whole vector vanishes
    for (int c = 0; c < 3; ++c) g.c[c].v[0] *= 0.1;
    auto z = soft_threshold(g, 1.0, PsiMode::Tv3d);
    for (int c = 0; c < 3; ++c) CHECK(z.c[c].v[0] == 0.0);

    // anisotropic mode shrinks per component
    g.c[0].v[0] = 3.0;
    g.c[1].v[0] = 0.5;
    g.c[2].v[0] = -2.0;
    auto a = soft_threshold(g, 1.0, PsiMode::Tv3d, true);
    CHECK(a.c[0].v[0] == 2.0);
    CHECK(a.c[1].v[0] == 0.0);
    CHECK(a.c[2].v[0] == -1.0);
}

TEST_CASE("zero measurement with a zero state is a fixed point") {
    auto stack = oracles::random_stack(2, 8, 8, 5);
    ConvOperator<float> op(stack);
    SolverConfig cfg;
    auto st = init_state(op, cfg);
    Image<float> b(8, 8);
    admm_step(st, op, b, cfg, 0.05);
    for (float v : st.x.v) CHECK(v == 0.0f);
    for (float v : st.v.v) CHECK(v == 0.0f);
    for (float v : st.w.v) CHECK(v == 0.0f);
    for (float v : st.xi.v) CHECK(v == 0.0f);
    for (auto& c : st.u.c)
        for (float v : c.v) CHECK(v == 0.0f);
    CHECK(st.objective == 0.0);
    CHECK(st.converged());
}

TEST_CASE("x-update solves its normal equations to high accuracy") {
    const int nz = 2, ny = 4, nx = 4;
    auto stack = oracles::random_stack(nz, ny, nx, 77);
    ConvOperator<double> op(stack);
    SolverConfig cfg;
    cfg.psi = PsiMode::Tv3d;
    cfg.nonneg = true;
    auto st = init_state(op, cfg);
    st.mu1 = 1.3;
    st.mu2 = 0.7;
    st.mu3 = 2.1;
    randomize(st.x, 1);
    randomize(st.v, 2);
    randomize(st.w, 3);
    randomize(st.xi, 4);
    randomize(st.rho, 5);
    randomize(st.mx, 6);
    for (int c = 0; c < 3; ++c) {
        randomize(st.u.c[c], 7 + c);
        randomize(st.eta.c[c], 10 + c);
        randomize(st.psix.c[c], 13 + c);
    }
    const Tensor3<double> xi0 = st.xi, rho0 = st.rho;
    const PsiCoeffs<double> eta0 = st.eta;

    auto b = oracles::random_image<double>(ny, nx, 20);
    for (auto& v : b.v) v = std::abs(v);
    admm_step(st, op, b, cfg, 0.05);

    // r assembled from the freshly updated blocks and the pre-step duals
    const int P = nz * 2 * ny * 2 * nx;
    Eigen::VectorXd r(P);
    PsiCoeffs<double> t = st.u;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < P; ++i) t.c[c].v[i] = st.mu2 * st.u.c[c].v[i] - eta0.c[c].v[i];
    Tensor3<double> pa = psi_adjoint(t, PsiMode::Tv3d);
    Eigen::MatrixXd M = dense_padded_conv(stack);
    Eigen::VectorXd vx(P);
    for (int i = 0; i < P; ++i) vx[i] = st.mu1 * st.v.v[i] - xi0.v[i];
    Eigen::VectorXd mterm = M.transpose() * vx;
    for (int i = 0; i < P; ++i) r[i] = st.mu3 * st.w.v[i] - rho0.v[i] + pa.v[i] + mterm[i];

    // dense (mu1 M^T M + mu2 Psi^T Psi + mu3 I)
    Eigen::MatrixXd L(P, P);
    for (int j = 0; j < P; ++j) {
        Tensor3<double> e(nz, 2 * ny, 2 * nx);
        e.v[j] = 1.0;
        auto col = psi_adjoint(psi_apply(e, PsiMode::Tv3d), PsiMode::Tv3d);
        for (int i = 0; i < P; ++i) L(i, j) = col.v[i];
    }
    Eigen::MatrixXd Aq = st.mu1 * M.transpose() * M + st.mu2 * L +
                         st.mu3 * Eigen::MatrixXd::Identity(P, P);
    Eigen::VectorXd want = Aq.ldlt().solve(r);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < P; ++i) {
        num += (st.x.v[i] - want[i]) * (st.x.v[i] - want[i]);
        den += want[i] * want[i];
    }
    CHECK(std::sqrt(num) <= 1e-8 * std::sqrt(den));
}

TEST_CASE("each block update minimizes its augmented objective") {
    const int nz = 2, ny = 4, nx = 4;
    auto stack = oracles::random_stack(nz, ny, nx, 93);
    ConvOperator<double> op(stack);
    SolverConfig cfg;
    auto st = init_state(op, cfg);
    st.mu1 = 0.9;
    st.mu2 = 1.7;
    st.mu3 = 0.6;
    randomize(st.x, 31);
    randomize(st.v, 32);
    randomize(st.w, 33);
    randomize(st.xi, 34);
    randomize(st.rho, 35);
    randomize(st.mx, 36);
    for (int c = 0; c < 3; ++c) {
        randomize(st.u.c[c], 37 + c);
        randomize(st.eta.c[c], 40 + c);
        randomize(st.psix.c[c], 43 + c);
    }
    const auto psix0 = st.psix;
    const auto eta0 = st.eta;
    const auto mx0 = st.mx;
    const auto xi0 = st.xi;
    const auto x0 = st.x;
    const auto rho0 = st.rho;
    const double lambda = 0.3;
    auto b = oracles::random_image<double>(ny, nx, 50);
    for (auto& v : b.v) v = std::abs(v);
    admm_step(st, op, b, cfg, lambda);
    const int P = nz * 2 * ny * 2 * nx;

    std::mt19937 rng(7);
    std::normal_distribution<double> nrm;

    // u block: lambda * iso-L1(u) + mu2/2 ||u - (Psi x + eta/mu2)||^2
    auto f_u = [&](const PsiCoeffs<double>& u) {
        double q = 0.0;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < P; ++i) {
                double d = u.c[c].v[i] - (psix0.c[c].v[i] + eta0.c[c].v[i] / st.mu2);
                q += d * d;
            }
        return lambda * coeff_norm1_iso(u) + 0.5 * st.mu2 * q;
    };
    double fu = f_u(st.u);
    for (double scale : {1e-3, 0.1, 1.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            auto up = st.u;
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < P; ++i) up.c[c].v[i] += scale * nrm(rng);
            CHECK(f_u(up) >= fu - 1e-10);
        }
    }

    // v block: 1/2 ||b - Dv||^2 + mu1/2 ||v - (mx + xi/mu1)||^2
    auto f_v = [&](const Tensor3<double>& v) {
        double data = 0.0;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                double d = b.at(y, x) - v.at(0, y, x);
                data += d * d;
            }
        double q = 0.0;
        for (int i = 0; i < P; ++i) {
            double d = v.v[i] - (mx0.v[i] + xi0.v[i] / st.mu1);
            q += d * d;
        }
        return 0.5 * data + 0.5 * st.mu1 * q;
    };
    double fv = f_v(st.v);
    for (int trial = 0; trial < 20; ++trial) {
        auto vp = st.v;
        for (int i = 0; i < P; ++i) vp.v[i] += 0.1 * nrm(rng);
        CHECK(f_v(vp) >= fv - 1e-10);
    }

    // w block: indicator(w >= 0) + mu3/2 ||w - (x + rho/mu3)||^2
    auto f_w = [&](const Tensor3<double>& w) {
        double q = 0.0;
        for (int i = 0; i < P; ++i) {
            double d = w.v[i] - (x0.v[i] + rho0.v[i] / st.mu3);
            q += d * d;
        }
        return 0.5 * st.mu3 * q;
    };
    for (double v : st.w.v) CHECK(v >= 0.0);
    double fw = f_w(st.w);
    for (int trial = 0; trial < 20; ++trial) {
        auto wp = st.w;
        for (int i = 0; i < P; ++i) wp.v[i] = std::max(0.0, wp.v[i] + 0.1 * nrm(rng));
        CHECK(f_w(wp) >= fw - 1e-10);
    }
}

TEST_CASE("plain least squares matches a conjugate-gradient oracle") {
    const int nz = 2, ny = 8, nx = 8;
    auto stack = oracles::random_stack(nz, ny, nx, 111);
    ConvOperator<double> op(stack);
    auto b = oracles::random_image<double>(ny, nx, 8);
    for (auto& v : b.v) v = std::abs(v);

    Eigen::MatrixXd M = dense_padded_conv(stack);
    Eigen::MatrixXd A = dense_sensor_rows(M, nz, ny, nx);
    Eigen::VectorXd bv = oracles::flatten(b);
    // CG on the normal equations from zero converges to the minimum-norm
    // least-squares solution
    Eigen::MatrixXd G = A.transpose() * A;
    Eigen::VectorXd rhs = A.transpose() * bv;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
    Eigen::VectorXd r = rhs, p = r;
    double rs = r.squaredNorm();
    for (int it = 0; it < 800 && rs > 1e-28; ++it) {
        Eigen::VectorXd gp = G * p;
        double alpha = rs / p.dot(gp);
        x += alpha * p;
        r -= alpha * gp;
        double rs2 = r.squaredNorm();
        p = r + (rs2 / rs) * p;
        rs = rs2;
    }
    const double cg_resid = (A * x - bv).norm();

    SolverConfig cfg;
    cfg.lambda = 0.0;
    cfg.psi = PsiMode::Identity;
    cfg.nonneg = false;
    cfg.max_iters = 600;
    cfg.eps_abs = 1e-12;
    cfg.eps_rel = 1e-12;
    auto st = init_state(op, cfg);
    for (int it = 0; it < cfg.max_iters; ++it) {
        admm_step(st, op, b, cfg, 0.0);
        if (cfg.adaptive_penalties) tune_penalties(st, cfg);
    }
    Eigen::VectorXd wflat(st.w.v.size());
    for (size_t i = 0; i < st.w.v.size(); ++i) wflat[i] = st.w.v[i];
    const double admm_resid = (A * wflat - bv).norm();
    CHECK(std::abs(admm_resid - cg_resid) <= 1e-4 * bv.norm());
}

TEST_CASE("single point measurement localizes at the true voxel") {
    auto stack = oracles::random_stack(1, 16, 16, 131);
    ConvOperator<float> op(stack);
    Image<float> b = stack.slices[0];  // measurement of a centered unit point
    SolverConfig cfg;
    cfg.psi = PsiMode::Identity;
    cfg.max_iters = 1500;
    cfg.lambda = 1e-5;  // light regularization keeps the fit tight
    cfg.eps_abs = 1e-7;
    cfg.eps_rel = 1e-6;
    auto [vol, trace] = solve(b, op, cfg);
    REQUIRE(vol.nz == 1);
    int best = 0;
    for (size_t i = 1; i < vol.v.size(); ++i)
        if (vol.v[i] > vol.v[best]) best = int(i);
    CHECK(best / 16 == 8);
    CHECK(best % 16 == 8);
    double total = 0.0, near = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            total += vol.at(0, y, x);
            if (std::abs(y - 8) <= 1 && std::abs(x - 8) <= 1) near += vol.at(0, y, x);
        }
    CHECK(near / total > 0.9);
    CHECK(trace.lambda_used > 0.0);
}

TEST_CASE("recovered intensity scales with the measurement") {
    auto stack = oracles::random_stack(1, 12, 12, 151);
    ConvOperator<float> op(stack);
    SolverConfig cfg;
    cfg.psi = PsiMode::Identity;
    cfg.max_iters = 250;
    cfg.lambda = 1e-4;
    Image<float> b1 = stack.slices[0];
    Image<float> b3 = b1;
    for (auto& v : b3.v) v *= 3.0f;
    auto [v1, t1] = solve(b1, op, cfg);
    auto [v3, t3] = solve(b3, op, cfg);
    double s1 = 0.0, s3 = 0.0;
    for (size_t i = 0; i < v1.v.size(); ++i) {
        s1 += v1.v[i];
        s3 += v3.v[i];
    }
    CHECK(s3 == doctest::Approx(3.0 * s1).epsilon(0.05));
}

TEST_CASE("returned volume is exactly nonnegative") {
    auto stack = oracles::random_stack(2, 10, 10, 161);
    ConvOperator<float> op(stack);
    auto vol_true = oracles::random_volume<float>(2, 10, 10, 4, true);
    Image<float> b = op.apply(vol_true);
    for (auto& v : b.v) v = std::max(0.0f, v);
    SolverConfig cfg;
    cfg.max_iters = 60;
    auto [vol, trace] = solve(b, op, cfg);
    for (float v : vol.v) CHECK(v >= 0.0f);
}

TEST_CASE("windowed primal residuals decrease") {
    auto stack = oracles::random_stack(2, 12, 12, 171);
    ConvOperator<float> op(stack);
    auto vol_true = oracles::random_volume<float>(2, 12, 12, 9, true);
    Image<float> b = op.apply(vol_true);
    for (auto& v : b.v) v = std::max(0.0f, v);
    SolverConfig cfg;
    cfg.max_iters = 160;
    cfg.eps_abs = 0.0;
    cfg.eps_rel = 0.0;  // run the full budget
    cfg.adaptive_penalties = false;  // fixed penalties isolate the trend
    auto [vol, trace] = solve(b, op, cfg);
    REQUIRE(trace.rows.size() == 160);
    std::vector<double> windows;
    for (size_t start = 0; start + 20 <= trace.rows.size(); start += 20) {
        double m = 0.0;
        for (size_t i = start; i < start + 20; ++i) {
            const auto& r = trace.rows[i];
            m += std::max({r.primal_v, r.primal_u, r.primal_w});
        }
        windows.push_back(m / 20.0);
    }
    for (size_t i = 1; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1] * 1.05);
}

TEST_CASE("penalty tuning follows the residual-balancing rule") {
    auto stack = oracles::random_stack(1, 6, 6, 181);
    ConvOperator<float> op(stack);
    SolverConfig cfg;
    auto st = init_state(op, cfg);
    for (auto& v : st.xi.v) v = 1.0f;
    for (auto& v : st.rho.v) v = 2.0f;
    for (auto& c : st.eta.c)
        for (auto& v : c.v) v = 4.0f;
    for (int i = 0; i < 3; ++i) {
        st.eps_pri[i] = 1e-6;
        st.eps_dual[i] = 1e-6;
    }

    // balanced: nothing changes
    st.primal[0] = st.dual[0] = 1.0;
    st.primal[1] = st.dual[1] = 1.0;
    st.primal[2] = st.dual[2] = 1.0;
    tune_penalties(st, cfg);
    CHECK(st.mu1 == 1.0);
    CHECK(st.mu2 == 1.0);
    CHECK(st.mu3 == 1.0);
    CHECK(st.xi.v[0] == 1.0f);

    // primal-heavy on constraint v: mu1 doubles, xi halves
    st.primal[0] = 100.0;
    st.dual[0] = 1.0;
    tune_penalties(st, cfg);
    CHECK(st.mu1 == 2.0);
    CHECK(st.xi.v[0] == 0.5f);

    // dual-heavy on constraint u: mu2 halves, eta doubles
    st.primal[1] = 1.0;
    st.dual[1] = 100.0;
    tune_penalties(st, cfg);
    CHECK(st.mu2 == 0.5);
    CHECK(st.eta.c[0].v[0] == 8.0f);

    // a converged constraint is never perturbed
    st.primal[2] = 1e-9;
    st.dual[2] = 1e-12;
    st.eps_pri[2] = 1e-6;
    st.eps_dual[2] = 1e-6;
    tune_penalties(st, cfg);
    CHECK(st.mu3 == 1.0);
    CHECK(st.rho.v[0] == 2.0f);
}

TEST_CASE("validation and diagnostics") {
    auto stack = oracles::random_stack(1, 6, 6, 191);
    ConvOperator<float> op(stack);
    SolverConfig cfg;

    SolverConfig bad = cfg;
    bad.mu1 = 0.0;
    CHECK_THROWS_AS(init_state(op, bad), ValidationError);
    bad = cfg;
    bad.max_iters = 0;
    CHECK_THROWS_AS(init_state(op, bad), ValidationError);

    Image<float> bneg(6, 6);
    bneg.v[3] = -1.0f;
    CHECK_THROWS_AS(solve(bneg, op, cfg), ValidationError);
    Image<float> bshape(6, 7);
    CHECK_THROWS_AS(solve(bshape, op, cfg), ValidationError);

    // a poisoned dual propagates into the v block and is reported there
    auto st = init_state(op, cfg);
    st.xi.v[0] = std::numeric_limits<float>::quiet_NaN();
    Image<float> b(6, 6);
    b.v[0] = 1.0f;
    CHECK_THROWS_WITH_AS(admm_step(st, op, b, cfg, 0.1),
                         doctest::Contains("non-finite values in v"), NumericalError);

    st = init_state(op, cfg);
    st.mu1 = -1.0;
    CHECK_THROWS_AS(admm_step(st, op, b, cfg, 0.1), ValidationError);
}

TEST_CASE("divergence raises with the trace attached") {
    auto stack = oracles::random_stack(1, 8, 8, 201);
    ConvOperator<float> op(stack);
    Image<float> b(8, 8);
    for (auto& v : b.v) v = 0.01f;
    SolverConfig cfg;
    cfg.divergence_factor = 1e-12;  // impossible bar: every iteration trips it
    cfg.divergence_iters = 3;
    try {
        solve(b, op, cfg);
        FAIL("expected divergence");
    } catch (const SolverDivergence& e) {
        CHECK(e.trace.rows.size() == 3);
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
    }
}

TEST_CASE("trace exports as CSV") {
    auto stack = oracles::random_stack(1, 8, 8, 211);
    ConvOperator<float> op(stack);
    Image<float> b = stack.slices[0];
    SolverConfig cfg;
    cfg.max_iters = 5;
    cfg.eps_abs = 0.0;
    cfg.eps_rel = 0.0;
    auto [vol, trace] = solve(b, op, cfg);
    auto csv = trace_csv(trace);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "iteration,objective,primal_v,primal_u,primal_w,dual,mu1,mu2,mu3,seconds");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 9);
    }
    CHECK(rows == 5);
    CHECK(trace.rows.front().iteration == 1);
    CHECK(trace.rows.back().seconds >= trace.rows.front().seconds);
}
