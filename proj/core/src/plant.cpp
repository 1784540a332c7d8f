#include "neuroexc/plant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"

namespace neuroexc {

Matrix5 MachineParams::inductance_matrix() const {
    Matrix5 L;
    // clang-format off
    L << -L_d,   0.0,   L_ad,  L_ad,  0.0,
          0.0,  -L_q,   0.0,   0.0,   L_aq,
         -L_ad,  0.0,   L_f,   L_fkd, 0.0,
         -L_ad,  0.0,   L_fkd, L_kd,  0.0,
          0.0,  -L_aq,  0.0,   0.0,   L_kq;
    // clang-format on
    return L;
}

void MachineParams::validate() const {
    if (!(H > 0.0)) throw ConfigError("machine: H must be positive");
    if (!(omega_b > 0.0)) throw ConfigError("machine: omega_b must be positive");
    if (!(std::abs(inductance_matrix().determinant()) > 1e-12)) {
        throw ConfigError("machine: inductance matrix is singular");
    }
    if (vq_x11_sign != 1.0 && vq_x11_sign != -1.0) {
        throw ConfigError("machine: vq_x11_sign must be +1 or -1");
    }
}

MachineParams reference_machine() {
    MachineParams p;
    p.vq_x11_sign = 1.0;
    return p;
}

MachineParams parse_machine_params(const KeyValueFile& file) {
    file.reject_unknown({"omega_b", "H", "D", "r_s", "r_f", "r_kd", "r_kq", "L_d", "L_q", "L_ad", "L_aq",
                         "L_f", "L_fkd", "L_kd", "L_kq", "r11", "x11", "A", "B", "v_inf", "P_m",
                         "speed_coupled_z", "vq_x11_sign"});
    MachineParams p;
    p.omega_b = file.get_double("omega_b", p.omega_b);
    p.H = file.get_double("H", p.H);
    p.D = file.get_double("D", p.D);
    p.r_s = file.get_double("r_s", p.r_s);
    p.r_f = file.get_double("r_f", p.r_f);
    p.r_kd = file.get_double("r_kd", p.r_kd);
    p.r_kq = file.get_double("r_kq", p.r_kq);
    p.L_d = file.get_double("L_d", p.L_d);
    p.L_q = file.get_double("L_q", p.L_q);
    p.L_ad = file.get_double("L_ad", p.L_ad);
    p.L_aq = file.get_double("L_aq", p.L_aq);
    p.L_f = file.get_double("L_f", p.L_f);
    p.L_fkd = file.get_double("L_fkd", p.L_fkd);
    p.L_kd = file.get_double("L_kd", p.L_kd);
    p.L_kq = file.get_double("L_kq", p.L_kq);
    p.r11 = file.get_double("r11", p.r11);
    p.x11 = file.get_double("x11", p.x11);
    p.A = file.get_double("A", p.A);
    p.B = file.get_double("B", p.B);
    p.v_inf = file.get_double("v_inf", p.v_inf);
    p.P_m = file.get_double("P_m", p.P_m);
    p.speed_coupled_z = file.get_bool("speed_coupled_z", p.speed_coupled_z);
    p.vq_x11_sign = file.get_double("vq_x11_sign", p.vq_x11_sign);
    p.validate();
    return p;
}

MachineParams load_machine_params(const std::filesystem::path& path) {
    return parse_machine_params(KeyValueFile::load(path));
}

Vector7 MachineState::to_vector() const {
    Vector7 x;
    x << delta, omega, lambda;
    return x;
}

MachineState MachineState::from_vector(const Vector7& x) {
    MachineState s;
    s.delta = x(0);
    s.omega = x(1);
    s.lambda = x.tail<5>();
    return s;
}

bool MachineState::is_finite() const {
    return std::isfinite(delta) && std::isfinite(omega) && lambda.allFinite();
}

Vector5 dq_currents(const Vector5& lambda, const MachineParams& params) {
    const Matrix5 L = params.inductance_matrix();
    const Eigen::PartialPivLU<Matrix5> lu(L);
    if (!(std::abs(lu.determinant()) > 1e-12)) {
        throw SingularMatrixError("dq_currents: inductance matrix is singular");
    }
    return lu.solve(lambda);
}

void network_voltages(double delta, double i_d, double i_q, const MachineParams& p, double& v_d,
                      double& v_q) {
    const double s = std::sin(delta);
    const double c = std::cos(delta);
    v_d = p.r11 * i_d - p.x11 * i_q + p.v_inf * (p.A * s + p.B * c);
    v_q = p.r11 * i_q + p.vq_x11_sign * p.x11 * i_d + p.v_inf * (p.A * c - p.B * s);
}

ElectricalInterface electrical_interface(const MachineState& state, const MachineParams& params) {
    ElectricalInterface out;
    out.i = dq_currents(state.lambda, params);
    network_voltages(state.delta, out.i(0), out.i(1), params, out.v_d, out.v_q);
    out.P_e = state.lambda(0) * out.i(1) - state.lambda(1) * out.i(0);
    out.v_t = std::hypot(out.v_d, out.v_q);
    return out;
}

Vector7 derivatives(const MachineState& state, double u, const MachineParams& p) {
    const auto e = electrical_interface(state, p);
    const double speed = p.speed_coupled_z ? 1.0 + state.omega / p.omega_b : 1.0;

    // R * L^-1 * lambda == R * i with R = diag(r_s, r_s, -r_f, -r_kd, -r_kq).
    Vector5 flux_rate;
    flux_rate << p.r_s * e.i(0) + speed * state.lambda(1) + e.v_d,
                 p.r_s * e.i(1) - speed * state.lambda(0) + e.v_q,
                 -p.r_f * e.i(2) + u,
                 -p.r_kd * e.i(3),
                 -p.r_kq * e.i(4);

    Vector7 dx;
    dx(0) = state.omega;
    dx(1) = p.omega_b / (2.0 * p.H) * (p.P_m - e.P_e - p.D * state.omega);
    dx.tail<5>() = p.omega_b * flux_rate;
    return dx;
}

MachineState rk4_step(const MachineState& state, double u, double dt, const MachineParams& params) {
    if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
    const Vector7 x = state.to_vector();
    auto f = [&](const Vector7& v) { return derivatives(MachineState::from_vector(v), u, params); };
    const Vector7 k1 = f(x);
    const Vector7 k2 = f(x + 0.5 * dt * k1);
    const Vector7 k3 = f(x + 0.5 * dt * k2);
    const Vector7 k4 = f(x + dt * k3);
    const Vector7 next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NumericalError("rk4_step: non-finite state");
    return MachineState::from_vector(next);
}

MachineState advance(const MachineState& state, double u, double dt_sample, int substeps,
                     const MachineParams& params) {
    if (substeps < 1) throw ConfigError("advance: substeps must be >= 1");
    const double h = dt_sample / substeps;
    MachineState s = state;
    for (int i = 0; i < substeps; ++i) s = rk4_step(s, u, h, params);
    return s;
}

namespace {

// Steady state with omega = 0 and damper currents zero, in the unknowns
// (delta, Id, Iq, If). Used only to seed the full Newton iteration.
Eigen::Vector4d reduced_residual(const Eigen::Vector4d& v, const MachineParams& p, double v_target) {
    const double delta = v(0);
    Vector5 i;
    i << v(1), v(2), v(3), 0.0, 0.0;
    const Vector5 lambda = p.inductance_matrix() * i;
    double vd = 0.0;
    double vq = 0.0;
    network_voltages(delta, i(0), i(1), p, vd, vq);
    Eigen::Vector4d r;
    r(0) = (-p.r_s * i(0) - lambda(1)) - vd;
    r(1) = (lambda(0) - p.r_s * i(1)) - vq;
    r(2) = (lambda(0) * i(1) - lambda(1) * i(0)) - p.P_m;
    r(3) = std::hypot(vd, vq) - v_target;
    return r;
}

template <int N, typename F>
std::optional<Eigen::Matrix<double, N, 1>> newton(F&& residual, Eigen::Matrix<double, N, 1> x, int max_iter,
                                                  double tol, int& iterations, double& final_norm) {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;
    Vec r = residual(x);
    final_norm = r.template lpNorm<Eigen::Infinity>();
    for (iterations = 0; iterations < max_iter; ++iterations) {
        if (!std::isfinite(final_norm)) return std::nullopt;
        if (final_norm <= tol) return x;
        Mat J;
        for (int j = 0; j < N; ++j) {
            const double h = std::max(1e-7 * std::abs(x(j)), 1e-9);
            Vec xp = x;
            Vec xm = x;
            xp(j) += h;
            xm(j) -= h;
            J.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
        }
        const Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible()) return std::nullopt;
        Vec step = lu.solve(-r);
        // Backtrack on the residual norm.
        double scale = 1.0;
        Vec trial;
        Vec r_trial;
        for (int k = 0; k < 30; ++k) {
            trial = x + scale * step;
            r_trial = residual(trial);
            const double n = r_trial.template lpNorm<Eigen::Infinity>();
            if (std::isfinite(n) && n < final_norm) break;
            scale *= 0.5;
        }
        x = trial;
        r = r_trial;
        final_norm = r.template lpNorm<Eigen::Infinity>();
    }
    return final_norm <= tol ? std::optional<Vec>(x) : std::nullopt;
}

Eigen::Matrix<double, 8, 1> full_residual(const Eigen::Matrix<double, 8, 1>& v, const MachineParams& p,
                                          double v_target) {
    const auto state = MachineState::from_vector(v.head<7>());
    Eigen::Matrix<double, 8, 1> r;
    r.head<7>() = derivatives(state, v(7), p);
    r(7) = electrical_interface(state, p).v_t - v_target;
    return r;
}

}  // namespace

Equilibrium find_equilibrium(const MachineParams& params, double v_target, int max_iter) {
    params.validate();
    if (!(v_target > 0.0)) throw ConfigError("find_equilibrium: v_target must be positive");

    // Multi-start on the reduced problem; prefer positive field current and the
    // smallest power angle (the stable branch).
    std::optional<Eigen::Vector4d> seed;
    const auto reduced = [&](const Eigen::Vector4d& v) { return reduced_residual(v, params, v_target); };
    for (double delta0 : {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, -0.4}) {
        for (double if0 : {1.0, 2.0, 3.0, 5.0, 8.0, 12.0}) {
            for (double id0 : {1.0, -1.0}) {
                int it = 0;
                double norm = 0.0;
                const auto sol = newton<4>(reduced, Eigen::Vector4d(delta0, id0, 0.5, if0), 60, 1e-12, it, norm);
                if (!sol || std::abs((*sol)(0)) > std::numbers::pi) continue;
                const auto better = [&](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
                    if ((a(3) > 0.0) != (b(3) > 0.0)) return a(3) > 0.0;
                    return std::abs(a(0)) < std::abs(b(0));
                };
                if (!seed || better(*sol, *seed)) seed = sol;
            }
        }
    }
    if (!seed) {
        throw ConvergenceError("find_equilibrium: no steady state found for v_t = " + std::to_string(v_target),
                               std::numeric_limits<double>::infinity());
    }

    Vector5 i;
    i << (*seed)(1), (*seed)(2), (*seed)(3), 0.0, 0.0;
    Eigen::Matrix<double, 8, 1> v;
    v << (*seed)(0), 0.0, params.inductance_matrix() * i, params.r_f * (*seed)(3);

    const auto full = [&](const Eigen::Matrix<double, 8, 1>& x) { return full_residual(x, params, v_target); };
    int iterations = 0;
    double norm = 0.0;
    const auto sol = newton<8>(full, v, max_iter, 1e-11, iterations, norm);
    if (!sol) {
        throw ConvergenceError("find_equilibrium: Newton did not converge, residual " + std::to_string(norm), norm);
    }
    Equilibrium eq;
    eq.state = MachineState::from_vector(sol->head<7>());
    // delta' = omega is linear, so the converged omega is zero up to rounding.
    eq.state.omega = 0.0;
    eq.u = (*sol)(7);
    Eigen::Matrix<double, 8, 1> x;
    x << eq.state.to_vector(), eq.u;
    eq.residual = full(x).lpNorm<Eigen::Infinity>();
    eq.iterations = iterations;
    if (eq.residual > 1e-10) {
        throw ConvergenceError("find_equilibrium: residual " + std::to_string(eq.residual) + " above 1e-10",
                               eq.residual);
    }
    return eq;
}

LinearModel linearize(const MachineParams& params, const MachineState& eq_state, double eq_u) {
    const Vector7 x0 = eq_state.to_vector();
    const double residual = derivatives(eq_state, eq_u, params).lpNorm<Eigen::Infinity>();
    if (residual > 1e-8) {
        throw ConfigError("linearize: point is not an equilibrium (residual " + std::to_string(residual) + ")");
    }
    const auto step = [](double v) { return std::max(1e-6 * std::abs(v), 1e-8); };
    const auto vt = [&](const Vector7& x) { return electrical_interface(MachineState::from_vector(x), params).v_t; };

    LinearModel lin;
    for (int j = 0; j < 7; ++j) {
        const double h = step(x0(j));
        Vector7 xp = x0;
        Vector7 xm = x0;
        xp(j) += h;
        xm(j) -= h;
        const double width = xp(j) - xm(j);
        lin.a_mat.col(j) = (derivatives(MachineState::from_vector(xp), eq_u, params) -
                            derivatives(MachineState::from_vector(xm), eq_u, params)) /
                           width;
        lin.c_vec(j) = (vt(xp) - vt(xm)) / width;
    }
    {
        const double h = step(eq_u);
        const double up = eq_u + h;
        const double um = eq_u - h;
        lin.b_vec = (derivatives(eq_state, up, params) - derivatives(eq_state, um, params)) / (up - um);
        lin.d_scal = 0.0;  // v_t has no direct dependence on the field voltage
    }

    // Rosenbrock pencil [A B; C D] - s [I 0; 0 0].
    Eigen::Matrix<double, 8, 8> M = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 8> N = Eigen::Matrix<double, 8, 8>::Zero();
    M.topLeftCorner<7, 7>() = lin.a_mat;
    M.topRightCorner<7, 1>() = lin.b_vec;
    M.bottomLeftCorner<1, 7>() = lin.c_vec;
    M(7, 7) = lin.d_scal;
    N.topLeftCorner<7, 7>().setIdentity();

    const Eigen::MatrixXd m_dyn = M;
    const Eigen::MatrixXd n_dyn = N;
    const Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(m_dyn, n_dyn);
    if (ges.info() != Eigen::Success) {
        lin.ill_conditioned = true;
        return lin;
    }
    const Eigen::VectorXcd alphas = ges.alphas();
    const Eigen::VectorXd betas = ges.betas();
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < alphas.size(); ++k) {
        if (std::abs(betas(k)) > 1e-10 * std::max(scale, std::abs(alphas(k)))) {
            lin.zeros.push_back(alphas(k) / betas(k));
        }
    }
    std::sort(lin.zeros.begin(), lin.zeros.end(),
              [](const auto& a, const auto& b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    const bool relative_degree_one = std::abs(lin.cb()) > 1e-12;
    lin.ill_conditioned = relative_degree_one && lin.zeros.size() != 6;
    return lin;
}

void St1aConfig::validate() const {
    // The published gain is the product rounded to four significant digits.
    if (std::abs(gain_product - k_e * rf_over_xad) > 5e-5) {
        throw ConfigError("st1a: gain_product inconsistent with k_e * rf_over_xad");
    }
}

double st1a_control(double v_t, double v_ref, const St1aConfig& cfg) {
    return cfg.gain_product * (v_ref - v_t);
}

}  // namespace neuroexc
