#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace neuroexc {

class KeyValueFile;

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Vector7 = Eigen::Matrix<double, 7, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;
using RowVector7 = Eigen::Matrix<double, 1, 7>;

/// Per-unit constants of the synchronous machine / infinite bus system.
///
/// Time is in seconds and `omega` (the power-angle derivative) in electrical
/// rad/s, so `D` is pu torque per rad/s. Defaults are the shipped reference
/// machine except `vq_x11_sign`, which defaults to -1.
struct MachineParams {
    double omega_b = 376.99111843077515;  // 2*pi*60 rad/s
    double H = 9.5;                       // s
    double D = 0.02;                      // pu torque per rad/s

    double r_s = 0.003;
    double r_f = 6.44424e-4;
    double r_kd = 0.0284;
    double r_kq = 0.0237;

    double L_d = 1.81;
    double L_q = 1.76;
    double L_ad = 1.65;
    double L_aq = 1.60;
    double L_f = 1.803;
    double L_fkd = 1.65;
    double L_kd = 1.8213;
    double L_kq = 1.725;

    double r11 = 0.0;
    double x11 = 0.1;
    double A = 1.0;
    double B = 0.0;
    double v_inf = 1.0;
    double P_m = 1.6512;

    /// Replace the constant +-1 speed-voltage entries of Z by the per-unit
    /// rotor speed 1 + omega/omega_b.
    bool speed_coupled_z = false;
    /// Sign multiplying x11*Id in the v_q network equation. +1 is the
    /// E_t = E_B + (R + jX) I_t relation; -1 gives non-minimum-phase
    /// operating points on the reference machine.
    double vq_x11_sign = -1.0;

    /// The 5x5 flux/current matrix with lambda = L * i.
    [[nodiscard]] Matrix5 inductance_matrix() const;
    /// Throws ConfigError when H, omega_b or det L violate their invariants.
    void validate() const;
};

/// The shipped reference machine (`configs/reference.machine`).
MachineParams reference_machine();

MachineParams parse_machine_params(const KeyValueFile& file);
MachineParams load_machine_params(const std::filesystem::path& path);

struct MachineState {
    double delta = 0.0;  // rad
    double omega = 0.0;  // rad/s
    Vector5 lambda = Vector5::Zero();  // [lambda_d, lambda_q, lambda_f, lambda_kd, lambda_kq]

    [[nodiscard]] Vector7 to_vector() const;
    static MachineState from_vector(const Vector7& x);
    [[nodiscard]] bool is_finite() const;
};

struct ElectricalInterface {
    Vector5 i = Vector5::Zero();  // [Id, Iq, If, Ikd, Ikq]
    double v_d = 0.0;
    double v_q = 0.0;
    double P_e = 0.0;
    double v_t = 0.0;
};

struct LinearModel {
    Matrix7 a_mat = Matrix7::Zero();
    Vector7 b_vec = Vector7::Zero();
    RowVector7 c_vec = RowVector7::Zero();
    double d_scal = 0.0;
    std::vector<std::complex<double>> zeros;
    /// Set when the Rosenbrock pencil does not produce exactly n - 1 finite zeros.
    bool ill_conditioned = false;

    [[nodiscard]] double cb() const { return c_vec * b_vec; }
};

struct St1aConfig {
    double gain_product = 0.0781;
    double k_e = 200.0;
    double t_e = 0.0;
    double rf_over_xad = 3.9056e-4;

    void validate() const;
};

struct Equilibrium {
    MachineState state;
    double u = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

/// Solves L * i = lambda.
Vector5 dq_currents(const Vector5& lambda, const MachineParams& params);

/// Network voltages for given dq currents and power angle.
void network_voltages(double delta, double i_d, double i_q, const MachineParams& params, double& v_d,
                      double& v_q);

ElectricalInterface electrical_interface(const MachineState& state, const MachineParams& params);

/// Right-hand side of the 7-state model for field voltage `u`.
Vector7 derivatives(const MachineState& state, double u, const MachineParams& params);

/// Classical RK4 step with `u` held constant.
MachineState rk4_step(const MachineState& state, double u, double dt, const MachineParams& params);

/// `substeps` RK4 steps spanning one control sample of length `dt_sample`.
MachineState advance(const MachineState& state, double u, double dt_sample, int substeps,
                     const MachineParams& params);

/// Operating point with all derivatives zero and terminal voltage `v_target`.
Equilibrium find_equilibrium(const MachineParams& params, double v_target, int max_iter = 100);

/// Finite-difference Jacobians at an equilibrium plus transmission zeros from
/// the Rosenbrock pencil.
LinearModel linearize(const MachineParams& params, const MachineState& eq_state, double eq_u);

/// Proportional ST1A exciter output (a field-voltage perturbation).
double st1a_control(double v_t, double v_ref, const St1aConfig& cfg);

}  // namespace neuroexc
