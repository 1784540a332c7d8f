#pragma once

#include <complex>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "neuroexc/narx.hpp"

namespace neuroexc {

class KeyValueFile;

/// Q(z) = z^p + C_{p-1} z^{p-1} + ... + C_0 and k1 = Q(1).
struct PolePlacement {
    int p = 0;
    std::vector<double> coeffs;  // C_0 .. C_{p-1}
    double k1 = 1.0;
};

/// Poles must be strictly inside the unit circle and closed under conjugation.
PolePlacement synthesize_poly(const std::vector<std::complex<double>>& poles);

/// k1*r - sum_i C_{p-1-i} y(k-i). `y_newest_first` needs at least p entries.
double u_tilde(double r, const std::vector<double>& y_newest_first, const PolePlacement& spec);

/// Divides by g_hat, clamped away from zero at g_min with its sign kept
/// (sign(0) = +1).
double linearizing_control(double f_hat, double g_hat, double u_til, double g_min);

struct PssConfig {
    static constexpr double kBaseGain = 0.7091;
    double nu = 3.0;

    [[nodiscard]] double k_pss() const { return nu * kBaseGain; }
};

double pss_augment(double u_lin, double delta_dot, const PssConfig& cfg);

double deadzone(double e, double d0);

/// theta - D(e*) jac / (1 + jac'jac). Returns `theta` untouched when the
/// error is inside the deadzone.
Eigen::VectorXd online_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& jac, double e_star, double d0);

struct ControllerSpec {
    PolePlacement poles;
    PssConfig pss{0.0};
    double d0 = 0.01;
    /// Non-positive means 0.1 * |g_hat| at the initial regressor.
    double g_min = 0.0;
    bool adapt = true;
};

/// Closed-form f and g replacing the networks; used to check the loop
/// against the ideal linear response.
struct ExactModel {
    std::function<double(const Regressor&)> f;
    std::function<double(const Regressor&)> g;
};

class ControllerState {
public:
    /// Histories start at `y_init` and `u_init`.
    ControllerState(NarxModel model, ControllerSpec spec, double y_init, double u_init = 0.0);
    ControllerState(ExactModel exact, ControllerSpec spec, double y_init, double u_init = 0.0);

    [[nodiscard]] const ControllerSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const NarxModel& model() const noexcept { return model_; }
    [[nodiscard]] const Eigen::VectorXd& theta() const noexcept { return theta_; }
    [[nodiscard]] double g_min() const noexcept { return g_min_; }
    [[nodiscard]] const std::deque<double>& y_hist() const noexcept { return y_hist_; }
    [[nodiscard]] const std::deque<double>& u_hist() const noexcept { return u_hist_; }
    [[nodiscard]] const Eigen::VectorXd& last_jacobian() const noexcept { return last_jacobian_; }
    /// e*(k) = y_hat*(k) - y(k) seen by the latest step; 0 before the second step.
    [[nodiscard]] double last_error() const noexcept { return last_error_; }
    [[nodiscard]] bool last_adapted() const noexcept { return last_adapted_; }
    [[nodiscard]] std::optional<double> prediction() const noexcept { return prediction_; }

    void set_adaptation(bool enabled) noexcept { spec_.adapt = enabled; }
    void set_pss(const PssConfig& pss) noexcept { spec_.pss = pss; }

    [[nodiscard]] Regressor regressor() const;
    /// z(k) used by the latest step, before u(k) entered the history.
    [[nodiscard]] const Regressor& last_regressor() const noexcept { return last_regressor_; }

    /// One sampling instant. `delta_dot` is the PSS input in the units the
    /// caller chose for k_pss.
    double step(double r, double y_meas, double delta_dot);

private:
    void init_histories(double y_init, double u_init);

    NarxModel model_;
    std::optional<ExactModel> exact_;
    ControllerSpec spec_;
    Eigen::VectorXd theta_;
    double g_min_ = 0.0;
    std::deque<double> y_hist_;  // newest first, max(p, 7) entries
    std::deque<double> u_hist_;  // newest first, 6 entries
    std::optional<double> prediction_;
    Eigen::VectorXd last_jacobian_;
    Regressor last_regressor_ = Regressor::Zero();
    double last_error_ = 0.0;
    bool last_adapted_ = false;
};

inline double control_step(ControllerState& ctrl, double r, double y_meas, double delta_dot) {
    return ctrl.step(r, y_meas, delta_dot);
}

enum class ControllerKind { neural, st1a, none };

/// Controller file contents. Paths are resolved against the file's directory.
struct ControllerConfig {
    ControllerKind kind = ControllerKind::neural;
    std::vector<std::complex<double>> poles = std::vector<std::complex<double>>(7, 0.7);
    double nu = 0.0;
    double d0 = 0.01;
    double g_min = 0.0;
    bool adapt = true;
    std::filesystem::path weights;
    /// Operating point of the identification run; u is a perturbation about
    /// the field voltage of this equilibrium.
    double v_nominal = 1.1392;

    [[nodiscard]] ControllerSpec spec() const;
};

/// Keys: controller, p, pole, nu, d0, g_min, adapt, weights, v_nominal.
/// `pole` is `re` or `re im`; a single pole with p > 1 is repeated p times.
ControllerConfig parse_controller_config(const KeyValueFile& file);

}  // namespace neuroexc
