#include "neuroexc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"

namespace neuroexc {

PolePlacement synthesize_poly(const std::vector<std::complex<double>>& poles) {
    for (const auto& z : poles) {
        if (!(std::abs(z) < 1.0)) throw ConfigError("synthesize_poly: pole outside the unit circle");
    }
    std::vector<bool> matched(poles.size(), false);
    for (std::size_t i = 0; i < poles.size(); ++i) {
        if (matched[i]) continue;
        matched[i] = true;
        if (poles[i].imag() == 0.0) continue;
        bool found = false;
        for (std::size_t j = i + 1; j < poles.size() && !found; ++j) {
            if (!matched[j] && std::abs(poles[j] - std::conj(poles[i])) <= 1e-12) {
                matched[j] = true;
                found = true;
            }
        }
        if (!found) throw ConfigError("synthesize_poly: poles are not closed under conjugation");
    }

    // Monic, highest power first.
    std::vector<std::complex<double>> c{1.0};
    for (const auto& z : poles) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= z * c[i];
        }
        c = std::move(next);
    }

    PolePlacement spec;
    spec.p = static_cast<int>(poles.size());
    spec.coeffs.resize(poles.size());
    spec.k1 = 1.0;
    for (int j = 0; j < spec.p; ++j) {
        spec.coeffs[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(spec.p - j)].real();
        spec.k1 += spec.coeffs[static_cast<std::size_t>(j)];
    }
    return spec;
}

double u_tilde(double r, const std::vector<double>& y_newest_first, const PolePlacement& spec) {
    if (static_cast<int>(y_newest_first.size()) < spec.p) throw ConfigError("u_tilde: history shorter than p");
    double feedback = 0.0;
    for (int i = 0; i < spec.p; ++i) {
        feedback += spec.coeffs[static_cast<std::size_t>(spec.p - 1 - i)] * y_newest_first[static_cast<std::size_t>(i)];
    }
    return spec.k1 * r - feedback;
}

double linearizing_control(double f_hat, double g_hat, double u_til, double g_min) {
    if (!(g_min > 0.0)) throw ConfigError("linearizing_control: g_min must be positive");
    const double g_safe = std::abs(g_hat) >= g_min ? g_hat : std::copysign(g_min, g_hat == 0.0 ? 1.0 : g_hat);
    return (-f_hat + u_til) / g_safe;
}

double pss_augment(double u_lin, double delta_dot, const PssConfig& cfg) { return u_lin + cfg.k_pss() * delta_dot; }

double deadzone(double e, double d0) {
    if (e > d0) return e - d0;
    if (e < -d0) return e + d0;
    return 0.0;
}

Eigen::VectorXd online_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& jac, double e_star, double d0) {
    if (theta.size() != jac.size()) throw ConfigError("online_update: theta and jacobian sizes differ");
    const double d = deadzone(e_star, d0);
    if (d == 0.0) return theta;
    return theta - (d / (1.0 + jac.squaredNorm())) * jac;
}

ControllerState::ControllerState(NarxModel model, ControllerSpec spec, double y_init, double u_init)
    : model_(std::move(model)), spec_(std::move(spec)) {
    model_.check();
    if (model_.f.inputs() != kRegressorSize) throw ConfigError("controller: networks must take 13 inputs");
    theta_ = flatten(model_);
    init_histories(y_init, u_init);
    const double g0 = mlp_forward(model_.g, regressor());
    g_min_ = spec_.g_min > 0.0 ? spec_.g_min : 0.1 * std::abs(g0);
    if (!(g_min_ > 0.0)) throw ConfigError("controller: g_hat vanishes at the initial point; set g_min explicitly");
}

ControllerState::ControllerState(ExactModel exact, ControllerSpec spec, double y_init, double u_init)
    : exact_(std::move(exact)), spec_(std::move(spec)) {
    spec_.adapt = false;
    init_histories(y_init, u_init);
    g_min_ = spec_.g_min > 0.0 ? spec_.g_min : 0.1 * std::abs(exact_->g(regressor()));
    if (!(g_min_ > 0.0)) throw ConfigError("controller: g vanishes at the initial point; set g_min explicitly");
}

void ControllerState::init_histories(double y_init, double u_init) {
    if (spec_.d0 < 0.0) throw ConfigError("controller: d0 must be >= 0");
    y_hist_.assign(static_cast<std::size_t>(std::max(spec_.poles.p, kOutputLags)), y_init);
    u_hist_.assign(kInputLags, u_init);
}

Regressor ControllerState::regressor() const {
    Regressor z;
    for (int i = 0; i < kOutputLags; ++i) z(i) = y_hist_[static_cast<std::size_t>(i)];
    for (int i = 0; i < kInputLags; ++i) z(kOutputLags + i) = u_hist_[static_cast<std::size_t>(i)];
    return z;
}

double ControllerState::step(double r, double y_meas, double delta_dot) {
    last_adapted_ = false;
    last_error_ = 0.0;
    if (prediction_) {
        last_error_ = *prediction_ - y_meas;
        if (spec_.adapt && std::abs(last_error_) > spec_.d0) {
            theta_ = online_update(theta_, last_jacobian_, last_error_, spec_.d0);
            model_ = unflatten(theta_, model_.f.hidden(), model_.g.hidden());
            last_adapted_ = true;
        }
    }

    y_hist_.pop_back();
    y_hist_.push_front(y_meas);
    const Regressor z = regressor();
    last_regressor_ = z;

    const double f_hat = exact_ ? exact_->f(z) : mlp_forward(model_.f, z);
    const double g_hat = exact_ ? exact_->g(z) : mlp_forward(model_.g, z);
    const std::vector<double> ys(y_hist_.begin(), y_hist_.end());
    const double u_til = u_tilde(r, ys, spec_.poles);
    const double u = pss_augment(linearizing_control(f_hat, g_hat, u_til, g_min_), delta_dot, spec_.pss);
    if (!std::isfinite(u)) throw NumericalError("control_step: non-finite control");

    u_hist_.pop_back();
    u_hist_.push_front(u);
    prediction_ = f_hat + g_hat * u;
    if (!exact_) last_jacobian_ = weight_jacobian(model_, z, u);
    return u;
}

ControllerSpec ControllerConfig::spec() const {
    ControllerSpec s;
    s.poles = synthesize_poly(poles);
    s.pss.nu = nu;
    s.d0 = d0;
    s.g_min = g_min;
    s.adapt = adapt;
    return s;
}

ControllerConfig parse_controller_config(const KeyValueFile& file) {
    file.reject_unknown({"controller", "p", "pole", "nu", "d0", "g_min", "adapt", "weights", "v_nominal"});
    ControllerConfig cfg;
    const std::string kind = file.get_string("controller", "neural");
    if (kind == "neural") cfg.kind = ControllerKind::neural;
    else if (kind == "st1a") cfg.kind = ControllerKind::st1a;
    else if (kind == "none") cfg.kind = ControllerKind::none;
    else throw ConfigError(file.source() + ": controller must be neural, st1a or none");

    std::vector<std::complex<double>> poles;
    for (const auto& value : file.get_all("pole")) {
        const auto tokens = split_whitespace(value);
        if (tokens.empty() || tokens.size() > 2) throw ConfigError(file.source() + ": pole must be 're' or 're im'");
        poles.emplace_back(parse_double(tokens[0]), tokens.size() == 2 ? parse_double(tokens[1]) : 0.0);
    }
    if (file.contains("p")) {
        const long p = file.get_int("p", 7);
        if (p < 0) throw ConfigError(file.source() + ": p must be >= 0");
        if (poles.empty() && p > 0) poles.assign(static_cast<std::size_t>(p), 0.7);
        else if (poles.size() == 1 && p > 1) poles.assign(static_cast<std::size_t>(p), poles.front());
        else if (static_cast<long>(poles.size()) != p) {
            throw ConfigError(file.source() + ": p = " + std::to_string(p) + " but " + std::to_string(poles.size()) +
                              " poles given");
        }
    }
    if (file.contains("p") || !poles.empty()) cfg.poles = poles;

    cfg.nu = file.get_double("nu", cfg.nu);
    cfg.d0 = file.get_double("d0", cfg.d0);
    cfg.g_min = file.get_double("g_min", cfg.g_min);
    cfg.adapt = file.get_bool("adapt", cfg.adapt);
    cfg.v_nominal = file.get_double("v_nominal", cfg.v_nominal);
    if (file.contains("weights")) cfg.weights = file.get_path("weights");
    if (cfg.d0 < 0.0) throw ConfigError(file.source() + ": d0 must be >= 0");
    if (cfg.g_min < 0.0) throw ConfigError(file.source() + ": g_min must be >= 0");
    if (cfg.kind == ControllerKind::neural && cfg.weights.empty()) {
        throw ConfigError(file.source() + ": neural controller needs a weights file");
    }
    synthesize_poly(cfg.poles);  // validate early
    return cfg;
}

}  // namespace neuroexc
