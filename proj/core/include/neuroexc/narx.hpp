#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace neuroexc {

inline constexpr int kOutputLags = 7;  // y(k) .. y(k-6)
inline constexpr int kInputLags = 6;   // u(k-1) .. u(k-6)
inline constexpr int kRegressorSize = kOutputLags + kInputLags;
inline constexpr int kDefaultHidden = 5;

/// [y(k), ..., y(k-6), u(k-1), ..., u(k-6)], newest first in each block.
using Regressor = Eigen::Matrix<double, kRegressorSize, 1>;

/// One hidden tanh layer and a linear scalar output.
struct Mlp {
    Eigen::MatrixXd hidden_w;  // hidden x inputs
    Eigen::VectorXd hidden_b;
    Eigen::VectorXd out_w;
    double out_b = 0.0;

    static Mlp zeros(int hidden, int inputs);

    [[nodiscard]] int hidden() const { return static_cast<int>(hidden_w.rows()); }
    [[nodiscard]] int inputs() const { return static_cast<int>(hidden_w.cols()); }
    /// hidden*inputs + 2*hidden + 1
    [[nodiscard]] int parameter_count() const { return hidden() * inputs() + 2 * hidden() + 1; }
    /// Throws ConfigError when the member shapes disagree.
    void check() const;
};

/// y_hat = f(z) + g(z) * u
struct NarxModel {
    Mlp f;
    Mlp g;

    [[nodiscard]] int parameter_count() const { return f.parameter_count() + g.parameter_count(); }
    void check() const;
};

double mlp_forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& z);

double narx_predict(const NarxModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u);

/// Writes d(out)/d(params) of one network into `grad` (ThetaVector order),
/// each entry multiplied by `scale`.
void mlp_gradient(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& z, double scale,
                  Eigen::Ref<Eigen::VectorXd> grad);

/// d(y_hat)/d(theta). The g block carries the factor u.
Eigen::VectorXd weight_jacobian(const NarxModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u);

/// Layout per network: hidden_w row-major, hidden_b, out_w, out_b; f first.
Eigen::VectorXd flatten(const NarxModel& model);
NarxModel unflatten(const Eigen::Ref<const Eigen::VectorXd>& theta, int p, int q, int inputs = kRegressorSize);

/// Every weight uniform in [-0.5, 0.5] from a mt19937_64 seeded with `seed`.
NarxModel random_model(int p, int q, std::uint64_t seed, int inputs = kRegressorSize);

struct Record {
    Regressor z = Regressor::Zero();
    double u = 0.0;
    double y_next = 0.0;
};

struct Dataset {
    std::vector<Record> records;

    [[nodiscard]] std::size_t size() const { return records.size(); }
    [[nodiscard]] bool empty() const { return records.empty(); }
};

/// (1/2N) * sum (y_next - y_hat)^2
double mse_cost(const NarxModel& model, const Dataset& data);

std::string format_weights(const NarxModel& model);
NarxModel parse_weights(std::string_view text);
void save_weights(const NarxModel& model, const std::filesystem::path& path);
NarxModel load_weights(const std::filesystem::path& path);

}  // namespace neuroexc
