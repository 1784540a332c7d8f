#include "neuroexc/lm.hpp"

#include <cmath>
#include <string>

#include "neuroexc/errors.hpp"

namespace neuroexc {

namespace {

// Residuals r = y_hat - y over the batch.
Eigen::VectorXd residuals(const NarxModel& model, const Dataset& data) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& rec = data.records[k];
        r(static_cast<Eigen::Index>(k)) = narx_predict(model, rec.z, rec.u) - rec.y_next;
    }
    return r;
}

double cost_of(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm() / static_cast<double>(r.size()); }

}  // namespace

LmResult lm_train(const NarxModel& initial, const Dataset& data, const LmOptions& options) {
    if (data.empty()) throw ConfigError("lm_train: empty dataset");
    if (options.max_iter < 1) throw ConfigError("lm_train: max_iter must be >= 1");
    if (!(options.mu_init > 0.0)) throw ConfigError("lm_train: mu_init must be positive");
    initial.check();

    const int p = initial.f.hidden();
    const int q = initial.g.hidden();
    const int inputs = initial.f.inputs();
    const Eigen::Index n_params = initial.parameter_count();
    if (!options.trainable.empty() && static_cast<Eigen::Index>(options.trainable.size()) != n_params) {
        throw ConfigError("lm_train: trainable mask has wrong length");
    }

    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < n_params; ++j) {
        if (options.trainable.empty() || options.trainable[static_cast<std::size_t>(j)]) free.push_back(j);
    }
    const auto n_free = static_cast<Eigen::Index>(free.size());
    const auto n_rows = static_cast<Eigen::Index>(data.size());

    Eigen::VectorXd theta = flatten(initial);
    NarxModel model = initial;
    Eigen::VectorXd r = residuals(model, data);
    double cost = cost_of(r);
    if (!std::isfinite(cost)) throw NumericalError("lm_train: initial cost is not finite");

    LmState state;
    state.mu = options.mu_init;
    state.step = Eigen::VectorXd::Zero(n_params);
    state.cost_history.push_back(cost);

    Eigen::MatrixXd jac(n_rows, n_free);
    Eigen::VectorXd row(n_params);
    while (state.iteration < options.max_iter && cost > options.cost_tol && n_free > 0) {
        ++state.iteration;
        for (Eigen::Index k = 0; k < n_rows; ++k) {
            const auto& rec = data.records[static_cast<std::size_t>(k)];
            row = weight_jacobian(model, rec.z, rec.u);
            for (Eigen::Index c = 0; c < n_free; ++c) jac(k, c) = row(free[static_cast<std::size_t>(c)]);
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd normal = jtj;
            normal.diagonal().array() += state.mu;
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                throw SingularMatrixError("lm_train: normal equations not solvable at mu = " +
                                          std::to_string(state.mu) + ", rcond " + std::to_string(ldlt.rcond()));
            }
            const Eigen::VectorXd s = ldlt.solve(-jtr);

            Eigen::VectorXd trial = theta;
            for (Eigen::Index c = 0; c < n_free; ++c) trial(free[static_cast<std::size_t>(c)]) += s(c);
            const NarxModel trial_model = unflatten(trial, p, q, inputs);
            const Eigen::VectorXd trial_r = residuals(trial_model, data);
            const double trial_cost = cost_of(trial_r);

            if (std::isfinite(trial_cost) && trial_cost < cost) {
                state.step = trial - theta;
                theta = std::move(trial);
                model = trial_model;
                r = trial_r;
                cost = trial_cost;
                state.mu = std::max(state.mu / 10.0, 1e-20);
                state.cost_history.push_back(cost);
                accepted = true;
            } else {
                ++state.rejected;
                state.mu *= 10.0;
                if (state.mu > options.mu_max) return {model, state};
            }
        }
    }
    return {model, state};
}

}  // namespace neuroexc
