#pragma once

#include <vector>

#include <Eigen/Dense>

#include "neuroexc/narx.hpp"

namespace neuroexc {

struct LmOptions {
    int max_iter = 150;
    double cost_tol = 0.0;
    double mu_init = 1e-2;
    /// Training stops once mu grows past this without an accepted step.
    double mu_max = 1e20;
    /// Per-parameter flag in ThetaVector order; empty means all trainable.
    std::vector<bool> trainable;
};

struct LmState {
    double mu = 1e-2;
    /// Cost before the first iteration followed by the cost after every
    /// accepted step.
    std::vector<double> cost_history;
    int iteration = 0;
    int rejected = 0;
    Eigen::VectorXd step;  // last accepted s_k, full ThetaVector length
    double rho = 1.0;      // the step length is folded into s_k
};

struct LmResult {
    NarxModel model;
    LmState state;
};

/// Batch Levenberg-Marquardt on the joint f/g parameter vector.
/// An iteration is one Jacobian evaluation; rejected trial steps inside it
/// only raise mu.
LmResult lm_train(const NarxModel& initial, const Dataset& data, const LmOptions& options = {});

}  // namespace neuroexc
