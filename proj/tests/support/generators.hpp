#pragma once

// Seeded generators for property tests. Each property runs a fixed number of
// cases from a fixed seed so failures replay exactly.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "neuroexc/narx.hpp"

namespace testgen {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }

    Eigen::VectorXd vector(Eigen::Index n, double lo, double hi) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
        return v;
    }

    neuroexc::Regressor regressor() {
        neuroexc::Regressor z;
        for (int i = 0; i < neuroexc::kOutputLags; ++i) z(i) = uniform(0.5, 2.0);
        for (int i = 0; i < neuroexc::kInputLags; ++i) z(neuroexc::kOutputLags + i) = uniform(-0.1, 0.1);
        return z;
    }

    neuroexc::NarxModel model(int p, int q, double scale = 1.0) {
        const int n = (p * neuroexc::kRegressorSize + 2 * p + 1) + (q * neuroexc::kRegressorSize + 2 * q + 1);
        return neuroexc::unflatten(vector(n, -scale, scale), p, q);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

template <typename F>
void for_all(int cases, std::uint64_t seed, F&& property) {
    Gen gen(seed);
    for (int i = 0; i < cases; ++i) property(gen, i);
}

inline std::filesystem::path source_path(const std::string& rel) {
    return std::filesystem::path(NEUROEXC_SOURCE_DIR) / rel;
}

inline std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::path(NEUROEXC_TEST_TMP) / name;
}

}  // namespace testgen
