#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "neuroexc/lm.hpp"
#include "neuroexc/narx.hpp"
#include "neuroexc/plant.hpp"

namespace neuroexc {

class KeyValueFile;

/// Held uniform-random field-voltage perturbations about the equilibrium at
/// `v_operating`.
struct ExcitationPlan {
    int n_samples = 10000;
    double dt = 0.002;  // s
    int substeps = 4;
    double u_min = -0.1;
    double u_max = 0.1;
    int hold = 10;  // samples per random level
    /// Weight of a fresh uniform draw mixed into every sample; 0 gives pure
    /// held levels. The mix is convex, so u stays in [u_min, u_max].
    double fast_fraction = 0.0;
    std::uint64_t seed = 0;
    double v_operating = 1.1392;

    void validate() const;
};

/// u(k) is the perturbation applied over [k, k+1); y(k) is v_t sampled
/// before it is applied.
struct InputOutputSeries {
    std::vector<double> u;
    std::vector<double> y;
};

struct ValidationReport {
    double max_abs_error = 0.0;
    double max_abs_output = 0.0;
    double relative_error_pct = 0.0;
    std::vector<double> errors;  // y_hat - y per holdout record
};

InputOutputSeries excite_and_record(const MachineParams& params, const ExcitationPlan& plan);

/// One record per k in [6, N-2]: z(k), u(k) and target y(k+1).
Dataset build_regression_set(const InputOutputSeries& series);

/// Contiguous split; the first block is the training set.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction = 0.5);

ValidationReport make_report(std::vector<double> errors, double max_abs_output);
ValidationReport cross_validate(const NarxModel& model, const Dataset& holdout);

/// 95th percentile of |e| rounded up to one significant figure, at least 1e-6.
double select_deadzone(const ValidationReport& report);

/// Rounds a positive value up to one significant figure.
double ceil_one_significant(double value);

struct TrainPlan {
    int p = kDefaultHidden;
    int q = kDefaultHidden;
    std::uint64_t seed = 0;
    double train_fraction = 0.5;
    LmOptions lm;
};

struct TrainOutcome {
    NarxModel model;
    LmState lm;
    ValidationReport validation;
    double deadzone = 0.0;
};

/// Regression set, split, seeded initialization, LM, holdout validation.
TrainOutcome train_narx(const InputOutputSeries& series, const TrainPlan& plan);

ExcitationPlan parse_excitation_plan(const KeyValueFile& file, ExcitationPlan plan = {});
TrainPlan parse_train_plan(const KeyValueFile& file, TrainPlan plan = {});

std::string format_series_csv(const InputOutputSeries& series);
InputOutputSeries parse_series_csv(std::string_view text);
void save_series(const InputOutputSeries& series, const std::filesystem::path& path);
InputOutputSeries load_series(const std::filesystem::path& path);

}  // namespace neuroexc
