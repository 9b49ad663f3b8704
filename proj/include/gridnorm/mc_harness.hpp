#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridnorm/random_fields.hpp"
#include "gridnorm/spatial_uit.hpp"

namespace gridnorm {

enum class TestKind { uit, mardia_skewness, mardia_kurtosis, doornik_hansen };

std::string test_kind_name(TestKind kind);
TestKind test_kind_from_name(const std::string& name);

/// Worker count for replicate-level parallelism: the GRIDNORM_WORKERS
/// environment variable when set, otherwise all available cores.
int default_worker_count();

/// Type-I-error study: Gaussian rook moving-average fields with the
/// innovation correlation range swept over effective ranges h*, each enabled
/// test run at level alpha per replicate.
struct SizeExperimentConfig {
    int grid_side = 15;
    int p = 2;
    int n_projections = 100;
    double alpha = 0.05;
    std::vector<double> h_star_grid;  // empty = 0.1 to 0.9 by 0.02
    int n_sim = 1000;
    CorrelationFamily family = CorrelationFamily::exponential;
    std::vector<double> thetas = {0.2, -0.2};
    std::vector<TestKind> tests = {TestKind::uit, TestKind::mardia_skewness,
                                   TestKind::mardia_kurtosis,
                                   TestKind::doornik_hansen};
    std::uint64_t master_seed = 0;
    /// Reuse one noise draw per replicate across all h* levels.
    bool common_random_numbers = false;
    std::optional<int> bandwidth;  // empty = side-length rule
    ProjectionSampler sampler = ProjectionSampler::sphere;
    std::optional<int> workers;  // empty = default_worker_count()

    std::vector<double> effective_h_star_grid() const;
    void validate() const;
};

/// Power study: the size-study fields pushed through the inverse
/// sinh-arcsinh transform before testing.
struct PowerExperimentConfig {
    SizeExperimentConfig base;
    std::vector<SasParams> sas;

    void validate() const;
};

struct RejectionCurve {
    std::string test_name;
    std::vector<double> h_star;
    std::vector<double> rate;
    std::vector<double> std_error;  // binomial standard errors
    int n_sim = 0;
};

std::vector<RejectionCurve> run_size_experiment(const SizeExperimentConfig& cfg);
std::vector<RejectionCurve> run_power_experiment(const PowerExperimentConfig& cfg);

/// Curves sampled on a common grid, one row per curve.
struct CurveBundle {
    std::vector<double> grid;
    Matrix curves;  // n_curves x grid.size()

    void validate() const;
};

/// Mardia-moment drift study: per replicate one fixed standard-normal vector
/// pushed through the bivariate-Matern covariance square root at every h*
/// (common random numbers), recording b_{1,2} and b_{2,2} curves.
struct MomentDriftConfig {
    int grid_side = 15;
    CorrelationFamily family = CorrelationFamily::exponential;  // nu = 0.5 or 1
    double sigma2_1 = 1.0;
    double sigma2_2 = 1.0;
    double rho12 = 0.5;
    std::vector<double> h_star_grid;  // empty = 0.1 to 0.9 by 0.02
    int n_rep = 200;
    std::uint64_t master_seed = 0;
    std::optional<int> workers;

    double smoothness() const {
        return family == CorrelationFamily::exponential ? 0.5 : 1.0;
    }
    std::vector<double> effective_h_star_grid() const;
    void validate() const;
};

struct MomentDriftResult {
    CurveBundle skewness;  // b_{1,2}
    CurveBundle kurtosis;  // b_{2,2}
};

MomentDriftResult run_moment_drift_experiment(const MomentDriftConfig& cfg);

/// Modified band depth with bands from curve pairs (J = 2): the average over
/// all unordered pairs of the fraction of grid points where the curve lies
/// inside the pair's pointwise envelope.
std::vector<double> modified_band_depth(const CurveBundle& bundle);

/// Functional-boxplot summary: deepest curve as median, pointwise envelope
/// of the deepest half as the central region, fences at 1.5x the central
/// height, curves exiting the fences anywhere flagged as outliers.
struct FunctionalSummary {
    std::vector<double> depths;
    int median_index = 0;
    Vector median;
    Vector central_lo, central_hi;
    Vector fence_lo, fence_hi;
    std::vector<int> outliers;
};

FunctionalSummary functional_summary(const CurveBundle& bundle);

}  // namespace gridnorm
