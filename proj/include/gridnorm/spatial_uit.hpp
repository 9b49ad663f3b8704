#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gridnorm/numerics.hpp"
#include "gridnorm/random_fields.hpp"

namespace gridnorm {

/// One projected variable observed on a lattice.
struct GriddedSeries {
    LatticeSpec spec;
    Vector values;  // site_count entries in flat order

    void validate() const;
};

/// Bartlett (triangular) smoothing kernel with per-dimension bandwidths.
struct KernelSpec {
    int b_x = 1;
    int b_y = 1;

    /// Bandwidths from the side-length rule applied per dimension.
    static KernelSpec auto_for(const LatticeSpec& spec);

    void validate() const;
};

/// floor(4 (N/100)^{2/9}), floored at 1.
int default_bandwidth(int side_length);

/// Subtract the sample mean and scale to unit divisor-n variance.
GriddedSeries standardize(const GriddedSeries& series);

/// Sample auto-covariance C^(h) = (1/n) sum over site pairs (s, s+h) inside
/// the grid of z(s) z(s+h); n is the total site count. Lags with no valid
/// pairs return 0.
double sample_autocov(const GriddedSeries& series, int h_x, int h_y);

/// Kernel-smoothed long-run variance estimates for sqrt(n)-scaled skewness
/// and excess kurtosis:
///   phi_s2 = 6  sum_{|h_l| <= b_l} prod_l k(h_l/b_l) C^3(h)
///   phi_k2 = 24 sum_{|h_l| <= b_l} prod_l k(h_l/b_l) C^4(h)
/// over the full signed lag box. A non-positive sum falls back to the lag-0
/// value (6 or 24) with the corresponding flag set.
struct VarianceEstimates {
    double phi_s2 = 6.0;
    double phi_k2 = 24.0;
    bool fallback_s = false;
    bool fallback_k = false;
};
VarianceEstimates variance_estimators(const GriddedSeries& series,
                                      const KernelSpec& kernel);

/// Spatially adjusted Jarque-Bera statistic for one gridded series:
/// S_n = sqrt(n) m3/m2^{3/2}, K_n = sqrt(n) (m4/m2^2 - 3), and
/// JB* = S_n^2/phi_s2 + K_n^2/phi_k2, asymptotically chi-squared with 2 df;
/// the p-value uses the closed form exp(-JB*/2).
struct JbStarOutcome {
    double s_n = 0.0;
    double k_n = 0.0;
    double phi_s2 = 6.0;
    double phi_k2 = 24.0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool variance_fallback = false;
};
JbStarOutcome jb_star(const GriddedSeries& series, const KernelSpec& kernel);

enum class ProjectionSampler {
    /// Uniform on the unit sphere (normalized independent standard normals).
    sphere,
    /// Componentwise cosines of independent uniform angles in [0, 2 pi],
    /// normalized to unit length; kept for replicating the reference
    /// construction, which is not actually unit-norm for p >= 2.
    cosine,
};

struct ProjectionSet {
    int count = 0;
    Matrix directions;  // count x p, unit rows
    std::uint64_t seed = 0;
    ProjectionSampler sampler = ProjectionSampler::sphere;
};

ProjectionSet sample_projections(int p, int count, std::uint64_t seed,
                                 ProjectionSampler sampler = ProjectionSampler::sphere);

/// Benjamini-Hochberg step-up at level alpha:
/// R = max{ i : P_(i) < i alpha / K }, threshold T = P_(R), reject P_i <= T.
struct BhResult {
    std::vector<double> sorted_p;
    int r = 0;
    std::optional<double> threshold;
    std::vector<int> rejected;  // indices into the input p-value list
};
BhResult bh_procedure(std::span<const double> p_values, double alpha);

/// Union-intersection decision: JB* on each random projection of the field,
/// aggregated by Benjamini-Hochberg; H0 is rejected iff any projection is.
/// Zero-variance projections are excluded from the BH stage and counted.
struct UitReport {
    ProjectionSet projections;
    std::vector<JbStarOutcome> outcomes;  // one per non-degenerate projection
    std::vector<int> outcome_direction;   // row in projections.directions
    std::vector<int> degenerate;          // excluded projection indices
    int variance_fallback_count = 0;
    KernelSpec kernel;
    double alpha = 0.05;
    BhResult bh;
    bool reject_h0 = false;
};

UitReport uit_test(const LatticeField& field, int n_projections, double alpha,
                   const KernelSpec& kernel, std::uint64_t seed,
                   ProjectionSampler sampler = ProjectionSampler::sphere);

/// uit_test with the auto bandwidth rule.
UitReport uit_test(const LatticeField& field, int n_projections, double alpha,
                   std::uint64_t seed,
                   ProjectionSampler sampler = ProjectionSampler::sphere);

}  // namespace gridnorm
