#include "gridnorm/spatial_uit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridnorm {

void GriddedSeries::validate() const {
    spec.validate();
    if (values.size() != spec.site_count()) {
        throw input_error("series length does not match the lattice");
    }
    if (!values.allFinite()) throw input_error("series values must be finite");
}

int default_bandwidth(int side_length) {
    if (side_length < 2) throw input_error("grid side must be at least 2");
    const int b = static_cast<int>(
        std::floor(4.0 * std::pow(side_length / 100.0, 2.0 / 9.0)));
    return std::max(b, 1);
}

KernelSpec KernelSpec::auto_for(const LatticeSpec& spec) {
    return KernelSpec{default_bandwidth(spec.n_x), default_bandwidth(spec.n_y)};
}

void KernelSpec::validate() const {
    if (b_x < 1 || b_y < 1) throw input_error("bandwidths must be >= 1");
}

GriddedSeries standardize(const GriddedSeries& series) {
    series.validate();
    const double n = static_cast<double>(series.values.size());
    const double mean = series.values.mean();
    Vector centered = series.values.array() - mean;
    const double var = centered.squaredNorm() / n;
    // Relative threshold: a spread at round-off scale is a constant series.
    const double scale = std::max(1.0, std::fabs(mean));
    if (!(var > 0.0) || std::sqrt(var) <= 1e-12 * scale) {
        throw numeric_error("standardize: series has zero variance");
    }
    GriddedSeries out{series.spec, centered / std::sqrt(var)};
    return out;
}

double sample_autocov(const GriddedSeries& series, int h_x, int h_y) {
    series.validate();
    const int nx = series.spec.n_x;
    const int ny = series.spec.n_y;
    // First site of the overlapping block; empty overlap means no valid pairs.
    const int x_lo = std::max(1, 1 - h_x);
    const int x_hi = std::min(nx, nx - h_x);
    const int y_lo = std::max(1, 1 - h_y);
    const int y_hi = std::min(ny, ny - h_y);
    if (x_lo > x_hi || y_lo > y_hi) return 0.0;
    double acc = 0.0;
    for (int iy = y_lo; iy <= y_hi; ++iy) {
        for (int ix = x_lo; ix <= x_hi; ++ix) {
            acc += series.values[series.spec.flat_index(ix, iy)] *
                   series.values[series.spec.flat_index(ix + h_x, iy + h_y)];
        }
    }
    return acc / series.spec.site_count();
}

namespace {

double bartlett(double t) {
    const double a = std::fabs(t);
    return a <= 1.0 ? 1.0 - a : 0.0;
}

VarianceEstimates variance_estimators_standardized(const GriddedSeries& z,
                                                   const KernelSpec& kernel) {
    double sum_s = 0.0;
    double sum_k = 0.0;
    for (int hy = -kernel.b_y; hy <= kernel.b_y; ++hy) {
        const double wy = bartlett(static_cast<double>(hy) / kernel.b_y);
        if (wy == 0.0) continue;
        for (int hx = -kernel.b_x; hx <= kernel.b_x; ++hx) {
            const double w = wy * bartlett(static_cast<double>(hx) / kernel.b_x);
            if (w == 0.0) continue;
            const double c = sample_autocov(z, hx, hy);
            const double c3 = c * c * c;
            sum_s += w * c3;
            sum_k += w * c3 * c;
        }
    }
    VarianceEstimates est;
    est.phi_s2 = 6.0 * sum_s;
    est.phi_k2 = 24.0 * sum_k;
    if (!(est.phi_s2 > 0.0)) {
        est.phi_s2 = 6.0;
        est.fallback_s = true;
    }
    if (!(est.phi_k2 > 0.0)) {
        est.phi_k2 = 24.0;
        est.fallback_k = true;
    }
    return est;
}

}  // namespace

VarianceEstimates variance_estimators(const GriddedSeries& series,
                                      const KernelSpec& kernel) {
    kernel.validate();
    return variance_estimators_standardized(standardize(series), kernel);
}

JbStarOutcome jb_star(const GriddedSeries& series, const KernelSpec& kernel) {
    kernel.validate();
    series.validate();
    if (kernel.b_x >= series.spec.n_x || kernel.b_y >= series.spec.n_y) {
        throw input_error("bandwidths must be smaller than the grid extent");
    }
    const GriddedSeries z = standardize(series);
    const double n = static_cast<double>(z.values.size());
    const double m2 = z.values.array().square().mean();
    const double m3 = z.values.array().cube().mean();
    const double m4 = z.values.array().square().square().mean();
    const double sqrt_n = std::sqrt(n);

    JbStarOutcome out;
    out.s_n = sqrt_n * m3 / std::pow(m2, 1.5);
    out.k_n = sqrt_n * (m4 / (m2 * m2) - 3.0);
    const VarianceEstimates est = variance_estimators_standardized(z, kernel);
    out.phi_s2 = est.phi_s2;
    out.phi_k2 = est.phi_k2;
    out.variance_fallback = est.fallback_s || est.fallback_k;
    out.statistic = out.s_n * out.s_n / out.phi_s2 + out.k_n * out.k_n / out.phi_k2;
    out.p_value = std::exp(-0.5 * out.statistic);  // chi-squared(2) upper tail
    return out;
}

ProjectionSet sample_projections(int p, int count, std::uint64_t seed,
                                 ProjectionSampler sampler) {
    if (p < 1) throw input_error("projection dimension must be positive");
    if (count < 1) throw input_error("need at least one projection");
    ProjectionSet set;
    set.count = count;
    set.seed = seed;
    set.sampler = sampler;
    set.directions = Matrix(count, p);
    RngStream rng(derive_seed(seed, 0x70726F6AULL));
    for (int k = 0; k < count; ++k) {
        Vector dir(p);
        double norm = 0.0;
        // Redraw on (astronomically unlikely) zero vectors.
        do {
            for (int j = 0; j < p; ++j) {
                if (sampler == ProjectionSampler::sphere) {
                    dir[j] = rng.normal();
                } else {
                    dir[j] = std::cos(2.0 * std::numbers::pi * rng.uniform());
                }
            }
            norm = dir.norm();
        } while (norm < 1e-12);
        set.directions.row(k) = dir.transpose() / norm;
    }
    return set;
}

BhResult bh_procedure(std::span<const double> p_values, double alpha) {
    if (p_values.empty()) throw input_error("bh_procedure needs at least one p-value");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw input_error("alpha must lie strictly between 0 and 1");
    }
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw input_error("p-values must lie in [0, 1]");
    }
    const int k = static_cast<int>(p_values.size());
    BhResult res;
    res.sorted_p.assign(p_values.begin(), p_values.end());
    std::sort(res.sorted_p.begin(), res.sorted_p.end());
    res.r = 0;
    for (int i = k; i >= 1; --i) {
        if (res.sorted_p[i - 1] < i * alpha / k) {
            res.r = i;
            break;
        }
    }
    if (res.r > 0) {
        res.threshold = res.sorted_p[res.r - 1];
        for (int i = 0; i < k; ++i) {
            if (p_values[i] <= *res.threshold) res.rejected.push_back(i);
        }
    }
    return res;
}

UitReport uit_test(const LatticeField& field, int n_projections, double alpha,
                   const KernelSpec& kernel, std::uint64_t seed,
                   ProjectionSampler sampler) {
    field.validate();
    kernel.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw input_error("alpha must lie strictly between 0 and 1");
    }

    UitReport report;
    report.projections = sample_projections(field.p, n_projections, seed, sampler);
    report.kernel = kernel;
    report.alpha = alpha;

    std::vector<double> p_values;
    p_values.reserve(n_projections);
    for (int k = 0; k < n_projections; ++k) {
        GriddedSeries series{field.spec,
                             (report.projections.directions.row(k) * field.values)
                                 .transpose()};
        JbStarOutcome outcome;
        try {
            outcome = jb_star(series, kernel);
        } catch (const numeric_error&) {
            report.degenerate.push_back(k);
            continue;
        }
        if (outcome.variance_fallback) ++report.variance_fallback_count;
        report.outcome_direction.push_back(k);
        report.outcomes.push_back(outcome);
        p_values.push_back(outcome.p_value);
    }
    if (p_values.empty()) {
        throw numeric_error("uit_test: every projection was degenerate");
    }
    report.bh = bh_procedure(p_values, alpha);
    report.reject_h0 = !report.bh.rejected.empty();
    return report;
}

UitReport uit_test(const LatticeField& field, int n_projections, double alpha,
                   std::uint64_t seed, ProjectionSampler sampler) {
    return uit_test(field, n_projections, alpha, KernelSpec::auto_for(field.spec),
                    seed, sampler);
}

}  // namespace gridnorm
