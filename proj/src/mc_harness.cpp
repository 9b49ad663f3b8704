#include "gridnorm/mc_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "gridnorm/iid_tests.hpp"
#include "parallel.hpp"

namespace gridnorm {

namespace {

// Seed-derivation tags; changing these changes every simulated stream.
constexpr std::uint64_t kFieldTag = 1;
constexpr std::uint64_t kProjectionTag = 2;
constexpr std::uint64_t kDriftNoiseTag = 3;

std::vector<double> default_h_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(0.1 + 0.02 * i);
    return grid;
}

void check_h_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw input_error("h_star grid must not be empty");
    for (double h : grid) {
        if (!(h > 0.0 && h <= 1.0)) {
            throw input_error("h_star values must lie in (0, 1]");
        }
    }
}

}  // namespace

std::string test_kind_name(TestKind kind) {
    switch (kind) {
        case TestKind::uit: return "UIT";
        case TestKind::mardia_skewness: return "MS";
        case TestKind::mardia_kurtosis: return "MK";
        case TestKind::doornik_hansen: return "DH";
    }
    throw input_error("unknown test kind");
}

TestKind test_kind_from_name(const std::string& name) {
    if (name == "UIT") return TestKind::uit;
    if (name == "MS") return TestKind::mardia_skewness;
    if (name == "MK") return TestKind::mardia_kurtosis;
    if (name == "DH") return TestKind::doornik_hansen;
    throw input_error("unknown test name: " + name +
                      " (expected UIT, MS, MK or DH)");
}

int default_worker_count() {
    if (const char* env = std::getenv("GRIDNORM_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw input_error("GRIDNORM_WORKERS must be a positive integer");
        }
        return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<double> SizeExperimentConfig::effective_h_star_grid() const {
    return h_star_grid.empty() ? default_h_grid() : h_star_grid;
}

void SizeExperimentConfig::validate() const {
    if (grid_side < 2) throw input_error("grid side must be at least 2");
    if (p < 1) throw input_error("dimension p must be positive");
    if (static_cast<int>(thetas.size()) != p) {
        throw input_error("need one theta per variable");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw input_error("alpha must lie strictly between 0 and 1");
    }
    if (n_sim < 1) throw input_error("n_sim must be at least 1");
    if (tests.empty()) throw input_error("no tests enabled");
    for (std::size_t i = 0; i < tests.size(); ++i) {
        for (std::size_t j = i + 1; j < tests.size(); ++j) {
            if (tests[i] == tests[j]) throw input_error("duplicate test in config");
        }
    }
    if (n_projections < 1) throw input_error("need at least one projection");
    check_h_grid(effective_h_star_grid());
    if (bandwidth && *bandwidth < 1) throw input_error("bandwidth must be >= 1");
    if (bandwidth && *bandwidth >= grid_side) {
        throw input_error("bandwidth must be smaller than the grid side");
    }
    if (workers && *workers < 1) throw input_error("workers must be >= 1");
}

void PowerExperimentConfig::validate() const {
    base.validate();
    if (static_cast<int>(sas.size()) != base.p) {
        throw input_error("need one SAS parameter pair per variable");
    }
    for (const auto& s : sas) s.validate();
}

void CurveBundle::validate() const {
    if (grid.empty()) throw input_error("curve bundle needs a nonempty grid");
    if (curves.cols() != static_cast<Eigen::Index>(grid.size())) {
        throw input_error("curve length does not match the grid");
    }
    if (!curves.allFinite()) throw input_error("curve values must be finite");
}

namespace {

std::vector<RejectionCurve> run_experiment(const SizeExperimentConfig& cfg,
                                           const std::vector<SasParams>* sas) {
    const std::vector<double> h_grid = cfg.effective_h_star_grid();
    const LatticeSpec lattice = LatticeSpec::unit_square(cfg.grid_side);
    const KernelSpec kernel = cfg.bandwidth
                                  ? KernelSpec{*cfg.bandwidth, *cfg.bandwidth}
                                  : KernelSpec::auto_for(lattice);
    const int n_workers = cfg.workers ? *cfg.workers : default_worker_count();
    const int n_tests = static_cast<int>(cfg.tests.size());

    std::vector<RejectionCurve> curves(n_tests);
    for (int t = 0; t < n_tests; ++t) {
        curves[t].test_name = test_kind_name(cfg.tests[t]);
        curves[t].n_sim = cfg.n_sim;
    }

    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
        const double h_star = h_grid[hi];
        const double beta = solve_effective_range(cfg.family, h_star);
        MovingAverageSpec ma{cfg.thetas, cfg.family, beta};
        const Matrix innovation_root =
            moving_average_innovation_sqrt(cfg.family, beta, lattice);

        // One rejection flag per (replicate, test); slots are pre-assigned so
        // the result is identical for any worker count.
        std::vector<std::uint8_t> rejections(
            static_cast<std::size_t>(cfg.n_sim) * n_tests, 0);
        detail::parallel_for(cfg.n_sim, n_workers, [&](int rep) {
            const std::uint64_t h_tag = cfg.common_random_numbers ? 0 : hi + 1;
            RngStream stream(
                derive_seed(cfg.master_seed, kFieldTag, h_tag, rep));
            LatticeField field =
                simulate_moving_average_with_sqrt(ma, lattice, innovation_root,
                                                  stream);
            if (sas != nullptr) field = sas_inverse_transform(field, *sas);
            for (int t = 0; t < n_tests; ++t) {
                bool reject = false;
                switch (cfg.tests[t]) {
                    case TestKind::uit: {
                        const auto report = uit_test(
                            field, cfg.n_projections, cfg.alpha, kernel,
                            derive_seed(cfg.master_seed, kProjectionTag, rep),
                            cfg.sampler);
                        reject = report.reject_h0;
                        break;
                    }
                    case TestKind::mardia_skewness:
                        reject = mardia_skewness(field_as_sample(field), cfg.alpha)
                                     .reject;
                        break;
                    case TestKind::mardia_kurtosis:
                        reject = mardia_kurtosis(field_as_sample(field), cfg.alpha)
                                     .reject;
                        break;
                    case TestKind::doornik_hansen:
                        reject = doornik_hansen(field_as_sample(field), cfg.alpha)
                                     .reject;
                        break;
                }
                rejections[static_cast<std::size_t>(rep) * n_tests + t] = reject;
            }
        });

        for (int t = 0; t < n_tests; ++t) {
            long count = 0;
            for (int rep = 0; rep < cfg.n_sim; ++rep) {
                count += rejections[static_cast<std::size_t>(rep) * n_tests + t];
            }
            const double rate = static_cast<double>(count) / cfg.n_sim;
            curves[t].h_star.push_back(h_star);
            curves[t].rate.push_back(rate);
            curves[t].std_error.push_back(
                std::sqrt(rate * (1.0 - rate) / cfg.n_sim));
        }
    }
    return curves;
}

}  // namespace

std::vector<RejectionCurve> run_size_experiment(const SizeExperimentConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg, nullptr);
}

std::vector<RejectionCurve> run_power_experiment(const PowerExperimentConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg.base, &cfg.sas);
}

std::vector<double> MomentDriftConfig::effective_h_star_grid() const {
    return h_star_grid.empty() ? default_h_grid() : h_star_grid;
}

void MomentDriftConfig::validate() const {
    if (grid_side < 2) throw input_error("grid side must be at least 2");
    if (n_rep < 2) throw input_error("need at least 2 replicates");
    if (!(sigma2_1 > 0.0) || !(sigma2_2 > 0.0)) {
        throw input_error("marginal variances must be positive");
    }
    check_h_grid(effective_h_star_grid());
    if (workers && *workers < 1) throw input_error("workers must be >= 1");
    // rho12 validity is checked by the model itself once beta is known.
}

MomentDriftResult run_moment_drift_experiment(const MomentDriftConfig& cfg) {
    cfg.validate();
    const std::vector<double> h_grid = cfg.effective_h_star_grid();
    const LatticeSpec lattice = LatticeSpec::unit_square(cfg.grid_side);
    const int n = lattice.site_count();
    const int n_workers = cfg.workers ? *cfg.workers : default_worker_count();
    const double nu = cfg.smoothness();
    const int n_h = static_cast<int>(h_grid.size());

    std::vector<Matrix> roots(n_h);
    detail::parallel_for(n_h, n_workers, [&](int hi) {
        const double beta = solve_effective_range(cfg.family, h_grid[hi]);
        BivariateMaternModel model{MaternParams{cfg.sigma2_1, nu, beta},
                                   MaternParams{cfg.sigma2_2, nu, beta},
                                   cfg.rho12, 2};
        roots[hi] = sym_sqrt(build_cross_covariance(model, lattice));
    });

    MomentDriftResult result;
    result.skewness.grid = h_grid;
    result.kurtosis.grid = h_grid;
    result.skewness.curves.resize(cfg.n_rep, n_h);
    result.kurtosis.curves.resize(cfg.n_rep, n_h);

    detail::parallel_for(cfg.n_rep, n_workers, [&](int rep) {
        RngStream stream(derive_seed(cfg.master_seed, kDriftNoiseTag, rep));
        Vector noise(2 * n);
        for (int i = 0; i < 2 * n; ++i) noise[i] = stream.normal();
        for (int hi = 0; hi < n_h; ++hi) {
            const LatticeField field = field_from_sqrt(roots[hi], noise, lattice, 2);
            const MardiaMoments m = mardia_moments(field_as_sample(field));
            result.skewness.curves(rep, hi) = m.b1p;
            result.kurtosis.curves(rep, hi) = m.b2p;
        }
    });
    return result;
}

std::vector<double> modified_band_depth(const CurveBundle& bundle) {
    bundle.validate();
    const int n = static_cast<int>(bundle.curves.rows());
    const int t = static_cast<int>(bundle.grid.size());
    if (n < 3) throw input_error("band depth needs at least 3 curves");

    // Rank-count formula per grid point: a band (pair of curves) covers curve
    // i unless both members are strictly above or strictly below it.
    const double n_pairs = 0.5 * n * (n - 1);
    std::vector<double> depth(n, 0.0);
    std::vector<int> order(n);
    for (int col = 0; col < t; ++col) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return bundle.curves(a, col) < bundle.curves(b, col);
        });
        int i = 0;
        while (i < n) {
            int j = i;
            while (j + 1 < n && bundle.curves(order[j + 1], col) ==
                                    bundle.curves(order[i], col)) {
                ++j;
            }
            const double below = i;            // strictly below the tied block
            const double above = n - 1 - j;    // strictly above
            const double covering =
                n_pairs - 0.5 * below * (below - 1) - 0.5 * above * (above - 1);
            for (int k = i; k <= j; ++k) depth[order[k]] += covering;
            i = j + 1;
        }
    }
    for (double& d : depth) d /= n_pairs * t;
    return depth;
}

FunctionalSummary functional_summary(const CurveBundle& bundle) {
    const int n = static_cast<int>(bundle.curves.rows());
    const int t = static_cast<int>(bundle.grid.size());
    FunctionalSummary summary;
    summary.depths = modified_band_depth(bundle);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return summary.depths[a] > summary.depths[b];
    });
    summary.median_index = order.front();
    summary.median = bundle.curves.row(summary.median_index);

    const int central_count = (n + 1) / 2;
    summary.central_lo.resize(t);
    summary.central_hi.resize(t);
    for (int col = 0; col < t; ++col) {
        double lo = bundle.curves(order[0], col);
        double hi = lo;
        for (int k = 1; k < central_count; ++k) {
            lo = std::min(lo, bundle.curves(order[k], col));
            hi = std::max(hi, bundle.curves(order[k], col));
        }
        summary.central_lo[col] = lo;
        summary.central_hi[col] = hi;
    }
    const Vector height = summary.central_hi - summary.central_lo;
    summary.fence_lo = summary.central_lo - 1.5 * height;
    summary.fence_hi = summary.central_hi + 1.5 * height;

    for (int i = 0; i < n; ++i) {
        for (int col = 0; col < t; ++col) {
            const double v = bundle.curves(i, col);
            if (v < summary.fence_lo[col] || v > summary.fence_hi[col]) {
                summary.outliers.push_back(i);
                break;
            }
        }
    }
    return summary;
}

}  // namespace gridnorm
