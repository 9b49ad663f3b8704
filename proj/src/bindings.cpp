#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "gridnorm/cli_io.hpp"
#include "gridnorm/iid_tests.hpp"
#include "gridnorm/mc_harness.hpp"
#include "gridnorm/random_fields.hpp"
#include "gridnorm/spatial_uit.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using namespace gridnorm;

CorrelationFamily family_arg(const std::string& name) {
    if (name == "exponential") return CorrelationFamily::exponential;
    if (name == "whittle") return CorrelationFamily::whittle;
    throw input_error("family must be 'exponential' or 'whittle'");
}

ProjectionSampler sampler_arg(const std::string& name) {
    if (name == "sphere") return ProjectionSampler::sphere;
    if (name == "cosine") return ProjectionSampler::cosine;
    throw input_error("sampler must be 'sphere' or 'cosine'");
}

std::vector<TestKind> tests_arg(const std::vector<std::string>& names) {
    std::vector<TestKind> out;
    for (const auto& n : names) out.push_back(test_kind_from_name(n));
    return out;
}

std::vector<SasParams> sas_arg(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<SasParams> out;
    for (const auto& [eps, delta] : pairs) out.push_back(SasParams{eps, delta});
    return out;
}

// Field <-> numpy array of shape (p, n_y, n_x); entry [l, iy-1, ix-1] is
// variable l at site (ix, iy), so a C-contiguous ravel matches flat order.
LatticeField field_from_array(const py::array_t<double>& values, double spacing) {
    if (values.ndim() != 3) {
        throw input_error("field array must have shape (p, n_y, n_x)");
    }
    const int p = static_cast<int>(values.shape(0));
    const int n_y = static_cast<int>(values.shape(1));
    const int n_x = static_cast<int>(values.shape(2));
    LatticeSpec spec{n_x, n_y, spacing > 0 ? spacing : 1.0 / (std::max(n_x, n_y) - 1)};
    LatticeField field{spec, p, Matrix(p, spec.site_count())};
    const auto view = values.unchecked<3>();
    for (int l = 0; l < p; ++l) {
        for (int iy = 1; iy <= n_y; ++iy) {
            for (int ix = 1; ix <= n_x; ++ix) {
                field.values(l, spec.flat_index(ix, iy)) = view(l, iy - 1, ix - 1);
            }
        }
    }
    field.validate();
    return field;
}

py::array_t<double> field_to_array(const LatticeField& field) {
    py::array_t<double> out({field.p, field.spec.n_y, field.spec.n_x});
    auto view = out.mutable_unchecked<3>();
    for (int l = 0; l < field.p; ++l) {
        for (int iy = 1; iy <= field.spec.n_y; ++iy) {
            for (int ix = 1; ix <= field.spec.n_x; ++ix) {
                view(l, iy - 1, ix - 1) = field.values(l, field.spec.flat_index(ix, iy));
            }
        }
    }
    return out;
}

GriddedSeries series_from_array(const py::array_t<double>& values) {
    if (values.ndim() != 2) throw input_error("series array must have shape (n_y, n_x)");
    const int n_y = static_cast<int>(values.shape(0));
    const int n_x = static_cast<int>(values.shape(1));
    LatticeSpec spec{n_x, n_y, 1.0 / (std::max(n_x, n_y) - 1)};
    GriddedSeries series{spec, Vector(spec.site_count())};
    const auto view = values.unchecked<2>();
    for (int iy = 1; iy <= n_y; ++iy) {
        for (int ix = 1; ix <= n_x; ++ix) {
            series.values[spec.flat_index(ix, iy)] = view(iy - 1, ix - 1);
        }
    }
    return series;
}

Sample sample_from_array(const py::array_t<double>& values) {
    if (values.ndim() != 2) throw input_error("sample array must have shape (n, p)");
    Sample s;
    s.n = static_cast<int>(values.shape(0));
    s.p = static_cast<int>(values.shape(1));
    s.values = Matrix(s.n, s.p);
    const auto view = values.unchecked<2>();
    for (int i = 0; i < s.n; ++i) {
        for (int j = 0; j < s.p; ++j) s.values(i, j) = view(i, j);
    }
    return s;
}

KernelSpec kernel_arg(const std::optional<int>& bandwidth, const LatticeSpec& spec) {
    return bandwidth ? KernelSpec{*bandwidth, *bandwidth} : KernelSpec::auto_for(spec);
}

}  // namespace

PYBIND11_MODULE(_gridnorm, m) {
    m.doc() = "Multivariate normality tests for gridded spatial data";
    m.attr("__version__") = kToolVersion;

    py::register_exception<input_error>(m, "InputError", PyExc_ValueError);
    py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);

    // --- special functions -------------------------------------------------
    m.def("gamma_fn", &gamma_fn, "x"_a, "Gamma function on (0, inf).");
    m.def("bessel_k", &bessel_k, "nu"_a, "x"_a,
          "Modified Bessel function of the second kind.");
    m.def("chi2_sf", &chi2_sf, "x"_a, "df"_a, "Chi-squared upper-tail probability.");
    m.def("normal_sf", &normal_sf, "z"_a, "Standard normal upper-tail probability.");

    // --- random fields -----------------------------------------------------
    m.def("matern_corr", &matern_corr, "h"_a, "nu"_a, "beta"_a,
          "Matern correlation at distance h.");
    m.def("rho_bound", &rho_bound, "nu1"_a, "nu2"_a, "d"_a = 2,
          "Colocated-correlation validity bound of the parsimonious bivariate "
          "Matern model.");
    m.def(
        "solve_effective_range",
        [](const std::string& family, double h_star) {
            return solve_effective_range(family_arg(family), h_star);
        },
        "family"_a, "h_star"_a,
        "Range parameter with correlation 0.05 at distance h_star.");
    m.def(
        "simulate_moving_average",
        [](int side, std::vector<double> thetas, const std::string& family,
           double h_star, std::uint64_t seed) {
            const LatticeSpec lattice = LatticeSpec::unit_square(side);
            MovingAverageSpec spec{std::move(thetas), family_arg(family),
                                   solve_effective_range(family_arg(family), h_star)};
            RngStream rng(derive_seed(seed, 11));
            return field_to_array(simulate_moving_average(spec, lattice, rng));
        },
        "side"_a, "thetas"_a, "family"_a = "exponential", "h_star"_a = 0.5,
        "seed"_a = 0,
        "Rook moving-average Gaussian field on the unit square; returns an "
        "array of shape (p, side, side).");
    m.def(
        "simulate_bivariate_matern",
        [](int side, double nu1, double nu2, double rho12, double h_star,
           double sigma2_1, double sigma2_2, std::uint64_t seed) {
            const LatticeSpec lattice = LatticeSpec::unit_square(side);
            if (nu1 != nu2 || (nu1 != 0.5 && nu1 != 1.0)) {
                throw input_error("h_star needs nu1 = nu2 = 0.5 or 1");
            }
            const double beta =
                solve_effective_range(nu1 == 0.5 ? CorrelationFamily::exponential
                                                 : CorrelationFamily::whittle,
                                      h_star);
            BivariateMaternModel model{MaternParams{sigma2_1, nu1, beta},
                                       MaternParams{sigma2_2, nu2, beta}, rho12, 2};
            RngStream rng(derive_seed(seed, 12));
            const int n = lattice.site_count();
            Vector noise(2 * n);
            for (int i = 0; i < 2 * n; ++i) noise[i] = rng.normal();
            return field_to_array(sample_field(build_cross_covariance(model, lattice),
                                               noise, lattice, 2));
        },
        "side"_a, "nu1"_a = 0.5, "nu2"_a = 0.5, "rho12"_a = 0.5, "h_star"_a = 0.5,
        "sigma2_1"_a = 1.0, "sigma2_2"_a = 1.0, "seed"_a = 0,
        "Parsimonious bivariate Matern field; returns shape (2, side, side).");
    m.def(
        "sas_inverse_transform",
        [](const py::array_t<double>& field,
           const std::vector<std::pair<double, double>>& sas) {
            return field_to_array(
                sas_inverse_transform(field_from_array(field, 0.0), sas_arg(sas)));
        },
        "field"_a, "sas"_a,
        "Inverse sinh-arcsinh transform, one (epsilon, delta) pair per variable.");

    // --- i.i.d. baselines --------------------------------------------------
    py::class_<TestOutcome>(m, "TestOutcome")
        .def_readonly("test_name", &TestOutcome::test_name)
        .def_readonly("statistic", &TestOutcome::statistic)
        .def_readonly("df", &TestOutcome::df)
        .def_readonly("p_value", &TestOutcome::p_value)
        .def_readonly("alpha", &TestOutcome::alpha)
        .def_readonly("reject", &TestOutcome::reject)
        .def("__repr__", [](const TestOutcome& o) {
            return "<TestOutcome " + o.test_name + " statistic=" +
                   format_double(o.statistic) + " p=" + format_double(o.p_value) + ">";
        });

    m.def(
        "mardia_skewness",
        [](const py::array_t<double>& x, double alpha) {
            return mardia_skewness(sample_from_array(x), alpha);
        },
        "sample"_a, "alpha"_a = 0.05, "Mardia skewness test on an (n, p) sample.");
    m.def(
        "mardia_kurtosis",
        [](const py::array_t<double>& x, double alpha) {
            return mardia_kurtosis(sample_from_array(x), alpha);
        },
        "sample"_a, "alpha"_a = 0.05, "Mardia kurtosis test on an (n, p) sample.");
    m.def(
        "doornik_hansen",
        [](const py::array_t<double>& x, double alpha) {
            return doornik_hansen(sample_from_array(x), alpha);
        },
        "sample"_a, "alpha"_a = 0.05, "Doornik-Hansen omnibus test.");
    m.def(
        "univariate_jb",
        [](const std::vector<double>& series, double alpha) {
            return univariate_jb(series, alpha);
        },
        "series"_a, "alpha"_a = 0.05, "Univariate Jarque-Bera test.");

    // --- spatially adjusted test -------------------------------------------
    m.def("default_bandwidth", &default_bandwidth, "side"_a,
          "Bartlett bandwidth rule floor(4 (N/100)^(2/9)).");

    py::class_<JbStarOutcome>(m, "JbStarOutcome")
        .def_readonly("s_n", &JbStarOutcome::s_n)
        .def_readonly("k_n", &JbStarOutcome::k_n)
        .def_readonly("phi_s2", &JbStarOutcome::phi_s2)
        .def_readonly("phi_k2", &JbStarOutcome::phi_k2)
        .def_readonly("statistic", &JbStarOutcome::statistic)
        .def_readonly("p_value", &JbStarOutcome::p_value)
        .def_readonly("variance_fallback", &JbStarOutcome::variance_fallback)
        .def("__repr__", [](const JbStarOutcome& o) {
            return "<JbStarOutcome statistic=" + format_double(o.statistic) +
                   " p=" + format_double(o.p_value) + ">";
        });

    m.def(
        "jb_star",
        [](const py::array_t<double>& series, std::optional<int> bandwidth) {
            const GriddedSeries s = series_from_array(series);
            return jb_star(s, kernel_arg(bandwidth, s.spec));
        },
        "series"_a, "bandwidth"_a = py::none(),
        "Spatially adjusted Jarque-Bera statistic for one (n_y, n_x) series.");

    py::class_<BhResult>(m, "BhResult")
        .def_readonly("sorted_p", &BhResult::sorted_p)
        .def_readonly("r", &BhResult::r)
        .def_property_readonly("threshold",
                               [](const BhResult& b) -> py::object {
                                   if (b.threshold) return py::float_(*b.threshold);
                                   return py::none();
                               })
        .def_readonly("rejected", &BhResult::rejected);

    m.def(
        "bh_procedure",
        [](const std::vector<double>& p_values, double alpha) {
            return bh_procedure(p_values, alpha);
        },
        "p_values"_a, "alpha"_a = 0.05, "Benjamini-Hochberg step-up procedure.");

    m.def(
        "sample_projections",
        [](int p, int count, std::uint64_t seed, const std::string& sampler) {
            return Matrix(sample_projections(p, count, seed, sampler_arg(sampler))
                              .directions);
        },
        "p"_a, "count"_a, "seed"_a = 0, "sampler"_a = "sphere",
        "Unit projection directions as a (count, p) array.");

    py::class_<UitReport>(m, "UitReport")
        .def_readonly("outcomes", &UitReport::outcomes)
        .def_readonly("degenerate", &UitReport::degenerate)
        .def_readonly("variance_fallback_count", &UitReport::variance_fallback_count)
        .def_readonly("alpha", &UitReport::alpha)
        .def_readonly("bh", &UitReport::bh)
        .def_readonly("reject_h0", &UitReport::reject_h0)
        .def_property_readonly(
            "p_values",
            [](const UitReport& r) {
                std::vector<double> out;
                for (const auto& o : r.outcomes) out.push_back(o.p_value);
                return out;
            })
        .def("__repr__", [](const UitReport& r) {
            return std::string("<UitReport reject_h0=") +
                   (r.reject_h0 ? "True" : "False") + ">";
        });

    m.def(
        "uit_test",
        [](const py::array_t<double>& field, int projections, double alpha,
           std::optional<int> bandwidth, std::uint64_t seed,
           const std::string& sampler) {
            const LatticeField f = field_from_array(field, 0.0);
            return uit_test(f, projections, alpha, kernel_arg(bandwidth, f.spec),
                            seed, sampler_arg(sampler));
        },
        "field"_a, "projections"_a = 100, "alpha"_a = 0.05,
        "bandwidth"_a = py::none(), "seed"_a = 0, "sampler"_a = "sphere",
        "Union-intersection JB* test on a (p, n_y, n_x) field.");

    // --- Monte Carlo harness -----------------------------------------------
    py::class_<RejectionCurve>(m, "RejectionCurve")
        .def_readonly("test_name", &RejectionCurve::test_name)
        .def_readonly("h_star", &RejectionCurve::h_star)
        .def_readonly("rate", &RejectionCurve::rate)
        .def_readonly("std_error", &RejectionCurve::std_error)
        .def_readonly("n_sim", &RejectionCurve::n_sim);

    auto make_size_config =
        [](int grid_side, std::vector<double> thetas, int projections, double alpha,
           std::vector<double> h_star_grid, int n_sim, const std::string& family,
           std::vector<std::string> tests, std::uint64_t seed,
           bool common_random_numbers, std::optional<int> bandwidth,
           const std::string& sampler, std::optional<int> workers) {
            SizeExperimentConfig cfg;
            cfg.grid_side = grid_side;
            cfg.p = static_cast<int>(thetas.size());
            cfg.thetas = std::move(thetas);
            cfg.n_projections = projections;
            cfg.alpha = alpha;
            cfg.h_star_grid = std::move(h_star_grid);
            cfg.n_sim = n_sim;
            cfg.family = family_arg(family);
            cfg.tests = tests_arg(tests);
            cfg.master_seed = seed;
            cfg.common_random_numbers = common_random_numbers;
            cfg.bandwidth = bandwidth;
            cfg.sampler = sampler_arg(sampler);
            cfg.workers = workers;
            return cfg;
        };

    m.def(
        "run_size_experiment",
        [make_size_config](int grid_side, std::vector<double> thetas, int projections,
                           double alpha, std::vector<double> h_star_grid, int n_sim,
                           const std::string& family, std::vector<std::string> tests,
                           std::uint64_t seed, bool common_random_numbers,
                           std::optional<int> bandwidth, const std::string& sampler,
                           std::optional<int> workers) {
            const SizeExperimentConfig cfg = make_size_config(
                grid_side, std::move(thetas), projections, alpha,
                std::move(h_star_grid), n_sim, family, std::move(tests), seed,
                common_random_numbers, bandwidth, sampler, workers);
            py::gil_scoped_release release;
            return run_size_experiment(cfg);
        },
        "grid_side"_a = 15, "thetas"_a = std::vector<double>{0.2, -0.2},
        "projections"_a = 100, "alpha"_a = 0.05,
        "h_star_grid"_a = std::vector<double>{}, "n_sim"_a = 1000,
        "family"_a = "exponential",
        "tests"_a = std::vector<std::string>{"UIT", "MS", "MK", "DH"}, "seed"_a = 0,
        "common_random_numbers"_a = false, "bandwidth"_a = py::none(),
        "sampler"_a = "sphere", "workers"_a = py::none(),
        "Type-I-error study; returns one RejectionCurve per test.");

    m.def(
        "run_power_experiment",
        [make_size_config](std::vector<std::pair<double, double>> sas, int grid_side,
                           std::vector<double> thetas, int projections, double alpha,
                           std::vector<double> h_star_grid, int n_sim,
                           const std::string& family, std::vector<std::string> tests,
                           std::uint64_t seed, bool common_random_numbers,
                           std::optional<int> bandwidth, const std::string& sampler,
                           std::optional<int> workers) {
            PowerExperimentConfig cfg{
                make_size_config(grid_side, std::move(thetas), projections, alpha,
                                 std::move(h_star_grid), n_sim, family,
                                 std::move(tests), seed, common_random_numbers,
                                 bandwidth, sampler, workers),
                sas_arg(sas)};
            py::gil_scoped_release release;
            return run_power_experiment(cfg);
        },
        "sas"_a, "grid_side"_a = 30, "thetas"_a = std::vector<double>{0.2, -0.2},
        "projections"_a = 100, "alpha"_a = 0.05,
        "h_star_grid"_a = std::vector<double>{}, "n_sim"_a = 1000,
        "family"_a = "exponential", "tests"_a = std::vector<std::string>{"UIT"},
        "seed"_a = 0, "common_random_numbers"_a = false, "bandwidth"_a = py::none(),
        "sampler"_a = "sphere", "workers"_a = py::none(),
        "Empirical-power study under the SAS alternative.");

    py::class_<CurveBundle>(m, "CurveBundle")
        .def_readonly("grid", &CurveBundle::grid)
        .def_property_readonly("curves",
                               [](const CurveBundle& b) { return Matrix(b.curves); });

    m.def(
        "run_moment_drift_experiment",
        [](int grid_side, const std::string& family, double rho12,
           std::vector<double> h_star_grid, int n_rep, std::uint64_t seed,
           std::optional<int> workers) {
            MomentDriftConfig cfg;
            cfg.grid_side = grid_side;
            cfg.family = family_arg(family);
            cfg.rho12 = rho12;
            cfg.h_star_grid = std::move(h_star_grid);
            cfg.n_rep = n_rep;
            cfg.master_seed = seed;
            cfg.workers = workers;
            py::gil_scoped_release release;
            const MomentDriftResult result = run_moment_drift_experiment(cfg);
            return std::make_pair(result.skewness, result.kurtosis);
        },
        "grid_side"_a = 15, "family"_a = "exponential", "rho12"_a = 0.5,
        "h_star_grid"_a = std::vector<double>{}, "n_rep"_a = 200, "seed"_a = 0,
        "workers"_a = py::none(),
        "Mardia moment curves under increasing spatial dependence; returns "
        "(skewness_bundle, kurtosis_bundle).");

    py::class_<FunctionalSummary>(m, "FunctionalSummary")
        .def_readonly("depths", &FunctionalSummary::depths)
        .def_readonly("median_index", &FunctionalSummary::median_index)
        .def_property_readonly("median",
                               [](const FunctionalSummary& s) { return Vector(s.median); })
        .def_property_readonly(
            "central_lo", [](const FunctionalSummary& s) { return Vector(s.central_lo); })
        .def_property_readonly(
            "central_hi", [](const FunctionalSummary& s) { return Vector(s.central_hi); })
        .def_property_readonly(
            "fence_lo", [](const FunctionalSummary& s) { return Vector(s.fence_lo); })
        .def_property_readonly(
            "fence_hi", [](const FunctionalSummary& s) { return Vector(s.fence_hi); })
        .def_readonly("outliers", &FunctionalSummary::outliers);

    auto bundle_from_args = [](const py::array_t<double>& curves,
                               std::vector<double> grid) {
        if (curves.ndim() != 2) {
            throw input_error("curves must be a 2-d array (n_curves, n_points)");
        }
        CurveBundle bundle;
        if (grid.empty()) {
            for (py::ssize_t i = 0; i < curves.shape(1); ++i) {
                grid.push_back(static_cast<double>(i));
            }
        }
        bundle.grid = std::move(grid);
        bundle.curves = Matrix(curves.shape(0), curves.shape(1));
        const auto view = curves.unchecked<2>();
        for (py::ssize_t i = 0; i < curves.shape(0); ++i) {
            for (py::ssize_t j = 0; j < curves.shape(1); ++j) {
                bundle.curves(i, j) = view(i, j);
            }
        }
        return bundle;
    };

    m.def(
        "modified_band_depth",
        [bundle_from_args](const py::array_t<double>& curves, std::vector<double> grid) {
            return modified_band_depth(bundle_from_args(curves, std::move(grid)));
        },
        "curves"_a, "grid"_a = std::vector<double>{},
        "Modified band depth (J = 2) of each curve in an (n_curves, n_points) "
        "array.");
    m.def(
        "functional_summary",
        [bundle_from_args](const py::array_t<double>& curves, std::vector<double> grid) {
            return functional_summary(bundle_from_args(curves, std::move(grid)));
        },
        "curves"_a, "grid"_a = std::vector<double>{},
        "Functional-boxplot summary of an (n_curves, n_points) array.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv = {"gridnorm"};
            for (const auto& a : args) argv.push_back(a.c_str());
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        "args"_a, "Invoke the command-line interface in-process.");
}
