#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridnorm/cli_io.hpp"
#include "gridnorm/rng.hpp"

using namespace gridnorm;

namespace {

std::filesystem::path fresh_dir() {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("gridnorm_unit_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out);
    out << text;
}

int cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"gridnorm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

LatticeField random_field(int side, int p, std::uint64_t seed) {
    const LatticeSpec spec = LatticeSpec::unit_square(side);
    LatticeField field{spec, p, Matrix(p, spec.site_count())};
    RngStream rng(seed);
    for (int l = 0; l < p; ++l) {
        for (int i = 0; i < spec.site_count(); ++i) field.values(l, i) = rng.normal();
    }
    return field;
}

}  // namespace

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, -1.0, 0.05, 1e-12, -3.25e17, 0.1 + 0.2,
                     123456.789012345678}) {
        const std::string text = format_double(v);
        double back = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        CHECK(back == v);
    }
}

TEST_CASE("field csv round-trip") {
    const auto dir = fresh_dir();
    const LatticeField field = random_field(5, 3, 2);
    save_field_csv(field, dir / "f.csv");
    const LatticeField back = load_field_csv(dir / "f.csv");
    CHECK(back.p == 3);
    CHECK(back.spec.n_x == 5);
    CHECK(back.spec.n_y == 5);
    CHECK((back.values - field.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field csv error reporting") {
    const auto dir = fresh_dir();

    SUBCASE("missing site") {
        spit(dir / "f.csv", "ix,iy,var_1\n1,1,0.5\n2,1,0.25\n1,2,1.5\n");
        try {
            load_field_csv(dir / "f.csv");
            FAIL("expected parse error");
        } catch (const input_error& e) {
            CHECK(std::string(e.what()).find("missing site") != std::string::npos);
        }
    }

    SUBCASE("duplicate site") {
        spit(dir / "f.csv",
             "ix,iy,var_1\n1,1,0.5\n2,1,0.25\n1,2,1.5\n2,2,0.75\n2,2,0.75\n");
        try {
            load_field_csv(dir / "f.csv");
            FAIL("expected parse error");
        } catch (const input_error& e) {
            CHECK(std::string(e.what()).find("duplicate site") != std::string::npos);
        }
    }

    SUBCASE("non-numeric cell names the line") {
        spit(dir / "f.csv", "ix,iy,var_1\n1,1,0.5\n2,1,oops\n1,2,1.5\n2,2,0.75\n");
        try {
            load_field_csv(dir / "f.csv");
            FAIL("expected parse error");
        } catch (const input_error& e) {
            const std::string what = e.what();
            CHECK(what.find("line 3") != std::string::npos);
            CHECK(what.find("oops") != std::string::npos);
        }
    }

    SUBCASE("ragged row names the line") {
        spit(dir / "f.csv", "ix,iy,var_1\n1,1,0.5\n2,1\n1,2,1.5\n2,2,0.75\n");
        try {
            load_field_csv(dir / "f.csv");
            FAIL("expected parse error");
        } catch (const input_error& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }

    SUBCASE("bad header") {
        spit(dir / "f.csv", "x,y,v\n1,1,0.5\n");
        CHECK_THROWS_AS(load_field_csv(dir / "f.csv"), input_error);
    }
}

TEST_CASE("bundle csv round-trip") {
    const auto dir = fresh_dir();
    CurveBundle bundle;
    bundle.grid = {0.1, 0.5, 0.9};
    bundle.curves = Matrix(4, 3);
    RngStream rng(3);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) bundle.curves(i, j) = rng.normal();
    }
    write_text_atomic(dir / "b.csv", bundle_csv(bundle));
    const CurveBundle back = load_bundle_csv(dir / "b.csv");
    CHECK(back.grid == bundle.grid);
    CHECK((back.curves - bundle.curves).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cli simulate/test round trip") {
    const auto dir = fresh_dir();
    spit(dir / "sim.json", R"({
      "grid": {"side": 12},
      "model": "moving_average",
      "moving_average": {"thetas": [0.2, -0.2], "family": "exponential", "h_star": 0.4},
      "seed": 5
    })");
    CHECK(cli({"simulate", "--config", (dir / "sim.json").string(), "--out",
               (dir / "sim_out").string()}) == 0);
    CHECK(std::filesystem::exists(dir / "sim_out" / "field.csv"));
    const LatticeField field = load_field_csv(dir / "sim_out" / "field.csv");
    CHECK(field.p == 2);
    CHECK(field.spec.n_x == 12);

    spit(dir / "test.json", R"({
      "field_csv": ")" + (dir / "sim_out" / "field.csv").string() + R"(",
      "alpha": 0.05,
      "projections": 30,
      "tests": ["UIT", "MS", "MK", "DH"],
      "seed": 9
    })");
    CHECK(cli({"test", "--config", (dir / "test.json").string(), "--out",
               (dir / "test_out").string()}) == 0);
    const std::string report = slurp(dir / "test_out" / "report.json");
    for (const char* key : {"\"UIT\"", "\"MS\"", "\"MK\"", "\"DH\"", "\"p_value\"",
                            "\"two-sided\""}) {
        CHECK(report.find(key) != std::string::npos);
    }

    // same seed twice -> byte-identical report
    CHECK(cli({"test", "--config", (dir / "test.json").string(), "--out",
               (dir / "test_out2").string()}) == 0);
    CHECK(slurp(dir / "test_out2" / "report.json") == report);
}

TEST_CASE("cli rejects an invalid colocated correlation with exit 3") {
    const auto dir = fresh_dir();
    spit(dir / "bad.json", R"({
      "grid": {"side": 6},
      "model": "matern",
      "matern": {"nu1": 0.5, "nu2": 0.5, "rho12": 1.4, "h_star": 0.5},
      "seed": 1
    })");
    CHECK(cli({"simulate", "--config", (dir / "bad.json").string(), "--out",
               (dir / "out").string()}) == 3);
}

TEST_CASE("cli input errors exit 3, numerical failures exit 4") {
    const auto dir = fresh_dir();
    CHECK(cli({"size", "--config", (dir / "missing.json").string(), "--out",
               (dir / "o").string()}) == 3);

    spit(dir / "broken.json", "{ not json");
    CHECK(cli({"size", "--config", (dir / "broken.json").string(), "--out",
               (dir / "o").string()}) == 3);

    spit(dir / "unknown.json", R"({"grid_side": 8, "mystery": 1})");
    CHECK(cli({"size", "--config", (dir / "unknown.json").string(), "--out",
               (dir / "o").string()}) == 3);

    // constant field: every projection degenerates -> numerical failure
    LatticeField constant{LatticeSpec::unit_square(6), 1, Matrix::Constant(1, 36, 2.0)};
    save_field_csv(constant, dir / "const.csv");
    spit(dir / "t.json", R"({"field_csv": ")" + (dir / "const.csv").string() +
                             R"(", "tests": ["UIT"]})");
    CHECK(cli({"test", "--config", (dir / "t.json").string(), "--out",
               (dir / "o").string()}) == 4);

    CHECK(cli({"frobnicate"}) == 3);
}

TEST_CASE("cli size and power commands") {
    const auto dir = fresh_dir();
    spit(dir / "size.json", R"({
      "grid_side": 8,
      "thetas": [0.2, -0.2],
      "projections": 5,
      "alpha": 0.05,
      "h_star_grid": [0.2, 0.6],
      "n_sim": 6,
      "tests": ["UIT", "MS"],
      "seed": 33
    })");
    CHECK(cli({"size", "--config", (dir / "size.json").string(), "--out",
               (dir / "size_out").string()}) == 0);
    const std::string csv = slurp(dir / "size_out" / "curves.csv");
    CHECK(csv.find("test,h_star,rate,stderr,n_sim") == 0);
    // one row per (test, h*) plus header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);

    // power with identity SAS reproduces the size curves byte for byte
    spit(dir / "power.json", R"({
      "grid_side": 8,
      "thetas": [0.2, -0.2],
      "projections": 5,
      "alpha": 0.05,
      "h_star_grid": [0.2, 0.6],
      "n_sim": 6,
      "tests": ["UIT", "MS"],
      "seed": 33,
      "sas": [{"epsilon": 0, "delta": 1}, {"epsilon": 0, "delta": 1}]
    })");
    CHECK(cli({"power", "--config", (dir / "power.json").string(), "--out",
               (dir / "power_out").string()}) == 0);
    CHECK(slurp(dir / "power_out" / "curves.csv") == csv);

    // flag overrides take precedence over the file
    CHECK(cli({"size", "--config", (dir / "size.json").string(), "--out",
               (dir / "size_out2").string(), "--tests", "MS"}) == 0);
    const std::string csv2 = slurp(dir / "size_out2" / "curves.csv");
    CHECK(csv2.find("UIT") == std::string::npos);
}

TEST_CASE("cli summarize marks the middle constant curve as median") {
    const auto dir = fresh_dir();
    CurveBundle bundle;
    bundle.grid = {0.0, 1.0, 2.0};
    bundle.curves = Matrix(3, 3);
    bundle.curves.row(0).setConstant(0.0);
    bundle.curves.row(1).setConstant(1.0);
    bundle.curves.row(2).setConstant(2.0);
    write_text_atomic(dir / "curves.csv", bundle_csv(bundle));
    spit(dir / "summ.json", R"({"mode": "curves", "curves_csv": ")" +
                                (dir / "curves.csv").string() + R"("})");
    CHECK(cli({"summarize", "--config", (dir / "summ.json").string(), "--out",
               (dir / "out").string()}) == 0);
    const std::string depths = slurp(dir / "out" / "depths.csv");
    CHECK(depths.find("curve,depth,is_median,is_outlier") == 0);
    CHECK(depths.find("\n1,") != std::string::npos);
    // the middle curve carries the median flag
    std::istringstream lines(depths);
    std::string line;
    std::getline(lines, line);  // header
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].find(",0,0") != std::string::npos);
    CHECK(rows[1].find(",1,0") != std::string::npos);
    CHECK(rows[2].find(",0,0") != std::string::npos);
}

TEST_CASE("cli summarize moment drift emits every artifact") {
    const auto dir = fresh_dir();
    spit(dir / "drift.json", R"({
      "mode": "moment_drift",
      "grid_side": 6,
      "family": "exponential",
      "rho12": 0.5,
      "h_star_grid": [0.2, 0.8],
      "n_rep": 8,
      "seed": 4
    })");
    CHECK(cli({"summarize", "--config", (dir / "drift.json").string(), "--out",
               (dir / "out").string()}) == 0);
    for (const char* name :
         {"curves_skewness.csv", "curves_kurtosis.csv", "summary_skewness.csv",
          "summary_kurtosis.csv", "depths_skewness.csv", "depths_kurtosis.csv",
          "document.json"}) {
        CHECK(std::filesystem::exists(dir / "out" / name));
    }
    const CurveBundle back = load_bundle_csv(dir / "out" / "curves_kurtosis.csv");
    CHECK(back.curves.rows() == 8);
    CHECK(back.grid == std::vector<double>{0.2, 0.8});
}

TEST_CASE("documents echo enough configuration for bitwise reruns") {
    const auto dir = fresh_dir();
    spit(dir / "size.json", R"({
      "grid_side": 8,
      "thetas": [0.2, -0.2],
      "projections": 4,
      "h_star_grid": [0.3],
      "n_sim": 5,
      "tests": ["UIT"],
      "seed": 77
    })");
    CHECK(cli({"size", "--config", (dir / "size.json").string(), "--out",
               (dir / "a").string()}) == 0);
    CHECK(cli({"size", "--config", (dir / "size.json").string(), "--out",
               (dir / "b").string()}) == 0);
    CHECK(slurp(dir / "a" / "document.json") == slurp(dir / "b" / "document.json"));
    CHECK(slurp(dir / "a" / "curves.csv") == slurp(dir / "b" / "curves.csv"));

    // the echoed config reruns to the same bytes
    const std::string doc = slurp(dir / "a" / "document.json");
    const auto pos = doc.find("\"config\"");
    REQUIRE(pos != std::string::npos);
}
