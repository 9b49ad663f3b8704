#include <doctest.h>

#include <cmath>
#include <random>

#include "gridnorm/numerics.hpp"

using namespace gridnorm;

namespace {

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::fabs(want);
}

}  // namespace

TEST_CASE("gamma function values") {
    CHECK(gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
    // sqrt(pi), high-precision reference
    CHECK(rel_err(gamma_fn(0.5), 1.7724538509055160273) < 1e-12);
}

TEST_CASE("gamma recurrence x*Gamma(x) = Gamma(x+1)") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(1e-3, 20.0);
    for (int i = 0; i < 200; ++i) {
        const double x = unif(rng);
        CHECK(rel_err(gamma_fn(x + 1.0), x * gamma_fn(x)) < 1e-11);
    }
}

TEST_CASE("gamma domain errors") {
    CHECK_THROWS_AS(gamma_fn(0.0), input_error);
    CHECK_THROWS_AS(gamma_fn(-1.5), input_error);
    CHECK_THROWS_AS(gamma_fn(std::nan("")), input_error);
}

TEST_CASE("bessel_k half-integer closed forms") {
    // K_{1/2}(x) = sqrt(pi/(2x)) exp(-x)
    for (double x : {0.1, 0.5, 1.0, 2.0, 7.0, 30.0}) {
        const double want = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x);
        CHECK(rel_err(bessel_k(0.5, x), want) < 1e-13);
    }
    CHECK(rel_err(bessel_k(0.5, 1.0), 0.46106850444789456) < 1e-12);
}

TEST_CASE("bessel_k against independent high-precision values") {
    // mpmath, 30 significant digits
    struct Ref {
        double nu, x, value;
    };
    const Ref refs[] = {
        {0.0, 1.0, 0.421024438240708333335627379213},
        {1.0, 1.0, 0.601907230197234574737540001536},
        {1.0, 10.0, 1.86487734538255845968168581224e-5},
        {1.5, 2.0, 0.179906657952092171052054752455},
        {2.5, 3.0, 0.0840606319741173826528577316113},
        {3.7, 0.001, 3.41181032625728211714556874638e12},
        {4.2, 27.0, 6.21639323392387952878769991867e-13},
        {5.0, 50.0, 4.36718225410098632930168032735e-23},
        {0.25, 1e-6, 68.1072278897349465009723200865},
        {2.0, 0.5, 7.55018355124086943656770578023},
    };
    for (const Ref& r : refs) {
        CHECK(rel_err(bessel_k(r.nu, r.x), r.value) < 1e-11);
    }
}

TEST_CASE("bessel_k matches std::cyl_bessel_k over the working domain") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unu(0.0, 5.0);
    std::uniform_real_distribution<double> ux(-6.0 * std::log(10.0), std::log(50.0));
    for (int i = 0; i < 500; ++i) {
        const double nu = unu(rng);
        const double x = std::exp(ux(rng));
        const double mine = bessel_k(nu, x);
        const double ref = std::cyl_bessel_k(nu, x);
        CHECK(rel_err(mine, ref) < 1e-9);
    }
}

TEST_CASE("bessel_k three-term recurrence") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unu(0.0, 4.0);
    std::uniform_real_distribution<double> ux(0.05, 30.0);
    for (int i = 0; i < 300; ++i) {
        const double nu = unu(rng);
        const double x = ux(rng);
        const double lhs = bessel_k(nu + 1.0, x);
        const double rhs = bessel_k(std::fabs(nu - 1.0), x) +
                           (2.0 * nu / x) * bessel_k(nu, x);
        CHECK(rel_err(lhs, rhs) < 1e-9);
    }
}

TEST_CASE("bessel_k domain errors") {
    CHECK_THROWS_AS(bessel_k(1.0, 0.0), input_error);
    CHECK_THROWS_AS(bessel_k(1.0, -2.0), input_error);
    CHECK_THROWS_AS(bessel_k(std::nan(""), 1.0), input_error);
}

TEST_CASE("chi2_sf values") {
    CHECK(chi2_sf(0.0, 3.0) == 1.0);
    CHECK(chi2_sf(0.0, 17.5) == 1.0);
    // independent quantile inversions (mpmath)
    CHECK(std::fabs(chi2_sf(5.9914645, 2.0) - 0.0500000011776996) < 1e-10);
    CHECK(std::fabs(chi2_sf(3.8414588, 1.0) - 0.0500000006170877) < 1e-10);
    CHECK(std::fabs(chi2_sf(7.8147279, 3.0) - 0.0500000000728553) < 1e-10);
    CHECK(std::fabs(chi2_sf(12.5, 7.3) - 0.0975465139894153) < 1e-10);
    CHECK(rel_err(chi2_sf(100.0, 4.0), 9.83662422461598069e-21) < 1e-10);
}

TEST_CASE("chi2_sf closed form for two degrees of freedom") {
    for (double x = 0.0; x <= 40.0; x += 0.37) {
        CHECK(std::fabs(chi2_sf(x, 2.0) - std::exp(-0.5 * x)) < 1e-12);
    }
}

TEST_CASE("chi2_sf is monotone non-increasing in x") {
    for (double df : {1.0, 2.0, 4.0, 11.0}) {
        double prev = 1.0;
        for (double x = 0.0; x <= 60.0; x += 0.25) {
            const double cur = chi2_sf(x, df);
            CHECK(cur <= prev + 1e-15);
            prev = cur;
        }
    }
}

TEST_CASE("chi2_sf domain errors") {
    CHECK_THROWS_AS(chi2_sf(-1.0, 2.0), input_error);
    CHECK_THROWS_AS(chi2_sf(1.0, 0.0), input_error);
    CHECK_THROWS_AS(chi2_sf(1.0, -3.0), input_error);
}

TEST_CASE("normal_sf values and symmetry") {
    CHECK(normal_sf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::fabs(normal_sf(1.9599640) - 0.0249999990964424) < 1e-12);
    CHECK(std::fabs(normal_sf(1.0) - 0.158655253931457051) < 1e-12);
    CHECK(std::fabs(normal_sf(3.5) - 2.32629079035525036e-4) < 1e-12);
    for (double z : {0.13, 0.9, 2.4, 4.1}) {
        CHECK(std::fabs(normal_sf(z) + normal_sf(-z) - 1.0) < 1e-14);
    }
    CHECK_THROWS_AS(normal_sf(std::numeric_limits<double>::infinity()), input_error);
}

TEST_CASE("SpdMatrix validation") {
    CHECK_THROWS_AS(SpdMatrix(Matrix::Zero(2, 3)), input_error);
    Matrix asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS((SpdMatrix{asym}), input_error);
    Matrix nonfinite = Matrix::Identity(2, 2);
    nonfinite(0, 1) = nonfinite(1, 0) = std::nan("");
    CHECK_THROWS_AS((SpdMatrix{nonfinite}), input_error);
}

TEST_CASE("sym_sqrt on diagonal cases") {
    CHECK((sym_sqrt(SpdMatrix(Matrix::Identity(3, 3))) - Matrix::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const Matrix r = sym_sqrt(SpdMatrix(d));
    CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std::fabs(r(0, 1)) < 1e-14);
}

TEST_CASE("sym_sqrt reconstructs a random SPD matrix") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    Matrix a(10, 10);
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) a(i, j) = gauss(rng);
    }
    const Matrix m = a * a.transpose() + 0.1 * Matrix::Identity(10, 10);
    const Matrix r = sym_sqrt(SpdMatrix(m));
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r * r - m).norm() / m.norm() < 1e-8);
}

TEST_CASE("sym_sqrt clamps round-off negatives and rejects real ones") {
    // tiny negative eigenvalue within the tolerance is clamped
    Matrix nearly = Matrix::Identity(2, 2);
    nearly(1, 1) = -1e-10;
    const Matrix r = sym_sqrt(SpdMatrix(nearly));
    CHECK(std::fabs(r(1, 1)) < 1e-12);
    // materially indefinite input is an error
    Matrix indef = Matrix::Identity(2, 2);
    indef(1, 1) = -0.5;
    CHECK_THROWS_AS(sym_sqrt(SpdMatrix(indef)), numeric_error);
}

TEST_CASE("sym_inv_sqrt inverts sym_sqrt") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> gauss;
    Matrix a(6, 6);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) a(i, j) = gauss(rng);
    }
    const Matrix m = a * a.transpose() + Matrix::Identity(6, 6);
    const Matrix w = sym_inv_sqrt(SpdMatrix(m));
    CHECK((w * m * w - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(sym_inv_sqrt(SpdMatrix(Matrix::Zero(3, 3))), numeric_error);
}
