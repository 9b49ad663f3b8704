#include "gridnorm/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace gridnorm {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) {
        throw input_error(std::string(name) + " must be finite");
    }
}

// Coefficients of 1/Gamma(1+x) = sum a_k x^k, used to evaluate the Temme
// auxiliary functions without cancellation near mu = 0.
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kInvGamma3 =
    0.0420026350340952355;  // gamma^3/6 - gamma*pi^2/12 + zeta(3)/3

// gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu),   gam1(0) = -euler_gamma
// gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)] / 2
void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
    gampl = 1.0 / std::tgamma(1.0 + mu);
    gammi = 1.0 / std::tgamma(1.0 - mu);
    if (std::fabs(mu) < 1e-3) {
        gam1 = -(kEulerGamma + kInvGamma3 * mu * mu);
    } else {
        gam1 = (gammi - gampl) / (2.0 * mu);
    }
    gam2 = 0.5 * (gammi + gampl);
}

// K_mu and K_{mu+1} for |mu| <= 1/2, x <= 2 (Temme 1975 series).
void bessel_k_temme(double mu, double x, double& k_mu, double& k_mu1) {
    constexpr int kMaxIter = 20000;
    constexpr double kEps = std::numeric_limits<double>::epsilon();

    const double x2 = 0.5 * x;
    const double mu2 = mu * mu;
    const double pimu = kPi * mu;
    const double fact = (std::fabs(pimu) < kEps) ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = (std::fabs(e) < kEps) ? 1.0 : std::sinh(e) / e;
    double gam1, gam2, gampl, gammi;
    temme_gammas(mu, gam1, gam2, gampl, gammi);
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
        ff = (i * ff + p + q) / (i * i - mu2);
        c *= d / i;
        p /= (i - mu);
        q /= (i + mu);
        const double del = c * ff;
        sum += del;
        sum1 += c * (p - i * ff);
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw numeric_error("bessel_k: Temme series did not converge");
    k_mu = sum;
    k_mu1 = sum1 * (2.0 / x);
}

// K_mu and K_{mu+1} for |mu| <= 1/2, x > 2 (Steed's continued fraction CF2).
void bessel_k_cf2(double mu, double x, double& k_mu, double& k_mu1) {
    constexpr int kMaxIter = 20000;
    constexpr double kEps = std::numeric_limits<double>::epsilon();

    const double mu2 = mu * mu;
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::fabs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw numeric_error("bessel_k: continued fraction did not converge");
    h = a1 * h;
    k_mu = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
}

bool is_half_integer(double nu) {
    const double two_nu = 2.0 * nu;
    return std::fabs(two_nu - std::round(two_nu)) < 1e-14 &&
           std::fabs(nu - std::round(nu)) > 0.25;
}

// K_{m+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_{k=0}^{m} (m+k)!/(k!(m-k)!) (2x)^{-k}
double bessel_k_half_integer(double nu, double x) {
    const int m = static_cast<int>(std::round(nu - 0.5));
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= m; ++k) {
        term *= static_cast<double>((m + k) * (m - k + 1)) / (2.0 * k * x);
        sum += term;
    }
    return std::sqrt(kPi / (2.0 * x)) * std::exp(-x) * sum;
}

// Regularized lower incomplete gamma P(a, x) by series (x < a + 1).
double gamma_p_series(double a, double x) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw numeric_error("incomplete gamma series did not converge");
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
double gamma_q_cf(double a, double x) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw numeric_error("incomplete gamma continued fraction did not converge");
}

}  // namespace

SpdMatrix::SpdMatrix(Matrix m) : mat_(std::move(m)) {
    if (mat_.rows() == 0 || mat_.rows() != mat_.cols()) {
        throw input_error("SpdMatrix: matrix must be square and non-empty");
    }
    if (!mat_.allFinite()) {
        throw input_error("SpdMatrix: entries must be finite");
    }
    const double scale = mat_.cwiseAbs().maxCoeff();
    const double asym = (mat_ - mat_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(scale, 1.0)) {
        throw input_error("SpdMatrix: matrix is not symmetric");
    }
    // Symmetrize the residual round-off so downstream solvers see an exactly
    // symmetric matrix.
    mat_ = 0.5 * (mat_ + mat_.transpose().eval());
}

double SpdMatrix::min_eigenvalue_ratio() const {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(mat_, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw numeric_error("eigendecomposition failed");
    }
    const double lmax = solver.eigenvalues().maxCoeff();
    if (lmax <= 0.0) return solver.eigenvalues().minCoeff() == 0.0 ? 1.0 : -1.0;
    return solver.eigenvalues().minCoeff() / lmax;
}

double gamma_fn(double x) {
    require_finite(x, "gamma_fn argument");
    if (x <= 0.0) throw input_error("gamma_fn: argument must be positive");
    return std::tgamma(x);
}

double log_gamma(double x) {
    require_finite(x, "log_gamma argument");
    if (x <= 0.0) throw input_error("log_gamma: argument must be positive");
    return std::lgamma(x);
}

double bessel_k(double nu, double x) {
    require_finite(nu, "bessel_k order");
    require_finite(x, "bessel_k argument");
    if (x <= 0.0) throw input_error("bessel_k: argument must be positive");
    nu = std::fabs(nu);  // K_{-nu} = K_nu

    if (is_half_integer(nu) && nu < 30.5) {
        return bessel_k_half_integer(nu, x);
    }

    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;  // in [-1/2, 1/2]
    double k_mu, k_mu1;
    if (x <= 2.0) {
        bessel_k_temme(mu, x, k_mu, k_mu1);
    } else {
        bessel_k_cf2(mu, x, k_mu, k_mu1);
    }
    const double xi2 = 2.0 / x;
    for (int i = 1; i <= nl; ++i) {
        const double k_next = (mu + i) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = k_next;
    }
    return k_mu;
}

double chi2_sf(double x, double df) {
    require_finite(x, "chi2_sf statistic");
    require_finite(df, "chi2_sf degrees of freedom");
    if (x < 0.0) throw input_error("chi2_sf: statistic must be nonnegative");
    if (df <= 0.0) throw input_error("chi2_sf: degrees of freedom must be positive");
    if (x == 0.0) return 1.0;
    const double a = 0.5 * df;
    const double z = 0.5 * x;
    if (z < a + 1.0) {
        return std::clamp(1.0 - gamma_p_series(a, z), 0.0, 1.0);
    }
    return std::clamp(gamma_q_cf(a, z), 0.0, 1.0);
}

double normal_sf(double z) {
    require_finite(z, "normal_sf argument");
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> decompose(const SpdMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw numeric_error("eigendecomposition failed");
    }
    return solver;
}

}  // namespace

Matrix sym_sqrt(const SpdMatrix& m) {
    auto solver = decompose(m);
    Vector lam = solver.eigenvalues();
    const double lmax = std::max(lam.maxCoeff(), 0.0);
    const double floor = -1e-8 * lmax;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < floor) {
            throw numeric_error("sym_sqrt: matrix is not positive semi-definite");
        }
        lam[i] = std::max(lam[i], 0.0);
    }
    Matrix r = solver.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
               solver.eigenvectors().transpose();
    return 0.5 * (r + r.transpose().eval());
}

Matrix sym_inv_sqrt(const SpdMatrix& m) {
    auto solver = decompose(m);
    const Vector& lam = solver.eigenvalues();
    const double lmax = lam.maxCoeff();
    if (lmax <= 0.0 || lam.minCoeff() <= 1e-12 * lmax) {
        throw numeric_error("sym_inv_sqrt: matrix is numerically singular");
    }
    Matrix r = solver.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
               solver.eigenvectors().transpose();
    return 0.5 * (r + r.transpose().eval());
}

}  // namespace gridnorm
