#include "gridnorm/random_fields.hpp"

#include <cmath>
#include <string>

namespace gridnorm {

namespace {

constexpr double kLn20 = 2.99573227355399099343;

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw input_error(std::string(name) + " must be a positive finite number");
    }
}

}  // namespace

LatticeSpec LatticeSpec::unit_square(int n) {
    if (n < 2) throw input_error("unit_square lattice needs n >= 2");
    return LatticeSpec{n, n, 1.0 / (n - 1)};
}

void LatticeSpec::validate() const {
    if (n_x < 2 || n_y < 2) throw input_error("lattice must be at least 2x2");
    require_positive(spacing, "lattice spacing");
}

void MaternParams::validate() const {
    require_positive(sigma2, "sigma2");
    require_positive(nu, "nu");
    require_positive(beta, "beta");
}

void BivariateMaternModel::validate() const {
    var1.validate();
    var2.validate();
    if (dim_d < 1) throw input_error("spatial dimension must be positive");
    if (var1.beta != var2.beta) {
        throw input_error("parsimonious Matern model requires a shared range beta");
    }
    if (!std::isfinite(rho12)) throw input_error("rho12 must be finite");
    const double bound = rho_bound(var1.nu, var2.nu, dim_d);
    if (std::fabs(rho12) > bound) {
        throw input_error("rho12 = " + std::to_string(rho12) +
                          " violates the validity bound " + std::to_string(bound));
    }
}

void LatticeField::validate() const {
    spec.validate();
    if (p < 1) throw input_error("field must have at least one variable");
    if (values.rows() != p || values.cols() != spec.site_count()) {
        throw input_error("field value shape does not match the lattice");
    }
    if (!values.allFinite()) throw input_error("field values must be finite");
}

double matern_corr(double h_norm, double nu, double beta) {
    require_positive(nu, "nu");
    require_positive(beta, "beta");
    if (h_norm < 0.0 || !std::isfinite(h_norm)) {
        throw input_error("distance must be nonnegative and finite");
    }
    if (h_norm == 0.0) return 1.0;
    const double u = h_norm / beta;
    // log-space for numerical range; K_nu underflows long before this matters.
    const double log_val = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) +
                           nu * std::log(u) + std::log(bessel_k(nu, u));
    return std::exp(log_val);
}

double rho_bound(double nu1, double nu2, int d) {
    require_positive(nu1, "nu1");
    require_positive(nu2, "nu2");
    if (d < 1) throw input_error("spatial dimension must be positive");
    const double hd = 0.5 * d;
    const double nu12 = 0.5 * (nu1 + nu2);
    const double log_bound = 0.5 * (log_gamma(nu1 + hd) - log_gamma(nu1)) +
                             0.5 * (log_gamma(nu2 + hd) - log_gamma(nu2)) +
                             log_gamma(nu12) - log_gamma(nu12 + hd);
    return std::exp(log_bound);
}

SpdMatrix build_cross_covariance(const BivariateMaternModel& model,
                                 const LatticeSpec& lattice) {
    model.validate();
    lattice.validate();
    const int n = lattice.site_count();
    const double beta = model.var1.beta;
    const double nu1 = model.var1.nu;
    const double nu2 = model.var2.nu;
    const double nu12 = 0.5 * (nu1 + nu2);
    const double s1 = std::sqrt(model.var1.sigma2);
    const double s2 = std::sqrt(model.var2.sigma2);
    const double cross = model.rho12 * s1 * s2;

    Matrix sigma(2 * n, 2 * n);
    for (int jy = 1; jy <= lattice.n_y; ++jy) {
        for (int jx = 1; jx <= lattice.n_x; ++jx) {
            const int j = lattice.flat_index(jx, jy);
            for (int iy = 1; iy <= lattice.n_y; ++iy) {
                for (int ix = 1; ix <= lattice.n_x; ++ix) {
                    const int i = lattice.flat_index(ix, iy);
                    if (i < j) continue;  // fill lower triangle, mirror after
                    const double dx = lattice.coord_x(ix) - lattice.coord_x(jx);
                    const double dy = lattice.coord_y(iy) - lattice.coord_y(jy);
                    const double h = std::hypot(dx, dy);
                    sigma(i, j) = model.var1.sigma2 * matern_corr(h, nu1, beta);
                    sigma(n + i, n + j) = model.var2.sigma2 * matern_corr(h, nu2, beta);
                    const double c12 = cross * matern_corr(h, nu12, beta);
                    sigma(n + i, j) = c12;
                    sigma(n + j, i) = c12;
                }
            }
        }
    }
    sigma.triangularView<Eigen::StrictlyUpper>() =
        sigma.transpose().triangularView<Eigen::StrictlyUpper>();
    return SpdMatrix(std::move(sigma));
}

LatticeField field_from_sqrt(const Matrix& cov_sqrt, const Vector& noise,
                             const LatticeSpec& spec, int p) {
    spec.validate();
    const int n = spec.site_count();
    if (p < 1) throw input_error("field must have at least one variable");
    if (noise.size() != static_cast<Eigen::Index>(p) * n) {
        throw input_error("noise length does not match p * site_count");
    }
    if (cov_sqrt.rows() != noise.size() || cov_sqrt.cols() != noise.size()) {
        throw input_error("covariance square root has the wrong shape");
    }
    const Vector stacked = cov_sqrt * noise;
    LatticeField field{spec, p, Matrix(p, n)};
    for (int l = 0; l < p; ++l) {
        field.values.row(l) = stacked.segment(static_cast<Eigen::Index>(l) * n, n);
    }
    return field;
}

LatticeField sample_field(const SpdMatrix& cov, const Vector& noise,
                          const LatticeSpec& spec, int p) {
    return field_from_sqrt(sym_sqrt(cov), noise, spec, p);
}

double correlation(CorrelationFamily family, double dist, double beta) {
    require_positive(beta, "beta");
    if (dist < 0.0 || !std::isfinite(dist)) {
        throw input_error("distance must be nonnegative and finite");
    }
    if (dist == 0.0) return 1.0;
    const double u = dist / beta;
    switch (family) {
        case CorrelationFamily::exponential:
            return std::exp(-u);
        case CorrelationFamily::whittle:
            return u * bessel_k(1.0, u);
    }
    throw input_error("unknown correlation family");
}

double solve_effective_range(CorrelationFamily family, double h_star) {
    require_positive(h_star, "h_star");
    if (family == CorrelationFamily::exponential) {
        return h_star / kLn20;
    }
    // Whittle: R(h*) = (h*/beta) K_1(h*/beta) is increasing in beta, so
    // bisection on beta brackets the 0.05 crossing.
    double lo = h_star / 20.0;
    double hi = 20.0 * h_star;
    auto resid = [&](double beta) { return correlation(family, h_star, beta) - 0.05; };
    double flo = resid(lo);
    double fhi = resid(hi);
    if (flo > 0.0 || fhi < 0.0) {
        throw numeric_error("effective-range root is not bracketed");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = resid(mid);
        if (std::fabs(fmid) <= 1e-10) return mid;
        if (fmid < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw numeric_error("effective-range bisection did not converge");
}

void MovingAverageSpec::validate() const {
    if (thetas.empty()) throw input_error("moving average needs at least one theta");
    for (double t : thetas) {
        if (!std::isfinite(t)) throw input_error("theta must be finite");
    }
    require_positive(beta, "beta");
}

Matrix moving_average_innovation_sqrt(CorrelationFamily family, double beta,
                                      const LatticeSpec& lattice) {
    lattice.validate();
    const int mx = lattice.n_x + 1;
    const int my = lattice.n_y + 1;
    const int m = mx * my;
    Matrix corr(m, m);
    for (int jy = 1; jy <= my; ++jy) {
        for (int jx = 1; jx <= mx; ++jx) {
            const int j = (jy - 1) * mx + (jx - 1);
            for (int iy = 1; iy <= my; ++iy) {
                for (int ix = 1; ix <= mx; ++ix) {
                    const int i = (iy - 1) * mx + (ix - 1);
                    if (i < j) continue;
                    const double d = lattice.spacing * std::hypot(ix - jx, iy - jy);
                    const double c = correlation(family, d, beta);
                    corr(i, j) = c;
                    corr(j, i) = c;
                }
            }
        }
    }
    return sym_sqrt(SpdMatrix(std::move(corr)));
}

LatticeField moving_average_apply(const std::vector<double>& thetas,
                                  const LatticeSpec& lattice,
                                  const Matrix& e_extended) {
    lattice.validate();
    if (thetas.empty()) throw input_error("moving average needs at least one theta");
    if (e_extended.rows() != lattice.n_x + 2 || e_extended.cols() != lattice.n_y + 2) {
        throw input_error("extended innovation grid has the wrong shape");
    }
    const int p = static_cast<int>(thetas.size());
    LatticeField field{lattice, p, Matrix(p, lattice.site_count())};
    for (int iy = 1; iy <= lattice.n_y; ++iy) {
        for (int ix = 1; ix <= lattice.n_x; ++ix) {
            const int s = lattice.flat_index(ix, iy);
            const double neighbours = e_extended(ix - 1, iy) + e_extended(ix + 1, iy) +
                                      e_extended(ix, iy - 1) + e_extended(ix, iy + 1);
            const double center = e_extended(ix, iy);
            for (int l = 0; l < p; ++l) {
                field.values(l, s) = thetas[l] * neighbours + center;
            }
        }
    }
    return field;
}

LatticeField simulate_moving_average_with_sqrt(const MovingAverageSpec& spec,
                                               const LatticeSpec& lattice,
                                               const Matrix& innovation_sqrt,
                                               RngStream& rng) {
    spec.validate();
    lattice.validate();
    const int mx = lattice.n_x + 1;
    const int my = lattice.n_y + 1;
    const int m = mx * my;
    if (innovation_sqrt.rows() != m || innovation_sqrt.cols() != m) {
        throw input_error("innovation square root has the wrong shape");
    }
    Vector z(m);
    for (int i = 0; i < m; ++i) z[i] = rng.normal();
    const Vector e = innovation_sqrt * z;

    // e(i,0) = e(0,j) = e(0,0) = 0; the high-side ring at n+1 is simulated.
    Matrix e_extended = Matrix::Zero(lattice.n_x + 2, lattice.n_y + 2);
    for (int iy = 1; iy <= my; ++iy) {
        for (int ix = 1; ix <= mx; ++ix) {
            e_extended(ix, iy) = e[(iy - 1) * mx + (ix - 1)];
        }
    }
    return moving_average_apply(spec.thetas, lattice, e_extended);
}

LatticeField simulate_moving_average(const MovingAverageSpec& spec,
                                     const LatticeSpec& lattice, RngStream& rng) {
    const Matrix root = moving_average_innovation_sqrt(spec.family, spec.beta, lattice);
    return simulate_moving_average_with_sqrt(spec, lattice, root, rng);
}

LatticeKernel LatticeKernel::point_mass() {
    LatticeKernel k;
    k.radius = 0;
    k.weights = Matrix::Ones(1, 1);
    return k;
}

LatticeKernel LatticeKernel::rook(double theta) {
    LatticeKernel k;
    k.radius = 1;
    k.weights = Matrix::Zero(3, 3);
    k.weights(1, 1) = 1.0;
    k.weights(0, 1) = theta;
    k.weights(2, 1) = theta;
    k.weights(1, 0) = theta;
    k.weights(1, 2) = theta;
    return k;
}

void LatticeKernel::validate() const {
    if (radius < 0) throw input_error("kernel radius must be nonnegative");
    const int side = 2 * radius + 1;
    if (weights.rows() != side || weights.cols() != side) {
        throw input_error("kernel weight matrix must be (2r+1) x (2r+1)");
    }
    if (!weights.allFinite()) throw input_error("kernel weights must be finite");
    if (std::fabs(weights(radius, radius) - 1.0) > 1e-12) {
        throw input_error("kernel must have unit weight at the origin");
    }
}

void KernelConvolutionSpec::validate() const {
    const std::size_t p = kernels.size();
    if (p == 0) throw input_error("kernel convolution needs at least one variable");
    if (means.size() != p || sds.size() != p) {
        throw input_error("means/sds/kernels must have one entry per variable");
    }
    for (double m : means) {
        if (!std::isfinite(m)) throw input_error("mean must be finite");
    }
    for (double s : sds) require_positive(s, "sd");
    for (const auto& k : kernels) k.validate();
    require_positive(innovation_beta, "innovation beta");
}

namespace {

int max_radius(const KernelConvolutionSpec& spec) {
    int r = 0;
    for (const auto& k : spec.kernels) r = std::max(r, k.radius);
    return r;
}

}  // namespace

LatticeField kernel_convolution_apply(const KernelConvolutionSpec& spec,
                                      const LatticeSpec& lattice,
                                      const Matrix& omega_padded) {
    spec.validate();
    lattice.validate();
    const int r = max_radius(spec);
    if (omega_padded.rows() != lattice.n_x + 2 * r ||
        omega_padded.cols() != lattice.n_y + 2 * r) {
        throw input_error("padded innovation grid has the wrong shape");
    }
    const int p = static_cast<int>(spec.kernels.size());
    LatticeField field{lattice, p, Matrix(p, lattice.site_count())};
    for (int l = 0; l < p; ++l) {
        const auto& k = spec.kernels[l];
        for (int iy = 1; iy <= lattice.n_y; ++iy) {
            for (int ix = 1; ix <= lattice.n_x; ++ix) {
                double acc = 0.0;
                for (int dy = -k.radius; dy <= k.radius; ++dy) {
                    for (int dx = -k.radius; dx <= k.radius; ++dx) {
                        const double w = k.weights(dx + k.radius, dy + k.radius);
                        if (w == 0.0) continue;
                        acc += w * omega_padded(ix - 1 + r - dx, iy - 1 + r - dy);
                    }
                }
                field.values(l, lattice.flat_index(ix, iy)) =
                    spec.means[l] + spec.sds[l] * acc;
            }
        }
    }
    return field;
}

LatticeField simulate_kernel_convolution(const KernelConvolutionSpec& spec,
                                         const LatticeSpec& lattice,
                                         RngStream& rng) {
    spec.validate();
    lattice.validate();
    const int r = max_radius(spec);
    const int mx = lattice.n_x + 2 * r;
    const int my = lattice.n_y + 2 * r;
    const int m = mx * my;
    Matrix corr(m, m);
    for (int j = 0; j < m; ++j) {
        const int jx = j % mx;
        const int jy = j / mx;
        for (int i = j; i < m; ++i) {
            const int ix = i % mx;
            const int iy = i / mx;
            const double d = lattice.spacing * std::hypot(ix - jx, iy - jy);
            const double c = correlation(spec.innovation_family, d, spec.innovation_beta);
            corr(i, j) = c;
            corr(j, i) = c;
        }
    }
    const Matrix root = sym_sqrt(SpdMatrix(std::move(corr)));
    Vector z(m);
    for (int i = 0; i < m; ++i) z[i] = rng.normal();
    const Vector omega = root * z;
    Matrix omega_padded(mx, my);
    for (int iy = 0; iy < my; ++iy) {
        for (int ix = 0; ix < mx; ++ix) {
            omega_padded(ix, iy) = omega[iy * mx + ix];
        }
    }
    return kernel_convolution_apply(spec, lattice, omega_padded);
}

void SasParams::validate() const {
    if (!std::isfinite(epsilon)) throw input_error("SAS epsilon must be finite");
    require_positive(delta, "SAS delta");
}

LatticeField sas_inverse_transform(const LatticeField& field,
                                   const std::vector<SasParams>& params) {
    field.validate();
    if (static_cast<int>(params.size()) != field.p) {
        throw input_error("need one SAS parameter pair per variable");
    }
    for (const auto& pr : params) pr.validate();
    LatticeField out = field;
    for (int l = 0; l < field.p; ++l) {
        const auto& pr = params[l];
        if (pr.is_identity()) continue;
        for (Eigen::Index s = 0; s < out.values.cols(); ++s) {
            out.values(l, s) =
                std::sinh((std::asinh(out.values(l, s)) + pr.epsilon) / pr.delta);
        }
    }
    return out;
}

}  // namespace gridnorm
