#pragma once

#include <vector>

#include "gridnorm/numerics.hpp"
#include "gridnorm/rng.hpp"

namespace gridnorm {

/// Regular rectangular lattice. Site (ix, iy), ix in 1..n_x, iy in 1..n_y,
/// sits at coordinates ((ix-1)*spacing, (iy-1)*spacing); flat storage order
/// is (iy-1)*n_x + (ix-1).
struct LatticeSpec {
    int n_x = 0;
    int n_y = 0;
    double spacing = 1.0;

    /// n x n lattice spanning the unit square (spacing 1/(n-1)).
    static LatticeSpec unit_square(int n);

    int site_count() const { return n_x * n_y; }
    int flat_index(int ix, int iy) const { return (iy - 1) * n_x + (ix - 1); }
    double coord_x(int ix) const { return (ix - 1) * spacing; }
    double coord_y(int iy) const { return (iy - 1) * spacing; }

    void validate() const;
};

/// Marginal Matern parameters: variance sigma2, smoothness nu, range beta.
struct MaternParams {
    double sigma2 = 1.0;
    double nu = 0.5;
    double beta = 1.0;

    void validate() const;
};

/// Parsimonious bivariate Matern: shared range, per-variable smoothness,
/// cross-smoothness (nu1+nu2)/2, colocated correlation rho12 bounded by
/// rho_bound(nu1, nu2, dim_d).
struct BivariateMaternModel {
    MaternParams var1;
    MaternParams var2;
    double rho12 = 0.0;
    int dim_d = 2;

    void validate() const;
};

/// p-variate field on a lattice; values(l, s) is variable l at flat site s.
struct LatticeField {
    LatticeSpec spec;
    int p = 0;
    Matrix values;  // p x site_count

    void validate() const;
};

/// Matern correlation 2^{1-nu}/Gamma(nu) (h/beta)^nu K_nu(h/beta); 1 at h=0.
double matern_corr(double h_norm, double nu, double beta);

/// Validity bound for |rho12| in the parsimonious bivariate Matern model in
/// d spatial dimensions.
double rho_bound(double nu1, double nu2, int d);

/// Full 2n x 2n covariance of the stacked bivariate field
/// (Z1(s_1..s_n), Z2(s_1..s_n)) under the parsimonious Matern model.
SpdMatrix build_cross_covariance(const BivariateMaternModel& model,
                                 const LatticeSpec& lattice);

/// Apply a precomputed covariance square root to a stacked standard-normal
/// vector and un-stack into p variables.
LatticeField field_from_sqrt(const Matrix& cov_sqrt, const Vector& noise,
                             const LatticeSpec& spec, int p);

/// field_from_sqrt with the square root computed here (sym_sqrt(cov)).
LatticeField sample_field(const SpdMatrix& cov, const Vector& noise,
                          const LatticeSpec& spec, int p);

enum class CorrelationFamily { exponential, whittle };

/// Isotropic correlation at a given distance: exp(-d/beta) or
/// (d/beta) K_1(d/beta); both are 1 at d=0.
double correlation(CorrelationFamily family, double dist, double beta);

/// Range parameter beta such that the correlation equals 0.05 at distance
/// h_star. Exponential is closed-form h*/ln 20; Whittle is solved by
/// bisection on beta in [h*/20, 20 h*] to |R(h*) - 0.05| <= 1e-10.
double solve_effective_range(CorrelationFamily family, double h_star);

/// First-order rook moving average per variable, sharing one innovation
/// field: X_l(i,j) = theta_l {e(i-1,j)+e(i+1,j)+e(i,j-1)+e(i,j+1)} + e(i,j).
/// |theta_l| <= 1/4 is the invertibility threshold (violations are allowed).
struct MovingAverageSpec {
    std::vector<double> thetas;
    CorrelationFamily family = CorrelationFamily::exponential;
    double beta = 1.0;

    void validate() const;
};

/// Square root of the innovation-field correlation matrix on the extended
/// lattice (indices 1..n_x+1, 1..n_y+1) used by the moving average. Reusable
/// across replicates.
Matrix moving_average_innovation_sqrt(CorrelationFamily family, double beta,
                                      const LatticeSpec& lattice);

/// Deterministic stencil step of the moving average. e_extended is
/// (n_x+2) x (n_y+2) with e_extended(i, j) = e(i, j) for i in 0..n_x+1;
/// row/column 0 hold the zero boundary named by the model.
LatticeField moving_average_apply(const std::vector<double>& thetas,
                                  const LatticeSpec& lattice,
                                  const Matrix& e_extended);

LatticeField simulate_moving_average(const MovingAverageSpec& spec,
                                     const LatticeSpec& lattice, RngStream& rng);

/// simulate_moving_average with a precomputed innovation square root.
LatticeField simulate_moving_average_with_sqrt(const MovingAverageSpec& spec,
                                               const LatticeSpec& lattice,
                                               const Matrix& innovation_sqrt,
                                               RngStream& rng);

/// Finitely supported lattice kernel: weights(dx+radius, dy+radius) is the
/// weight at offset (dx, dy), |dx|,|dy| <= radius; the center weight is 1.
struct LatticeKernel {
    int radius = 0;
    Matrix weights;

    static LatticeKernel point_mass();
    /// Center weight 1 and weight theta on the four rook neighbours.
    static LatticeKernel rook(double theta);

    void validate() const;
};

/// Kernel convolution process X_l(s) = mu_l + sigma_l sum_t k_l(s-t) w(t)
/// with a single innovation field w shared across variables.
struct KernelConvolutionSpec {
    std::vector<double> means;
    std::vector<double> sds;
    std::vector<LatticeKernel> kernels;
    CorrelationFamily innovation_family = CorrelationFamily::exponential;
    double innovation_beta = 1.0;

    void validate() const;
};

/// Deterministic convolution step. omega_padded is
/// (n_x+2r) x (n_y+2r) with r the maximum kernel radius;
/// omega_padded(i-1+r, j-1+r) is the innovation at lattice site (i, j).
LatticeField kernel_convolution_apply(const KernelConvolutionSpec& spec,
                                      const LatticeSpec& lattice,
                                      const Matrix& omega_padded);

LatticeField simulate_kernel_convolution(const KernelConvolutionSpec& spec,
                                         const LatticeSpec& lattice,
                                         RngStream& rng);

/// Per-variable sinh-arcsinh parameters; epsilon controls skewness, delta
/// tail weight; (0, 1) is the identity.
struct SasParams {
    double epsilon = 0.0;
    double delta = 1.0;

    bool is_identity() const { return epsilon == 0.0 && delta == 1.0; }
    void validate() const;
};

/// Element-wise inverse sinh-arcsinh transform z -> sinh((asinh(z)+eps)/delta),
/// one parameter pair per variable. Strictly increasing in z.
LatticeField sas_inverse_transform(const LatticeField& field,
                                   const std::vector<SasParams>& params);

}  // namespace gridnorm
