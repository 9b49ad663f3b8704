#pragma once

#include <Eigen/Dense>

#include "gridnorm/errors.hpp"

namespace gridnorm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A square matrix validated to be symmetric (1e-12 relative) with finite
/// entries. Positive semi-definiteness is enforced where it is consumed
/// (sym_sqrt clamps eigenvalues in [-1e-8*lambda_max, 0) and rejects
/// anything more negative).
class SpdMatrix {
public:
    explicit SpdMatrix(Matrix m);

    const Matrix& matrix() const { return mat_; }
    Eigen::Index size() const { return mat_.rows(); }

    /// Ratio of the smallest eigenvalue to the largest (1 for identity,
    /// negative for indefinite input). Costs a full eigendecomposition.
    double min_eigenvalue_ratio() const;

private:
    Matrix mat_;
};

/// Gamma function on (0, inf).
double gamma_fn(double x);

/// log Gamma on (0, inf).
double log_gamma(double x);

/// Modified Bessel function of the second kind K_nu(x), x > 0.
///
/// Half-integer orders use the closed forms; otherwise the Temme series
/// (x <= 2) or Steed's continued fraction (x > 2), followed by upward
/// recurrence in the order. Relative error is well below 1e-10 for
/// x in [1e-6, 50], nu in [0, 5].
double bessel_k(double nu, double x);

/// Upper-tail probability of the chi-squared distribution: Q(df/2, x/2)
/// via the regularized incomplete gamma function.
double chi2_sf(double x, double df);

/// Standard normal upper-tail probability 1 - Phi(z).
double normal_sf(double z);

/// Unique symmetric square root of a symmetric PSD matrix, via symmetric
/// eigendecomposition. Eigenvalues in [-1e-8*lambda_max, 0) are treated
/// as round-off and clamped to zero; more negative ones raise numeric_error.
Matrix sym_sqrt(const SpdMatrix& m);

/// Symmetric inverse square root. Eigenvalues below 1e-12*lambda_max raise
/// numeric_error (singular input).
Matrix sym_inv_sqrt(const SpdMatrix& m);

}  // namespace gridnorm
