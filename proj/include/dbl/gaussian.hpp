#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dbl/errors.hpp"

namespace dbl {

/// Exact finite-dimensional Gaussian algebra: conditioning, Woodbury/Schur
/// identities and Cholesky factorization. Serves both the production
/// formulas and brute-force oracles, so everything here is written for
/// stability at small dimension rather than scale.
///
/// All functions are pure and safe to call concurrently.

/// Symmetrize by averaging with the transpose.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

/// True when m is symmetric PSD within the library tolerance
/// (eigenvalues >= -1e-10 * ||m||).
bool is_psd(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

/// Symmetric PSD square root with tiny negative eigenvalues clamped to zero.
/// Used to sample from conditional covariances that are singular in exact
/// arithmetic (e.g. a pinned bridge endpoint).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// Gaussian vector (mean, covariance).
struct GaussianVector {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index dim() const { return mean.size(); }

    /// Enforce the type invariants: cov square and matching mean, symmetric
    /// to 1e-12 relative tolerance, PSD to -1e-10 * ||cov||.
    void validate() const;
};

/// Lower-triangular Cholesky factor L with L L^T = cov.
///
/// Solves with an SPD matrix go through this class; explicit inverses are
/// formed only where an inverse matrix is the return contract.
class CholeskyFactor {
public:
    /// Factorize an SPD matrix. Throws NotPositiveDefinite carrying the index
    /// of the failing pivot.
    static CholeskyFactor compute(const Eigen::MatrixXd& cov, const std::string& module = "gaussian_core");

    const Eigen::MatrixXd& lower() const { return lower_; }
    Eigen::Index dim() const { return lower_.rows(); }

    /// Solve (L L^T) x = b for a vector or matrix right-hand side.
    template <typename Derived>
    Eigen::MatrixXd solve(const Eigen::MatrixBase<Derived>& b) const {
        const Eigen::MatrixXd rhs = b.derived();
        const Eigen::MatrixXd y = lower_.template triangularView<Eigen::Lower>().solve(rhs);
        return lower_.transpose().template triangularView<Eigen::Upper>().solve(y);
    }

    /// Explicit (L L^T)^{-1}.
    Eigen::MatrixXd inverse() const;

    /// Reconstruct L L^T.
    Eigen::MatrixXd reconstruct() const { return lower_ * lower_.transpose(); }

    double log_det() const;

private:
    explicit CholeskyFactor(Eigen::MatrixXd lower) : lower_(std::move(lower)) {}
    Eigen::MatrixXd lower_;
};

/// Affine map describing a Gaussian conditional law:
///   X | Y = y  ~  N(base + gain * y, cov).
/// Exposed so exact path samplers can reuse one conditioning for many y.
struct ConditionalMap {
    Eigen::VectorXd base;
    Eigen::MatrixXd gain;
    Eigen::MatrixXd cov;

    Eigen::VectorXd mean(const Eigen::VectorXd& y) const { return base + gain * y; }
};

/// Conditional law of the unobserved block of `joint` given the coordinates
/// in `observed_indices`. The unobserved coordinates keep their original
/// relative order.
ConditionalMap conditional_map(const GaussianVector& joint, const std::vector<Eigen::Index>& observed_indices);

/// Condition `joint` on observation = y over the given index set. Returns the
/// posterior over the remaining coordinates.
///
/// Pre: the observed covariance block has smallest eigenvalue
/// > 1e-12 * trace (else SingularObservationCov).
GaussianVector condition(const GaussianVector& joint, const std::vector<Eigen::Index>& observed_indices,
                         const Eigen::VectorXd& observation);

/// (A + U C V^T)^{-1} from A^{-1} and C^{-1} via the Woodbury identity.
/// U and V are N x K.
Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& a_inv, const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& c_inv, const Eigen::MatrixXd& v);

/// Cholesky factor of an SPD covariance.
inline CholeskyFactor cholesky(const Eigen::MatrixXd& cov) { return CholeskyFactor::compute(cov); }

}  // namespace dbl
