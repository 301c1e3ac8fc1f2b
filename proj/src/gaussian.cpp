#include "dbl/gaussian.hpp"

#include <cmath>
#include <string>

namespace dbl {

namespace {
constexpr const char* kModule = "gaussian_core";
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = m.norm();
    if (scale == 0.0) return true;
    return min_eigenvalue(m) >= -rel_tol * scale;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

void GaussianVector::validate() const {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size())
        throw ShapeMismatch(kModule, "covariance must be square and match the mean dimension");
    const double scale = cov.norm();
    if (scale > 0.0 && (cov - cov.transpose()).norm() > 1e-12 * scale)
        throw NumericalFailure(kModule, "covariance is not symmetric within 1e-12 relative tolerance");
    if (!is_psd(cov))
        throw NotPositiveDefinite(kModule, "covariance has an eigenvalue below -1e-10 * ||cov||");
}

CholeskyFactor CholeskyFactor::compute(const Eigen::MatrixXd& cov, const std::string& module) {
    if (cov.rows() != cov.cols()) throw ShapeMismatch(module, "Cholesky input must be square");
    const Eigen::Index n = cov.rows();
    Eigen::MatrixXd sym = symmetrize(cov);
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = sym(j, j) - lower.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d))
            throw NotPositiveDefinite(module, "pivot " + std::to_string(j) + " is not positive",
                                      static_cast<int>(j));
        lower(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = sym(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j));
            lower(i, j) = s / lower(j, j);
        }
    }
    return CholeskyFactor(std::move(lower));
}

Eigen::MatrixXd CholeskyFactor::inverse() const {
    return solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

double CholeskyFactor::log_det() const {
    return 2.0 * lower_.diagonal().array().log().sum();
}

namespace {

std::vector<Eigen::Index> complement_of(const std::vector<Eigen::Index>& observed, Eigen::Index dim) {
    std::vector<bool> seen(static_cast<std::size_t>(dim), false);
    for (Eigen::Index idx : observed) {
        if (idx < 0 || idx >= dim)
            throw ShapeMismatch(kModule, "observed index out of range");
        if (seen[static_cast<std::size_t>(idx)])
            throw ShapeMismatch(kModule, "observed index repeated");
        seen[static_cast<std::size_t>(idx)] = true;
    }
    std::vector<Eigen::Index> unobserved;
    unobserved.reserve(static_cast<std::size_t>(dim) - observed.size());
    for (Eigen::Index i = 0; i < dim; ++i)
        if (!seen[static_cast<std::size_t>(i)]) unobserved.push_back(i);
    return unobserved;
}

Eigen::MatrixXd pick_block(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                           const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

Eigen::VectorXd pick_vector(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
    return out;
}

}  // namespace

ConditionalMap conditional_map(const GaussianVector& joint, const std::vector<Eigen::Index>& observed_indices) {
    joint.validate();
    if (observed_indices.empty()) throw ShapeMismatch(kModule, "observed index set is empty");
    const std::vector<Eigen::Index> unobserved = complement_of(observed_indices, joint.dim());

    const Eigen::MatrixXd cov_yy = symmetrize(pick_block(joint.cov, observed_indices, observed_indices));
    const Eigen::MatrixXd cov_xy = pick_block(joint.cov, unobserved, observed_indices);
    const Eigen::MatrixXd cov_xx = pick_block(joint.cov, unobserved, unobserved);
    const Eigen::VectorXd mu_x = pick_vector(joint.mean, unobserved);
    const Eigen::VectorXd mu_y = pick_vector(joint.mean, observed_indices);

    if (min_eigenvalue(cov_yy) <= 1e-12 * cov_yy.trace())
        throw SingularObservationCov(kModule, "observed covariance block is numerically singular");

    const CholeskyFactor chol = CholeskyFactor::compute(cov_yy, kModule);
    ConditionalMap map;
    map.gain = chol.solve(cov_xy.transpose()).transpose();  // Σ_XY Σ_YY^{-1}
    map.base = mu_x - map.gain * mu_y;
    map.cov = symmetrize(cov_xx - map.gain * cov_xy.transpose());
    return map;
}

GaussianVector condition(const GaussianVector& joint, const std::vector<Eigen::Index>& observed_indices,
                         const Eigen::VectorXd& observation) {
    if (observation.size() != static_cast<Eigen::Index>(observed_indices.size()))
        throw ShapeMismatch(kModule, "observation length does not match the observed index set");
    const ConditionalMap map = conditional_map(joint, observed_indices);
    return GaussianVector{map.mean(observation), map.cov};
}

Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& a_inv, const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& c_inv, const Eigen::MatrixXd& v) {
    if (a_inv.rows() != a_inv.cols() || c_inv.rows() != c_inv.cols())
        throw ShapeMismatch(kModule, "A^{-1} and C^{-1} must be square");
    if (u.rows() != a_inv.rows() || v.rows() != a_inv.rows() || u.cols() != c_inv.rows() ||
        v.cols() != c_inv.rows())
        throw ShapeMismatch(kModule, "U and V must be N x K with K matching C^{-1}");

    // The inner block is not symmetric unless U = V; LU handles the general case.
    const Eigen::MatrixXd inner = c_inv + v.transpose() * a_inv * u;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(inner);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw SingularInnerBlock(kModule, "C^{-1} + V^T A^{-1} U is numerically singular");
    return a_inv - a_inv * u * lu.solve(v.transpose() * a_inv);
}

}  // namespace dbl
