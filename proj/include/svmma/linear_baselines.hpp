#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "svmma/averaging.hpp"
#include "svmma/candidates.hpp"
#include "svmma/dataset.hpp"
#include "svmma/errors.hpp"
#include "svmma/simplex_qp.hpp"

namespace svmma {

// Global-coefficient least squares fit of one candidate column set.
struct LinearFit {
    Eigen::VectorXd fitted;
    Eigen::VectorXd hat_diagonal;
    Eigen::VectorXd residuals;
    Eigen::VectorXd coefficients;
    std::vector<int> column_indices;
    int dof = 0;  // p_m; the OLS hat matrix has trace p_m
};

inline LinearFit ols_fit(const SpatialDataset& ds, const CandidateModel& cm) {
    cm.validate(static_cast<int>(ds.p()));
    const Eigen::MatrixXd Xm = detail::select_columns(ds.covariates, cm.column_indices);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xm);
    if (qr.rank() < Xm.cols())
        throw SingularLocalFit("ols_fit: rank-deficient design", 0.0, 0.0, 0.0, static_cast<int>(ds.n()));
    LinearFit fit;
    fit.column_indices = cm.column_indices;
    fit.dof = static_cast<int>(Xm.cols());
    fit.coefficients = qr.solve(ds.response);
    fit.fitted = Xm * fit.coefficients;
    fit.residuals = ds.response - fit.fitted;
    // Leverages from the thin Q factor.
    Eigen::HouseholderQR<Eigen::MatrixXd> hqr(Xm);
    const Eigen::MatrixXd thin_q =
        hqr.householderQ() * Eigen::MatrixXd::Identity(ds.n(), Xm.cols());
    fit.hat_diagonal = thin_q.rowwise().squaredNorm();
    return fit;
}

namespace detail {

inline Eigen::MatrixXd fitted_matrix(const std::vector<LinearFit>& fits) {
    if (fits.empty()) throw std::invalid_argument("no linear fits");
    Eigen::MatrixXd F(fits.front().fitted.size(), static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) {
        if (fits[m].fitted.size() != F.rows())
            throw std::invalid_argument("linear fits disagree on sample size");
        F.col(static_cast<Eigen::Index>(m)) = fits[m].fitted;
    }
    return F;
}

}  // namespace detail

// Mallows model averaging over linear candidates: traces are the parameter
// counts and the variance plug-in comes from the largest candidate with
// n - p_M* degrees of freedom.
inline WeightVector mma_weights(const std::vector<LinearFit>& fits, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd F = detail::fitted_matrix(fits);
    std::size_t largest = 0;
    for (std::size_t m = 1; m < fits.size(); ++m)
        if (fits[m].dof > fits[largest].dof) largest = m;
    const double n = static_cast<double>(y.size());
    if (fits[largest].dof >= y.size())
        throw DegenerateDof("mma_weights: largest model has p >= n");
    const double sigma2 = fits[largest].residuals.squaredNorm() / (n - fits[largest].dof);
    Eigen::VectorXd traces(static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) traces[static_cast<Eigen::Index>(m)] = fits[m].dof;
    const Eigen::MatrixXd H = F.transpose() * F;
    const Eigen::VectorXd b = F.transpose() * y - sigma2 * traces;
    return WeightVector::checked(simplex_qp(H, b, 1e-9 * std::max(1.0, n)));
}

// Jackknife model averaging: leave-one-out residuals by the leverage
// transform e_i / (1 - h_ii), then minimize ||E~ w||^2 on the simplex.
inline WeightVector jma_weights(const std::vector<LinearFit>& fits, const Eigen::VectorXd& y) {
    if (fits.empty()) throw std::invalid_argument("jma_weights: no fits");
    const Eigen::Index n = y.size();
    Eigen::MatrixXd loo(n, static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) {
        const LinearFit& fit = fits[m];
        if (fit.fitted.size() != n) throw std::invalid_argument("jma_weights: sample size mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double denom = 1.0 - fit.hat_diagonal[i];
            if (!(denom > 0.0))
                throw DegenerateDof("jma_weights: leverage equal to 1 at row " + std::to_string(i));
            loo(i, static_cast<Eigen::Index>(m)) = fit.residuals[i] / denom;
        }
    }
    const Eigen::MatrixXd H = loo.transpose() * loo;
    const Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fits.size()));
    return WeightVector::checked(simplex_qp(H, b, 1e-9 * std::max<double>(1, n)));
}

struct LinearSelection {
    std::size_t aic_choice = 0;
    std::size_t bic_choice = 0;
    std::vector<double> aic_scores;
    std::vector<double> bic_scores;
    bool zero_variance = false;
};

// AIC/BIC selection over linear candidates with sigma2_m = RSS_m / n.
inline LinearSelection linear_ic_select(const std::vector<LinearFit>& fits, const Eigen::VectorXd& y) {
    if (fits.empty()) throw std::invalid_argument("linear_ic_select: no fits");
    const double n = static_cast<double>(y.size());
    LinearSelection sel;
    for (const auto& fit : fits) {
        const double sigma2 = fit.residuals.squaredNorm() / n;
        if (sigma2 <= 0.0) {
            sel.zero_variance = true;
            sel.aic_scores.push_back(-std::numeric_limits<double>::infinity());
            sel.bic_scores.push_back(-std::numeric_limits<double>::infinity());
            continue;
        }
        sel.aic_scores.push_back(std::log(sigma2) + 2.0 * fit.dof / n);
        sel.bic_scores.push_back(std::log(sigma2) + fit.dof * std::log(n) / n);
    }
    sel.aic_choice = select_minimum(sel.aic_scores);
    sel.bic_choice = select_minimum(sel.bic_scores);
    return sel;
}

}
