#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "svmma/errors.hpp"
#include "svmma/gwr.hpp"
#include "svmma/simplex_qp.hpp"

namespace svmma {

// Point on the probability simplex H_n = {w in [0,1]^M : sum w = 1}.
struct WeightVector {
    Eigen::VectorXd w;

    static WeightVector checked(Eigen::VectorXd v) {
        constexpr double tol = 1e-10;
        if (v.size() == 0) throw std::invalid_argument("WeightVector: empty");
        if (!v.allFinite()) throw NonFiniteInput("WeightVector: non-finite entries");
        if ((v.array() < -tol).any() || (v.array() > 1.0 + tol).any())
            throw std::invalid_argument("WeightVector: entries outside [0,1]");
        if (std::abs(v.sum() - 1.0) > tol) throw std::invalid_argument("WeightVector: entries do not sum to 1");
        return WeightVector{std::move(v)};
    }

    Eigen::Index size() const { return w.size(); }
    double operator[](Eigen::Index m) const { return w[m]; }
};

// One Mallows weighting problem: candidate fitted values as columns of F,
// the response, per-candidate hat traces, and the error variance (known in
// simulations, plugged in from the largest model otherwise).
struct MallowsProblem {
    Eigen::MatrixXd fitted_columns;  // n x M
    Eigen::VectorXd y;               // n
    Eigen::VectorXd traces;          // M
    double sigma2 = 0.0;

    Eigen::Index n() const { return fitted_columns.rows(); }
    Eigen::Index M() const { return fitted_columns.cols(); }

    void validate() const {
        if (M() < 1) throw std::invalid_argument("MallowsProblem: need at least one candidate");
        if (y.size() != n()) throw std::invalid_argument("MallowsProblem: response length mismatch");
        if (traces.size() != M()) throw std::invalid_argument("MallowsProblem: traces length mismatch");
        if (!(sigma2 >= 0.0)) throw std::invalid_argument("MallowsProblem: sigma2 must be >= 0");
        if (!fitted_columns.allFinite() || !y.allFinite() || !traces.allFinite() || !std::isfinite(sigma2))
            throw NonFiniteInput("MallowsProblem: non-finite entries");
    }
};

// Mallows criterion C(w) = ||y - F w||^2 + 2 sigma2 * (traces . w).
inline double criterion_value(const MallowsProblem& mp, const WeightVector& w) {
    if (w.size() != mp.M()) throw std::invalid_argument("criterion_value: weight length mismatch");
    return (mp.y - mp.fitted_columns * w.w).squaredNorm() + 2.0 * mp.sigma2 * mp.traces.dot(w.w);
}

// Criterion minimizer over the simplex. Expanding the square gives the
// convex QP min_w w'(F'F)w - 2(F'y - sigma2 * traces)'w.
inline WeightVector solve_weights(const MallowsProblem& mp) {
    mp.validate();
    const Eigen::MatrixXd H = mp.fitted_columns.transpose() * mp.fitted_columns;
    const Eigen::VectorXd b = mp.fitted_columns.transpose() * mp.y - mp.sigma2 * mp.traces;
    const double tol = 1e-9 * std::max<double>(1, mp.n());
    return WeightVector::checked(simplex_qp(H, b, tol));
}

// Known-variance problem (simulations exercise the criterion with the true
// error variance).
inline MallowsProblem make_problem(const std::vector<FittedCandidate>& fits, const Eigen::VectorXd& y,
                                   double sigma2) {
    if (fits.empty()) throw std::invalid_argument("make_problem: no candidate fits");
    MallowsProblem mp;
    mp.y = y;
    mp.sigma2 = sigma2;
    mp.fitted_columns.resize(y.size(), static_cast<Eigen::Index>(fits.size()));
    mp.traces.resize(static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) {
        if (fits[m].fitted.size() != y.size())
            throw std::invalid_argument("make_problem: fitted length mismatch");
        mp.fitted_columns.col(static_cast<Eigen::Index>(m)) = fits[m].fitted;
        mp.traces[static_cast<Eigen::Index>(m)] = fits[m].hat_trace;
    }
    mp.validate();
    return mp;
}

// Index of the largest candidate: maximal p_m, ties to the larger hat trace,
// then to the smaller index.
inline std::size_t largest_candidate_index(const std::vector<FittedCandidate>& fits) {
    if (fits.empty()) throw std::invalid_argument("largest_candidate_index: no fits");
    std::size_t best = 0;
    for (std::size_t m = 1; m < fits.size(); ++m) {
        const int pm = fits[m].model.p_m();
        const int pb = fits[best].model.p_m();
        if (pm > pb || (pm == pb && fits[m].hat_trace > fits[best].hat_trace)) best = m;
    }
    return best;
}

// Feasible criterion: the unknown variance is replaced by the adjusted-dof
// residual variance of the largest candidate model.
inline MallowsProblem feasible_problem(const SpatialDataset& ds, const std::vector<FittedCandidate>& fits) {
    if (fits.empty()) throw std::invalid_argument("feasible_problem: no candidate fits");
    const std::size_t largest = largest_candidate_index(fits);
    const FittedCandidate& lf = fits[largest];
    const double n = static_cast<double>(ds.n());
    if (lf.hat_trace >= n)
        throw DegenerateDof("feasible_problem: largest model has tr(P) >= n");
    const double sigma2 = (ds.response - lf.fitted).squaredNorm() / (n - lf.hat_trace);
    return make_problem(fits, ds.response, sigma2);
}

// ---------------------------------------------------------------------------
// Information criteria and smoothed weights.

struct InfoCriteria {
    double aic = 0.0;
    double bic = 0.0;
    double aicc = 0.0;
    bool zero_variance = false;  // perfect fit: scores reported as -inf
};

inline InfoCriteria info_criteria(const FittedCandidate& fc) {
    const Eigen::VectorXd& y = fc.training_data->response;
    const double n = static_cast<double>(y.size());
    const double sigma2 = sigma2_naive(fc, y);
    const double tr = fc.hat_trace;
    InfoCriteria ic;
    if (sigma2 <= 0.0) {
        ic.zero_variance = true;
        ic.aic = ic.bic = ic.aicc = -std::numeric_limits<double>::infinity();
        return ic;
    }
    const double log_s2 = std::log(sigma2);
    ic.aic = log_s2 + 2.0 * tr / n;
    ic.bic = log_s2 + tr * std::log(n) / n;
    const double dof = n - tr - 2.0;
    ic.aicc = dof > 0.0 ? log_s2 + (n + tr) / dof : std::numeric_limits<double>::infinity();
    return ic;
}

// Argmin with ties resolved to the smaller index.
inline std::size_t select_minimum(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("select_minimum: empty scores");
    std::size_t best = 0;
    for (std::size_t m = 1; m < scores.size(); ++m)
        if (scores[m] < scores[best]) best = m;
    return best;
}

// Softmax of -score/2 (smoothed AIC/BIC weights). Scores of +inf get weight
// zero; -inf scores absorb all mass, split equally if tied.
inline WeightVector smoothed_weights(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("smoothed_weights: empty scores");
    const auto M = static_cast<Eigen::Index>(scores.size());
    for (const double s : scores)
        if (std::isnan(s)) throw NonFiniteInput("smoothed_weights: NaN score");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
    double min_score = std::numeric_limits<double>::infinity();
    for (const double s : scores) min_score = std::min(min_score, s);
    if (min_score == std::numeric_limits<double>::infinity())
        throw std::invalid_argument("smoothed_weights: all scores are +inf");
    if (min_score == -std::numeric_limits<double>::infinity()) {
        Eigen::Index count = 0;
        for (Eigen::Index m = 0; m < M; ++m)
            if (scores[static_cast<std::size_t>(m)] == min_score) ++count;
        for (Eigen::Index m = 0; m < M; ++m)
            if (scores[static_cast<std::size_t>(m)] == min_score) w[m] = 1.0 / static_cast<double>(count);
        return WeightVector::checked(std::move(w));
    }
    double total = 0.0;
    for (Eigen::Index m = 0; m < M; ++m) {
        const double s = scores[static_cast<std::size_t>(m)];
        w[m] = std::isfinite(s) ? std::exp(-0.5 * (s - min_score)) : 0.0;
        total += w[m];
    }
    w /= total;
    return WeightVector::checked(std::move(w));
}

// Total weight on quasi-correct candidates.
inline double tau_sum(const WeightVector& w, const std::vector<bool>& flags) {
    if (static_cast<Eigen::Index>(flags.size()) != w.size())
        throw std::invalid_argument("tau_sum: flag length mismatch");
    double tau = 0.0;
    for (Eigen::Index m = 0; m < w.size(); ++m)
        if (flags[static_cast<std::size_t>(m)]) tau += w[m];
    return std::clamp(tau, 0.0, 1.0);
}

// Averaged prediction: column m holds candidate m's predictions.
inline Eigen::VectorXd combine_predictions(const WeightVector& w, const Eigen::MatrixXd& per_candidate) {
    if (per_candidate.cols() != w.size())
        throw std::invalid_argument("combine_predictions: column/weight mismatch");
    return per_candidate * w.w;
}

}
