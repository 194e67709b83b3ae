#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "svmma/candidates.hpp"
#include "svmma/dataset.hpp"
#include "svmma/errors.hpp"
#include "svmma/kernels.hpp"

namespace svmma {

// Local fits are declared singular when the smallest LDLT pivot of the
// weighted Gram matrix falls below this ratio of the largest. No fallback
// regularization: a singular system is an error the caller must see.
inline constexpr double pivot_ratio_tol = 1e-12;

// In-sample fit of one candidate model: fitted values, hat diagonal and
// trace, and optionally the full hat matrix. Immutable once built.
struct FittedCandidate {
    Eigen::VectorXd fitted;
    Eigen::VectorXd hat_diagonal;
    double hat_trace = 0.0;
    std::optional<Eigen::MatrixXd> hat_matrix;
    std::shared_ptr<const SpatialDataset> training_data;
    CandidateModel model;
};

namespace detail {

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(idx[k]);
    return out;
}

// Kernel weights at target s over all sample locations; row `skip` (if >= 0)
// gets weight zero, which removes it from every downstream sum exactly.
inline Eigen::VectorXd local_weights(const Eigen::MatrixXd& locations, const Eigen::Vector2d& s,
                                     KernelKind kind, double h, double q, Eigen::Index skip,
                                     double kernel_scale) {
    Eigen::VectorXd w = weight_diagonal(locations, s, kind, h, q);
    if (kernel_scale != 1.0) w *= kernel_scale;
    if (skip >= 0) w[skip] = 0.0;
    return w;
}

inline Eigen::VectorXd local_weights_from_distances(const Eigen::VectorXd& dist_row, KernelKind kind,
                                                    double h, Eigen::Index skip, double kernel_scale) {
    const Eigen::Index n = dist_row.size();
    Eigen::VectorXd w(n);
    const double inv_h2 = kernel_scale / (h * h);
    if (kind == KernelKind::gaussian) {
        const double c = inv_h2 / (2.0 * M_PI);
        w = (-(dist_row.array() / h).square() * 0.5).exp() * c;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = dist_row[i] / h;
            w[i] = r > 1.0 ? 0.0 : inv_h2 * (1.0 - r * r) * (1.0 - r * r);
        }
    }
    if (skip >= 0) w[skip] = 0.0;
    return w;
}

struct LdltResult {
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    bool ok = false;
};

inline LdltResult factor_checked(const Eigen::MatrixXd& A) {
    LdltResult r;
    r.ldlt.compute(A);
    if (r.ldlt.info() != Eigen::Success) return r;
    const Eigen::VectorXd d = r.ldlt.vectorD().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0) || !std::isfinite(dmax)) return r;
    if (d.minCoeff() < pivot_ratio_tol * dmax) return r;
    r.ok = true;
    return r;
}

[[noreturn]] inline void throw_singular(const Eigen::Vector2d& s, double h, const Eigen::VectorXd& w) {
    const int support = static_cast<int>((w.array() > 0.0).count());
    std::ostringstream msg;
    msg << "singular local fit at s=(" << s.x() << ", " << s.y() << "), h=" << h
        << ", effective support " << support << " point(s)";
    throw SingularLocalFit(msg.str(), s.x(), s.y(), h, support);
}

// A = X' diag(w) X, b = X' diag(w) y.
inline void weighted_normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& w, Eigen::MatrixXd& A, Eigen::VectorXd& b,
                                      Eigen::MatrixXd& scratch) {
    scratch = X.array().colwise() * w.array();
    A.noalias() = scratch.transpose() * X;
    b.noalias() = scratch.transpose() * y;
}

inline double require_bandwidth(const CandidateModel& cm) {
    if (!cm.bandwidth) throw std::invalid_argument("candidate model has no bandwidth set");
    if (!(*cm.bandwidth > 0.0)) throw std::invalid_argument("candidate model bandwidth must be positive");
    return *cm.bandwidth;
}

}  // namespace detail

// Local-constant weighted least squares coefficients at target location s
// (the kernel-weighted normal equations solved by direct factorization).
// kernel_scale multiplies every weight; fits are invariant to it, which is
// what makes dropped kernel normalization constants harmless.
inline Eigen::VectorXd fit_local(const SpatialDataset& ds, const CandidateModel& cm,
                                 const Eigen::Vector2d& s, double kernel_scale = 1.0) {
    const double h = detail::require_bandwidth(cm);
    cm.validate(static_cast<int>(ds.p()));
    const Eigen::MatrixXd Xm = detail::select_columns(ds.covariates, cm.column_indices);
    const Eigen::VectorXd w = detail::local_weights(ds.locations, s, cm.kernel, h, cm.q, -1, kernel_scale);
    Eigen::MatrixXd A, scratch;
    Eigen::VectorXd b;
    detail::weighted_normal_equations(Xm, ds.response, w, A, b, scratch);
    const auto f = detail::factor_checked(A);
    if (!f.ok) detail::throw_singular(s, h, w);
    return f.ldlt.solve(b);
}

// Row i of the hat matrix: entry j = w_j * x_j' (X'WX)^-1 x_i with weights
// taken at s_i.
inline Eigen::VectorXd hat_row(const SpatialDataset& ds, const CandidateModel& cm, Eigen::Index i,
                               double kernel_scale = 1.0) {
    const double h = detail::require_bandwidth(cm);
    cm.validate(static_cast<int>(ds.p()));
    if (i < 0 || i >= ds.n()) throw std::invalid_argument("hat_row: row index out of range");
    const Eigen::MatrixXd Xm = detail::select_columns(ds.covariates, cm.column_indices);
    const Eigen::Vector2d s = ds.locations.row(i).transpose();
    const Eigen::VectorXd w = detail::local_weights(ds.locations, s, cm.kernel, h, cm.q, -1, kernel_scale);
    Eigen::MatrixXd A, scratch;
    Eigen::VectorXd b;
    detail::weighted_normal_equations(Xm, ds.response, w, A, b, scratch);
    const auto f = detail::factor_checked(A);
    if (!f.ok) detail::throw_singular(s, h, w);
    const Eigen::VectorXd u = f.ldlt.solve(Xm.row(i).transpose());
    return (Xm * u).cwiseProduct(w);
}

// Fits the candidate at every sample location. The trace comes from the
// per-location diagonal terms K_h(0) * x_i' (X'W_i X)^-1 x_i, so the full
// n x n matrix is only built when asked for.
inline FittedCandidate fit_candidate(std::shared_ptr<const SpatialDataset> ds, const CandidateModel& cm,
                                     bool materialize_hat = false) {
    const double h = detail::require_bandwidth(cm);
    cm.validate(static_cast<int>(ds->p()));
    const Eigen::Index n = ds->n();
    const Eigen::MatrixXd Xm = detail::select_columns(ds->covariates, cm.column_indices);
    const Eigen::Index pm = Xm.cols();

    FittedCandidate fc;
    fc.model = cm;
    fc.training_data = ds;
    fc.fitted.resize(n);
    fc.hat_diagonal.resize(n);
    if (materialize_hat) fc.hat_matrix.emplace(n, n);

    Eigen::MatrixXd A, scratch;
    Eigen::VectorXd b;
    Eigen::MatrixXd rhs(pm, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector2d s = ds->locations.row(i).transpose();
        const Eigen::VectorXd w = detail::local_weights(ds->locations, s, cm.kernel, h, cm.q, -1, 1.0);
        detail::weighted_normal_equations(Xm, ds->response, w, A, b, scratch);
        const auto f = detail::factor_checked(A);
        if (!f.ok) detail::throw_singular(s, h, w);
        rhs.col(0) = b;
        rhs.col(1) = Xm.row(i).transpose();
        const Eigen::MatrixXd sol = f.ldlt.solve(rhs);
        fc.fitted[i] = Xm.row(i).dot(sol.col(0));
        fc.hat_diagonal[i] = w[i] * Xm.row(i).dot(sol.col(1));
        if (materialize_hat) fc.hat_matrix->row(i) = ((Xm * sol.col(1)).cwiseProduct(w)).transpose();
    }
    fc.hat_trace = fc.hat_diagonal.sum();
    return fc;
}

inline FittedCandidate fit_candidate(const SpatialDataset& ds, const CandidateModel& cm,
                                     bool materialize_hat = false) {
    return fit_candidate(std::make_shared<const SpatialDataset>(ds), cm, materialize_hat);
}

// Out-of-sample conditional mean estimates: local fit at each new location
// from the training data only, applied to the new covariate rows (given in
// the full dataset column layout).
inline Eigen::VectorXd predict_at(const FittedCandidate& fc, const Eigen::MatrixXd& new_locations,
                                  const Eigen::MatrixXd& new_covariates) {
    if (new_locations.rows() != new_covariates.rows())
        throw std::invalid_argument("predict_at: location/covariate row mismatch");
    if (new_locations.rows() > 0 && new_locations.cols() != 2)
        throw std::invalid_argument("predict_at: new_locations must be k x 2");
    if (new_covariates.rows() > 0 && new_covariates.cols() != fc.training_data->p())
        throw std::invalid_argument("predict_at: new_covariates must have the training column layout");
    const Eigen::Index k = new_locations.rows();
    Eigen::VectorXd out(k);
    const Eigen::MatrixXd Xnew = k > 0 ? detail::select_columns(new_covariates, fc.model.column_indices)
                                       : Eigen::MatrixXd(0, fc.model.p_m());
    for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::VectorXd beta = fit_local(*fc.training_data, fc.model, new_locations.row(j).transpose());
        out[j] = Xnew.row(j).dot(beta);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bandwidth selection by exact leave-one-out cross validation. The held-out
// row enters the local normal equations with weight zero, which is the same
// linear system as refitting on the remaining n-1 rows.

struct BandwidthSelection {
    double bandwidth = 0.0;          // argmin of cv_values (ties to the smaller h)
    Eigen::VectorXd cv_values;       // +inf where some leave-one-out fit was singular
};

// Log-spaced grid between lo_factor and hi_factor times the maximum pairwise
// distance of the data (in the L_q metric used for fitting).
inline std::vector<double> default_bandwidth_grid(const SpatialDataset& ds, double q, int points = 30,
                                                  double lo_factor = 0.05, double hi_factor = 2.0) {
    if (points < 1) throw std::invalid_argument("default_bandwidth_grid: points must be >= 1");
    if (!(lo_factor > 0.0) || !(hi_factor >= lo_factor))
        throw std::invalid_argument("default_bandwidth_grid: need 0 < lo_factor <= hi_factor");
    const double extent = data_extent(ds.locations, q);
    if (!(extent > 0.0))
        throw std::invalid_argument("default_bandwidth_grid: degenerate locations (zero extent)");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    if (points == 1) {
        grid.push_back(lo_factor * extent);
        return grid;
    }
    const double lo = std::log(lo_factor * extent);
    const double hi = std::log(hi_factor * extent);
    for (int k = 0; k < points; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(points - 1);
        grid.push_back(std::exp(lo + t * (hi - lo)));
    }
    return grid;
}

namespace detail {

inline BandwidthSelection pick_best(const std::vector<double>& grid, const Eigen::VectorXd& cv) {
    BandwidthSelection sel;
    sel.cv_values = cv;
    double best_cv = std::numeric_limits<double>::infinity();
    double best_h = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double v = cv[static_cast<Eigen::Index>(g)];
        if (!std::isfinite(v)) continue;
        if (v < best_cv || (v == best_cv && grid[g] < best_h)) {
            best_cv = v;
            best_h = grid[g];
        }
    }
    if (!std::isfinite(best_cv))
        throw NoValidBandwidth("every grid bandwidth produced a singular leave-one-out fit");
    sel.bandwidth = best_h;
    return sel;
}

}  // namespace detail

// Exact leave-one-out CV over a bandwidth grid for one candidate model.
// Pass a precomputed DistanceMatrix (for the same q) to share it across
// candidates and grid points.
inline BandwidthSelection loocv_bandwidth(const SpatialDataset& ds, const CandidateModel& cm,
                                          const std::vector<double>& grid,
                                          const DistanceMatrix* cache = nullptr) {
    if (grid.empty()) throw std::invalid_argument("loocv_bandwidth: empty grid");
    cm.validate(static_cast<int>(ds.p()));
    const Eigen::Index n = ds.n();
    const Eigen::MatrixXd Xm = detail::select_columns(ds.covariates, cm.column_indices);
    std::optional<DistanceMatrix> own;
    if (!cache) {
        own = DistanceMatrix::compute(ds.locations, cm.q);
        cache = &*own;
    }
    Eigen::VectorXd cv(static_cast<Eigen::Index>(grid.size()));
    Eigen::MatrixXd A, scratch;
    Eigen::VectorXd b;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double h = grid[g];
        if (!(h > 0.0)) throw std::invalid_argument("loocv_bandwidth: bandwidths must be positive");
        double acc = 0.0;
        bool valid = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd w =
                detail::local_weights_from_distances(cache->d.row(i).transpose(), cm.kernel, h, i, 1.0);
            detail::weighted_normal_equations(Xm, ds.response, w, A, b, scratch);
            const auto f = detail::factor_checked(A);
            if (!f.ok) {
                valid = false;
                break;
            }
            const double mu_loo = Xm.row(i).dot(f.ldlt.solve(b));
            const double r = ds.response[i] - mu_loo;
            acc += r * r;
        }
        cv[static_cast<Eigen::Index>(g)] = valid ? acc : std::numeric_limits<double>::infinity();
    }
    return detail::pick_best(grid, cv);
}

// Leave-one-out CV value via the hat-diagonal identity
// mu_loo_i = (mu_i - P_ii y_i) / (1 - P_ii), a rank-one downdate of the
// local normal equations. Alternative fast path to the exact refit above.
inline double loocv_value_shortcut(const SpatialDataset& ds, CandidateModel cm, double h) {
    cm.bandwidth = h;
    const FittedCandidate fc = fit_candidate(ds, cm, false);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const double denom = 1.0 - fc.hat_diagonal[i];
        if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
        const double r = (ds.response[i] - fc.fitted[i]) / denom;
        acc += r * r;
    }
    return acc;
}

// CV bandwidth selection for a whole candidate set. When every model shares
// the same kernel and q, the weight vector at each (grid point, location)
// pair is computed once and each model solves against its sub-block of the
// pooled normal equations; results match per-model loocv_bandwidth. Selected
// bandwidths are written back into the models.
inline std::vector<BandwidthSelection> select_bandwidths(const SpatialDataset& ds, CandidateSet& cs,
                                                         const std::vector<double>& grid,
                                                         const DistanceMatrix* cache = nullptr) {
    if (cs.models.empty()) throw std::invalid_argument("select_bandwidths: empty candidate set");
    if (grid.empty()) throw std::invalid_argument("select_bandwidths: empty grid");
    const Eigen::Index n = ds.n();

    bool shared = true;
    for (const auto& cm : cs.models) {
        cm.validate(static_cast<int>(ds.p()));
        if (cm.kernel != cs.models.front().kernel || cm.q != cs.models.front().q) shared = false;
    }

    std::vector<BandwidthSelection> out;
    out.reserve(cs.models.size());
    if (!shared) {
        for (auto& cm : cs.models) {
            out.push_back(loocv_bandwidth(ds, cm, grid));
            cm.bandwidth = out.back().bandwidth;
        }
        return out;
    }

    const KernelKind kind = cs.models.front().kernel;
    const double q = cs.models.front().q;
    std::optional<DistanceMatrix> own;
    if (!cache) {
        own = DistanceMatrix::compute(ds.locations, q);
        cache = &*own;
    }

    // Union of referenced columns, and each model's positions within it.
    std::set<int> union_set;
    for (const auto& cm : cs.models) union_set.insert(cm.column_indices.begin(), cm.column_indices.end());
    std::vector<int> union_cols(union_set.begin(), union_set.end());
    const Eigen::MatrixXd Xu = detail::select_columns(ds.covariates, union_cols);
    const auto pu = static_cast<Eigen::Index>(union_cols.size());
    std::vector<std::vector<int>> pos(cs.models.size());
    for (std::size_t m = 0; m < cs.models.size(); ++m) {
        for (const int c : cs.models[m].column_indices) {
            const auto it = std::lower_bound(union_cols.begin(), union_cols.end(), c);
            pos[m].push_back(static_cast<int>(it - union_cols.begin()));
        }
    }

    const auto G = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd cv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cs.models.size()), G);
    Eigen::MatrixXd Afull, scratch;
    Eigen::VectorXd bfull;
    Eigen::MatrixXd Am;
    Eigen::VectorXd bm, xm;
    for (Eigen::Index g = 0; g < G; ++g) {
        const double h = grid[static_cast<std::size_t>(g)];
        if (!(h > 0.0)) throw std::invalid_argument("select_bandwidths: bandwidths must be positive");
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd w =
                detail::local_weights_from_distances(cache->d.row(i).transpose(), kind, h, i, 1.0);
            detail::weighted_normal_equations(Xu, ds.response, w, Afull, bfull, scratch);
            for (std::size_t m = 0; m < cs.models.size(); ++m) {
                double& cell = cv(static_cast<Eigen::Index>(m), g);
                if (!std::isfinite(cell)) continue;
                const auto& pm_pos = pos[m];
                const auto pm = static_cast<Eigen::Index>(pm_pos.size());
                Am.resize(pm, pm);
                bm.resize(pm);
                xm.resize(pm);
                for (Eigen::Index a = 0; a < pm; ++a) {
                    bm[a] = bfull[pm_pos[static_cast<std::size_t>(a)]];
                    xm[a] = Xu(i, pm_pos[static_cast<std::size_t>(a)]);
                    for (Eigen::Index c = 0; c < pm; ++c)
                        Am(a, c) = Afull(pm_pos[static_cast<std::size_t>(a)], pm_pos[static_cast<std::size_t>(c)]);
                }
                const auto f = detail::factor_checked(Am);
                if (!f.ok) {
                    cell = std::numeric_limits<double>::infinity();
                    continue;
                }
                const double r = ds.response[i] - xm.dot(f.ldlt.solve(bm));
                cell += r * r;
            }
        }
    }
    for (std::size_t m = 0; m < cs.models.size(); ++m) {
        out.push_back(detail::pick_best(grid, cv.row(static_cast<Eigen::Index>(m)).transpose()));
        cs.models[m].bandwidth = out.back().bandwidth;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Residual variance estimators.

// Adjusted-dof residual variance from the largest candidate model:
// ||y - P y||^2 / (n - tr P).
inline double sigma2_largest(const SpatialDataset& ds, const CandidateModel& cm_largest) {
    const FittedCandidate fc = fit_candidate(ds, cm_largest, false);
    const double n = static_cast<double>(ds.n());
    if (fc.hat_trace >= n)
        throw DegenerateDof("sigma2_largest: tr(P) = " + std::to_string(fc.hat_trace) +
                            " leaves no residual degrees of freedom (n = " + std::to_string(ds.n()) + ")");
    return (ds.response - fc.fitted).squaredNorm() / (n - fc.hat_trace);
}

// Mean squared residual n^-1 ||y - mu_hat||^2 (the variance plugged into the
// information criteria).
inline double sigma2_naive(const FittedCandidate& fc, const Eigen::VectorXd& y) {
    if (y.size() != fc.fitted.size()) throw std::invalid_argument("sigma2_naive: length mismatch");
    return (y - fc.fitted).squaredNorm() / static_cast<double>(y.size());
}

}
