#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "svmma/averaging.hpp"
#include "svmma/candidates.hpp"
#include "svmma/dataset.hpp"
#include "svmma/errors.hpp"
#include "svmma/gwr.hpp"
#include "svmma/linear_baselines.hpp"
#include "svmma/parallel.hpp"
#include "svmma/rng.hpp"

namespace svmma {

enum class ErrorCase { case_i, case_ii, case_iii };

inline const char* error_case_name(ErrorCase c) {
    switch (c) {
        case ErrorCase::case_i: return "i";
        case ErrorCase::case_ii: return "ii";
        case ErrorCase::case_iii: return "iii";
    }
    return "i";
}

inline ErrorCase error_case_from_name(const std::string& s) {
    if (s == "i") return ErrorCase::case_i;
    if (s == "ii") return ErrorCase::case_ii;
    if (s == "iii") return ErrorCase::case_iii;
    throw std::invalid_argument("unknown error case: " + s);
}

enum class Method {
    svmma_known_sigma,
    svmma_plugin,
    saic,
    sbic,
    aic,
    bic,
    aicc,
    mma,
    jma,
    oracle_svcma,
    oracle_linear,
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::svmma_known_sigma: return "svmma_known_sigma";
        case Method::svmma_plugin: return "svmma_plugin";
        case Method::saic: return "saic";
        case Method::sbic: return "sbic";
        case Method::aic: return "aic";
        case Method::bic: return "bic";
        case Method::aicc: return "aicc";
        case Method::mma: return "mma";
        case Method::jma: return "jma";
        case Method::oracle_svcma: return "oracle_svcma";
        case Method::oracle_linear: return "oracle_linear";
    }
    return "?";
}

inline Method method_from_name(const std::string& s) {
    for (const Method m : {Method::svmma_known_sigma, Method::svmma_plugin, Method::saic, Method::sbic,
                           Method::aic, Method::bic, Method::aicc, Method::mma, Method::jma,
                           Method::oracle_svcma, Method::oracle_linear}) {
        if (s == method_name(m)) return m;
    }
    throw std::invalid_argument("unknown method: " + s);
}

inline bool is_linear_method(Method m) {
    return m == Method::mma || m == Method::jma || m == Method::oracle_linear;
}

inline bool is_weight_method(Method m) {
    return m == Method::svmma_known_sigma || m == Method::svmma_plugin || m == Method::saic ||
           m == Method::sbic || m == Method::oracle_svcma;
}

struct DesignConfig {
    int design = 1;  // 1: linear truth, 2: spatial factor, 3: all-subsets with quasi-correct models
    Eigen::Index n = 100;
    double alpha = 0.5;  // coefficient decay, designs 1-2
    double r2 = 0.5;
    ErrorCase error_case = ErrorCase::case_i;
    std::uint64_t seed = 1;
    int replications = 200;
    KernelKind kernel = KernelKind::gaussian;
    double q = 2.0;
    int grid_points = 30;
    double grid_lo = 0.05;
    double grid_hi = 2.0;

    void validate() const {
        if (design < 1 || design > 3) throw std::invalid_argument("DesignConfig: design must be 1, 2 or 3");
        if (n < 4) throw std::invalid_argument("DesignConfig: n too small");
        if (!(alpha > 0.0)) throw std::invalid_argument("DesignConfig: alpha must be positive");
        if (!(r2 > 0.0 && r2 < 1.0)) throw std::invalid_argument("DesignConfig: r2 must be in (0,1)");
        if (replications < 1) throw std::invalid_argument("DesignConfig: replications must be >= 1");
        if (!(q >= 1.0)) throw std::invalid_argument("DesignConfig: q must be >= 1");
        if (grid_points < 1) throw std::invalid_argument("DesignConfig: grid_points must be >= 1");
        if (!(grid_lo > 0.0) || !(grid_hi >= grid_lo))
            throw std::invalid_argument("DesignConfig: need 0 < grid_lo <= grid_hi");
    }
};

struct GeneratedSample {
    SpatialDataset dataset;
    Eigen::VectorXd mu;         // true conditional mean
    double c = 0.0;             // calibrated noise scale
    double sigma2_true = 0.0;   // variance of c * epsilon
    std::vector<int> true_support;  // nonzero-coefficient columns (design 3)
};

// theta_1 = 10^(-alpha-1/2), theta_j = j^(-alpha-1/2) for j >= 2.
inline Eigen::VectorXd theta_sequence(double alpha, Eigen::Index count) {
    if (count < 1) throw std::invalid_argument("theta_sequence: count must be >= 1");
    Eigen::VectorXd theta(count);
    theta[0] = std::pow(10.0, -alpha - 0.5);
    for (Eigen::Index j = 2; j <= count; ++j)
        theta[j - 1] = std::pow(static_cast<double>(j), -alpha - 0.5);
    return theta;
}

// F(s) = 1 - (1 - 2 s1)^2 - (1 - 2 s2)^2.
inline double spatial_surface(const Eigen::Vector2d& s) {
    const double a = 1.0 - 2.0 * s.x();
    const double b = 1.0 - 2.0 * s.y();
    return 1.0 - a * a - b * b;
}

// Error draws plus the population variance of one draw:
// case i: N(0,1); case ii: t(5), variance 5/3; case iii: sqrt(0.2 + 0.5 x2^2) * N(0,1),
// variance 0.7 when x2 is standard normal.
inline std::pair<Eigen::VectorXd, double> draw_errors(ErrorCase ec, Eigen::Index n,
                                                      const Eigen::VectorXd& x2_column, Rng& rng) {
    Eigen::VectorXd eps(n);
    switch (ec) {
        case ErrorCase::case_i:
            for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
            return {std::move(eps), 1.0};
        case ErrorCase::case_ii:
            for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.student_t(5);
            return {std::move(eps), 5.0 / 3.0};
        case ErrorCase::case_iii: {
            if (x2_column.size() != n)
                throw std::invalid_argument("draw_errors: case iii needs the x2 column");
            for (Eigen::Index i = 0; i < n; ++i) {
                const double a = 0.2 + 0.5 * x2_column[i] * x2_column[i];
                eps[i] = std::sqrt(a) * rng.normal();
            }
            return {std::move(eps), 0.7};
        }
    }
    throw std::invalid_argument("draw_errors: bad case");
}

// Noise scale making the realized coefficient of determination exact:
// R2 = var(mu) / (var(mu) + c^2 var_eps) with the sample variance of mu.
inline double calibrate_c(const Eigen::VectorXd& mu, double var_epsilon, double r2) {
    if (!(r2 > 0.0 && r2 < 1.0)) throw std::invalid_argument("calibrate_c: r2 must be in (0,1)");
    if (!(var_epsilon > 0.0)) throw std::invalid_argument("calibrate_c: var_epsilon must be positive");
    if (mu.size() < 2) throw std::invalid_argument("calibrate_c: need at least two observations");
    const double mean = mu.mean();
    const double var_mu = (mu.array() - mean).square().sum() / static_cast<double>(mu.size() - 1);
    if (!(var_mu > 0.0)) throw std::invalid_argument("calibrate_c: degenerate mu (zero variance)");
    return std::sqrt(var_mu * (1.0 - r2) / (r2 * var_epsilon));
}

namespace detail {

// First n points of the smallest unit-square grid with g^2 >= n; the exact
// paper grid when n is a perfect square.
inline Eigen::MatrixXd covering_grid(Eigen::Index n) {
    auto g = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (g * g < n) ++g;
    const Eigen::MatrixXd full = unit_square_grid(g * g);
    return full.topRows(n);
}

}  // namespace detail

// Draws one replication of the configured design. Replication r uses the
// derived seed config.seed + r, so parallel and serial runs agree.
inline GeneratedSample generate(const DesignConfig& config, int replication) {
    config.validate();
    Rng rng(config.seed + static_cast<std::uint64_t>(replication));
    const Eigen::Index n = config.n;
    GeneratedSample gs;
    gs.dataset.locations = detail::covering_grid(n);

    if (config.design == 1 || config.design == 2) {
        const int M = nested_count_rule(n);
        const Eigen::Index J = M + 200;
        const Eigen::VectorXd theta = theta_sequence(config.alpha, J);
        Eigen::MatrixXd X(n, J);
        for (Eigen::Index i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            for (Eigen::Index j = 1; j < J; ++j) X(i, j) = rng.normal();
        }
        Eigen::VectorXd mu = X * theta;
        if (config.design == 2) {
            for (Eigen::Index i = 0; i < n; ++i)
                mu[i] *= spatial_surface(gs.dataset.locations.row(i).transpose());
        }
        gs.dataset.covariates = std::move(X);
        gs.mu = std::move(mu);
        gs.dataset.column_names.reserve(static_cast<std::size_t>(J));
        for (Eigen::Index j = 1; j <= J; ++j) gs.dataset.column_names.push_back("x" + std::to_string(j));
    } else {
        const Eigen::Index p = 6;
        Eigen::VectorXd theta(p);
        theta << 1.0, 1.2, -1.0, 0.9, 0.0, 0.0;
        // Equicorrelated Gaussian covariates: Sigma = 0.5 I + 0.5 11'.
        Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, 0.5);
        sigma.diagonal().setOnes();
        const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd z(p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
            X.row(i) = (L * z).transpose();
        }
        gs.mu.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            gs.mu[i] = spatial_surface(gs.dataset.locations.row(i).transpose()) * theta.dot(X.row(i));
        gs.dataset.covariates = std::move(X);
        gs.true_support = {0, 1, 2, 3};
        for (Eigen::Index j = 1; j <= p; ++j) gs.dataset.column_names.push_back("x" + std::to_string(j));
    }

    auto [eps, var_eps] = draw_errors(config.error_case, n, gs.dataset.covariates.col(1), rng);
    gs.c = calibrate_c(gs.mu, var_eps, config.r2);
    gs.sigma2_true = gs.c * gs.c * var_eps;
    gs.dataset.response = gs.mu + gs.c * eps;
    gs.dataset.validate();
    return gs;
}

// Candidate set used by the design: nested first-m sets over the first M
// columns for designs 1-2, all nonempty subsets of the six columns for
// design 3 (whose generator has no intercept column).
inline CandidateSet design_candidates(const DesignConfig& config) {
    if (config.design == 3) {
        CandidateSet cs = all_subsets(6, config.kernel, config.q);
        cs.quasi_correct = quasi_correct_flags(cs, {0, 1, 2, 3});
        return cs;
    }
    const int M = nested_count_rule(config.n);
    return nested_set(M + 200, M, config.kernel, config.q);
}

// Infeasible oracle weights: minimize ||F w - mu||^2 over the simplex.
inline WeightVector oracle_weights(const Eigen::MatrixXd& fitted_columns, const Eigen::VectorXd& mu) {
    if (fitted_columns.rows() != mu.size())
        throw std::invalid_argument("oracle_weights: dimension mismatch");
    const Eigen::MatrixXd H = fitted_columns.transpose() * fitted_columns;
    const Eigen::VectorXd b = fitted_columns.transpose() * mu;
    return WeightVector::checked(simplex_qp(H, b, 1e-9 * std::max<double>(1, mu.size())));
}

// Ratio of mean squared losses (method over oracle), skipping entries where
// either side is NaN (excluded replications).
inline double relative_risk(const std::vector<double>& losses_method,
                            const std::vector<double>& losses_oracle) {
    if (losses_method.size() != losses_oracle.size())
        throw std::invalid_argument("relative_risk: length mismatch");
    double num = 0.0, den = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < losses_method.size(); ++j) {
        if (std::isnan(losses_method[j]) || std::isnan(losses_oracle[j])) continue;
        num += losses_method[j];
        den += losses_oracle[j];
        ++count;
    }
    if (count == 0 || !(den > 0.0)) throw std::invalid_argument("relative_risk: zero oracle loss");
    return num / den;
}

// MSE = (n N)^-1 sum_j loss_j over valid replications.
inline double mse_from_losses(const std::vector<double>& losses, Eigen::Index n) {
    double total = 0.0;
    std::size_t count = 0;
    for (const double loss : losses) {
        if (std::isnan(loss)) continue;
        total += loss;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("mse_from_losses: no valid replications");
    return total / (static_cast<double>(n) * static_cast<double>(count));
}

struct MethodResult {
    Method method = Method::svmma_plugin;
    std::vector<double> losses;              // squared error loss per replication; NaN if excluded
    std::vector<double> taus;                // weight on quasi-correct models; NaN if n/a
    std::vector<Eigen::VectorXd> weights;    // per-replication weights (weight methods only)

    double mean_loss() const {
        double total = 0.0;
        std::size_t count = 0;
        for (const double l : losses) {
            if (std::isnan(l)) continue;
            total += l;
            ++count;
        }
        if (count == 0) throw std::invalid_argument("mean_loss: no valid replications");
        return total / static_cast<double>(count);
    }

    double mean_tau() const {
        double total = 0.0;
        std::size_t count = 0;
        for (const double t : taus) {
            if (std::isnan(t)) continue;
            total += t;
            ++count;
        }
        if (count == 0) throw std::invalid_argument("mean_tau: no tau values");
        return total / static_cast<double>(count);
    }
};

struct RiskReport {
    DesignConfig config;
    std::vector<MethodResult> results;
    std::vector<int> excluded_replications;
    std::vector<std::string> exclusion_reasons;
    std::vector<double> sigma2_plugin;  // per replication, NaN if excluded or not computed
    double elapsed_seconds = 0.0;

    const MethodResult& result(Method m) const {
        for (const auto& r : results)
            if (r.method == m) return r;
        throw std::invalid_argument(std::string("RiskReport: method not present: ") + method_name(m));
    }
    bool has(Method m) const {
        for (const auto& r : results)
            if (r.method == m) return true;
        return false;
    }
};

namespace detail {

struct ReplicationOutcome {
    bool ok = false;
    std::string reason;
    std::vector<double> losses;
    std::vector<double> taus;
    std::vector<Eigen::VectorXd> weights;
    double sigma2_plugin = std::numeric_limits<double>::quiet_NaN();
};

inline ReplicationOutcome run_one_replication(const DesignConfig& config, int replication,
                                              const std::vector<Method>& methods) {
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    ReplicationOutcome out;
    out.losses.assign(methods.size(), nan);
    out.taus.assign(methods.size(), nan);
    out.weights.resize(methods.size());

    bool needs_svcm = false, needs_linear = false;
    for (const Method m : methods) (is_linear_method(m) ? needs_linear : needs_svcm) = true;

    try {
        GeneratedSample gs = generate(config, replication);
        auto ds = std::make_shared<const SpatialDataset>(std::move(gs.dataset));
        CandidateSet cs = design_candidates(config);
        const auto M = static_cast<Eigen::Index>(cs.models.size());

        const auto record = [&](Method m, double loss, double tau, const Eigen::VectorXd* w) {
            for (std::size_t k = 0; k < methods.size(); ++k) {
                if (methods[k] != m) continue;
                out.losses[k] = loss;
                out.taus[k] = tau;
                if (w) out.weights[k] = *w;
            }
        };
        const auto has = [&](Method m) {
            return std::find(methods.begin(), methods.end(), m) != methods.end();
        };
        const auto tau_of = [&](const WeightVector& w) {
            return cs.quasi_correct ? tau_sum(w, *cs.quasi_correct) : nan;
        };

        if (needs_svcm) {
            const std::vector<double> grid =
                default_bandwidth_grid(*ds, config.q, config.grid_points, config.grid_lo, config.grid_hi);
            select_bandwidths(*ds, cs, grid);
            std::vector<FittedCandidate> fits;
            fits.reserve(cs.models.size());
            for (const auto& cm : cs.models) fits.push_back(fit_candidate(ds, cm, false));
            Eigen::MatrixXd F(ds->n(), M);
            for (Eigen::Index m = 0; m < M; ++m) F.col(m) = fits[static_cast<std::size_t>(m)].fitted;
            const auto loss_of = [&](const Eigen::VectorXd& mu_hat) {
                return (mu_hat - gs.mu).squaredNorm();
            };

            if (has(Method::oracle_svcma)) {
                const WeightVector w = oracle_weights(F, gs.mu);
                record(Method::oracle_svcma, loss_of(F * w.w), tau_of(w), &w.w);
            }
            if (has(Method::svmma_known_sigma)) {
                const WeightVector w = solve_weights(make_problem(fits, ds->response, gs.sigma2_true));
                record(Method::svmma_known_sigma, loss_of(F * w.w), tau_of(w), &w.w);
            }
            if (has(Method::svmma_plugin)) {
                const MallowsProblem mp = feasible_problem(*ds, fits);
                out.sigma2_plugin = mp.sigma2;
                const WeightVector w = solve_weights(mp);
                record(Method::svmma_plugin, loss_of(F * w.w), tau_of(w), &w.w);
            }
            if (has(Method::saic) || has(Method::sbic) || has(Method::aic) || has(Method::bic) ||
                has(Method::aicc)) {
                std::vector<double> aic_scores, bic_scores, aicc_scores;
                for (const auto& fc : fits) {
                    const InfoCriteria ic = info_criteria(fc);
                    aic_scores.push_back(ic.aic);
                    bic_scores.push_back(ic.bic);
                    aicc_scores.push_back(ic.aicc);
                }
                if (has(Method::aic))
                    record(Method::aic, loss_of(F.col(static_cast<Eigen::Index>(select_minimum(aic_scores)))),
                           nan, nullptr);
                if (has(Method::bic))
                    record(Method::bic, loss_of(F.col(static_cast<Eigen::Index>(select_minimum(bic_scores)))),
                           nan, nullptr);
                if (has(Method::aicc))
                    record(Method::aicc,
                           loss_of(F.col(static_cast<Eigen::Index>(select_minimum(aicc_scores)))), nan,
                           nullptr);
                if (has(Method::saic)) {
                    const WeightVector w = smoothed_weights(aic_scores);
                    record(Method::saic, loss_of(F * w.w), tau_of(w), &w.w);
                }
                if (has(Method::sbic)) {
                    const WeightVector w = smoothed_weights(bic_scores);
                    record(Method::sbic, loss_of(F * w.w), tau_of(w), &w.w);
                }
            }
        }

        if (needs_linear) {
            std::vector<LinearFit> lfits;
            lfits.reserve(cs.models.size());
            for (const auto& cm : cs.models) lfits.push_back(ols_fit(*ds, cm));
            Eigen::MatrixXd Fl(ds->n(), M);
            for (Eigen::Index m = 0; m < M; ++m) Fl.col(m) = lfits[static_cast<std::size_t>(m)].fitted;
            const auto loss_of = [&](const Eigen::VectorXd& mu_hat) {
                return (mu_hat - gs.mu).squaredNorm();
            };
            if (has(Method::oracle_linear)) {
                const WeightVector w = oracle_weights(Fl, gs.mu);
                record(Method::oracle_linear, loss_of(Fl * w.w), tau_of(w), &w.w);
            }
            if (has(Method::mma)) {
                const WeightVector w = mma_weights(lfits, ds->response);
                record(Method::mma, loss_of(Fl * w.w), tau_of(w), &w.w);
            }
            if (has(Method::jma)) {
                const WeightVector w = jma_weights(lfits, ds->response);
                record(Method::jma, loss_of(Fl * w.w), tau_of(w), &w.w);
            }
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.reason = e.what();
        const auto nan2 = std::numeric_limits<double>::quiet_NaN();
        out.losses.assign(methods.size(), nan2);
        out.taus.assign(methods.size(), nan2);
        out.weights.assign(methods.size(), Eigen::VectorXd());
        out.sigma2_plugin = nan2;
    }
    return out;
}

}  // namespace detail

// Runs the configured number of replications. Replication j derives its seed
// as config.seed + j and writes into slot j, so reports are identical for
// any thread count and rerunning a config reproduces the report exactly.
inline RiskReport run_replications(const DesignConfig& config, const std::vector<Method>& methods,
                                   unsigned threads = 1) {
    config.validate();
    if (methods.empty()) throw std::invalid_argument("run_replications: no methods requested");
    const auto start = std::chrono::steady_clock::now();
    const auto N = static_cast<std::size_t>(config.replications);

    std::vector<detail::ReplicationOutcome> slots(N);
    parallel_for(N, threads, [&](std::size_t j) {
        slots[j] = detail::run_one_replication(config, static_cast<int>(j), methods);
    });

    RiskReport report;
    report.config = config;
    report.results.resize(methods.size());
    report.sigma2_plugin.assign(N, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < methods.size(); ++k) {
        report.results[k].method = methods[k];
        report.results[k].losses.resize(N);
        report.results[k].taus.resize(N);
        report.results[k].weights.resize(N);
    }
    for (std::size_t j = 0; j < N; ++j) {
        const auto& slot = slots[j];
        if (!slot.ok) {
            report.excluded_replications.push_back(static_cast<int>(j));
            report.exclusion_reasons.push_back(slot.reason);
        }
        report.sigma2_plugin[j] = slot.sigma2_plugin;
        for (std::size_t k = 0; k < methods.size(); ++k) {
            report.results[k].losses[j] = slot.losses[k];
            report.results[k].taus[j] = slot.taus[k];
            report.results[k].weights[j] = slot.weights[k];
        }
    }
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}
