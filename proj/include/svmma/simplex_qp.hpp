#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "svmma/errors.hpp"

namespace svmma {

// Exact Euclidean projection onto the probability simplex
// {w : w_i >= 0, sum w_i = 1}, by the sort-and-threshold rule.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index m = v.size();
    if (m == 0) throw std::invalid_argument("project_to_simplex: empty vector");
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double tau = 0.0;
    int rho = 0;
    for (int j = 0; j < static_cast<int>(m); ++j) {
        running += u[static_cast<std::size_t>(j)];
        const double t = (running - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) {
            rho = j + 1;
            tau = t;
        }
    }
    (void)rho;
    return (v.array() - tau).max(0.0);
}

namespace qp_detail {

struct KktSolve {
    Eigen::VectorXd w_support;
    double lambda = 0.0;
    bool ok = false;
};

// Equality-constrained solve on a fixed support S:
//   2 H_SS w_S - lambda * 1 = 2 b_S,  1' w_S = 1.
// A complete orthogonal decomposition with a 1e-10 rank cutoff gives the
// minimum-norm solution when H_SS is singular (duplicate candidates), which
// fixes the representative point on a flat optimal face.
inline KktSolve solve_on_support(const Eigen::MatrixXd& H, const Eigen::VectorXd& b,
                                 const std::vector<int>& support) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd kkt(k + 1, k + 1);
    Eigen::VectorXd rhs(k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index c = 0; c < k; ++c)
            kkt(a, c) = 2.0 * H(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(c)]);
        kkt(a, k) = -1.0;
        kkt(k, a) = 1.0;
        rhs[a] = 2.0 * b[support[static_cast<std::size_t>(a)]];
    }
    kkt(k, k) = 0.0;
    rhs[k] = 1.0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    cod.setThreshold(1e-10);
    const Eigen::VectorXd sol = cod.solve(rhs);
    KktSolve out;
    if (!sol.allFinite()) return out;
    // Reject pseudo-inverse artifacts from an inconsistent system.
    const double residual = (kkt * sol - rhs).lpNorm<Eigen::Infinity>();
    const double res_scale =
        kkt.cwiseAbs().maxCoeff() * sol.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
    if (residual > 1e-9 * std::max(1.0, res_scale)) return out;
    out.w_support = sol.head(k);
    out.lambda = sol[k];
    out.ok = true;
    return out;
}

}  // namespace qp_detail

// Minimizes f(w) = w' H w - 2 b' w over the probability simplex.
//
// Accelerated projected gradient locates the active face; an active-set
// polish then solves the KKT system exactly on the support and verifies dual
// feasibility. The convergence certificate is the Frank-Wolfe gap
// g(w)'w - min_i g_i(w) with g = 2(Hw - b), which bounds f(w) - f* from
// above for convex f.
inline Eigen::VectorXd simplex_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& b, double tol) {
    const Eigen::Index m = H.rows();
    if (m == 0 || H.cols() != m || b.size() != m)
        throw std::invalid_argument("simplex_qp: dimension mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("simplex_qp: tol must be positive");
    if (!H.allFinite() || !b.allFinite()) throw NonFiniteInput("simplex_qp: non-finite input");
    const double scale = std::max(1.0, std::max(H.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw std::invalid_argument("simplex_qp: H is not symmetric");
    if (m == 1) return Eigen::VectorXd::Ones(1);

    const Eigen::MatrixXd Hs = 0.5 * (H + H.transpose());
    const auto grad = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
        return 2.0 * (Hs * w - b);
    };
    const auto objective = [&](const Eigen::VectorXd& w) { return w.dot(Hs * w) - 2.0 * b.dot(w); };
    const auto fw_gap = [&](const Eigen::VectorXd& w) {
        const Eigen::VectorXd g = grad(w);
        return g.dot(w) - g.minCoeff();
    };

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs, Eigen::EigenvaluesOnly);
    const double lam_max = es.eigenvalues().maxCoeff();
    if (!(lam_max > 0.0)) {
        // Essentially linear objective: optimum at the vertex with largest b.
        Eigen::Index best = 0;
        b.maxCoeff(&best);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
        w[best] = 1.0;
        return w;
    }
    const double step = 1.0 / (2.0 * lam_max);

    // Active-set polish from a candidate support. Returns an optimal point
    // when the dual check passes at tolerance `tol`.
    const auto polish = [&](const Eigen::VectorXd& start) -> std::pair<bool, Eigen::VectorXd> {
        std::set<int> support;
        const double thresh = 1e-10;
        for (Eigen::Index i = 0; i < m; ++i)
            if (start[i] > thresh) support.insert(static_cast<int>(i));
        if (support.empty()) support.insert(0);
        const int max_outer = 3 * static_cast<int>(m) + 20;
        for (int outer = 0; outer < max_outer; ++outer) {
            std::vector<int> sv(support.begin(), support.end());
            auto sol = qp_detail::solve_on_support(Hs, b, sv);
            // Drop negative coordinates one at a time (most negative first).
            while (sol.ok && sv.size() > 1) {
                Eigen::Index worst = -1;
                double worst_val = -1e-12;
                for (Eigen::Index a = 0; a < sol.w_support.size(); ++a) {
                    if (sol.w_support[a] < worst_val) {
                        worst_val = sol.w_support[a];
                        worst = a;
                    }
                }
                if (worst < 0) break;
                support.erase(sv[static_cast<std::size_t>(worst)]);
                sv.erase(sv.begin() + worst);
                sol = qp_detail::solve_on_support(Hs, b, sv);
            }
            if (!sol.ok) return {false, start};
            Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
            for (std::size_t a = 0; a < sv.size(); ++a)
                w[sv[a]] = std::max(sol.w_support[static_cast<Eigen::Index>(a)], 0.0);
            const double total = w.sum();
            if (!(total > 0.0)) return {false, start};
            w /= total;
            // Dual feasibility: no coordinate outside the support may have a
            // gradient below lambda.
            const Eigen::VectorXd g = grad(w);
            Eigen::Index entering = -1;
            double worst_violation = tol;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double violation = sol.lambda - g[i];
                if (violation > worst_violation) {
                    worst_violation = violation;
                    entering = i;
                }
            }
            if (entering < 0) return {true, w};
            support.insert(static_cast<int>(entering));
        }
        return {false, start};
    };

    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    Eigen::VectorXd v = w;
    double t = 1.0;
    double f_prev = objective(w);
    const long max_iter = 100000;
    long iter = 0;
    double gap = fw_gap(w);
    const long polish_every = 100;
    while (iter < max_iter) {
        if (gap <= tol) return w;
        if (iter % polish_every == 0) {
            const auto [ok, candidate] = polish(w);
            if (ok) return candidate;
            if (objective(candidate) < f_prev) {
                w = candidate;
                v = w;
                t = 1.0;
                f_prev = objective(w);
            }
        }
        const Eigen::VectorXd w_next = project_to_simplex(v - step * grad(v));
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = w_next + ((t - 1.0) / t_next) * (w_next - w);
        const double f_next = objective(w_next);
        if (f_next > f_prev) {
            // Momentum restart keeps the iteration monotone enough.
            v = w_next;
            t = 1.0;
        } else {
            t = t_next;
        }
        w = w_next;
        f_prev = f_next;
        gap = fw_gap(w);
        ++iter;
    }
    const auto [ok, candidate] = polish(w);
    if (ok) return candidate;
    std::ostringstream msg;
    msg << "simplex_qp: no convergence after " << max_iter << " iterations, KKT residual " << gap;
    throw NoConvergence(msg.str(), gap);
}

}
