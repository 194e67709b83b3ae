#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace svmma {

enum class KernelKind {
    gaussian,  // K(r) = (2*pi)^-1 * exp(-r^2/2); the constant makes the induced
               // bivariate radial kernel integrate to 1 for q = 2
    bisquare,  // K(r) = (1 - r^2)^2 on [0,1], 0 outside (normalization dropped;
               // hat matrices are invariant to kernel scale)
};

inline const char* kernel_name(KernelKind k) {
    return k == KernelKind::gaussian ? "gaussian" : "bisquare";
}

inline KernelKind kernel_from_name(const std::string& name) {
    if (name == "gaussian") return KernelKind::gaussian;
    if (name == "bisquare") return KernelKind::bisquare;
    throw std::invalid_argument("unknown kernel: " + name);
}

struct DistanceSpec {
    double q = 2.0;  // L_q norm order, q >= 1
};

// L_q distance between two planar points.
inline double distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double q) {
    if (!(q >= 1.0)) throw std::invalid_argument("distance: norm order q must be >= 1");
    const double dx = std::abs(a.x() - b.x());
    const double dy = std::abs(a.y() - b.y());
    if (q == 2.0) return std::sqrt(dx * dx + dy * dy);
    if (q == 1.0) return dx + dy;
    return std::pow(std::pow(dx, q) + std::pow(dy, q), 1.0 / q);
}

inline double kernel_eval(KernelKind kind, double r) {
    switch (kind) {
        case KernelKind::gaussian:
            return std::exp(-0.5 * r * r) / (2.0 * M_PI);
        case KernelKind::bisquare: {
            if (r > 1.0) return 0.0;
            const double t = 1.0 - r * r;
            return t * t;
        }
    }
    return 0.0;
}

// K_h(d) = K(d/h) / h^2.
inline double scaled_kernel(KernelKind kind, double h, double d) {
    if (!(h > 0.0)) throw std::invalid_argument("scaled_kernel: bandwidth must be positive");
    return kernel_eval(kind, d / h) / (h * h);
}

// Diagonal of the spatial weight matrix at target location s:
// entry i = K_h(||s_i - s||_q).
inline Eigen::VectorXd weight_diagonal(const Eigen::MatrixXd& locations, const Eigen::Vector2d& s,
                                       KernelKind kind, double h, double q) {
    if (!(h > 0.0)) throw std::invalid_argument("weight_diagonal: bandwidth must be positive");
    const Eigen::Index n = locations.rows();
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = scaled_kernel(kind, h, distance(locations.row(i).transpose(), s, q));
    }
    return w;
}

// Cached pairwise L_q distances; worth it when the bandwidth search re-visits
// the same point pairs for every grid value.
struct DistanceMatrix {
    Eigen::MatrixXd d;

    static DistanceMatrix compute(const Eigen::MatrixXd& locations, double q) {
        const Eigen::Index n = locations.rows();
        DistanceMatrix out;
        out.d.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            out.d(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double dij = distance(locations.row(i).transpose(), locations.row(j).transpose(), q);
                out.d(i, j) = dij;
                out.d(j, i) = dij;
            }
        }
        return out;
    }

    double max() const { return d.size() == 0 ? 0.0 : d.maxCoeff(); }
};

// Maximum pairwise L_q distance of a location set.
inline double data_extent(const Eigen::MatrixXd& locations, double q) {
    const Eigen::Index n = locations.rows();
    double extent = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            extent = std::max(extent, distance(locations.row(i).transpose(), locations.row(j).transpose(), q));
        }
    }
    return extent;
}

}
