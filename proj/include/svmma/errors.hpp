#pragma once

#include <stdexcept>
#include <string>

namespace svmma {

// Base class for failures that are data-dependent rather than caller bugs.
// Plain precondition violations throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class CsvError : public Error {
public:
    using Error::Error;
};

// A local weighted least-squares system was rank deficient: fewer than p_m
// effectively weighted points, or collinear local design.
class SingularLocalFit : public Error {
public:
    SingularLocalFit(const std::string& msg, double s1, double s2, double bandwidth, int support_count)
        : Error(msg), s1(s1), s2(s2), bandwidth(bandwidth), support_count(support_count) {}
    double s1, s2;
    double bandwidth;
    int support_count;
};

// Every bandwidth in the search grid produced a singular leave-one-out fit.
class NoValidBandwidth : public Error {
public:
    using Error::Error;
};

// tr(P) >= n, leaving no residual degrees of freedom for the variance plug-in.
class DegenerateDof : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& msg, double kkt_residual)
        : Error(msg), kkt_residual(kkt_residual) {}
    double kkt_residual;
};

class NonFiniteInput : public Error {
public:
    using Error::Error;
};

}
