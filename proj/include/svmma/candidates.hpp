#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "svmma/kernels.hpp"

namespace svmma {

// One candidate model: a covariate column subset fitted as a spatially
// varying coefficient model with its own kernel, distance order and
// bandwidth. Column indices are zero-based into the dataset covariate matrix.
struct CandidateModel {
    std::vector<int> column_indices;
    KernelKind kernel = KernelKind::gaussian;
    double q = 2.0;
    std::optional<double> bandwidth;

    int p_m() const { return static_cast<int>(column_indices.size()); }

    void validate(int p_total) const {
        if (column_indices.empty()) throw std::invalid_argument("CandidateModel: empty column set");
        std::vector<int> sorted = column_indices;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("CandidateModel: duplicate column index");
        if (sorted.front() < 0 || sorted.back() >= p_total)
            throw std::invalid_argument("CandidateModel: column index out of range");
        if (!(q >= 1.0)) throw std::invalid_argument("CandidateModel: q must be >= 1");
        if (bandwidth && !(*bandwidth > 0.0))
            throw std::invalid_argument("CandidateModel: bandwidth must be positive");
    }
};

struct CandidateSet {
    std::vector<CandidateModel> models;
    // Simulation-only flags: model m contains the true active set.
    std::optional<std::vector<bool>> quasi_correct;

    std::size_t size() const { return models.size(); }
};

// Candidate count rule M = floor(3 * n^(1/3)), evaluated so floating cube
// roots cannot shift the floor: M is the largest integer with M^3 <= 27n.
inline int nested_count_rule(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("nested_count_rule: n must be >= 1");
    const std::int64_t bound = 27 * n;
    auto m = static_cast<std::int64_t>(std::cbrt(static_cast<double>(bound)));
    while ((m + 1) * (m + 1) * (m + 1) <= bound) ++m;
    while (m > 1 && m * m * m > bound) --m;
    return static_cast<int>(m);
}

// Nested candidates: model m uses the first m covariate columns.
inline CandidateSet nested_set(int p_total, int count, KernelKind kernel, double q) {
    if (count < 1) throw std::invalid_argument("nested_set: count must be >= 1");
    if (count > p_total) throw std::invalid_argument("nested_set: count exceeds covariate count");
    CandidateSet cs;
    cs.models.reserve(static_cast<std::size_t>(count));
    for (int m = 1; m <= count; ++m) {
        CandidateModel cm;
        cm.kernel = kernel;
        cm.q = q;
        for (int j = 0; j < m; ++j) cm.column_indices.push_back(j);
        cs.models.push_back(std::move(cm));
    }
    return cs;
}

// All 2^p - 1 nonempty subsets of columns {0..p-1}, ordered by subset size
// then lexicographically; the fixed order keeps weight indices stable across
// runs.
inline CandidateSet all_subsets(int p, KernelKind kernel, double q) {
    if (p < 1 || p > 20) throw std::invalid_argument("all_subsets: p must be in [1, 20]");
    std::vector<std::vector<int>> subsets;
    subsets.reserve((std::size_t{1} << p) - 1);
    for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << p); ++mask) {
        std::vector<int> idx;
        for (int j = 0; j < p; ++j)
            if (mask & (std::uint32_t{1} << j)) idx.push_back(j);
        subsets.push_back(std::move(idx));
    }
    std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    CandidateSet cs;
    cs.models.reserve(subsets.size());
    for (auto& idx : subsets) {
        CandidateModel cm;
        cm.kernel = kernel;
        cm.q = q;
        cm.column_indices = std::move(idx);
        cs.models.push_back(std::move(cm));
    }
    return cs;
}

// Shifts every column index by `offset` and prepends the given fixed columns
// to each model. Used to put an always-included intercept (dataset column 0)
// in front of subsets enumerated over the explanatory columns.
inline CandidateSet with_fixed_columns(const CandidateSet& cs, const std::vector<int>& fixed, int offset) {
    CandidateSet out;
    out.models.reserve(cs.models.size());
    out.quasi_correct = cs.quasi_correct;
    for (const auto& cm : cs.models) {
        CandidateModel shifted = cm;
        shifted.column_indices.clear();
        shifted.column_indices.insert(shifted.column_indices.end(), fixed.begin(), fixed.end());
        for (const int j : cm.column_indices) shifted.column_indices.push_back(j + offset);
        out.models.push_back(std::move(shifted));
    }
    return out;
}

// Flag m is true iff true_support is contained in model m's column set.
inline std::vector<bool> quasi_correct_flags(const CandidateSet& cs, const std::vector<int>& true_support) {
    std::vector<bool> flags;
    flags.reserve(cs.models.size());
    for (const auto& cm : cs.models) {
        bool ok = true;
        for (const int k : true_support) {
            if (std::find(cm.column_indices.begin(), cm.column_indices.end(), k) == cm.column_indices.end()) {
                ok = false;
                break;
            }
        }
        flags.push_back(ok);
    }
    return flags;
}

}
