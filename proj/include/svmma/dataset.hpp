#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "svmma/errors.hpp"
#include "svmma/rng.hpp"

namespace svmma {

// n spatial observations: 2-D locations, covariate matrix, response.
// Values are immutable after construction; operations return new datasets.
struct SpatialDataset {
    Eigen::MatrixXd locations;              // n x 2
    Eigen::MatrixXd covariates;             // n x p
    Eigen::VectorXd response;               // n
    std::vector<std::string> column_names;  // p labels

    Eigen::Index n() const { return covariates.rows(); }
    Eigen::Index p() const { return covariates.cols(); }

    // True when column 0 is identically 1 (the intercept convention used by
    // CSV ingestion and the nested simulation designs; the all-subsets design
    // generates covariates with no constant column).
    bool has_intercept_column() const {
        if (covariates.cols() == 0 || covariates.rows() == 0) return false;
        return (covariates.col(0).array() == 1.0).all();
    }

    void validate() const {
        if (n() < 1 || p() < 1) throw std::invalid_argument("SpatialDataset: need n >= 1 and p >= 1");
        if (locations.rows() != n() || locations.cols() != 2)
            throw std::invalid_argument("SpatialDataset: locations must be n x 2");
        if (response.size() != n())
            throw std::invalid_argument("SpatialDataset: response length must equal n");
        if (static_cast<Eigen::Index>(column_names.size()) != p())
            throw std::invalid_argument("SpatialDataset: column_names length must equal p");
        if (!locations.allFinite() || !covariates.allFinite() || !response.allFinite())
            throw std::invalid_argument("SpatialDataset: non-finite entries");
    }

    SpatialDataset rows(const std::vector<Eigen::Index>& idx) const {
        SpatialDataset out;
        out.locations.resize(static_cast<Eigen::Index>(idx.size()), 2);
        out.covariates.resize(static_cast<Eigen::Index>(idx.size()), p());
        out.response.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.locations.row(static_cast<Eigen::Index>(k)) = locations.row(idx[k]);
            out.covariates.row(static_cast<Eigen::Index>(k)) = covariates.row(idx[k]);
            out.response[static_cast<Eigen::Index>(k)] = response[idx[k]];
        }
        out.column_names = column_names;
        return out;
    }
};

enum class ColumnTransform { identity, natural_log, square_root, standardize };

inline const char* transform_name(ColumnTransform t) {
    switch (t) {
        case ColumnTransform::identity: return "identity";
        case ColumnTransform::natural_log: return "log";
        case ColumnTransform::square_root: return "sqrt";
        case ColumnTransform::standardize: return "standardize";
    }
    return "identity";
}

inline ColumnTransform transform_from_name(const std::string& name) {
    if (name == "identity" || name == "id" || name.empty()) return ColumnTransform::identity;
    if (name == "log" || name == "natural_log" || name == "ln") return ColumnTransform::natural_log;
    if (name == "sqrt" || name == "square_root") return ColumnTransform::square_root;
    if (name == "standardize" || name == "std") return ColumnTransform::standardize;
    throw std::invalid_argument("unknown transform: " + name);
}

// Per-column transform actions. `covariates` must have one entry per covariate
// column; the response gets its own slot since empirical workflows transform
// the dependent variable as well.
struct TransformSpec {
    std::vector<ColumnTransform> covariates;
    ColumnTransform response = ColumnTransform::identity;

    static TransformSpec identity_for(Eigen::Index p) {
        TransformSpec spec;
        spec.covariates.assign(static_cast<std::size_t>(p), ColumnTransform::identity);
        return spec;
    }
};

namespace detail {

inline Eigen::VectorXd transform_column(const Eigen::VectorXd& col, ColumnTransform action,
                                        const std::string& label) {
    switch (action) {
        case ColumnTransform::identity:
            return col;
        case ColumnTransform::natural_log:
            if ((col.array() <= 0.0).any())
                throw std::invalid_argument("transform: log of nonpositive value in column " + label);
            return col.array().log().matrix();
        case ColumnTransform::square_root:
            if ((col.array() < 0.0).any())
                throw std::invalid_argument("transform: sqrt of negative value in column " + label);
            return col.array().sqrt().matrix();
        case ColumnTransform::standardize: {
            const Eigen::Index n = col.size();
            if (n < 2) throw std::invalid_argument("transform: standardize needs n >= 2 in column " + label);
            const double mean = col.mean();
            const double ss = (col.array() - mean).square().sum();
            const double sd = std::sqrt(ss / static_cast<double>(n - 1));
            if (sd == 0.0)
                throw std::invalid_argument("transform: standardize of constant column " + label);
            return ((col.array() - mean) / sd).matrix();
        }
    }
    return col;
}

}  // namespace detail

// Applies per-column transforms, returning a new dataset. The intercept
// column, when present, must be mapped to identity.
inline SpatialDataset apply_transforms(const SpatialDataset& ds, const TransformSpec& spec) {
    if (static_cast<Eigen::Index>(spec.covariates.size()) != ds.p())
        throw std::invalid_argument("apply_transforms: spec length does not match covariate count");
    if (ds.has_intercept_column() && spec.covariates[0] != ColumnTransform::identity)
        throw std::invalid_argument("apply_transforms: intercept column must map to identity");
    SpatialDataset out = ds;
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
        out.covariates.col(j) = detail::transform_column(
            ds.covariates.col(j), spec.covariates[static_cast<std::size_t>(j)], ds.column_names[static_cast<std::size_t>(j)]);
    }
    out.response = detail::transform_column(ds.response, spec.response, "<response>");
    return out;
}

// Seeded train/test split: n0 rows drawn uniformly without replacement; both
// halves keep the original row order. Same seed, same partition.
inline std::pair<SpatialDataset, SpatialDataset> split_train_test(const SpatialDataset& ds,
                                                                  Eigen::Index n0,
                                                                  std::uint64_t seed) {
    const Eigen::Index n = ds.n();
    if (n0 < 1 || n0 >= n) throw std::invalid_argument("split_train_test: need 1 <= n0 < n");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < n0; ++i) {
        const auto j = i + static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<Eigen::Index> train_idx(idx.begin(), idx.begin() + n0);
    std::vector<Eigen::Index> test_idx(idx.begin() + n0, idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {ds.rows(train_idx), ds.rows(test_idx)};
}

// Regular grid over (0,1]^2: rows enumerate (j/g, k/g), j,k = 1..g, row-major.
inline Eigen::MatrixXd unit_square_grid(Eigen::Index n) {
    const auto g = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (g * g != n) throw std::invalid_argument("unit_square_grid: n must be a perfect square");
    Eigen::MatrixXd pts(n, 2);
    Eigen::Index r = 0;
    for (Eigen::Index j = 1; j <= g; ++j) {
        for (Eigen::Index k = 1; k <= g; ++k, ++r) {
            pts(r, 0) = static_cast<double>(j) / static_cast<double>(g);
            pts(r, 1) = static_cast<double>(k) / static_cast<double>(g);
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// CSV ingestion. Dialect: comma separated, first row is header, '.' decimal
// point, no quoting.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : fields) {
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) f.pop_back();
        std::string::size_type b = 0;
        while (b < f.size() && (f[b] == ' ' || f[b] == '\t')) ++b;
        f.erase(0, b);
    }
    return fields;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
        throw CsvError("csv: cannot parse cell at data row " + std::to_string(row + 1) +
                       ", column '" + column + "': '" + cell + "'");
    }
    return value;
}

inline std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    std::size_t found = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            if (found != header.size())
                throw CsvError("csv: duplicate column name '" + name + "'");
            found = i;
        }
    }
    if (found == header.size()) throw CsvError("csv: missing column '" + name + "'");
    return found;
}

}  // namespace detail

// Loads a dataset from CSV. `covariate_columns` keep their given order; when
// add_intercept is set a leading all-ones column named "intercept" is
// prepended.
inline SpatialDataset load_csv(const std::string& path,
                               const std::array<std::string, 2>& location_columns,
                               const std::string& response_column,
                               const std::vector<std::string>& covariate_columns,
                               bool add_intercept) {
    std::ifstream in(path);
    if (!in) throw CsvError("csv: cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw CsvError("csv: empty file: " + path);
    const auto header = detail::split_csv_line(line);

    const std::size_t loc0 = detail::find_column(header, location_columns[0]);
    const std::size_t loc1 = detail::find_column(header, location_columns[1]);
    const std::size_t resp = detail::find_column(header, response_column);
    std::vector<std::size_t> cov_idx;
    cov_idx.reserve(covariate_columns.size());
    for (const auto& name : covariate_columns) cov_idx.push_back(detail::find_column(header, name));

    std::vector<std::array<double, 2>> locs;
    std::vector<double> resp_vals;
    std::vector<std::vector<double>> cov_vals;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw CsvError("csv: data row " + std::to_string(row + 1) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(header.size()));
        locs.push_back({detail::parse_cell(fields[loc0], row, header[loc0]),
                        detail::parse_cell(fields[loc1], row, header[loc1])});
        resp_vals.push_back(detail::parse_cell(fields[resp], row, header[resp]));
        std::vector<double> cov_row;
        cov_row.reserve(cov_idx.size());
        for (const auto c : cov_idx) cov_row.push_back(detail::parse_cell(fields[c], row, header[c]));
        cov_vals.push_back(std::move(cov_row));
        ++row;
    }
    if (row == 0) throw CsvError("csv: no data rows in " + path);

    const auto n = static_cast<Eigen::Index>(row);
    const auto p_cov = static_cast<Eigen::Index>(covariate_columns.size());
    const Eigen::Index p = p_cov + (add_intercept ? 1 : 0);
    if (p < 1) throw std::invalid_argument("load_csv: need at least one covariate column or an intercept");

    SpatialDataset ds;
    ds.locations.resize(n, 2);
    ds.covariates.resize(n, p);
    ds.response.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ds.locations(i, 0) = locs[static_cast<std::size_t>(i)][0];
        ds.locations(i, 1) = locs[static_cast<std::size_t>(i)][1];
        ds.response[i] = resp_vals[static_cast<std::size_t>(i)];
        Eigen::Index j = 0;
        if (add_intercept) ds.covariates(i, j++) = 1.0;
        for (Eigen::Index c = 0; c < p_cov; ++c)
            ds.covariates(i, j++) = cov_vals[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
    if (add_intercept) ds.column_names.push_back("intercept");
    for (const auto& name : covariate_columns) ds.column_names.push_back(name);
    ds.validate();
    return ds;
}

// Writes a dataset back out with the same header conventions load_csv reads:
// s1,s2,y,<covariate columns> (the intercept column is kept if present).
inline void write_csv(const SpatialDataset& ds, const std::string& path,
                      const std::string& loc1_name = "s1", const std::string& loc2_name = "s2",
                      const std::string& response_name = "y") {
    std::ofstream out(path);
    if (!out) throw CsvError("csv: cannot open file for writing: " + path);
    out << loc1_name << ',' << loc2_name << ',' << response_name;
    for (const auto& name : ds.column_names) out << ',' << name;
    out << '\n';
    char buf[40];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        put(ds.locations(i, 0));
        out << ',';
        put(ds.locations(i, 1));
        out << ',';
        put(ds.response[i]);
        for (Eigen::Index j = 0; j < ds.p(); ++j) {
            out << ',';
            put(ds.covariates(i, j));
        }
        out << '\n';
    }
}

}
