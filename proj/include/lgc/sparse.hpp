#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/dense.hpp"

namespace lgc {

/// Shortest decimal that round-trips to the same double (std::to_chars).
inline std::string shortest_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw std::runtime_error("parse_double: bad token '" + s + "'");
    return v;
}

/// Row-sparse matrix in CSR form, built from coordinate triplets. Duplicate
/// (row, col) entries are coalesced by summation. Immutable once compressed;
/// shareable across threads for read-only products.
class SparseMatrix {
public:
    SparseMatrix() = default;

    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    static SparseMatrix identity(std::size_t n) {
        SparseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.add(i, i, 1.0);
        m.compress();
        return m;
    }

    void add(std::size_t row, std::size_t col, double value) {
        if (compressed_) throw std::logic_error("SparseMatrix::add after compress");
        if (row >= rows_ || col >= cols_) throw std::out_of_range("SparseMatrix::add: index out of bounds");
        if (!std::isfinite(value)) throw std::invalid_argument("SparseMatrix::add: non-finite value");
        trip_row_.push_back(static_cast<std::uint32_t>(row));
        trip_col_.push_back(static_cast<std::uint32_t>(col));
        trip_val_.push_back(value);
    }

    /// Sort triplets by (row, col), coalesce duplicates by summation, drop the
    /// coordinate storage. Deterministic layout for a given multiset of triplets.
    void compress() {
        if (compressed_) return;
        const std::size_t nnz_in = trip_val_.size();
        std::vector<std::uint32_t> order(nnz_in);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (trip_row_[a] != trip_row_[b]) return trip_row_[a] < trip_row_[b];
            return trip_col_[a] < trip_col_[b];
        });
        row_ptr_.assign(rows_ + 1, 0);
        col_idx_.clear();
        values_.clear();
        col_idx_.reserve(nnz_in);
        values_.reserve(nnz_in);
        std::uint32_t last_row = 0;
        for (std::size_t k = 0; k < nnz_in; ++k) {
            const std::uint32_t t = order[k];
            if (!values_.empty() && last_row == trip_row_[t] && col_idx_.back() == trip_col_[t]) {
                values_.back() += trip_val_[t];
                continue;
            }
            last_row = trip_row_[t];
            col_idx_.push_back(trip_col_[t]);
            values_.push_back(trip_val_[t]);
            ++row_ptr_[trip_row_[t] + 1];
        }
        for (std::size_t i = 0; i < rows_; ++i) row_ptr_[i + 1] += row_ptr_[i];
        trip_row_.clear();
        trip_row_.shrink_to_fit();
        trip_col_.clear();
        trip_col_.shrink_to_fit();
        trip_val_.clear();
        trip_val_.shrink_to_fit();
        compressed_ = true;
    }

    bool compressed() const { return compressed_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return compressed_ ? values_.size() : trip_val_.size(); }

    std::span<const std::uint32_t> row_ptr() const { return row_ptr_; }
    std::span<const std::uint32_t> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k];
        return s;
    }

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const {
        require_compressed();
        if (x.size() != cols_ || y.size() != rows_)
            throw std::invalid_argument("SparseMatrix::multiply: dimension mismatch");
        for (std::size_t i = 0; i < rows_; ++i) {
            double acc = 0.0;
            for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                acc += values_[k] * x[col_idx_[k]];
            y[i] = acc;
        }
    }

    /// y = A^T x
    void multiply_transpose(std::span<const double> x, std::span<double> y) const {
        require_compressed();
        if (x.size() != rows_ || y.size() != cols_)
            throw std::invalid_argument("SparseMatrix::multiply_transpose: dimension mismatch");
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                y[col_idx_[k]] += values_[k] * xi;
        }
    }

    DenseMatrix to_dense() const {
        require_compressed();
        DenseMatrix d(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                d.at(i, col_idx_[k]) += values_[k];
        return d;
    }

    /// On-disk format: `SPARSEOP v1 rows cols nnz` then one `row col value`
    /// line per stored entry in CSR order, values as shortest round-trip
    /// decimals. Reload is bit-exact.
    void save(std::ostream& out) const {
        require_compressed();
        out << "SPARSEOP v1 " << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                out << i << ' ' << col_idx_[k] << ' ' << shortest_double(values_[k]) << '\n';
    }

    void save_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("SparseMatrix::save_file: cannot open " + path);
        save(f);
    }

    static SparseMatrix load(std::istream& in) {
        std::string tag, version;
        std::size_t rows, cols, count;
        if (!(in >> tag >> version >> rows >> cols >> count) || tag != "SPARSEOP" || version != "v1")
            throw std::runtime_error("SparseMatrix::load: bad header");
        SparseMatrix m(rows, cols);
        for (std::size_t k = 0; k < count; ++k) {
            std::size_t i, j;
            std::string val;
            if (!(in >> i >> j >> val)) throw std::runtime_error("SparseMatrix::load: truncated file");
            m.add(i, j, parse_double(val));
        }
        m.compress();
        return m;
    }

    static SparseMatrix load_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("SparseMatrix::load_file: cannot open " + path);
        return load(f);
    }

private:
    void require_compressed() const {
        if (!compressed_) throw std::logic_error("SparseMatrix: compress() before use");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    bool compressed_ = false;

    std::vector<std::uint32_t> trip_row_, trip_col_;
    std::vector<double> trip_val_;

    std::vector<std::uint32_t> row_ptr_;
    std::vector<std::uint32_t> col_idx_;
    std::vector<double> values_;
};

/// y = A x as a convenience value-returning product.
inline std::vector<double> spmv(const SparseMatrix& a, std::span<const double> x) {
    std::vector<double> y(a.rows());
    a.multiply(x, y);
    return y;
}

/// Spectral norm estimate: power iteration on A^T A started from a fixed
/// deterministic vector, returning sqrt of the Rayleigh quotient. The
/// estimate is nondecreasing in the iteration count up to convergence.
inline double operator_norm_estimate(const SparseMatrix& a, std::size_t iterations) {
    if (a.rows() != a.cols()) throw std::invalid_argument("operator_norm_estimate: matrix must be square");
    if (iterations == 0) throw std::invalid_argument("operator_norm_estimate: iterations must be >= 1");
    const std::size_t n = a.rows();
    if (n == 0) return 0.0;
    std::vector<double> v(n), av(n), atav(n);
    // Deterministic start with nonzero overlap on every coordinate direction.
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 17);
    double lambda = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        a.multiply(v, av);
        a.multiply_transpose(av, atav);
        double vv = 0.0, vatav = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            vv += v[i] * v[i];
            vatav += v[i] * atav[i];
        }
        if (vv == 0.0) return 0.0;
        lambda = vatav / vv;
        double norm = std::sqrt(std::max(0.0, vatav));
        if (norm == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = atav[i] / norm;
    }
    return std::sqrt(std::max(0.0, lambda));
}

} // namespace lgc
