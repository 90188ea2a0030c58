#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lgc {

/// Small dense matrix, row-major double storage. Holds Lie algebra generators,
/// group elements reached by the exponential map, and readout weights.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries; // rows * cols, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), entries(r * c, fill) {}
    DenseMatrix(std::size_t r, std::size_t c, std::initializer_list<double> vals)
        : rows(r), cols(c), entries(vals) {
        if (entries.size() != r * c)
            throw std::invalid_argument("DenseMatrix: initializer size mismatch");
    }

    double& at(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }

    bool square() const { return rows == cols; }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
        return t;
    }

    bool all_finite() const {
        for (double v : entries)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : entries) m = std::max(m, std::abs(v));
        return m;
    }
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("DenseMatrix multiply: shape mismatch");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

inline DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("DenseMatrix add: shape mismatch");
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.entries.size(); ++i) c.entries[i] += b.entries[i];
    return c;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("DenseMatrix sub: shape mismatch");
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.entries.size(); ++i) c.entries[i] -= b.entries[i];
    return c;
}

inline DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix c = a;
    for (double& v : c.entries) v *= s;
    return c;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix d = a - b;
    return d.max_abs();
}

namespace detail {

inline bool skew_symmetric(const DenseMatrix& m, double tol) {
    if (!m.square()) return false;
    const double scale = std::max(1.0, m.max_abs());
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            if (std::abs(m.at(i, j) + m.at(j, i)) > tol * scale) return false;
    return true;
}

} // namespace detail

/// e^{t m} for square m with dim <= 8. Skew-symmetric 2x2 uses the rotation
/// closed form, skew-symmetric 3x3 the Rodrigues formula, anything else
/// scaling-and-squaring around an order-18 Taylor core (argument scaled to
/// spectral-norm proxy <= 0.5 before squaring back).
inline DenseMatrix mat_exp(const DenseMatrix& m, double t) {
    if (!m.square()) throw std::invalid_argument("mat_exp: matrix must be square");
    if (m.rows == 0 || m.rows > 8) throw std::invalid_argument("mat_exp: dimension must be 1..8");
    if (!m.all_finite() || !std::isfinite(t)) throw std::invalid_argument("mat_exp: non-finite input");

    const std::size_t n = m.rows;
    if (t == 0.0) return DenseMatrix::identity(n);

    if (n == 2 && detail::skew_symmetric(m, 1e-14)) {
        const double theta = t * m.at(1, 0);
        DenseMatrix r(2, 2);
        r.at(0, 0) = std::cos(theta);
        r.at(0, 1) = -std::sin(theta);
        r.at(1, 0) = std::sin(theta);
        r.at(1, 1) = std::cos(theta);
        return r;
    }

    if (n == 3 && detail::skew_symmetric(m, 1e-14)) {
        // Rodrigues: e^{tK} = I + sin(theta) K/|w| + (1-cos(theta)) (K/|w|)^2
        const double wx = m.at(2, 1), wy = m.at(0, 2), wz = m.at(1, 0);
        const double w = std::sqrt(wx * wx + wy * wy + wz * wz);
        if (w * std::abs(t) < 1e-14) return DenseMatrix::identity(3);
        const double theta = t * w;
        DenseMatrix k = (1.0 / w) * m;
        DenseMatrix k2 = k * k;
        return DenseMatrix::identity(3) + std::sin(theta) * k + (1.0 - std::cos(theta)) * k2;
    }

    DenseMatrix a = t * m;
    // Scale until the infinity norm drops below 1/2.
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < n; ++j) rs += std::abs(a.at(i, j));
        norm = std::max(norm, rs);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    a = std::pow(0.5, squarings) * a;

    DenseMatrix result = DenseMatrix::identity(n);
    DenseMatrix term = DenseMatrix::identity(n);
    for (int order = 1; order <= 18; ++order) {
        term = (1.0 / order) * (term * a);
        result = result + term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

} // namespace lgc
