#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/domain.hpp"

namespace lgc {

/// Sparse interpolation stencil: distinct neighbor indices with aligned
/// weights. For barycentric results inside the neighbor hull the weights
/// sum to 1.
struct InterpResult {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
    bool used_fallback = false; // inverse-distance fallback or guard clipping
};

enum class InterpScheme { Barycentric, InverseDistance };

inline std::string interp_name(InterpScheme s) {
    return s == InterpScheme::Barycentric ? "barycentric" : "invdist";
}

inline InterpScheme interp_from_name(const std::string& s) {
    if (s == "barycentric") return InterpScheme::Barycentric;
    if (s == "invdist") return InterpScheme::InverseDistance;
    throw std::runtime_error("unknown interpolation scheme '" + s + "'");
}

struct InterpConfig {
    InterpScheme scheme = InterpScheme::Barycentric;
    std::size_t k = 4;          // neighbors; affine exactness needs k >= dim + 1
    double idw_power = 1.0;     // inverse-distance exponent
    double lambda_max = 4.0;    // extrapolation guard on barycentric weights
};

/// A query point at distance <= this from a candidate is treated as an exact
/// hit and gets weight 1 on that candidate, so the identity group element
/// produces the exact identity operator.
inline constexpr double kExactHitTol = 1e-12;

/// Candidate point set prepared for repeated interpolation queries.
class InterpContext {
public:
    InterpContext(std::vector<double> coords, std::size_t dim)
        : tree_(std::move(coords), dim) {}

    explicit InterpContext(const DomainSampling& domain)
        : InterpContext(domain.coords(), domain.dim()) {}

    std::size_t size() const { return tree_.size(); }
    std::size_t dim() const { return tree_.dim(); }
    std::span<const double> point(std::size_t i) const { return tree_.point(i); }

    void knn(std::span<const double> query, std::size_t k, std::vector<Neighbor>& out) const {
        tree_.knn(query, k, out);
    }

private:
    detail::KdTree tree_;
};

namespace detail {

/// Solve G x = b in place by Gaussian elimination with partial pivoting.
/// Returns false when a pivot falls below the rank tolerance.
inline bool solve_small(std::vector<double>& g, std::vector<double>& b, std::size_t n) {
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * std::max(1.0, scale);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(g[r * n + col]) > std::abs(g[piv * n + col])) piv = r;
        if (std::abs(g[piv * n + col]) <= tol) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(g[col * n + c], g[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / g[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = g[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) g[r * n + c] -= f * g[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        double acc = b[col];
        for (std::size_t c = col + 1; c < n; ++c) acc -= g[col * n + c] * b[c];
        b[col] = acc / g[col * n + col];
    }
    return true;
}

inline InterpResult idw_from_neighbors(const std::vector<Neighbor>& nbs, double power,
                                       bool flag_fallback) {
    InterpResult res;
    res.used_fallback = flag_fallback;
    double total = 0.0;
    std::vector<double> raw(nbs.size());
    for (std::size_t i = 0; i < nbs.size(); ++i) {
        raw[i] = std::pow(nbs[i].distance, -power);
        total += raw[i];
    }
    for (std::size_t i = 0; i < nbs.size(); ++i) {
        res.indices.push_back(nbs[i].index);
        res.weights.push_back(raw[i] / total);
    }
    return res;
}

} // namespace detail

/// Inverse-distance weights w_i proportional to d_i^{-power}, normalized to
/// sum 1; an exact hit short-circuits to weight 1 on that candidate.
inline InterpResult inverse_distance(const InterpContext& ctx, std::span<const double> query,
                                     std::size_t k, double power = 1.0) {
    if (k == 0 || k > ctx.size())
        throw std::invalid_argument("inverse_distance: k must be in [1, candidate count]");
    std::vector<Neighbor> nbs;
    ctx.knn(query, k, nbs);
    if (nbs[0].distance <= kExactHitTol) return InterpResult{{nbs[0].index}, {1.0}, false};
    return detail::idw_from_neighbors(nbs, power, false);
}

/// Barycentric interpolation: the k nearest candidates get the minimum-norm
/// solution of the moment system  sum(w) = 1,  sum(w (x_j - q)) = 0, solved
/// through the (dim+1)-square Gram system. Affine functions are reproduced
/// exactly whenever the solve succeeds. Rank-deficient neighbor geometry or
/// any |w| > lambda_max (extrapolation outside the neighbor hull) falls back
/// to inverse-distance weights and flags the result.
inline InterpResult barycentric(const InterpContext& ctx, std::span<const double> query,
                                std::size_t k, double lambda_max = 4.0, double idw_power = 1.0) {
    const std::size_t p = ctx.dim();
    if (k < p + 1) throw std::invalid_argument("barycentric: k must be >= dim + 1");
    if (k > ctx.size()) throw std::invalid_argument("barycentric: k exceeds candidate count");
    std::vector<Neighbor> nbs;
    ctx.knn(query, k, nbs);
    if (nbs[0].distance <= kExactHitTol) return InterpResult{{nbs[0].index}, {1.0}, false};

    // Centering on the query and scaling by the mean neighbor distance leave
    // the weight solution unchanged but keep the Gram system well scaled.
    double mean_dist = 0.0;
    for (const auto& nb : nbs) mean_dist += nb.distance;
    mean_dist /= static_cast<double>(k);
    const double inv_scale = 1.0 / mean_dist;

    const std::size_t m = p + 1;
    std::vector<double> a(m * k); // moment matrix [1; (x - q)/s], row-major
    for (std::size_t j = 0; j < k; ++j) {
        a[j] = 1.0;
        const auto x = ctx.point(nbs[j].index);
        for (std::size_t r = 0; r < p; ++r) a[(r + 1) * k + j] = (x[r] - query[r]) * inv_scale;
    }
    // Minimum-norm least squares: w = A^T (A A^T)^{-1} b with b = e_0.
    std::vector<double> gram(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = 0; s <= r; ++s) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += a[r * k + j] * a[s * k + j];
            gram[r * m + s] = acc;
            gram[s * m + r] = acc;
        }
    std::vector<double> mu(m, 0.0);
    mu[0] = 1.0;
    if (detail::solve_small(gram, mu, m)) {
        InterpResult res;
        res.indices.reserve(k);
        res.weights.reserve(k);
        bool guarded = false;
        for (std::size_t j = 0; j < k; ++j) {
            double w = 0.0;
            for (std::size_t r = 0; r < m; ++r) w += a[r * k + j] * mu[r];
            if (std::abs(w) > lambda_max) {
                guarded = true;
                break;
            }
            res.indices.push_back(nbs[j].index);
            res.weights.push_back(w);
        }
        if (!guarded) return res;
    }
    return detail::idw_from_neighbors(nbs, idw_power, true);
}

/// Convenience overloads taking a raw candidate point list.
inline InterpResult barycentric(std::span<const double> query, const std::vector<double>& candidates,
                                std::size_t dim, std::size_t k, double lambda_max = 4.0) {
    InterpContext ctx(candidates, dim);
    return barycentric(ctx, query, k, lambda_max);
}

inline InterpResult inverse_distance(std::span<const double> query,
                                     const std::vector<double>& candidates, std::size_t dim,
                                     std::size_t k, double power = 1.0) {
    InterpContext ctx(candidates, dim);
    return inverse_distance(ctx, query, k, power);
}

/// sum_i W_i values[N_i]; linear in the values.
inline double interpolate_signal(const InterpResult& result, std::span<const double> values) {
    double acc = 0.0;
    for (std::size_t i = 0; i < result.indices.size(); ++i) {
        if (result.indices[i] >= values.size())
            throw std::out_of_range("interpolate_signal: index out of range");
        acc += result.weights[i] * values[result.indices[i]];
    }
    return acc;
}

inline InterpResult interpolate(const InterpContext& ctx, std::span<const double> query,
                                const InterpConfig& cfg) {
    if (cfg.scheme == InterpScheme::Barycentric)
        return barycentric(ctx, query, cfg.k, cfg.lambda_max, cfg.idw_power);
    return inverse_distance(ctx, query, cfg.k, cfg.idw_power);
}

} // namespace lgc
