#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/dense.hpp"
#include "lgc/rng.hpp"

namespace lgc {

using GroupElement = DenseMatrix;

enum class GroupKind { SO2, SO3, Translation };

/// A matrix Lie group together with the generator basis of its algebra.
/// Rotations act linearly on points; translations use the homogeneous
/// (d+1)x(d+1) representation with the offset in the last column.
struct LieGroupSpec {
    GroupKind kind;
    std::size_t space_dim; // dimension of the point space the group acts on
    std::size_t rep_dim;   // ambient matrix representation dimension
    std::vector<DenseMatrix> generators;

    static LieGroupSpec so2() {
        LieGroupSpec s{GroupKind::SO2, 2, 2, {}};
        s.generators.push_back(DenseMatrix(2, 2, {0, -1, 1, 0}));
        return s;
    }

    static LieGroupSpec so3() {
        LieGroupSpec s{GroupKind::SO3, 3, 3, {}};
        s.generators.push_back(DenseMatrix(3, 3, {0, 0, 0, 0, 0, -1, 0, 1, 0}));
        s.generators.push_back(DenseMatrix(3, 3, {0, 0, 1, 0, 0, 0, -1, 0, 0}));
        s.generators.push_back(DenseMatrix(3, 3, {0, -1, 0, 1, 0, 0, 0, 0, 0}));
        return s;
    }

    static LieGroupSpec translation(std::size_t d) {
        if (d == 0) throw std::invalid_argument("translation: dimension must be >= 1");
        LieGroupSpec s{GroupKind::Translation, d, d + 1, {}};
        for (std::size_t i = 0; i < d; ++i) {
            DenseMatrix g(d + 1, d + 1);
            g.at(i, d) = 1.0;
            s.generators.push_back(g);
        }
        return s;
    }

    GroupElement identity_element() const { return DenseMatrix::identity(rep_dim); }

    /// Apply the action T_g to a point of the signal domain.
    void apply_action(const GroupElement& g, std::span<const double> in,
                      std::span<double> out) const {
        if (in.size() != space_dim || out.size() != space_dim)
            throw std::invalid_argument("apply_action: point dimension mismatch");
        if (kind == GroupKind::Translation) {
            for (std::size_t i = 0; i < space_dim; ++i) out[i] = in[i] + g.at(i, space_dim);
            return;
        }
        for (std::size_t i = 0; i < space_dim; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < space_dim; ++j) acc += g.at(i, j) * in[j];
            out[i] = acc;
        }
    }

    GroupElement inverse(const GroupElement& g) const {
        if (kind == GroupKind::Translation) {
            GroupElement inv = DenseMatrix::identity(rep_dim);
            for (std::size_t i = 0; i < space_dim; ++i) inv.at(i, space_dim) = -g.at(i, space_dim);
            return inv;
        }
        return g.transpose(); // orthogonal
    }

    std::string kind_name() const {
        switch (kind) {
            case GroupKind::SO2: return "so2";
            case GroupKind::SO3: return "so3";
            case GroupKind::Translation: return "trans" + std::to_string(space_dim);
        }
        return "?";
    }

    static LieGroupSpec from_kind_name(const std::string& name) {
        if (name == "so2") return so2();
        if (name == "so3") return so3();
        if (name.rfind("trans", 0) == 0) return translation(std::stoul(name.substr(5)));
        throw std::runtime_error("unknown group kind '" + name + "'");
    }
};

inline double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a > std::numbers::pi) a -= two_pi;
    if (a < -std::numbers::pi) a += two_pi;
    return a;
}

inline double so2_angle(const GroupElement& g) { return std::atan2(g.at(1, 0), g.at(0, 0)); }

/// Rotation angle of a single SO(3) element, i.e. its geodesic distance to
/// the identity.
inline double so3_angle(const GroupElement& g) {
    const double tr = g.at(0, 0) + g.at(1, 1) + g.at(2, 2);
    const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

/// Geodesic distance between two elements of the same group: wrapped angle
/// difference on SO(2), rotation angle of a^T b on SO(3), Euclidean offset
/// distance for translations.
inline double geodesic_distance(const LieGroupSpec& spec, const GroupElement& a,
                                const GroupElement& b) {
    if (a.rows != spec.rep_dim || b.rows != spec.rep_dim || a.cols != b.cols || a.rows != b.rows)
        throw std::invalid_argument("geodesic_distance: element shape mismatch");
    switch (spec.kind) {
        case GroupKind::SO2:
            return std::abs(wrap_angle(so2_angle(a) - so2_angle(b)));
        case GroupKind::SO3: {
            // trace(a^T b) without forming the product
            double tr = 0.0;
            for (std::size_t i = 0; i < 9; ++i) tr += a.entries[i] * b.entries[i];
            const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
            return std::acos(c);
        }
        case GroupKind::Translation: {
            double s = 0.0;
            for (std::size_t i = 0; i < spec.space_dim; ++i) {
                const double d = a.at(i, spec.space_dim) - b.at(i, spec.space_dim);
                s += d * d;
            }
            return std::sqrt(s);
        }
    }
    throw std::logic_error("geodesic_distance: unreachable");
}

using Quaternion = std::array<double, 4>; // (w, x, y, z), unit norm

/// Shepperd's method, branching on the largest diagonal term for stability.
inline Quaternion rotation_to_quaternion(const GroupElement& r) {
    const double m00 = r.at(0, 0), m01 = r.at(0, 1), m02 = r.at(0, 2);
    const double m10 = r.at(1, 0), m11 = r.at(1, 1), m12 = r.at(1, 2);
    const double m20 = r.at(2, 0), m21 = r.at(2, 1), m22 = r.at(2, 2);
    const double tr = m00 + m11 + m22;
    Quaternion q;
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 > m11 && m00 > m22) {
        double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 > m22) {
        double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
    } else {
        double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
    }
    double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (double& c : q) c /= n;
    return q;
}

inline GroupElement quaternion_to_rotation(const Quaternion& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    DenseMatrix r(3, 3);
    r.at(0, 0) = 1 - 2 * (y * y + z * z);
    r.at(0, 1) = 2 * (x * y - w * z);
    r.at(0, 2) = 2 * (x * z + w * y);
    r.at(1, 0) = 2 * (x * y + w * z);
    r.at(1, 1) = 1 - 2 * (x * x + z * z);
    r.at(1, 2) = 2 * (y * z - w * x);
    r.at(2, 0) = 2 * (x * z - w * y);
    r.at(2, 1) = 2 * (y * z + w * x);
    r.at(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

/// Uniform random rotation from a normalized 4D Gaussian quaternion draw.
inline GroupElement random_rotation(Rng& rng) {
    Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (n == 0.0) return DenseMatrix::identity(3);
    for (double& c : q) c /= n;
    return quaternion_to_rotation(q);
}

/// Low-discrepancy covering of SO(3): Super-Fibonacci spiral quaternions.
inline std::vector<GroupElement> so3_probes(std::size_t n) {
    std::vector<GroupElement> probes;
    probes.reserve(n);
    const double phi = std::numbers::sqrt2;
    const double psi = 1.533751168755204288118041;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) + 0.5;
        const double t = s / static_cast<double>(n);
        const double r = std::sqrt(t);
        const double big_r = std::sqrt(1.0 - t);
        const double alpha = 2.0 * std::numbers::pi * s / phi;
        const double beta = 2.0 * std::numbers::pi * s / psi;
        Quaternion q{r * std::sin(alpha), r * std::cos(alpha), big_r * std::sin(beta),
                     big_r * std::cos(beta)};
        probes.push_back(quaternion_to_rotation(q));
    }
    return probes;
}

/// Equally spaced rotations covering the full circle.
inline std::vector<GroupElement> so2_probes(std::size_t n) {
    std::vector<GroupElement> probes;
    probes.reserve(n);
    const auto gen = LieGroupSpec::so2().generators[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) /
                                                      static_cast<double>(n);
        probes.push_back(mat_exp(gen, theta));
    }
    return probes;
}

/// Uniform random translations inside the cube [-range, range]^d.
inline std::vector<GroupElement> translation_probes(std::size_t d, double range, std::size_t n,
                                                    Rng& rng) {
    std::vector<GroupElement> probes;
    probes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DenseMatrix g = DenseMatrix::identity(d + 1);
        for (std::size_t j = 0; j < d; ++j) g.at(j, d) = rng.uniform(-range, range);
        probes.push_back(g);
    }
    return probes;
}

} // namespace lgc
