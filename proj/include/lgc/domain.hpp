#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/rng.hpp"
#include "lgc/sparse.hpp"

namespace lgc {

struct Neighbor {
    std::size_t index;
    double distance;
};

namespace detail {

/// Exact k-nearest-neighbor search: median-split kd-tree with an exhaustive
/// scan below 64 points. Ties in distance break toward the lower index, so
/// results always equal the brute-force (distance, index)-sorted prefix.
class KdTree {
public:
    KdTree() = default;

    KdTree(std::vector<double> coords, std::size_t dim) : coords_(std::move(coords)), dim_(dim) {
        count_ = dim == 0 ? 0 : coords_.size() / dim;
        if (count_ < kExhaustiveLimit) return;
        perm_.resize(count_);
        for (std::size_t i = 0; i < count_; ++i) perm_[i] = static_cast<std::uint32_t>(i);
        nodes_.reserve(2 * count_);
        root_ = build(0, count_);
    }

    std::size_t size() const { return count_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }

    void knn(std::span<const double> query, std::size_t k, std::vector<Neighbor>& out) const {
        if (k == 0) throw std::invalid_argument("KdTree::knn: k must be >= 1");
        if (k > count_) throw std::invalid_argument("KdTree::knn: k exceeds point count");
        out.clear();
        if (count_ < kExhaustiveLimit) {
            out.reserve(count_);
            for (std::size_t i = 0; i < count_; ++i) out.push_back({i, dist2(i, query)});
            std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
                if (a.distance != b.distance) return a.distance < b.distance;
                return a.index < b.index;
            });
            out.resize(k);
        } else {
            Heap heap{k, {}};
            search(root_, query, heap);
            out = std::move(heap.entries);
            std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
                if (a.distance != b.distance) return a.distance < b.distance;
                return a.index < b.index;
            });
        }
        for (auto& nb : out) nb.distance = std::sqrt(nb.distance);
    }

private:
    static constexpr std::size_t kExhaustiveLimit = 64;
    static constexpr std::size_t kLeafSize = 16;

    struct Node {
        std::uint32_t begin, end; // leaf range in perm_
        std::int32_t left = -1, right = -1;
        std::uint32_t axis = 0;
        double split = 0.0;
    };

    struct Heap {
        std::size_t k;
        std::vector<Neighbor> entries; // max at front, ordered by (distance, index)

        static bool less(const Neighbor& a, const Neighbor& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.index < b.index;
        }
        bool full() const { return entries.size() == k; }
        double worst() const { return entries.front().distance; }
        void push(Neighbor n) {
            if (!full()) {
                entries.push_back(n);
                std::push_heap(entries.begin(), entries.end(), less);
            } else if (less(n, entries.front())) {
                std::pop_heap(entries.begin(), entries.end(), less);
                entries.back() = n;
                std::push_heap(entries.begin(), entries.end(), less);
            }
        }
    };

    double coord(std::size_t i, std::size_t axis) const { return coords_[i * dim_ + axis]; }

    double dist2(std::size_t i, std::span<const double> q) const {
        double s = 0.0;
        for (std::size_t a = 0; a < dim_; ++a) {
            const double d = coord(i, a) - q[a];
            s += d * d;
        }
        return s;
    }

    std::int32_t build(std::size_t begin, std::size_t end) {
        Node node;
        node.begin = static_cast<std::uint32_t>(begin);
        node.end = static_cast<std::uint32_t>(end);
        if (end - begin <= kLeafSize) {
            nodes_.push_back(node);
            return static_cast<std::int32_t>(nodes_.size() - 1);
        }
        // split on the widest axis at the median
        std::size_t axis = 0;
        double best_spread = -1.0;
        for (std::size_t a = 0; a < dim_; ++a) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = begin; i < end; ++i) {
                const double c = coord(perm_[i], a);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = a;
            }
        }
        const std::size_t mid = (begin + end) / 2;
        std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = coord(a, axis), cb = coord(b, axis);
                             if (ca != cb) return ca < cb;
                             return a < b;
                         });
        node.axis = static_cast<std::uint32_t>(axis);
        node.split = coord(perm_[mid], axis);
        nodes_.push_back(node);
        const auto self = static_cast<std::int32_t>(nodes_.size() - 1);
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search(std::int32_t ni, std::span<const double> q, Heap& heap) const {
        const Node& node = nodes_[ni];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i)
                heap.push({perm_[i], dist2(perm_[i], q)});
            return;
        }
        const double delta = q[node.axis] - node.split;
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        search(near, q, heap);
        // the far side may still hold equal-distance lower-index ties, so
        // prune only on strict inequality
        if (!heap.full() || delta * delta <= heap.worst()) search(far, q, heap);
    }

    std::vector<double> coords_;
    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint32_t> perm_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace detail

enum class DomainScheme { Grid, Uniform, Sphere, Gaussian, Custom };

inline std::string scheme_name(DomainScheme s) {
    switch (s) {
        case DomainScheme::Grid: return "grid";
        case DomainScheme::Uniform: return "uniform";
        case DomainScheme::Sphere: return "sphere";
        case DomainScheme::Gaussian: return "gaussian";
        case DomainScheme::Custom: return "custom";
    }
    return "?";
}

inline DomainScheme scheme_from_name(const std::string& s) {
    if (s == "grid") return DomainScheme::Grid;
    if (s == "uniform") return DomainScheme::Uniform;
    if (s == "sphere") return DomainScheme::Sphere;
    if (s == "gaussian") return DomainScheme::Gaussian;
    if (s == "custom") return DomainScheme::Custom;
    throw std::runtime_error("unknown domain scheme '" + s + "'");
}

/// Finite sampling of the signal domain: n-dimensional points (flat storage)
/// plus an exact spatial index. Immutable after construction; concurrent
/// read queries are safe.
class DomainSampling {
public:
    DomainSampling(std::vector<double> coords, std::size_t dim, DomainScheme scheme)
        : coords_(std::move(coords)), dim_(dim), scheme_(scheme) {
        if (dim_ == 0 || coords_.size() % dim_ != 0)
            throw std::invalid_argument("DomainSampling: bad coordinate array");
        for (double c : coords_)
            if (!std::isfinite(c)) throw std::invalid_argument("DomainSampling: non-finite coordinate");
        check_distinct();
        index_ = detail::KdTree(coords_, dim_);
    }

    std::size_t size() const { return coords_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    DomainScheme scheme() const { return scheme_; }
    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }
    const std::vector<double>& coords() const { return coords_; }

    std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k) const {
        std::vector<Neighbor> out;
        index_.knn(query, k, out);
        return out;
    }

private:
    void check_distinct() const {
        const std::size_t n = size();
        std::vector<std::uint32_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return std::lexicographical_compare(point(a).begin(), point(a).end(),
                                                point(b).begin(), point(b).end());
        });
        for (std::size_t i = 1; i < n; ++i) {
            const auto pa = point(order[i - 1]), pb = point(order[i]);
            if (std::equal(pa.begin(), pa.end(), pb.begin()))
                throw std::invalid_argument("DomainSampling: duplicate points");
        }
    }

    std::vector<double> coords_;
    std::size_t dim_;
    DomainScheme scheme_;
    detail::KdTree index_;
};

/// k nearest domain points by Euclidean distance, ties broken by ascending
/// index; distances are nondecreasing in list order.
inline std::vector<Neighbor> nearest_in_domain(const DomainSampling& domain,
                                               std::span<const double> query, std::size_t k) {
    return domain.nearest(query, k);
}

struct BoxBounds {
    std::vector<double> lo, hi; // componentwise lo < hi
};

/// Axis-aligned lattice with counts_per_axis points per axis; coordinates
/// follow s_i = a + i (b-a)/(n-1), first axis slowest.
inline DomainSampling make_grid_domain(const BoxBounds& bounds,
                                       const std::vector<std::size_t>& counts_per_axis) {
    const std::size_t dim = bounds.lo.size();
    if (dim == 0 || bounds.hi.size() != dim || counts_per_axis.size() != dim)
        throw std::invalid_argument("make_grid_domain: inconsistent dimensions");
    std::size_t total = 1;
    for (std::size_t a = 0; a < dim; ++a) {
        if (!(bounds.lo[a] < bounds.hi[a]))
            throw std::invalid_argument("make_grid_domain: bounds must satisfy a < b");
        if (counts_per_axis[a] < 2)
            throw std::invalid_argument("make_grid_domain: at least 2 points per axis");
        total *= counts_per_axis[a];
    }
    std::vector<double> coords;
    coords.reserve(total * dim);
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t p = 0; p < total; ++p) {
        for (std::size_t a = 0; a < dim; ++a)
            coords.push_back(bounds.lo[a] + static_cast<double>(idx[a]) *
                                                (bounds.hi[a] - bounds.lo[a]) /
                                                static_cast<double>(counts_per_axis[a] - 1));
        for (std::size_t a = dim; a-- > 0;) {
            if (++idx[a] < counts_per_axis[a]) break;
            idx[a] = 0;
        }
    }
    return DomainSampling(std::move(coords), dim, DomainScheme::Grid);
}

inline DomainSampling make_uniform_domain(const BoxBounds& bounds, std::size_t count, Rng& rng) {
    const std::size_t dim = bounds.lo.size();
    if (dim == 0 || bounds.hi.size() != dim)
        throw std::invalid_argument("make_uniform_domain: inconsistent bounds");
    for (std::size_t a = 0; a < dim; ++a)
        if (!(bounds.lo[a] < bounds.hi[a]))
            throw std::invalid_argument("make_uniform_domain: bounds must satisfy a < b");
    if (count < 8) throw std::invalid_argument("make_uniform_domain: count must be >= 8");
    std::vector<double> coords;
    coords.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t a = 0; a < dim; ++a) coords.push_back(rng.uniform(bounds.lo[a], bounds.hi[a]));
    return DomainSampling(std::move(coords), dim, DomainScheme::Uniform);
}

/// Random polar sampling of the ball of radius R: r/R, theta/pi, phi/(2 pi)
/// all uniform on (0, 1]. Deliberately nonuniform in volume.
inline DomainSampling make_sphere_domain(double radius, std::size_t count, Rng& rng) {
    if (radius <= 0.0) throw std::invalid_argument("make_sphere_domain: radius must be positive");
    if (count < 8) throw std::invalid_argument("make_sphere_domain: count must be >= 8");
    std::vector<double> coords;
    coords.reserve(count * 3);
    for (std::size_t i = 0; i < count; ++i) {
        const double r = radius * rng.uniform01_open_low();
        const double theta = std::numbers::pi * rng.uniform01_open_low();
        const double phi = 2.0 * std::numbers::pi * rng.uniform01_open_low();
        coords.push_back(r * std::sin(theta) * std::cos(phi));
        coords.push_back(r * std::sin(theta) * std::sin(phi));
        coords.push_back(r * std::cos(theta));
    }
    return DomainSampling(std::move(coords), 3, DomainScheme::Sphere);
}

/// Gaussian sampling N(0, R I_3): covariance R, so each coordinate has
/// standard deviation sqrt(R).
inline DomainSampling make_gaussian_domain(double radius, std::size_t count, Rng& rng) {
    if (radius <= 0.0) throw std::invalid_argument("make_gaussian_domain: radius must be positive");
    if (count < 8) throw std::invalid_argument("make_gaussian_domain: count must be >= 8");
    const double sd = std::sqrt(radius);
    std::vector<double> coords;
    coords.reserve(count * 3);
    for (std::size_t i = 0; i < count * 3; ++i) coords.push_back(sd * rng.normal());
    return DomainSampling(std::move(coords), 3, DomainScheme::Gaussian);
}

/// Discrete signal on a domain sampling, channel-major storage.
struct DiscreteSignal {
    std::vector<double> values; // length = points * channels
    std::size_t channels = 1;

    DiscreteSignal() = default;
    DiscreteSignal(std::size_t points, std::size_t chans)
        : values(points * chans, 0.0), channels(chans) {}

    std::size_t points() const { return channels == 0 ? 0 : values.size() / channels; }
    std::span<double> channel(std::size_t c) {
        return {values.data() + c * points(), points()};
    }
    std::span<const double> channel(std::size_t c) const {
        return {values.data() + c * points(), points()};
    }

    double norm2() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }
};

/// Point cloud with a value per point.
struct PointCloud {
    std::vector<double> coords; // flat, 3 per point
    std::vector<double> values; // one per point, defaults to 1
    std::size_t size() const { return values.size(); }
};

/// Projection of a point cloud onto a domain sampling:
/// fhat(s) = max(0, xi - mean over the k nearest cloud points of |x-s| / f(x)).
/// Output values lie in [0, xi] and are invariant to cloud permutation.
inline DiscreteSignal project_pointcloud(const PointCloud& cloud, const DomainSampling& domain,
                                         std::size_t k, double xi) {
    if (cloud.size() == 0) throw std::invalid_argument("project_pointcloud: empty cloud");
    if (k == 0 || k > cloud.size())
        throw std::invalid_argument("project_pointcloud: k must be in [1, cloud size]");
    if (xi <= 0.0) throw std::invalid_argument("project_pointcloud: xi must be positive");
    if (domain.dim() != 3) throw std::invalid_argument("project_pointcloud: 3D domains only");
    for (double f : cloud.values)
        if (f == 0.0) throw std::invalid_argument("project_pointcloud: zero point value");

    detail::KdTree tree(cloud.coords, 3);
    DiscreteSignal sig(domain.size(), 1);
    std::vector<Neighbor> nbs;
    for (std::size_t i = 0; i < domain.size(); ++i) {
        tree.knn(domain.point(i), k, nbs);
        double acc = 0.0;
        for (const auto& nb : nbs) acc += nb.distance / cloud.values[nb.index];
        sig.values[i] = std::max(0.0, xi - acc / static_cast<double>(k));
    }
    return sig;
}

/// Whitespace-separated text, one point per line: `x y z [value]`.
inline PointCloud load_pointcloud(std::istream& in) {
    PointCloud cloud;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) {
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            throw std::runtime_error("load_pointcloud: bad line '" + line + "'");
        }
        double v = 1.0;
        ls >> v;
        cloud.coords.insert(cloud.coords.end(), {x, y, z});
        cloud.values.push_back(v);
    }
    return cloud;
}

inline PointCloud load_pointcloud_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_pointcloud_file: cannot open " + path);
    return load_pointcloud(f);
}

inline void save_pointcloud(const PointCloud& cloud, std::ostream& out) {
    for (std::size_t i = 0; i < cloud.size(); ++i)
        out << shortest_double(cloud.coords[3 * i]) << ' ' << shortest_double(cloud.coords[3 * i + 1])
            << ' ' << shortest_double(cloud.coords[3 * i + 2]) << ' '
            << shortest_double(cloud.values[i]) << '\n';
}

/// CSV export, `index,value` rows per channel with a channel header line.
inline void save_signal_csv(const DiscreteSignal& sig, std::ostream& out) {
    for (std::size_t c = 0; c < sig.channels; ++c) {
        out << "channel," << c << '\n';
        auto ch = sig.channel(c);
        for (std::size_t i = 0; i < ch.size(); ++i)
            out << i << ',' << shortest_double(ch[i]) << '\n';
    }
}

} // namespace lgc
