#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/lie_group.hpp"
#include "lgc/sparse.hpp"

namespace lgc {

/// One factor of a monomial word: base element e^{delta * step * generator}.
struct WordFactor {
    std::size_t generator;
    int step;
};

using Word = std::vector<WordFactor>; // empty word = identity

/// Discrete subset of a Lie group reached by the exponential map and its
/// monomials. Elements are mutually separated by more than dedup_tol under
/// the geodesic distance, the identity appears exactly once (index 0), and
/// provenance records the shortest word that produced each element.
struct SamplingSet {
    LieGroupSpec spec;
    double delta = 0.0;
    std::size_t range_n = 0;
    std::size_t order_k = 1;
    double dedup_tol = 1e-9;
    std::vector<GroupElement> elements;
    std::vector<Word> words;

    std::size_t size() const { return elements.size(); }
};

namespace detail {

/// Retained-element index keyed by distance-to-identity. The key is
/// 1-Lipschitz under the geodesic metric, so every element within tol of a
/// candidate lies in the key window [key - tol, key + tol].
class DedupIndex {
public:
    explicit DedupIndex(const LieGroupSpec& spec) : spec_(&spec) {}

    bool contains(const GroupElement& g, const std::vector<GroupElement>& retained,
                  double tol) const {
        const double key = key_of(g);
        auto lo = by_key_.lower_bound(key - tol);
        auto hi = by_key_.upper_bound(key + tol);
        for (auto it = lo; it != hi; ++it)
            if (geodesic_distance(*spec_, g, retained[it->second]) <= tol) return true;
        return false;
    }

    void insert(const GroupElement& g, std::size_t index) {
        by_key_.emplace(key_of(g), index);
    }

private:
    double key_of(const GroupElement& g) const {
        return geodesic_distance(*spec_, g, spec_->identity_element());
    }

    const LieGroupSpec* spec_;
    std::multimap<double, std::size_t> by_key_;
};

} // namespace detail

/// Base exponential-map sampling { e^{delta n X} : X generator, n in [-N, N] }
/// in deterministic order: identity first, then per generator steps ascending
/// with n = 0 skipped. Geodesic duplicates beyond the shared identity (they
/// appear once the range crosses the cut locus) are removed at dedup_tol.
inline SamplingSet sample_base(const LieGroupSpec& spec, double delta, std::size_t range_n,
                               double dedup_tol = 1e-9) {
    if (delta <= 0.0 || !std::isfinite(delta))
        throw std::invalid_argument("sample_base: delta must be positive");
    if (range_n == 0) throw std::invalid_argument("sample_base: N must be >= 1");
    if (dedup_tol < 0.0) throw std::invalid_argument("sample_base: dedup_tol must be >= 0");

    SamplingSet set{spec, delta, range_n, 1, dedup_tol, {}, {}};
    detail::DedupIndex index(set.spec);

    set.elements.push_back(spec.identity_element());
    set.words.push_back({});
    index.insert(set.elements[0], 0);

    for (std::size_t gi = 0; gi < spec.generators.size(); ++gi) {
        for (int n = -static_cast<int>(range_n); n <= static_cast<int>(range_n); ++n) {
            if (n == 0) continue;
            GroupElement g = mat_exp(spec.generators[gi], delta * n);
            if (index.contains(g, set.elements, dedup_tol)) continue;
            index.insert(g, set.elements.size());
            set.elements.push_back(std::move(g));
            set.words.push_back({WordFactor{gi, n}});
        }
    }
    return set;
}

/// Breadth-first diffusion-tree closure under monomials up to order k: level
/// l+1 right-multiplies each level-l element by each base element. A product
/// is kept only when its geodesic distance to every retained element exceeds
/// dedup_tol; BFS order makes the stored word the shortest producing one and
/// the output deterministic. For k' >= k the k-output is a prefix of the
/// k'-output.
inline SamplingSet extend_monomials(const SamplingSet& base, std::size_t order_k,
                                    double dedup_tol = 1e-9) {
    if (order_k == 0) throw std::invalid_argument("extend_monomials: k must be >= 1");
    if (dedup_tol < 0.0) throw std::invalid_argument("extend_monomials: dedup_tol must be >= 0");
    if (base.order_k != 1) throw std::invalid_argument("extend_monomials: base must be an order-1 set");

    SamplingSet set = base;
    set.order_k = order_k;
    set.dedup_tol = dedup_tol;

    detail::DedupIndex index(set.spec);
    for (std::size_t i = 0; i < set.elements.size(); ++i) index.insert(set.elements[i], i);

    std::size_t level_begin = 0, level_end = set.elements.size();
    for (std::size_t level = 1; level < order_k; ++level) {
        for (std::size_t p = level_begin; p < level_end; ++p) {
            if (set.words[p].size() != level) continue; // identity or shorter word
            for (std::size_t b = 1; b < base.elements.size(); ++b) {
                GroupElement g = set.elements[p] * base.elements[b];
                if (index.contains(g, set.elements, dedup_tol)) continue;
                Word w = set.words[p];
                w.push_back(base.words[b][0]);
                index.insert(g, set.elements.size());
                set.elements.push_back(std::move(g));
                set.words.push_back(std::move(w));
            }
        }
        level_begin = level_end;
        level_end = set.elements.size();
        if (level_begin == level_end) break; // no growth, closure reached
    }
    return set;
}

/// Discrete covering-radius estimate restricted to the probe region:
/// max over probes of min over set elements of the geodesic distance.
/// Probes must sample the region of the group under study densely enough;
/// choosing them is the caller's responsibility.
inline double covering_radius(const SamplingSet& set, const std::vector<GroupElement>& probes) {
    if (set.elements.empty() || probes.empty())
        throw std::invalid_argument("covering_radius: empty set or probes");

    if (set.spec.kind == GroupKind::SO3) {
        // cos(d/2) = |<q_a, q_b>| turns the min-distance scan into a max-dot scan.
        std::vector<Quaternion> qs(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) qs[i] = rotation_to_quaternion(set.elements[i]);
        double worst = 0.0;
        for (const auto& p : probes) {
            const Quaternion qp = rotation_to_quaternion(p);
            double best = 0.0;
            for (const auto& q : qs) {
                const double dot = std::abs(qp[0] * q[0] + qp[1] * q[1] + qp[2] * q[2] + qp[3] * q[3]);
                best = std::max(best, dot);
            }
            worst = std::max(worst, 2.0 * std::acos(std::clamp(best, -1.0, 1.0)));
        }
        return worst;
    }

    double worst = 0.0;
    for (const auto& p : probes) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& g : set.elements) best = std::min(best, geodesic_distance(set.spec, p, g));
        worst = std::max(worst, best);
    }
    return worst;
}

/// Exact covering radius of an SO(2) set over the whole circle: half of the
/// largest circular gap between consecutive sampled angles.
inline double so2_covering_radius_exact(const SamplingSet& set) {
    if (set.spec.kind != GroupKind::SO2)
        throw std::invalid_argument("so2_covering_radius_exact: SO(2) sets only");
    std::vector<double> angles;
    angles.reserve(set.size());
    for (const auto& g : set.elements) angles.push_back(so2_angle(g));
    std::sort(angles.begin(), angles.end());
    double max_gap = 2.0 * std::numbers::pi - (angles.back() - angles.front());
    for (std::size_t i = 1; i < angles.size(); ++i)
        max_gap = std::max(max_gap, angles[i] - angles[i - 1]);
    return 0.5 * max_gap;
}

struct BandwidthRow {
    double delta;
    double covering;  // r*
    double bandwidth; // 1 / r*
    std::size_t set_size;
};

/// For each resolution delta dividing the fixed range into an integer N,
/// builds the order-k monomial set and reports the covering radius on the
/// given probes. Halving delta at fixed range never decreases 1/r*.
inline std::vector<BandwidthRow> bandwidth_sweep(const LieGroupSpec& spec,
                                                 const std::vector<double>& delta_values,
                                                 double fixed_range, std::size_t order_k,
                                                 const std::vector<GroupElement>& probes,
                                                 double dedup_tol = 1e-9) {
    std::vector<BandwidthRow> rows;
    for (double delta : delta_values) {
        if (delta <= 0.0) throw std::invalid_argument("bandwidth_sweep: delta must be positive");
        const double ratio = fixed_range / delta;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * std::max(1.0, std::abs(ratio)))
            throw std::invalid_argument("bandwidth_sweep: delta must divide the fixed range");
        const auto n = static_cast<std::size_t>(rounded);
        SamplingSet set = extend_monomials(sample_base(spec, delta, n, dedup_tol), order_k, dedup_tol);
        const double r = covering_radius(set, probes);
        rows.push_back(BandwidthRow{delta, r, r > 0.0 ? 1.0 / r : std::numeric_limits<double>::infinity(),
                                    set.size()});
    }
    return rows;
}

/// Text serialization: `GSAMPLE v1 kind delta N k tol count`, then one line
/// per element with the provenance word and the row-major matrix entries.
inline void save_sampling_set(const SamplingSet& set, std::ostream& out) {
    out << "GSAMPLE v1 " << set.spec.kind_name() << ' ' << shortest_double(set.delta) << ' '
        << set.range_n << ' ' << set.order_k << ' ' << shortest_double(set.dedup_tol) << ' '
        << set.size() << '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        out << set.words[i].size();
        for (const auto& f : set.words[i]) out << ' ' << f.generator << ' ' << f.step;
        for (double v : set.elements[i].entries) out << ' ' << shortest_double(v);
        out << '\n';
    }
}

inline void save_sampling_set_file(const SamplingSet& set, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_sampling_set_file: cannot open " + path);
    save_sampling_set(set, f);
}

inline SamplingSet load_sampling_set(std::istream& in) {
    std::string tag, version, kind, delta_s, tol_s;
    std::size_t n, k, count;
    if (!(in >> tag >> version >> kind >> delta_s >> n >> k >> tol_s >> count) ||
        tag != "GSAMPLE" || version != "v1")
        throw std::runtime_error("load_sampling_set: bad header");
    SamplingSet set{LieGroupSpec::from_kind_name(kind), parse_double(delta_s), n, k,
                    parse_double(tol_s), {}, {}};
    const std::size_t dim = set.spec.rep_dim;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t wlen;
        if (!(in >> wlen)) throw std::runtime_error("load_sampling_set: truncated file");
        Word w(wlen);
        for (auto& f : w)
            if (!(in >> f.generator >> f.step)) throw std::runtime_error("load_sampling_set: bad word");
        DenseMatrix m(dim, dim);
        for (double& v : m.entries) {
            std::string tok;
            if (!(in >> tok)) throw std::runtime_error("load_sampling_set: bad matrix");
            v = parse_double(tok);
        }
        set.words.push_back(std::move(w));
        set.elements.push_back(std::move(m));
    }
    return set;
}

inline SamplingSet load_sampling_set_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_sampling_set_file: cannot open " + path);
    return load_sampling_set(f);
}

} // namespace lgc
