#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "lgc/sampling_set.hpp"

using namespace lgc;

namespace {

constexpr double kPi = std::numbers::pi;

// Axis-angle extraction through atan2 of the skew part: an independent route
// to the rotation angle of a^T b.
double so3_log_norm_oracle(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix rel = a.transpose() * b;
    const double sx = 0.5 * (rel.at(2, 1) - rel.at(1, 2));
    const double sy = 0.5 * (rel.at(0, 2) - rel.at(2, 0));
    const double sz = 0.5 * (rel.at(1, 0) - rel.at(0, 1));
    const double s = std::sqrt(sx * sx + sy * sy + sz * sz);
    const double c = 0.5 * (rel.at(0, 0) + rel.at(1, 1) + rel.at(2, 2) - 1.0);
    return std::atan2(s, c);
}

} // namespace

TEST_CASE("generator catalogs") {
    auto so2 = LieGroupSpec::so2();
    REQUIRE(so2.generators.size() == 1);
    auto so3 = LieGroupSpec::so3();
    REQUIRE(so3.generators.size() == 3);
    auto t3 = LieGroupSpec::translation(3);
    REQUIRE(t3.generators.size() == 3);

    for (const auto& g : so3.generators) {
        REQUIRE(max_abs_diff(g.transpose(), -1.0 * g) < 1e-14);
    }
}

TEST_CASE("sample_base element counts") {
    auto so2 = sample_base(LieGroupSpec::so2(), kPi / 18.0, 6);
    REQUIRE(so2.size() == 13); // 2N + 1 with one generator

    auto so3 = sample_base(LieGroupSpec::so3(), kPi / 18.0, 6);
    REQUIRE(so3.size() == 37); // 3 * 12 + shared identity

    auto t2 = sample_base(LieGroupSpec::translation(2), 1.0, 1);
    REQUIRE(t2.size() == 5); // identity and unit shifts

    REQUIRE_THROWS_AS(sample_base(LieGroupSpec::so2(), 0.0, 6), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_base(LieGroupSpec::so2(), 0.1, 0), std::invalid_argument);
}

TEST_CASE("sample_base dedups across the cut locus") {
    // N delta = pi: the +pi and -pi rotations coincide.
    auto set = sample_base(LieGroupSpec::so2(), 2.0 * kPi / 16.0, 8);
    REQUIRE(set.size() == 16);
    std::size_t identity_count = 0;
    for (const auto& w : set.words)
        if (w.empty()) ++identity_count;
    REQUIRE(identity_count == 1);
    REQUIRE(set.words[0].empty());
}

TEST_CASE("sampling set elements are orthogonal") {
    auto set = extend_monomials(sample_base(LieGroupSpec::so3(), kPi / 9.0, 3), 2);
    for (const auto& g : set.elements)
        REQUIRE(max_abs_diff(g.transpose() * g, DenseMatrix::identity(3)) < 1e-10);
}

TEST_CASE("extend_monomials with k = 1 returns the base unchanged") {
    auto base = sample_base(LieGroupSpec::so2(), 0.25, 3);
    auto ext = extend_monomials(base, 1);
    REQUIRE(ext.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        REQUIRE(max_abs_diff(ext.elements[i], base.elements[i]) == 0.0);
}

TEST_CASE("extend_monomials SO2 order-2 brute force") {
    auto base = sample_base(LieGroupSpec::so2(), 0.3, 1);
    auto ext = extend_monomials(base, 2, 1e-9);
    REQUIRE(ext.size() == 5);

    // brute-force product enumeration with angle dedup
    std::set<long long> expected_angles;
    const double base_angles[3] = {-0.3, 0.0, 0.3};
    for (double a : base_angles)
        for (double b : base_angles)
            expected_angles.insert(std::llround((a + b) * 1e9));
    REQUIRE(expected_angles.size() == 5);
    for (const auto& g : ext.elements) {
        const long long key = std::llround(so2_angle(g) * 1e9);
        REQUIRE(expected_angles.count(key) == 1);
    }
}

TEST_CASE("extend_monomials SO3 regression golden") {
    auto base = sample_base(LieGroupSpec::so3(), kPi / 18.0, 6);
    auto ext = extend_monomials(base, 3, 1e-6);
    REQUIRE(ext.size() == 22138); // recorded after first computation
}

TEST_CASE("monomial words respect the order bound and shortest-word provenance") {
    auto base = sample_base(LieGroupSpec::so2(), 0.3, 2);
    auto ext = extend_monomials(base, 3, 1e-9);
    for (std::size_t i = 0; i < ext.size(); ++i) {
        REQUIRE(ext.words[i].size() <= 3);
        // the word reproduces the element
        DenseMatrix prod = DenseMatrix::identity(2);
        for (const auto& f : ext.words[i])
            prod = prod * mat_exp(ext.spec.generators[f.generator], ext.delta * f.step);
        REQUIRE(max_abs_diff(prod, ext.elements[i]) < 1e-12);
    }
}

TEST_CASE("nesting: the order-k set is a prefix of the order-k' set") {
    auto base = sample_base(LieGroupSpec::so3(), kPi / 9.0, 2);
    auto k2 = extend_monomials(base, 2);
    auto k3 = extend_monomials(base, 3);
    REQUIRE(k3.size() >= k2.size());
    for (std::size_t i = 0; i < k2.size(); ++i)
        REQUIRE(max_abs_diff(k2.elements[i], k3.elements[i]) == 0.0);
}

TEST_CASE("resolution refinement keeps coarse elements") {
    const double delta = 0.4;
    const std::size_t n = 3, h = 2;
    for (auto spec : {LieGroupSpec::so2(), LieGroupSpec::so3()}) {
        auto coarse = sample_base(spec, delta, n);
        auto fine = sample_base(spec, delta / h, h * n);
        for (const auto& g : coarse.elements) {
            double best = 1e300;
            for (const auto& f : fine.elements)
                best = std::min(best, geodesic_distance(spec, g, f));
            REQUIRE(best <= 1e-9);
        }
    }
}

TEST_CASE("geodesic distance basics") {
    auto so2 = LieGroupSpec::so2();
    auto rot = [&](double t) { return mat_exp(so2.generators[0], t); };
    REQUIRE(geodesic_distance(so2, rot(0.7), rot(0.7)) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(geodesic_distance(so2, rot(0.2), rot(-0.3)) == Catch::Approx(0.5).margin(1e-12));
    // wraps to [0, pi]
    REQUIRE(geodesic_distance(so2, rot(3.0), rot(-3.0)) ==
            Catch::Approx(2.0 * kPi - 6.0).margin(1e-12));
}

TEST_CASE("SO3 geodesic matches the log-map oracle") {
    Rng rng(17);
    auto so3 = LieGroupSpec::so3();
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_rotation(rng);
        auto b = random_rotation(rng);
        const double got = geodesic_distance(so3, a, b);
        REQUIRE(got == Catch::Approx(so3_log_norm_oracle(a, b)).margin(1e-9));
    }
}

TEST_CASE("geodesic symmetry and triangle inequality on random triples") {
    Rng rng(29);
    auto so3 = LieGroupSpec::so3();
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_rotation(rng);
        auto b = random_rotation(rng);
        auto c = random_rotation(rng);
        const double ab = geodesic_distance(so3, a, b);
        const double ba = geodesic_distance(so3, b, a);
        const double bc = geodesic_distance(so3, b, c);
        const double ac = geodesic_distance(so3, a, c);
        REQUIRE(ab == Catch::Approx(ba).margin(1e-9));
        REQUIRE(ac <= ab + bc + 1e-9);
    }
}

TEST_CASE("translation geodesic is the Euclidean offset distance") {
    auto t2 = LieGroupSpec::translation(2);
    auto shift = [&](double x, double y) {
        DenseMatrix g = DenseMatrix::identity(3);
        g.at(0, 2) = x;
        g.at(1, 2) = y;
        return g;
    };
    REQUIRE(geodesic_distance(t2, shift(1, 0), shift(0, 0)) == Catch::Approx(1.0));
    REQUIRE(geodesic_distance(t2, shift(3, 4), shift(0, 0)) == Catch::Approx(5.0));
}

TEST_CASE("covering radius of a singleton probed at itself is zero") {
    auto set = sample_base(LieGroupSpec::so2(), 0.5, 1);
    SamplingSet singleton = set;
    singleton.elements = {set.elements[0]};
    singleton.words = {set.words[0]};
    REQUIRE(covering_radius(singleton, {set.elements[0]}) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE_THROWS_AS(covering_radius(singleton, {}), std::invalid_argument);
}

TEST_CASE("covering radius of equally spaced SO2 rotations") {
    const std::size_t m = 12;
    auto set = sample_base(LieGroupSpec::so2(), 2.0 * kPi / m, m / 2);
    REQUIRE(set.size() == m);
    auto probes = so2_probes(3600);
    const double r = covering_radius(set, probes);
    REQUIRE(r == Catch::Approx(kPi / m).margin(2.0 * kPi / 3600.0 + 1e-12));
    REQUIRE(so2_covering_radius_exact(set) == Catch::Approx(kPi / m).margin(1e-12));
}

TEST_CASE("covering radius is antitone under set inclusion") {
    Rng rng(41);
    auto probes = so3_probes(2000);
    auto base = sample_base(LieGroupSpec::so3(), kPi / 12.0, 4);
    auto k1 = extend_monomials(base, 1);
    auto k2 = extend_monomials(base, 2);
    const double r1 = covering_radius(k1, probes);
    const double r2 = covering_radius(k2, probes);
    REQUIRE(r2 <= r1 + 1e-9);

    // randomized nested pairs: drop elements to build a subset
    for (int trial = 0; trial < 5; ++trial) {
        SamplingSet sub = k2;
        sub.elements.clear();
        sub.words.clear();
        for (std::size_t i = 0; i < k2.size(); ++i) {
            if (i == 0 || rng.uniform01() < 0.6) {
                sub.elements.push_back(k2.elements[i]);
                sub.words.push_back(k2.words[i]);
            }
        }
        REQUIRE(covering_radius(k2, probes) <= covering_radius(sub, probes) + 1e-9);
    }
}

TEST_CASE("bandwidth sweep is monotone under delta halving") {
    auto so2 = LieGroupSpec::so2();
    auto probes = so2_probes(2000);
    auto rows = bandwidth_sweep(so2, {0.4, 0.2, 0.1}, 0.8, 1, probes);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 1; i < rows.size(); ++i)
        REQUIRE(rows[i].covering <= rows[i - 1].covering + 1e-9);

    // single delta equal to the range reduces to the base covering radius
    auto single = bandwidth_sweep(so2, {0.8}, 0.8, 1, probes);
    auto base = sample_base(so2, 0.8, 1);
    REQUIRE(single[0].covering == Catch::Approx(covering_radius(base, probes)).margin(1e-12));

    REQUIRE_THROWS_AS(bandwidth_sweep(so2, {0.3}, 0.8, 1, probes), std::invalid_argument);
}

TEST_CASE("SO3 bandwidth sweep regression goldens") {
    auto probes = so3_probes(4000);
    auto rows = bandwidth_sweep(LieGroupSpec::so3(), {kPi / 9.0, kPi / 18.0}, kPi / 3.0, 2, probes);
    REQUIRE(rows[1].covering <= rows[0].covering + 1e-9);
    REQUIRE(rows[0].set_size == 253);  // recorded after first computation
    REQUIRE(rows[1].set_size == 961);
}

TEST_CASE("sampling set serialization round-trip") {
    auto set = extend_monomials(sample_base(LieGroupSpec::so3(), kPi / 9.0, 2), 2);
    std::ostringstream out;
    save_sampling_set(set, out);
    std::istringstream in(out.str());
    auto loaded = load_sampling_set(in);
    REQUIRE(loaded.size() == set.size());
    REQUIRE(loaded.delta == set.delta);
    REQUIRE(loaded.order_k == set.order_k);
    for (std::size_t i = 0; i < set.size(); ++i) {
        REQUIRE(max_abs_diff(loaded.elements[i], set.elements[i]) == 0.0);
        REQUIRE(loaded.words[i].size() == set.words[i].size());
    }
    std::ostringstream out2;
    save_sampling_set(loaded, out2);
    REQUIRE(out.str() == out2.str());
}
