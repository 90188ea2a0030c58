#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lgc/interpolation.hpp"
#include "lgc/rng.hpp"

using namespace lgc;

namespace {

// Independent 3x3 solve for triangle barycentric coordinates via Cramer's rule.
std::array<double, 3> triangle_bary_oracle(const double (&tri)[3][2], const double (&q)[2]) {
    const double a = tri[0][0] - tri[2][0], b = tri[1][0] - tri[2][0];
    const double c = tri[0][1] - tri[2][1], d = tri[1][1] - tri[2][1];
    const double det = a * d - b * c;
    const double l0 = ((q[0] - tri[2][0]) * d - (q[1] - tri[2][1]) * b) / det;
    const double l1 = (-(q[0] - tri[2][0]) * c + (q[1] - tri[2][1]) * a) / det;
    return {l0, l1, 1.0 - l0 - l1};
}

} // namespace

TEST_CASE("barycentric exact hit short-circuits") {
    std::vector<double> candidates{0, 0, 1, 0, 0, 1, 1, 1};
    InterpContext ctx(candidates, 2);
    auto res = barycentric(ctx, std::vector<double>{1, 0}, 3);
    REQUIRE(res.indices.size() == 1);
    REQUIRE(res.indices[0] == 1);
    REQUIRE(res.weights[0] == 1.0);
    REQUIRE_FALSE(res.used_fallback);
}

TEST_CASE("barycentric midpoint of two 1D candidates") {
    std::vector<double> candidates{0.0, 1.0};
    InterpContext ctx(candidates, 1);
    auto res = barycentric(ctx, std::vector<double>{0.5}, 2);
    REQUIRE(res.weights.size() == 2);
    REQUIRE(res.weights[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(res.weights[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("barycentric triangle interior matches the independent solve") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        double tri[3][2];
        double det;
        do {
            for (auto& v : tri)
                for (double& c : v) c = rng.uniform(-2, 2);
            det = (tri[0][0] - tri[2][0]) * (tri[1][1] - tri[2][1]) -
                  (tri[1][0] - tri[2][0]) * (tri[0][1] - tri[2][1]);
        } while (std::abs(det) < 0.3);
        // strictly interior point from a normalized positive combination
        double w0 = rng.uniform(0.1, 1), w1 = rng.uniform(0.1, 1), w2 = rng.uniform(0.1, 1);
        const double ws = w0 + w1 + w2;
        w0 /= ws;
        w1 /= ws;
        w2 /= ws;
        const double q[2] = {w0 * tri[0][0] + w1 * tri[1][0] + w2 * tri[2][0],
                             w0 * tri[0][1] + w1 * tri[1][1] + w2 * tri[2][1]};

        std::vector<double> candidates;
        for (auto& v : tri) candidates.insert(candidates.end(), {v[0], v[1]});
        InterpContext ctx(candidates, 2);
        auto res = barycentric(ctx, std::vector<double>{q[0], q[1]}, 3);
        REQUIRE_FALSE(res.used_fallback);

        auto expected = triangle_bary_oracle(tri, q);
        double sum = 0.0, qx = 0.0, qy = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(res.weights[j] == Catch::Approx(expected[res.indices[j]]).margin(1e-10));
            sum += res.weights[j];
            qx += res.weights[j] * candidates[2 * res.indices[j]];
            qy += res.weights[j] * candidates[2 * res.indices[j] + 1];
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(qx == Catch::Approx(q[0]).margin(1e-10));
        REQUIRE(qy == Catch::Approx(q[1]).margin(1e-10));
    }
}

TEST_CASE("barycentric reproduces affine functions when the solve succeeds") {
    Rng rng(67);
    for (int trial = 0; trial < 50; ++trial) {
        // scattered candidate cloud in 3D
        std::vector<double> candidates;
        for (int i = 0; i < 30; ++i)
            for (int a = 0; a < 3; ++a) candidates.push_back(rng.uniform(-1, 1));
        InterpContext ctx(candidates, 3);

        const double c0 = rng.uniform(-2, 2), c1 = rng.uniform(-2, 2), c2 = rng.uniform(-2, 2),
                     d = rng.uniform(-2, 2);
        std::vector<double> values(30);
        for (int i = 0; i < 30; ++i)
            values[i] = c0 * candidates[3 * i] + c1 * candidates[3 * i + 1] +
                        c2 * candidates[3 * i + 2] + d;

        std::vector<double> q{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                              rng.uniform(-0.5, 0.5)};
        auto res = barycentric(ctx, q, 4);
        if (res.used_fallback) continue; // guard path gives no exactness claim
        const double got = interpolate_signal(res, values);
        const double expected = c0 * q[0] + c1 * q[1] + c2 * q[2] + d;
        REQUIRE(got == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("barycentric falls back on rank-deficient geometry") {
    // collinear candidates cannot span affine functions of the plane
    std::vector<double> candidates{0, 0, 1, 0, 2, 0, 3, 0};
    InterpContext ctx(candidates, 2);
    auto res = barycentric(ctx, std::vector<double>{1.2, 0.7}, 3);
    REQUIRE(res.used_fallback);
    double sum = 0.0;
    for (double w : res.weights) {
        REQUIRE(w > 0.0);
        sum += w;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("barycentric guard rejects violent extrapolation") {
    // query far outside the hull of a tight cluster
    std::vector<double> candidates{0, 0, 0.1, 0, 0, 0.1, 0.1, 0.1};
    InterpContext ctx(candidates, 2);
    auto res = barycentric(ctx, std::vector<double>{5.0, 5.0}, 3);
    REQUIRE(res.used_fallback);
}

TEST_CASE("barycentric input validation") {
    std::vector<double> candidates{0, 0, 1, 0};
    InterpContext ctx(candidates, 2);
    REQUIRE_THROWS_AS(barycentric(ctx, std::vector<double>{0.5, 0.5}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(barycentric(ctx, std::vector<double>{0.5, 0.5}, 3), std::invalid_argument);
}

TEST_CASE("inverse distance weights") {
    std::vector<double> candidates{0.0, 3.0};
    InterpContext ctx(candidates, 1);

    auto hit = inverse_distance(ctx, std::vector<double>{3.0}, 2);
    REQUIRE(hit.indices == std::vector<std::size_t>{1});
    REQUIRE(hit.weights == std::vector<double>{1.0});

    // distances 1 and 2 with power 1 normalize {1, 1/2}
    auto res = inverse_distance(ctx, std::vector<double>{1.0}, 2, 1.0);
    REQUIRE(res.weights[0] == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(res.weights[1] == Catch::Approx(1.0 / 3.0).margin(1e-12));

    // equal distances split evenly for any power
    auto mid = inverse_distance(ctx, std::vector<double>{1.5}, 2, 2.7);
    REQUIRE(mid.weights[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(mid.weights[1] == Catch::Approx(0.5).margin(1e-12));

    REQUIRE_THROWS_AS(inverse_distance(ctx, std::vector<double>{1.0}, 3), std::invalid_argument);
}

TEST_CASE("interpolate_signal basics and linearity") {
    InterpResult unit{{2}, {1.0}, false};
    std::vector<double> values{5, 6, 7, 8};
    REQUIRE(interpolate_signal(unit, values) == 7.0);

    InterpResult uniform{{0, 1, 2, 3}, {0.25, 0.25, 0.25, 0.25}, false};
    std::vector<double> constant{3.5, 3.5, 3.5, 3.5};
    REQUIRE(interpolate_signal(uniform, constant) == Catch::Approx(3.5).margin(1e-15));

    Rng rng(5);
    std::vector<double> u(4), v(4);
    for (auto& x : u) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const double a = 1.3, b = -0.7;
    std::vector<double> combo(4);
    for (int i = 0; i < 4; ++i) combo[i] = a * u[i] + b * v[i];
    REQUIRE(interpolate_signal(uniform, combo) ==
            Catch::Approx(a * interpolate_signal(uniform, u) + b * interpolate_signal(uniform, v))
                .margin(1e-12));

    InterpResult bad{{9}, {1.0}, false};
    REQUIRE_THROWS_AS(interpolate_signal(bad, values), std::out_of_range);
}

TEST_CASE("interpolation determinism including ties") {
    std::vector<double> candidates{1, 0, -1, 0, 0, 1, 0, -1};
    InterpContext ctx(candidates, 2);
    auto a = barycentric(ctx, std::vector<double>{0.01, 0.0}, 3);
    auto b = barycentric(ctx, std::vector<double>{0.01, 0.0}, 3);
    REQUIRE(a.indices == b.indices);
    REQUIRE(a.weights == b.weights);
}
