#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "lgc/filter.hpp"
#include "lgc/shift_operator.hpp"

using namespace lgc;

namespace {

constexpr double kPi = std::numbers::pi;

DomainSampling circle_domain(std::size_t m) {
    std::vector<double> coords;
    for (std::size_t j = 0; j < m; ++j) {
        const double t = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(m);
        coords.push_back(std::cos(t));
        coords.push_back(std::sin(t));
    }
    return DomainSampling(std::move(coords), 2, DomainScheme::Custom);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("identity element yields the exact identity operator") {
    Rng rng(2);
    auto domain = make_uniform_domain(BoxBounds{{-1, -1, -1}, {1, 1, 1}}, 60, rng);
    auto spec = LieGroupSpec::so3();
    auto op = build_operator(spec, spec.identity_element(), domain, InterpConfig{});
    REQUIRE(op.nnz() == domain.size());
    DenseMatrix d = op.to_dense();
    REQUIRE(max_abs_diff(d, DenseMatrix::identity(domain.size())) == 0.0);
}

TEST_CASE("SO2 rotation on an equally spaced circle is a cyclic permutation") {
    const std::size_t m = 12;
    auto domain = circle_domain(m);
    auto spec = LieGroupSpec::so2();
    auto g = mat_exp(spec.generators[0], 2.0 * kPi / m);
    auto op = build_operator(spec, g, domain, InterpConfig{InterpScheme::Barycentric, 3});

    // brute-force construction: point j moves to slot j+1, so row i pulls
    // from index i-1
    REQUIRE(op.nnz() == m);
    DenseMatrix d = op.to_dense();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            REQUIRE(d.at(i, j) == ((j == (i + m - 1) % m) ? 1.0 : 0.0));
}

TEST_CASE("unit lattice step on a periodic 1D grid is the cyclic shift") {
    std::vector<double> coords;
    for (int i = 0; i < 8; ++i) coords.push_back(static_cast<double>(i));
    DomainSampling domain(std::move(coords), 1, DomainScheme::Custom);
    auto spec = LieGroupSpec::translation(1);
    auto g = mat_exp(spec.generators[0], 1.0);
    PeriodicBox box{{0.0}, {8.0}};
    auto op = build_operator(spec, g, domain, InterpConfig{InterpScheme::Barycentric, 2}, box);

    DenseMatrix d = op.to_dense();
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            REQUIRE(d.at(i, j) == ((j == (i + 7) % 8) ? 1.0 : 0.0));
}

TEST_CASE("composition on exact domains matches the group product") {
    const std::size_t m = 16;
    auto domain = circle_domain(m);
    auto spec = LieGroupSpec::so2();
    auto ga = mat_exp(spec.generators[0], 2.0 * kPi * 3 / m);
    auto gb = mat_exp(spec.generators[0], 2.0 * kPi * 5 / m);
    InterpConfig cfg{InterpScheme::Barycentric, 3};
    auto ta = build_operator(spec, ga, domain, cfg).to_dense();
    auto tb = build_operator(spec, gb, domain, cfg).to_dense();
    auto tab = build_operator(spec, ga * gb, domain, cfg).to_dense();
    REQUIRE(max_abs_diff(ta * tb, tab) == 0.0);
}

TEST_CASE("row sparsity stays within the interpolation k and row sums near 1") {
    Rng rng(5);
    auto domain = make_sphere_domain(2.0, 125, rng);
    auto base = sample_base(LieGroupSpec::so3(), kPi / 18.0, 1);
    REQUIRE(base.size() == 7);
    auto bank = build_bank(base, domain, InterpConfig{InterpScheme::Barycentric, 4});
    REQUIRE(bank.size() == 7);
    for (std::size_t g = 0; g < bank.size(); ++g) {
        const auto& op = bank.operators[g];
        for (std::size_t i = 0; i < op.rows(); ++i) {
            REQUIRE(op.row_nnz(i) <= 4);
            if (!bank.row_flags[g][i])
                REQUIRE(op.row_sum(i) == Catch::Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("bank of the singleton identity set") {
    Rng rng(8);
    auto domain = make_uniform_domain(BoxBounds{{-1, -1, -1}, {1, 1, 1}}, 30, rng);
    auto base = sample_base(LieGroupSpec::so3(), 0.3, 1);
    SamplingSet singleton = base;
    singleton.elements = {base.elements[0]};
    singleton.words = {base.words[0]};
    auto bank = build_bank(singleton, domain, InterpConfig{});
    REQUIRE(bank.size() == 1);
    REQUIRE(max_abs_diff(bank.operators[0].to_dense(), DenseMatrix::identity(30)) == 0.0);
    REQUIRE(identity_index(bank) == 0);
}

TEST_CASE("bank build is deterministic and serializes byte-identically") {
    Rng rng(3);
    auto domain = make_sphere_domain(2.0, 64, rng);
    auto set = sample_base(LieGroupSpec::so3(), kPi / 12.0, 1);
    auto bank1 = build_bank(set, domain, InterpConfig{}, std::nullopt, 3);
    auto bank2 = build_bank(set, domain, InterpConfig{}, std::nullopt, 3);

    namespace fs = std::filesystem;
    const auto dir1 = fs::temp_directory_path() / "lgc_bank_a";
    const auto dir2 = fs::temp_directory_path() / "lgc_bank_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    save_bank(bank1, dir1.string());
    save_bank(bank2, dir2.string());
    for (const auto& entry : fs::directory_iterator(dir1)) {
        const auto name = entry.path().filename();
        REQUIRE(slurp(entry.path()) == slurp(dir2 / name));
    }

    auto loaded = load_bank(dir1.string());
    REQUIRE(loaded.size() == bank1.size());
    REQUIRE(loaded.domain_size == bank1.domain_size);
    for (std::size_t g = 0; g < loaded.size(); ++g) {
        REQUIRE(loaded.operators[g].nnz() == bank1.operators[g].nnz());
        REQUIRE(max_abs_diff(loaded.operators[g].to_dense(), bank1.operators[g].to_dense()) == 0.0);
        REQUIRE(loaded.row_flags[g] == bank1.row_flags[g]);
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("perturb with eps 0 returns the operator unchanged") {
    Rng rng(1);
    auto op = SparseMatrix::identity(10);
    Rng child = rng.fork(0);
    auto same = perturb(op, 0.0, PerturbMode::AdditiveDiagonal, child);
    REQUIRE(same.nnz() == op.nnz());
    REQUIRE(max_abs_diff(same.to_dense(), op.to_dense()) == 0.0);
}

TEST_CASE("additive perturbation stays within the eps bound") {
    Rng rng(11);
    SparseMatrix op(20, 20);
    for (int e = 0; e < 60; ++e) op.add(rng.below(20), rng.below(20), rng.uniform(-1, 1));
    op.compress();
    Rng child(99);
    auto noisy = perturb(op, 0.1, PerturbMode::AdditiveDiagonal, child);
    DenseMatrix diff = noisy.to_dense() - op.to_dense();
    REQUIRE(diff.max_abs() <= 0.1);
    // off-diagonal entries untouched
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j)
            if (i != j) REQUIRE(diff.at(i, j) == 0.0);
}

TEST_CASE("multiplicative perturbation scales rows") {
    SparseMatrix op(4, 4);
    op.add(0, 1, 2.0);
    op.add(2, 3, -1.0);
    op.compress();
    Rng child(7);
    auto noisy = perturb(op, 0.5, PerturbMode::Multiplicative, child);
    // reproduce the diagonal draw
    Rng replay(7);
    std::vector<double> diag(4);
    for (double& d : diag) d = replay.uniform(-0.5, 0.5);
    DenseMatrix d = noisy.to_dense();
    REQUIRE(d.at(0, 1) == Catch::Approx((1.0 + diag[0]) * 2.0).margin(1e-15));
    REQUIRE(d.at(2, 3) == Catch::Approx((1.0 + diag[2]) * -1.0).margin(1e-15));
}

TEST_CASE("perturbation with a fixed seed is reproducible") {
    Rng rng(42);
    SparseMatrix op = SparseMatrix::identity(15);
    Rng c1 = rng.fork(5);
    Rng c2 = rng.fork(5);
    auto p1 = perturb(op, 0.05, PerturbMode::AdditiveDiagonal, c1);
    auto p2 = perturb(op, 0.05, PerturbMode::AdditiveDiagonal, c2);
    REQUIRE(max_abs_diff(p1.to_dense(), p2.to_dense()) == 0.0);
    REQUIRE_THROWS_AS(perturb(op, -0.1, PerturbMode::AdditiveDiagonal, c1), std::invalid_argument);
}

TEST_CASE("boundary rows fall back and are flagged") {
    // points on a line segment; a shift pushes queries outside the hull
    std::vector<double> coords;
    for (int i = 0; i < 10; ++i) coords.push_back(static_cast<double>(i));
    DomainSampling domain(std::move(coords), 1, DomainScheme::Custom);
    auto spec = LieGroupSpec::translation(1);
    auto g = mat_exp(spec.generators[0], 5.5);
    auto [op, flags] = build_operator_flagged(spec, g, domain, InterpConfig{InterpScheme::Barycentric, 2});
    bool any_flag = false;
    for (auto f : flags) any_flag |= (f != 0);
    REQUIRE(any_flag);
    // every row still carries weights that sum to 1 (interior interpolation
    // or inverse-distance fallback)
    for (std::size_t i = 0; i < op.rows(); ++i)
        REQUIRE(op.row_sum(i) == Catch::Approx(1.0).margin(1e-9));
}
