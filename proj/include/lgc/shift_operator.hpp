#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lgc/interpolation.hpp"
#include "lgc/parallel.hpp"
#include "lgc/sampling_set.hpp"

namespace lgc {

/// Axis-aligned periodic identification of the domain box: transformed points
/// are wrapped back into [lo, lo + length) per axis before interpolation.
/// Lattice translations on such a box map the sampling onto itself exactly.
struct PeriodicBox {
    std::vector<double> lo;
    std::vector<double> length;
};

enum class PerturbMode { AdditiveDiagonal, Multiplicative };

/// Induced-transformation operator for one group element: every domain point
/// x_i is interpolated against the transformed point set T_g X, and the
/// resulting stencil becomes row i. Rows built through the fallback path are
/// flagged. (T f)(i) approximates f(T_g^{-1} x_i).
inline std::pair<SparseMatrix, std::vector<std::uint8_t>> build_operator_flagged(
    const LieGroupSpec& spec, const GroupElement& g, const DomainSampling& domain,
    const InterpConfig& interp, const std::optional<PeriodicBox>& periodic = std::nullopt) {
    const std::size_t n = domain.size();
    const std::size_t dim = domain.dim();
    if (n == 0) throw std::invalid_argument("build_operator: empty domain");
    if (dim != spec.space_dim)
        throw std::invalid_argument("build_operator: domain dimension does not match group action");

    std::vector<double> transformed(n * dim);
    std::vector<double> buf(dim);
    for (std::size_t i = 0; i < n; ++i) {
        spec.apply_action(g, domain.point(i), buf);
        if (periodic) {
            for (std::size_t a = 0; a < dim; ++a) {
                double y = std::fmod(buf[a] - periodic->lo[a], periodic->length[a]);
                if (y < 0.0) y += periodic->length[a];
                buf[a] = periodic->lo[a] + y;
            }
        }
        std::copy(buf.begin(), buf.end(), transformed.begin() + i * dim);
    }

    InterpContext ctx(std::move(transformed), dim);
    SparseMatrix op(n, n);
    std::vector<std::uint8_t> flags(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        InterpResult res = interpolate(ctx, domain.point(i), interp);
        for (std::size_t j = 0; j < res.indices.size(); ++j)
            op.add(i, res.indices[j], res.weights[j]);
        flags[i] = res.used_fallback ? 1 : 0;
    }
    op.compress();
    return {std::move(op), std::move(flags)};
}

inline SparseMatrix build_operator(const LieGroupSpec& spec, const GroupElement& g,
                                   const DomainSampling& domain, const InterpConfig& interp,
                                   const std::optional<PeriodicBox>& periodic = std::nullopt) {
    return build_operator_flagged(spec, g, domain, interp, periodic).first;
}

/// Description of how the bank's domain was generated, recorded as ordered
/// key/value metadata so rebuilt banks serialize identically.
using MetaEntries = std::vector<std::pair<std::string, std::string>>;

/// All induced-transformation operators of a sampling set over one domain
/// sampling, index-aligned with the set's elements. Immutable after
/// construction; operators are shareable for concurrent products.
struct OperatorBank {
    SamplingSet set;
    std::size_t domain_size = 0;
    InterpConfig interp;
    std::optional<PeriodicBox> periodic;
    std::uint64_t build_seed = 0;
    MetaEntries domain_meta;
    std::vector<SparseMatrix> operators;
    std::vector<std::vector<std::uint8_t>> row_flags;

    std::size_t size() const { return operators.size(); }
};

/// Builds every operator of the sampling set (parallel over elements, output
/// deterministic for fixed inputs).
inline OperatorBank build_bank(const SamplingSet& set, const DomainSampling& domain,
                               const InterpConfig& interp,
                               const std::optional<PeriodicBox>& periodic = std::nullopt,
                               std::uint64_t build_seed = 0, MetaEntries domain_meta = {}) {
    OperatorBank bank;
    bank.set = set;
    bank.domain_size = domain.size();
    bank.interp = interp;
    bank.periodic = periodic;
    bank.build_seed = build_seed;
    bank.domain_meta = std::move(domain_meta);
    bank.operators.resize(set.size());
    bank.row_flags.resize(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
        auto [op, flags] = build_operator_flagged(set.spec, set.elements[i], domain, interp, periodic);
        bank.operators[i] = std::move(op);
        bank.row_flags[i] = std::move(flags);
    });
    return bank;
}

/// Index of the identity element inside the bank's sampling set.
inline std::size_t identity_index(const OperatorBank& bank) {
    for (std::size_t i = 0; i < bank.set.size(); ++i)
        if (bank.set.words[i].empty()) return i;
    throw std::logic_error("identity_index: sampling set has no identity");
}

/// Perturbation of a shift operator with a random diagonal Q0 whose entries
/// are iid uniform in [-eps, eps]: additive gives Q0 + T, multiplicative
/// gives (I + Q0) T. eps = 0 returns the operator unchanged.
inline SparseMatrix perturb(const SparseMatrix& op, double eps, PerturbMode mode, Rng& rng) {
    if (eps < 0.0) throw std::invalid_argument("perturb: eps must be >= 0");
    if (op.rows() != op.cols()) throw std::invalid_argument("perturb: operator must be square");
    if (eps == 0.0) return op;
    const std::size_t n = op.rows();
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = rng.uniform(-eps, eps);

    SparseMatrix out(n, n);
    const auto row_ptr = op.row_ptr();
    const auto col_idx = op.col_idx();
    const auto values = op.values();
    if (mode == PerturbMode::AdditiveDiagonal) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::uint32_t kk = row_ptr[i]; kk < row_ptr[i + 1]; ++kk)
                out.add(i, col_idx[kk], values[kk]);
            out.add(i, i, diag[i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = 1.0 + diag[i];
            for (std::uint32_t kk = row_ptr[i]; kk < row_ptr[i + 1]; ++kk)
                out.add(i, col_idx[kk], scale * values[kk]);
        }
    }
    out.compress();
    return out;
}

/// Bank directory layout: `bank.meta` text header, `rowflags.txt`, and one
/// `op_<index>.sparseop` file per element. Rebuilding with identical inputs
/// reproduces the directory byte for byte.
inline void save_bank(const OperatorBank& bank, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream meta(fs::path(dir) / "bank.meta", std::ios::binary);
        if (!meta) throw std::runtime_error("save_bank: cannot write bank.meta");
        meta << "BANK v1\n";
        meta << "group " << bank.set.spec.kind_name() << '\n';
        meta << "delta " << shortest_double(bank.set.delta) << '\n';
        meta << "range_n " << bank.set.range_n << '\n';
        meta << "order_k " << bank.set.order_k << '\n';
        meta << "dedup_tol " << shortest_double(bank.set.dedup_tol) << '\n';
        for (const auto& [key, value] : bank.domain_meta) meta << key << ' ' << value << '\n';
        meta << "interp " << interp_name(bank.interp.scheme) << '\n';
        meta << "interp_k " << bank.interp.k << '\n';
        meta << "idw_power " << shortest_double(bank.interp.idw_power) << '\n';
        meta << "lambda_max " << shortest_double(bank.interp.lambda_max) << '\n';
        if (bank.periodic) {
            meta << "periodic";
            for (std::size_t a = 0; a < bank.periodic->lo.size(); ++a)
                meta << ' ' << shortest_double(bank.periodic->lo[a]) << ' '
                     << shortest_double(bank.periodic->length[a]);
            meta << '\n';
        }
        meta << "build_seed " << bank.build_seed << '\n';
        meta << "domain_size " << bank.domain_size << '\n';
        meta << "operators " << bank.size() << '\n';
    }
    {
        std::ofstream gs(fs::path(dir) / "group.gsample", std::ios::binary);
        save_sampling_set(bank.set, gs);
    }
    {
        std::ofstream flags(fs::path(dir) / "rowflags.txt", std::ios::binary);
        for (std::size_t i = 0; i < bank.size(); ++i) {
            flags << i << ' ';
            for (auto f : bank.row_flags[i]) flags << (f ? '1' : '0');
            flags << '\n';
        }
    }
    for (std::size_t i = 0; i < bank.size(); ++i)
        bank.operators[i].save_file((fs::path(dir) / ("op_" + std::to_string(i) + ".sparseop")).string());
}

inline OperatorBank load_bank(const std::string& dir) {
    namespace fs = std::filesystem;
    OperatorBank bank;
    std::size_t op_count = 0;
    {
        std::ifstream meta(fs::path(dir) / "bank.meta", std::ios::binary);
        if (!meta) throw std::runtime_error("load_bank: cannot open bank.meta in " + dir);
        std::string line;
        if (!std::getline(meta, line) || line != "BANK v1")
            throw std::runtime_error("load_bank: bad bank.meta header");
        while (std::getline(meta, line)) {
            std::istringstream ls(line);
            std::string key;
            if (!(ls >> key)) continue;
            if (key == "interp") {
                std::string v;
                ls >> v;
                bank.interp.scheme = interp_from_name(v);
            } else if (key == "interp_k") {
                ls >> bank.interp.k;
            } else if (key == "idw_power") {
                std::string v;
                ls >> v;
                bank.interp.idw_power = parse_double(v);
            } else if (key == "lambda_max") {
                std::string v;
                ls >> v;
                bank.interp.lambda_max = parse_double(v);
            } else if (key == "periodic") {
                PeriodicBox box;
                std::string lo, len;
                while (ls >> lo >> len) {
                    box.lo.push_back(parse_double(lo));
                    box.length.push_back(parse_double(len));
                }
                bank.periodic = box;
            } else if (key == "build_seed") {
                ls >> bank.build_seed;
            } else if (key == "domain_size") {
                ls >> bank.domain_size;
            } else if (key == "operators") {
                ls >> op_count;
            } else if (key == "group" || key == "delta" || key == "range_n" || key == "order_k" ||
                       key == "dedup_tol") {
                // group parameters come from group.gsample
            } else {
                std::string rest;
                std::getline(ls, rest);
                if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
                bank.domain_meta.emplace_back(key, rest);
            }
        }
    }
    bank.set = load_sampling_set_file((fs::path(dir) / "group.gsample").string());
    {
        std::ifstream flags(fs::path(dir) / "rowflags.txt", std::ios::binary);
        if (!flags) throw std::runtime_error("load_bank: cannot open rowflags.txt in " + dir);
        std::string line;
        while (std::getline(flags, line)) {
            std::istringstream ls(line);
            std::size_t idx;
            std::string bits;
            if (!(ls >> idx >> bits)) continue;
            bank.row_flags.resize(std::max(bank.row_flags.size(), idx + 1));
            std::vector<std::uint8_t> row(bits.size());
            for (std::size_t i = 0; i < bits.size(); ++i) row[i] = bits[i] == '1' ? 1 : 0;
            bank.row_flags[idx] = std::move(row);
        }
    }
    bank.operators.reserve(op_count);
    for (std::size_t i = 0; i < op_count; ++i)
        bank.operators.push_back(
            SparseMatrix::load_file((fs::path(dir) / ("op_" + std::to_string(i) + ".sparseop")).string()));
    if (bank.operators.size() != bank.set.size())
        throw std::runtime_error("load_bank: operator count does not match sampling set");
    return bank;
}

} // namespace lgc
