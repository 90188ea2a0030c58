#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lgc/shift_operator.hpp"

namespace lgc {

/// Learnable filter taps: one real coefficient per (group element, input
/// channel, output channel), stored element-major so the per-element
/// channel block is contiguous.
struct FilterCoefficients {
    std::size_t elements = 0;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::vector<double> values; // [g][ci][co]

    FilterCoefficients() = default;
    FilterCoefficients(std::size_t e, std::size_t ci, std::size_t co)
        : elements(e), in_channels(ci), out_channels(co), values(e * ci * co, 0.0) {}

    double& at(std::size_t g, std::size_t ci, std::size_t co) {
        return values[(g * in_channels + ci) * out_channels + co];
    }
    double at(std::size_t g, std::size_t ci, std::size_t co) const {
        return values[(g * in_channels + ci) * out_channels + co];
    }
};

/// rho(a) f = sum_g a(g) T_g f, extended over channel pairs:
/// out[co] = sum_ci sum_g a(g, ci, co) T_g f[ci]. Linear in both arguments.
inline DiscreteSignal apply(const FilterCoefficients& coeffs, const OperatorBank& bank,
                            const DiscreteSignal& f) {
    if (coeffs.elements != bank.size())
        throw std::invalid_argument("apply: coefficient count does not match bank");
    if (f.channels != coeffs.in_channels)
        throw std::invalid_argument("apply: signal channels do not match coefficients");
    if (f.points() != bank.domain_size)
        throw std::invalid_argument("apply: signal length does not match bank domain");

    const std::size_t n = bank.domain_size;
    DiscreteSignal out(n, coeffs.out_channels);
    std::vector<double> shifted(n);
    for (std::size_t ci = 0; ci < coeffs.in_channels; ++ci) {
        const auto fc = f.channel(ci);
        for (std::size_t g = 0; g < bank.size(); ++g) {
            bank.operators[g].multiply(fc, shifted);
            for (std::size_t co = 0; co < coeffs.out_channels; ++co) {
                const double a = coeffs.at(g, ci, co);
                if (a == 0.0) continue;
                auto oc = out.channel(co);
                for (std::size_t i = 0; i < n; ++i) oc[i] += a * shifted[i];
            }
        }
    }
    return out;
}

/// True when every operator is an exact permutation matrix (each row and
/// column holding a single entry equal to 1 up to 1e-12): the domain maps
/// onto itself under every sampled element.
inline bool exact_permutation_bank(const OperatorBank& bank) {
    for (const auto& op : bank.operators) {
        if (op.nnz() != op.rows()) return false;
        std::vector<std::uint8_t> col_seen(op.cols(), 0);
        for (std::size_t i = 0; i < op.rows(); ++i) {
            if (op.row_nnz(i) != 1) return false;
            const auto k = op.row_ptr()[i];
            if (std::abs(op.values()[k] - 1.0) > 1e-12) return false;
            if (col_seen[op.col_idx()[k]]++) return false;
        }
    }
    return true;
}

/// Locate a group element inside a sampling set by geodesic proximity.
inline std::optional<std::size_t> find_element(const SamplingSet& set, const GroupElement& g,
                                               double tol) {
    for (std::size_t i = 0; i < set.size(); ++i)
        if (geodesic_distance(set.spec, g, set.elements[i]) <= tol) return i;
    return std::nullopt;
}

enum class EquivarianceForm { Commutator, RightShift };

struct EquivarianceResult {
    double residual = 0.0;
    std::size_t dropped_terms = 0; // right-translated elements leaving the set
    bool exact_domain = false;     // permutation bank; residual is exact algebra
};

/// Commutator form: || rho(a) T_h f  -  T_h rho(a) f ||_2 (commutative groups).
/// Right-shift form: || rho(a) T_h f  -  rho(R_{h^-1} a) f ||_2 where the
/// reindexed coefficients b(g h) = a(g); terms whose translated element falls
/// outside the sampled set are dropped and counted.
inline EquivarianceResult equivariance_residual(const FilterCoefficients& coeffs,
                                                const OperatorBank& bank, std::size_t h_index,
                                                const DiscreteSignal& f,
                                                EquivarianceForm form = EquivarianceForm::Commutator) {
    if (h_index >= bank.size()) throw std::invalid_argument("equivariance_residual: h out of range");
    EquivarianceResult out;
    out.exact_domain = exact_permutation_bank(bank);

    const auto& h_op = bank.operators[h_index];
    const std::size_t n = bank.domain_size;

    // T_h f, channel by channel
    DiscreteSignal thf(n, f.channels);
    for (std::size_t c = 0; c < f.channels; ++c) h_op.multiply(f.channel(c), thf.channel(c));
    DiscreteSignal lhs = apply(coeffs, bank, thf);

    DiscreteSignal rhs(n, coeffs.out_channels);
    if (form == EquivarianceForm::Commutator) {
        DiscreteSignal rf = apply(coeffs, bank, f);
        for (std::size_t c = 0; c < rhs.channels; ++c) h_op.multiply(rf.channel(c), rhs.channel(c));
    } else {
        const double tol = std::max(bank.set.dedup_tol, 1e-9);
        FilterCoefficients shifted(coeffs.elements, coeffs.in_channels, coeffs.out_channels);
        const GroupElement& h = bank.set.elements[h_index];
        for (std::size_t g = 0; g < bank.size(); ++g) {
            const GroupElement target = bank.set.elements[g] * h;
            if (auto j = find_element(bank.set, target, tol)) {
                for (std::size_t ci = 0; ci < coeffs.in_channels; ++ci)
                    for (std::size_t co = 0; co < coeffs.out_channels; ++co)
                        shifted.at(*j, ci, co) = coeffs.at(g, ci, co);
            } else {
                ++out.dropped_terms;
            }
        }
        rhs = apply(shifted, bank, f);
    }

    double s = 0.0;
    for (std::size_t i = 0; i < lhs.values.size(); ++i) {
        const double d = lhs.values[i] - rhs.values[i];
        s += d * d;
    }
    out.residual = std::sqrt(s);
    return out;
}

/// Triangle-inequality check on the filter realization, single-channel
/// coefficients: lhs = power-iteration norm of rho(a) - rho(b) assembled as a
/// single sparse matrix, rhs = sum |a - b| * max_g ||T_g||. lhs <= rhs + 1e-8.
inline std::pair<double, double> coefficient_norm_bound(const FilterCoefficients& a,
                                                        const FilterCoefficients& b,
                                                        const OperatorBank& bank,
                                                        std::size_t iterations = 200) {
    if (a.elements != bank.size() || b.elements != bank.size())
        throw std::invalid_argument("coefficient_norm_bound: coefficient count mismatch");
    if (a.in_channels != 1 || a.out_channels != 1 || b.in_channels != 1 || b.out_channels != 1)
        throw std::invalid_argument("coefficient_norm_bound: single-channel coefficients only");

    const std::size_t n = bank.domain_size;
    SparseMatrix diff(n, n);
    double sum_abs = 0.0;
    for (std::size_t g = 0; g < bank.size(); ++g) {
        const double c = a.values[g] - b.values[g];
        sum_abs += std::abs(c);
        if (c == 0.0) continue;
        const auto& op = bank.operators[g];
        for (std::size_t i = 0; i < n; ++i)
            for (std::uint32_t k = op.row_ptr()[i]; k < op.row_ptr()[i + 1]; ++k)
                diff.add(i, op.col_idx()[k], c * op.values()[k]);
    }
    diff.compress();
    const double lhs = diff.nnz() == 0 ? 0.0 : operator_norm_estimate(diff, iterations);

    double max_norm = 0.0;
    for (const auto& op : bank.operators)
        max_norm = std::max(max_norm, operator_norm_estimate(op, iterations));
    return {lhs, sum_abs * max_norm};
}

struct StabilityRow {
    double eps;
    double median_dev;
    double max_dev;
};

/// Filter-output deviation under the perturbation protocol: for each eps,
/// every bank operator receives a fresh iid diagonal Q0 (child stream
/// fork(eps_index * bank_size + g)), and || rho(a) f - rho_Q(a) f ||_2 is
/// collected over the evaluation signals. For the additive model the
/// difference equals sum_g a(g) Q0_g f, so the diagonals are aggregated per
/// channel pair once and applied elementwise; the multiplicative model goes
/// through the operators directly. At eps = 0 deviations are exactly zero.
inline std::vector<StabilityRow> stability_sweep(const FilterCoefficients& coeffs,
                                                 const OperatorBank& bank,
                                                 const std::vector<double>& eps_values,
                                                 PerturbMode mode, const Rng& rng,
                                                 const std::vector<DiscreteSignal>& eval_signals) {
    if (eps_values.empty()) throw std::invalid_argument("stability_sweep: empty eps list");
    if (!std::is_sorted(eps_values.begin(), eps_values.end()))
        throw std::invalid_argument("stability_sweep: eps values must be sorted ascending");
    if (coeffs.elements != bank.size())
        throw std::invalid_argument("stability_sweep: coefficient count mismatch");

    const std::size_t n = bank.domain_size;
    const std::size_t pairs = coeffs.in_channels * coeffs.out_channels;
    std::vector<StabilityRow> rows;

    for (std::size_t ei = 0; ei < eps_values.size(); ++ei) {
        const double eps = eps_values[ei];
        std::vector<double> devs;
        devs.reserve(eval_signals.size());

        if (eps == 0.0) {
            devs.assign(eval_signals.size(), 0.0);
        } else if (mode == PerturbMode::AdditiveDiagonal) {
            // D[ci][co] = sum_g a(g,ci,co) * diag_g, diag_g drawn as in perturb()
            std::vector<double> aggregated(pairs * n, 0.0);
            for (std::size_t g = 0; g < bank.size(); ++g) {
                Rng child = rng.fork(ei * bank.size() + g);
                for (std::size_t i = 0; i < n; ++i) {
                    const double q = child.uniform(-eps, eps);
                    const double* block = &coeffs.values[g * pairs];
                    for (std::size_t p = 0; p < pairs; ++p) aggregated[p * n + i] += block[p] * q;
                }
            }
            for (const auto& f : eval_signals) {
                double s = 0.0;
                DiscreteSignal diff(n, coeffs.out_channels);
                for (std::size_t co = 0; co < coeffs.out_channels; ++co) {
                    auto dc = diff.channel(co);
                    for (std::size_t ci = 0; ci < coeffs.in_channels; ++ci) {
                        const auto fc = f.channel(ci);
                        const double* d = &aggregated[(ci * coeffs.out_channels + co) * n];
                        for (std::size_t i = 0; i < n; ++i) dc[i] += d[i] * fc[i];
                    }
                }
                for (double v : diff.values) s += v * v;
                devs.push_back(std::sqrt(s));
            }
        } else {
            OperatorBank perturbed = bank;
            for (std::size_t g = 0; g < bank.size(); ++g) {
                Rng child = rng.fork(ei * bank.size() + g);
                perturbed.operators[g] = perturb(bank.operators[g], eps, mode, child);
            }
            for (const auto& f : eval_signals) {
                DiscreteSignal clean = apply(coeffs, bank, f);
                DiscreteSignal noisy = apply(coeffs, perturbed, f);
                double s = 0.0;
                for (std::size_t i = 0; i < clean.values.size(); ++i) {
                    const double d = clean.values[i] - noisy.values[i];
                    s += d * d;
                }
                devs.push_back(std::sqrt(s));
            }
        }

        std::vector<double> sorted = devs;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        const double median =
            m == 0 ? 0.0 : (m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]));
        rows.push_back(StabilityRow{eps, median, m == 0 ? 0.0 : sorted.back()});
    }
    return rows;
}

/// Coefficient serialization: `COEFFS v1 elements in out`, one value per line.
inline void save_coefficients(const FilterCoefficients& c, std::ostream& out) {
    out << "COEFFS v1 " << c.elements << ' ' << c.in_channels << ' ' << c.out_channels << '\n';
    for (double v : c.values) out << shortest_double(v) << '\n';
}

inline FilterCoefficients load_coefficients(std::istream& in) {
    std::string tag, version;
    std::size_t e, ci, co;
    if (!(in >> tag >> version >> e >> ci >> co) || tag != "COEFFS" || version != "v1")
        throw std::runtime_error("load_coefficients: bad header");
    FilterCoefficients c(e, ci, co);
    for (double& v : c.values) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("load_coefficients: truncated file");
        v = parse_double(tok);
    }
    return c;
}

} // namespace lgc
