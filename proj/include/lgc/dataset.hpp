#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgc/domain.hpp"
#include "lgc/lie_group.hpp"

namespace lgc {

enum class KnotKind : int { Trefoil = 0, Listing = 1 };

/// Parametric curve sampled N times evenly at t = 2 pi i / N.
/// Trefoil: (cos t + 2 cos 2t, sin t - 2 sin 2t, -sin 3t).
/// Listing: ((2 + cos 2t) cos 3t, (2 + cos 2t) sin 3t, sin 4t).
inline std::vector<double> knot_curve(KnotKind kind, std::size_t n) {
    if (n < 3) throw std::invalid_argument("knot_curve: need at least 3 points");
    std::vector<double> pts;
    pts.reserve(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        if (kind == KnotKind::Trefoil) {
            pts.push_back(std::cos(t) + 2.0 * std::cos(2.0 * t));
            pts.push_back(std::sin(t) - 2.0 * std::sin(2.0 * t));
            pts.push_back(-std::sin(3.0 * t));
        } else {
            pts.push_back((2.0 + std::cos(2.0 * t)) * std::cos(3.0 * t));
            pts.push_back((2.0 + std::cos(2.0 * t)) * std::sin(3.0 * t));
            pts.push_back(std::sin(4.0 * t));
        }
    }
    return pts;
}

struct KnotSample {
    std::vector<double> points; // flat xyz
    int label = 0;
    GroupElement pose;
    double sigma = 0.0;
    std::uint64_t sample_seed = 0;

    PointCloud cloud() const {
        PointCloud c;
        c.coords = points;
        c.values.assign(points.size() / 3, 1.0);
        return c;
    }
};

struct KnotDatasetConfig {
    std::size_t points_per_knot = 200;
    std::size_t train_count = 120;
    std::size_t test_count = 140;
    double sigma_train = 0.01; // jitter standard deviation
    double sigma_test = 0.1;
    std::uint64_t seed = 0;
};

struct KnotDataset {
    std::vector<KnotSample> train;
    std::vector<KnotSample> test;
    KnotDatasetConfig config;
};

namespace detail {

/// Labels alternate so both classes appear in every prefix; counts per class
/// are exactly equal. Each sample owns a forked stream: the pose quaternion
/// is drawn first, then the jitter, so samples are reproducible in isolation.
inline KnotSample make_knot_sample(int label, double sigma, std::size_t points, const Rng& root,
                                   std::uint64_t uid) {
    Rng rng = root.fork(uid);
    KnotSample s;
    s.label = label;
    s.sigma = sigma;
    s.sample_seed = uid;
    s.pose = random_rotation(rng);
    s.points = knot_curve(static_cast<KnotKind>(label), points);
    std::vector<double> rotated(3);
    for (std::size_t i = 0; i < points; ++i) {
        std::span<double> p(s.points.data() + 3 * i, 3);
        for (std::size_t r = 0; r < 3; ++r)
            rotated[r] = s.pose.at(r, 0) * p[0] + s.pose.at(r, 1) * p[1] + s.pose.at(r, 2) * p[2];
        for (std::size_t r = 0; r < 3; ++r) p[r] = rotated[r] + sigma * rng.normal();
    }
    return s;
}

} // namespace detail

/// Rotate-then-jitter generation with equal class counts per split.
inline KnotDataset make_knot_dataset(const KnotDatasetConfig& cfg) {
    if (cfg.train_count % 2 || cfg.test_count % 2)
        throw std::invalid_argument("make_knot_dataset: split sizes must be even for class balance");
    if (cfg.points_per_knot < 3)
        throw std::invalid_argument("make_knot_dataset: points_per_knot must be >= 3");
    KnotDataset ds;
    ds.config = cfg;
    const Rng root(cfg.seed);
    for (std::size_t i = 0; i < cfg.train_count; ++i)
        ds.train.push_back(detail::make_knot_sample(static_cast<int>(i % 2), cfg.sigma_train,
                                                    cfg.points_per_knot, root, i));
    for (std::size_t i = 0; i < cfg.test_count; ++i)
        ds.test.push_back(detail::make_knot_sample(static_cast<int>(i % 2), cfg.sigma_test,
                                                   cfg.points_per_knot, root,
                                                   cfg.train_count + i));
    return ds;
}

/// Projection of every sample onto the domain via the point-cloud map with
/// the defaults f = 1, xi = 1.
inline std::vector<std::pair<DiscreteSignal, int>> project_dataset(
    const std::vector<KnotSample>& samples, const DomainSampling& domain, std::size_t k = 4,
    double xi = 1.0) {
    std::vector<std::pair<DiscreteSignal, int>> out;
    out.reserve(samples.size());
    for (const auto& s : samples)
        out.emplace_back(project_pointcloud(s.cloud(), domain, k, xi), s.label);
    return out;
}

/// FNV-1a over the exact coordinate bytes; keys projected-signal caches.
inline std::string domain_hash(const DomainSampling& domain) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const auto& c = domain.coords();
    mix(reinterpret_cast<const unsigned char*>(c.data()), c.size() * sizeof(double));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

/// Dataset directory: one subdirectory per split holding `sample_<i>.xyz`
/// point-cloud text files plus `labels.csv` (`index,label` rows).
inline void save_split(const std::vector<KnotSample>& samples, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream labels(fs::path(dir) / "labels.csv", std::ios::binary);
    labels << "index,label\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        labels << i << ',' << samples[i].label << '\n';
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04zu.xyz", i);
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw std::runtime_error("save_split: cannot write sample file");
        save_pointcloud(samples[i].cloud(), f);
    }
}

inline void save_knot_dataset(const KnotDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_split(ds.train, (fs::path(dir) / "train").string());
    save_split(ds.test, (fs::path(dir) / "test").string());
    std::ofstream meta(fs::path(dir) / "dataset.meta", std::ios::binary);
    meta << "KNOTSET v1\n";
    meta << "points " << ds.config.points_per_knot << '\n';
    meta << "train " << ds.config.train_count << '\n';
    meta << "test " << ds.config.test_count << '\n';
    meta << "sigma_train " << shortest_double(ds.config.sigma_train) << '\n';
    meta << "sigma_test " << shortest_double(ds.config.sigma_test) << '\n';
    meta << "seed " << ds.config.seed << '\n';
}

struct LabeledCloud {
    PointCloud cloud;
    int label = 0;
};

inline std::vector<LabeledCloud> load_split(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream labels(fs::path(dir) / "labels.csv", std::ios::binary);
    if (!labels) throw std::runtime_error("load_split: cannot open labels.csv in " + dir);
    std::string line;
    std::getline(labels, line); // header
    std::vector<LabeledCloud> out;
    while (std::getline(labels, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::size_t idx = std::stoul(line.substr(0, comma));
        LabeledCloud lc;
        lc.label = std::stoi(line.substr(comma + 1));
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04zu.xyz", idx);
        lc.cloud = load_pointcloud_file((fs::path(dir) / name).string());
        out.push_back(std::move(lc));
    }
    return out;
}

inline std::vector<std::pair<DiscreteSignal, int>> project_clouds(
    const std::vector<LabeledCloud>& clouds, const DomainSampling& domain, std::size_t k = 4,
    double xi = 1.0) {
    std::vector<std::pair<DiscreteSignal, int>> out;
    out.reserve(clouds.size());
    for (const auto& lc : clouds)
        out.emplace_back(project_pointcloud(lc.cloud, domain, k, xi), lc.label);
    return out;
}

} // namespace lgc
