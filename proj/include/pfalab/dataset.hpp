#ifndef PFALAB_DATASET_HPP
#define PFALAB_DATASET_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfalab/rng.hpp"

namespace pfalab {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Row-major sample matrix.
struct Matrix {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_, 0.0) {}

    double* row(std::size_t i) { return data.data() + i * d; }
    const double* row(std::size_t i) const { return data.data() + i * d; }
};

struct LabeledSplit {
    Matrix x;
    std::vector<int> y;
};

// Source task carries a spurious block correlated with the label; on the
// target side the same block is decorrelated for unlabeled/test samples.
struct SyntheticTransferConfig {
    int classes = 10;
    int d_core = 16;
    int d_spur = 16;
    int n_source = 5000;
    int n_l = 100;
    int n_u = 5000;
    int n_test = 2000;
    double separation = 3.0;   // class-mean sphere radius
    double noise = 1.0;        // per-coordinate gaussian sigma
    double rho_src = 1.0;      // spurious alignment on source
    double rho_lab = 1.0;      // spurious alignment on target labeled
    std::uint64_t seed = 1;

    int dim() const { return d_core + d_spur; }

    void validate() const {
        if (classes < 2) throw ConfigError("classes must be >= 2");
        if (d_core < 2) throw ConfigError("d_core must be >= 2");
        if (d_spur < 0) throw ConfigError("d_spur must be >= 0");
        if (n_source < classes || n_l < classes || n_u < classes || n_test < classes)
            throw ConfigError("all sample counts must be >= classes");
        if (rho_src < 0.0 || rho_src > 1.0 || rho_lab < 0.0 || rho_lab > 1.0)
            throw ConfigError("rho values must lie in [0,1]");
        if (separation <= 0.0) throw ConfigError("separation must be positive");
        if (noise < 0.0) throw ConfigError("noise must be non-negative");
    }
};

// Hidden ground truth of the unlabeled split is only reachable through
// hidden_unlabeled_labels(); the training path sees UnlabeledView.
struct DatasetBundle {
    SyntheticTransferConfig config;
    LabeledSplit source;
    LabeledSplit labeled;
    Matrix unlabeled_x;
    LabeledSplit test;

    const std::vector<int>& hidden_unlabeled_labels() const { return unlabeled_truth_; }
    void set_unlabeled_truth(std::vector<int> y) { unlabeled_truth_ = std::move(y); }

private:
    std::vector<int> unlabeled_truth_;
};

// Unlabeled data as the training loop is allowed to see it: no labels.
struct UnlabeledView {
    const Matrix* x = nullptr;
    std::size_t size() const { return x->n; }
};

namespace detail {

inline std::vector<double> random_unit_vector(std::size_t d, Rng& rng) {
    std::vector<double> v(d);
    double nrm = 0.0;
    do {
        nrm = 0.0;
        for (auto& e : v) {
            e = rng.normal();
            nrm += e * e;
        }
        nrm = std::sqrt(nrm);
    } while (nrm < 1e-9);
    for (auto& e : v) e /= nrm;
    return v;
}

}  // namespace detail

// Pure function of config: identical bundles across runs for the same seed.
inline DatasetBundle make_bundle(const SyntheticTransferConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0xDA7A));

    const std::size_t c = cfg.classes;
    const std::size_t dc = cfg.d_core, ds = cfg.d_spur;
    const std::size_t d = dc + ds;

    // class means on the core sphere, class-coded spurious directions
    std::vector<std::vector<double>> core_mean(c), spur_dir(c);
    for (std::size_t k = 0; k < c; ++k) {
        core_mean[k] = detail::random_unit_vector(dc, rng);
        for (auto& e : core_mean[k]) e *= cfg.separation;
        if (ds > 0) {
            spur_dir[k] = detail::random_unit_vector(ds, rng);
            for (auto& e : spur_dir[k]) e *= cfg.separation;
        }
    }

    auto fill_split = [&](std::size_t n, double rho, bool spur_aligned, LabeledSplit& out) {
        out.x = Matrix(n, d);
        out.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = i % c;  // balanced classes
            out.y[i] = static_cast<int>(k);
            double* row = out.x.row(i);
            for (std::size_t j = 0; j < dc; ++j)
                row[j] = core_mean[k][j] + cfg.noise * rng.normal();
            for (std::size_t j = 0; j < ds; ++j) {
                const double aligned = spur_aligned ? rho * spur_dir[k][j] : 0.0;
                row[dc + j] = aligned + cfg.noise * rng.normal();
            }
        }
    };

    DatasetBundle b;
    b.config = cfg;
    fill_split(cfg.n_source, cfg.rho_src, true, b.source);
    fill_split(cfg.n_l, cfg.rho_lab, true, b.labeled);
    LabeledSplit unl;
    fill_split(cfg.n_u, 0.0, false, unl);  // spurious block decorrelated
    b.unlabeled_x = std::move(unl.x);
    b.set_unlabeled_truth(std::move(unl.y));
    fill_split(cfg.n_test, 0.0, false, b.test);
    return b;
}

// ---- flat binary export/import, little-endian -------------------------------

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw IoError("truncated file");
}
template <class T>
void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}
template <class T>
T read_pod(std::istream& is) {
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
    write_pod<std::uint64_t>(os, m.n);
    write_pod<std::uint64_t>(os, m.d);
    write_bytes(os, m.data.data(), m.data.size() * sizeof(double));
}
inline Matrix read_matrix(std::istream& is) {
    Matrix m;
    m.n = read_pod<std::uint64_t>(is);
    m.d = read_pod<std::uint64_t>(is);
    m.data.resize(m.n * m.d);
    read_bytes(is, m.data.data(), m.data.size() * sizeof(double));
    return m;
}
inline void write_labels(std::ostream& os, const std::vector<int>& y) {
    write_pod<std::uint64_t>(os, y.size());
    for (int v : y) write_pod<std::int32_t>(os, v);
}
inline std::vector<int> read_labels(std::istream& is) {
    std::vector<int> y(read_pod<std::uint64_t>(is));
    for (auto& v : y) v = read_pod<std::int32_t>(is);
    return y;
}

}  // namespace detail

inline void save_bundle(const std::string& path, const DatasetBundle& b) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("PFAB1", 5);
    const auto& c = b.config;
    detail::write_pod<std::int32_t>(os, c.classes);
    detail::write_pod<std::int32_t>(os, c.d_core);
    detail::write_pod<std::int32_t>(os, c.d_spur);
    detail::write_pod<std::int32_t>(os, c.n_source);
    detail::write_pod<std::int32_t>(os, c.n_l);
    detail::write_pod<std::int32_t>(os, c.n_u);
    detail::write_pod<std::int32_t>(os, c.n_test);
    detail::write_pod<double>(os, c.separation);
    detail::write_pod<double>(os, c.noise);
    detail::write_pod<double>(os, c.rho_src);
    detail::write_pod<double>(os, c.rho_lab);
    detail::write_pod<std::uint64_t>(os, c.seed);
    detail::write_matrix(os, b.source.x);
    detail::write_labels(os, b.source.y);
    detail::write_matrix(os, b.labeled.x);
    detail::write_labels(os, b.labeled.y);
    detail::write_matrix(os, b.unlabeled_x);
    detail::write_labels(os, b.hidden_unlabeled_labels());
    detail::write_matrix(os, b.test.x);
    detail::write_labels(os, b.test.y);
    if (!os) throw IoError("write failed: " + path);
}

inline DatasetBundle load_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[5];
    detail::read_bytes(is, magic, 5);
    if (std::memcmp(magic, "PFAB1", 5) != 0) throw IoError("bad magic in " + path);
    DatasetBundle b;
    auto& c = b.config;
    c.classes = detail::read_pod<std::int32_t>(is);
    c.d_core = detail::read_pod<std::int32_t>(is);
    c.d_spur = detail::read_pod<std::int32_t>(is);
    c.n_source = detail::read_pod<std::int32_t>(is);
    c.n_l = detail::read_pod<std::int32_t>(is);
    c.n_u = detail::read_pod<std::int32_t>(is);
    c.n_test = detail::read_pod<std::int32_t>(is);
    c.separation = detail::read_pod<double>(is);
    c.noise = detail::read_pod<double>(is);
    c.rho_src = detail::read_pod<double>(is);
    c.rho_lab = detail::read_pod<double>(is);
    c.seed = detail::read_pod<std::uint64_t>(is);
    b.source.x = detail::read_matrix(is);
    b.source.y = detail::read_labels(is);
    b.labeled.x = detail::read_matrix(is);
    b.labeled.y = detail::read_labels(is);
    b.unlabeled_x = detail::read_matrix(is);
    b.set_unlabeled_truth(detail::read_labels(is));
    b.test.x = detail::read_matrix(is);
    b.test.y = detail::read_labels(is);
    return b;
}

}  // namespace pfalab

#endif
