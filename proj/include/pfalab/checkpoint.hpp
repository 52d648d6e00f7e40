#ifndef PFALAB_CHECKPOINT_HPP
#define PFALAB_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/model.hpp"

namespace pfalab {

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};

struct Checkpoint {
    static constexpr std::uint16_t kVersion = 1;

    std::vector<std::size_t> extractor_dims;
    std::size_t classes = 0;
    std::vector<std::vector<double>> extractor_params;   // W0, b0, W1, b1, ...
    std::vector<std::vector<double>> classifier_params;  // W, b
    std::optional<std::vector<std::vector<double>>> optimizer_velocities;
    std::vector<std::string> rng_states;  // opaque, length-prefixed on disk
    std::uint64_t iteration = 0;
};

inline Checkpoint snapshot_model(const FeatureExtractor& f, const LinearClassifier& w) {
    Checkpoint ck;
    ck.extractor_dims = f.dims();
    ck.classes = w.classes();
    for (const auto& p : f.parameters()) ck.extractor_params.push_back(p.values());
    for (const auto& p : w.parameters()) ck.classifier_params.push_back(p.values());
    return ck;
}

inline void restore_model(const Checkpoint& ck, FeatureExtractor& f, LinearClassifier& w) {
    auto fp = f.parameters();
    if (fp.size() != ck.extractor_params.size())
        throw CheckpointError("extractor parameter count mismatch");
    for (std::size_t i = 0; i < fp.size(); ++i) {
        if (fp[i].size() != ck.extractor_params[i].size())
            throw CheckpointError("extractor parameter shape mismatch");
        fp[i].mutable_values() = ck.extractor_params[i];
    }
    auto wp = w.parameters();
    if (wp.size() != ck.classifier_params.size())
        throw CheckpointError("classifier parameter count mismatch");
    for (std::size_t i = 0; i < wp.size(); ++i) {
        if (wp[i].size() != ck.classifier_params[i].size())
            throw CheckpointError("classifier parameter shape mismatch");
        wp[i].mutable_values() = ck.classifier_params[i];
    }
}

namespace detail {

inline void write_blob(std::ostream& os, const std::vector<double>& v) {
    write_pod<std::uint64_t>(os, v.size());
    write_bytes(os, v.data(), v.size() * sizeof(double));
}
inline std::vector<double> read_blob(std::istream& is) {
    std::vector<double> v(read_pod<std::uint64_t>(is));
    read_bytes(is, v.data(), v.size() * sizeof(double));
    return v;
}
inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    write_bytes(os, s.data(), s.size());
}
inline std::string read_string(std::istream& is) {
    std::string s(read_pod<std::uint64_t>(is), '\0');
    read_bytes(is, s.data(), s.size());
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("PFAC1", 5);
    detail::write_pod<std::uint16_t>(os, Checkpoint::kVersion);
    detail::write_pod<std::uint64_t>(os, ck.extractor_dims.size());
    for (auto d : ck.extractor_dims) detail::write_pod<std::uint64_t>(os, d);
    detail::write_pod<std::uint64_t>(os, ck.classes);
    detail::write_pod<std::uint64_t>(os, ck.extractor_params.size());
    for (const auto& p : ck.extractor_params) detail::write_blob(os, p);
    detail::write_pod<std::uint64_t>(os, ck.classifier_params.size());
    for (const auto& p : ck.classifier_params) detail::write_blob(os, p);
    detail::write_pod<std::uint8_t>(os, ck.optimizer_velocities ? 1 : 0);
    if (ck.optimizer_velocities) {
        detail::write_pod<std::uint64_t>(os, ck.optimizer_velocities->size());
        for (const auto& v : *ck.optimizer_velocities) detail::write_blob(os, v);
    }
    detail::write_pod<std::uint64_t>(os, ck.rng_states.size());
    for (const auto& s : ck.rng_states) detail::write_string(os, s);
    detail::write_pod<std::uint64_t>(os, ck.iteration);
    if (!os) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[5];
    detail::read_bytes(is, magic, 5);
    if (std::memcmp(magic, "PFAC1", 5) != 0) throw CheckpointError("bad magic in " + path);
    const auto version = detail::read_pod<std::uint16_t>(is);
    if (version != Checkpoint::kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.extractor_dims.resize(detail::read_pod<std::uint64_t>(is));
    for (auto& d : ck.extractor_dims) d = detail::read_pod<std::uint64_t>(is);
    ck.classes = detail::read_pod<std::uint64_t>(is);
    ck.extractor_params.resize(detail::read_pod<std::uint64_t>(is));
    for (auto& p : ck.extractor_params) p = detail::read_blob(is);
    ck.classifier_params.resize(detail::read_pod<std::uint64_t>(is));
    for (auto& p : ck.classifier_params) p = detail::read_blob(is);
    if (detail::read_pod<std::uint8_t>(is)) {
        std::vector<std::vector<double>> vels(detail::read_pod<std::uint64_t>(is));
        for (auto& v : vels) v = detail::read_blob(is);
        ck.optimizer_velocities = std::move(vels);
    }
    ck.rng_states.resize(detail::read_pod<std::uint64_t>(is));
    for (auto& s : ck.rng_states) s = detail::read_string(is);
    ck.iteration = detail::read_pod<std::uint64_t>(is);
    return ck;
}

}  // namespace pfalab

#endif
