#ifndef PFALAB_PROTOTYPES_HPP
#define PFALAB_PROTOTYPES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/model.hpp"
#include "pfalab/ops.hpp"

namespace pfalab {

struct PrototypeInitError : std::runtime_error {
    explicit PrototypeInitError(const std::string& m) : std::runtime_error(m) {}
};

// Per-class unit embeddings mu_c with EMA momentum. An update touches only
// the matching class; idle classes keep their direction instead of decaying.
class PrototypeBank {
public:
    PrototypeBank() = default;

    PrototypeBank(std::size_t classes, std::size_t dim, double momentum, double temperature)
        : classes_(classes), dim_(dim), momentum_(momentum), temperature_(temperature),
          mu_(classes * dim, 0.0), update_counts_(classes, 0) {
        if (momentum < 0.0 || momentum > 1.0) throw ConfigError("momentum must lie in [0,1]");
        if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    }

    std::size_t classes() const { return classes_; }
    std::size_t dim() const { return dim_; }
    double momentum() const { return momentum_; }
    double temperature() const { return temperature_; }
    const std::vector<double>& data() const { return mu_; }
    const double* prototype(std::size_t c) const { return mu_.data() + c * dim_; }
    const std::vector<std::size_t>& update_counts() const { return update_counts_; }

    void set_prototype(std::size_t c, const std::vector<double>& v) {
        if (v.size() != dim_) throw DimensionError("prototype dim mismatch");
        double nrm = norm(v.data());
        if (nrm <= 1e-12) throw DegenerateVectorError("prototype: near-zero vector");
        for (std::size_t j = 0; j < dim_; ++j) mu_[c * dim_ + j] = v[j] / nrm;
    }

    // EMA step toward a (raw) feature of the given class:
    //   mu <- renormalize(beta * mu + (1-beta) * normalize(feature))
    void update(std::size_t c, const double* feature) {
        ++update_counts_[c];
        if (momentum_ == 1.0) return;  // exact fixpoint
        double fn = norm(feature);
        if (fn <= 1e-12) throw DegenerateVectorError("prototype update: near-zero feature");
        double* mu = mu_.data() + c * dim_;
        for (std::size_t j = 0; j < dim_; ++j)
            mu[j] = momentum_ * mu[j] + (1.0 - momentum_) * feature[j] / fn;
        const double nrm = norm(mu);
        if (nrm <= 1e-12) throw DegenerateVectorError("prototype update: cancelled to zero");
        for (std::size_t j = 0; j < dim_; ++j) mu[j] /= nrm;
    }

    // Constant [C, dim] tensor; prototypes are EMA statistics, never
    // parameters, so the bank enters loss graphs detached.
    Tensor as_tensor() const { return Tensor::constant({classes_, dim_}, mu_); }

private:
    double norm(const double* v) const {
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) s += v[j] * v[j];
        return std::sqrt(s);
    }

    std::size_t classes_ = 0;
    std::size_t dim_ = 0;
    double momentum_ = 0.99;
    double temperature_ = 0.1;
    std::vector<double> mu_;
    std::vector<std::size_t> update_counts_;
};

// mu_c = normalize(mean of normalize(f(x)) over labeled class-c samples),
// no augmentation. Every class needs at least one labeled sample.
inline PrototypeBank init_prototypes(const FeatureExtractor& f, const LabeledSplit& labeled,
                                     std::size_t classes, double momentum, double temperature) {
    PrototypeBank bank(classes, f.feature_dim(), momentum, temperature);
    Tensor feats = extract(f, labeled.x);
    const std::size_t d = f.feature_dim();
    std::vector<std::vector<double>> sums(classes, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < labeled.x.n; ++i) {
        const double* row = feats.values().data() + i * d;
        double nrm = 0.0;
        for (std::size_t j = 0; j < d; ++j) nrm += row[j] * row[j];
        nrm = std::sqrt(nrm);
        if (nrm <= 1e-12) throw DegenerateVectorError("init_prototypes: near-zero feature");
        const auto c = static_cast<std::size_t>(labeled.y[i]);
        for (std::size_t j = 0; j < d; ++j) sums[c][j] += row[j] / nrm;
        ++counts[c];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0)
            throw PrototypeInitError("class " + std::to_string(c) + " has no labeled sample");
        bank.set_prototype(c, sums[c]);
    }
    return bank;
}

}  // namespace pfalab

#endif
