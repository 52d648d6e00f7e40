#ifndef PFALAB_MODEL_HPP
#define PFALAB_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pfalab/batching.hpp"
#include "pfalab/dataset.hpp"
#include "pfalab/ops.hpp"
#include "pfalab/rng.hpp"
#include "pfalab/sgd.hpp"
#include "pfalab/tensor.hpp"

namespace pfalab {

namespace detail {

inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-a, a);
    return Tensor::param({fan_in, fan_out}, std::move(w));
}

}  // namespace detail

// MLP feature extractor: relu between layers, linear output so the feature
// geometry is not confined to the positive orthant. dims = {d_in} yields the
// identity map (zero depth).
class FeatureExtractor {
public:
    FeatureExtractor() = default;

    FeatureExtractor(std::vector<std::size_t> dims, Rng& rng) : dims_(std::move(dims)) {
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            weights_.push_back(detail::glorot_uniform(dims_[l], dims_[l + 1], rng));
            biases_.push_back(Tensor::param({dims_[l + 1]}, std::vector<double>(dims_[l + 1], 0.0)));
        }
    }

    std::size_t input_dim() const { return dims_.front(); }
    std::size_t feature_dim() const { return dims_.back(); }
    std::size_t depth() const { return weights_.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }

    Tensor forward(const Tensor& x) const {
        Tensor h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            h = affine(h, weights_[l], biases_[l]);
            if (l + 1 < weights_.size()) h = relu(h);
        }
        return h;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> ps;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            ps.push_back(weights_[l]);
            ps.push_back(biases_[l]);
        }
        return ps;
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<Tensor> weights_;
    std::vector<Tensor> biases_;
};

class LinearClassifier {
public:
    LinearClassifier() = default;

    LinearClassifier(std::size_t feature_dim, std::size_t classes, Rng& rng)
        : weight_(detail::glorot_uniform(feature_dim, classes, rng)),
          bias_(Tensor::param({classes}, std::vector<double>(classes, 0.0))) {}

    std::size_t classes() const { return bias_.shape()[0]; }
    std::size_t feature_dim() const { return weight_.shape()[0]; }

    Tensor forward(const Tensor& features) const { return affine(features, weight_, bias_); }

    std::vector<Tensor> parameters() const { return {weight_, bias_}; }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }

private:
    Tensor weight_;
    Tensor bias_;
};

struct ModelDims {
    std::vector<std::size_t> extractor;  // input, hidden..., feature
    std::size_t classes = 10;
};

inline ModelDims default_model_dims(std::size_t input_dim, std::size_t classes) {
    return ModelDims{{input_dim, 128, 64, 32}, classes};
}

inline std::pair<FeatureExtractor, LinearClassifier> init_model(const ModelDims& dims,
                                                               std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1217));
    FeatureExtractor f(dims.extractor, rng);
    LinearClassifier w(f.feature_dim(), dims.classes, rng);
    return {std::move(f), std::move(w)};
}

inline Tensor batch_tensor(const Matrix& m) {
    return Tensor::constant({m.n, m.d}, m.data);
}

inline Tensor extract(const FeatureExtractor& f, const Matrix& x) {
    if (x.d != f.input_dim()) throw DimensionError("extract: input dim mismatch");
    return f.forward(batch_tensor(x));
}

inline Tensor classify(const LinearClassifier& w, const Tensor& features) {
    return w.forward(features);
}

// Plain-value argmax predictions, no graph.
inline std::vector<int> predict(const FeatureExtractor& f, const LinearClassifier& w,
                                const Matrix& x) {
    Tensor logits = classify(w, extract(f, x));
    const std::size_t n = x.n, c = w.classes();
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.values().data() + i * c;
        int best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);  // ties: lowest id
        out[i] = best;
    }
    return out;
}

struct PretrainConfig {
    int epochs = 30;
    std::size_t batch = 64;
    SgdConfig sgd{0.03, 0.9, 1e-4};
};

// Supervised pretraining on the source split. The source head is a throwaway;
// only the extractor transfers.
inline FeatureExtractor pretrain_on_source(const DatasetBundle& bundle, const ModelDims& dims,
                                           const PretrainConfig& cfg, std::uint64_t seed) {
    Rng init_rng(derive_seed(seed, 0x1217));
    FeatureExtractor f(dims.extractor, init_rng);
    LinearClassifier head(f.feature_dim(), static_cast<std::size_t>(bundle.config.classes),
                          init_rng);

    auto params = f.parameters();
    for (auto& p : head.parameters()) params.push_back(p);
    SgdOptimizer opt(params, cfg.sgd);

    Rng batch_rng(derive_seed(seed, 0xBA7C));
    const std::size_t n = bundle.source.x.n;
    const std::size_t batch = std::min(cfg.batch, n);
    IndexStream stream(n, batch, batch_rng);
    const std::size_t steps_per_epoch = n / batch;
    for (int e = 0; e < cfg.epochs; ++e) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            auto idx = stream.next();
            Matrix xb(idx.size(), bundle.source.x.d);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const double* src = bundle.source.x.row(idx[i]);
                std::copy(src, src + xb.d, xb.row(i));
                yb[i] = bundle.source.y[idx[i]];
            }
            Tensor loss = softmax_cross_entropy(classify(head, extract(f, xb)), yb);
            loss.backward();
            opt.step();
        }
    }
    return f;
}

}  // namespace pfalab

#endif
