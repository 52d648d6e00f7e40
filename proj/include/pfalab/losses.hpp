#ifndef PFALAB_LOSSES_HPP
#define PFALAB_LOSSES_HPP

#include <cstddef>
#include <vector>

#include "pfalab/model.hpp"
#include "pfalab/ops.hpp"
#include "pfalab/prototypes.hpp"
#include "pfalab/pseudo.hpp"

namespace pfalab {

struct EmptyBatchError : std::runtime_error {
    explicit EmptyBatchError(const std::string& m) : std::runtime_error(m) {}
};

// L_l: mean cross-entropy on labeled inputs; gradients reach both f and W.
inline Tensor labeled_loss(const FeatureExtractor& f, const LinearClassifier& w,
                           const Matrix& x, const std::vector<int>& y) {
    if (x.n == 0) throw EmptyBatchError("labeled_loss: empty batch");
    return softmax_cross_entropy(classify(w, extract(f, x)), y);
}

// Variant reusing an already-built feature graph (shared subexpression).
inline Tensor labeled_loss_from_features(const LinearClassifier& w, const Tensor& features,
                                         const std::vector<int>& y) {
    if (y.empty()) throw EmptyBatchError("labeled_loss: empty batch");
    return softmax_cross_entropy(classify(w, features), y);
}

// Unlabeled consistency loss: cross-entropy of the strong view against the
// pseudo-label, summed over accepted samples, divided by the full batch size.
inline Tensor fixmatch_unlabeled_loss_from_features(const LinearClassifier& w,
                                                    const Tensor& strong_features,
                                                    const std::vector<PseudoLabelDecision>& dec) {
    const std::size_t n = dec.size();
    std::vector<int> targets(n, 0);
    std::vector<double> weights(n, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        targets[i] = dec[i].label;
        if (dec[i].accepted) {
            weights[i] = 1.0 / static_cast<double>(n);
            any = true;
        }
    }
    if (!any) return Tensor::scalar(0.0);  // no parents: zero loss, zero gradients
    Tensor per_row = softmax_cross_entropy_per_row(classify(w, strong_features), targets);
    return weighted_sum(per_row, std::move(weights));
}

inline Tensor fixmatch_unlabeled_loss(const FeatureExtractor& f, const LinearClassifier& w,
                                      const Matrix& strong_x,
                                      const std::vector<PseudoLabelDecision>& dec) {
    return fixmatch_unlabeled_loss_from_features(w, extract(f, strong_x), dec);
}

// Per-row prototype losses -log softmax_j(cos(mu_j, feature_i)/T)[target_i].
// The bank is a constant in the graph, so gradients reach the extractor only.
inline Tensor prototype_loss_rows(const PrototypeBank& bank, const Tensor& features,
                                  const std::vector<int>& targets) {
    Tensor cosines = matmul_nt(l2_normalize_rows(features), bank.as_tensor());
    Tensor logits = scale(cosines, 1.0 / bank.temperature());
    return softmax_cross_entropy_per_row(logits, targets);
}

// Single-sample L_f on a strong view.
inline Tensor feature_adjust_term(const FeatureExtractor& f, const PrototypeBank& bank,
                                  const Matrix& strong_x_one, int y) {
    Tensor rows = prototype_loss_rows(bank, extract(f, strong_x_one), {y});
    return sum(rows);
}

// Full L^_f: gated unlabeled mean over |B_u| plus labeled mean over |B_l|.
inline Tensor feature_adjust_loss_from_features(const PrototypeBank& bank,
                                                const Tensor& labeled_features,
                                                const std::vector<int>& y_l,
                                                const Tensor& unlabeled_features,
                                                const std::vector<PseudoLabelDecision>& dec) {
    Tensor loss = Tensor::scalar(0.0);
    const std::size_t nu = dec.size();
    bool any = false;
    std::vector<int> targets(nu, 0);
    std::vector<double> weights(nu, 0.0);
    for (std::size_t i = 0; i < nu; ++i) {
        targets[i] = dec[i].label;
        if (dec[i].accepted) {
            weights[i] = 1.0 / static_cast<double>(nu);
            any = true;
        }
    }
    if (any) {
        Tensor rows = prototype_loss_rows(bank, unlabeled_features, targets);
        loss = add(loss, weighted_sum(rows, std::move(weights)));
    }
    if (!y_l.empty()) {
        Tensor rows = prototype_loss_rows(bank, labeled_features, y_l);
        loss = add(loss, scale(sum(rows), 1.0 / static_cast<double>(y_l.size())));
    }
    return loss;
}

inline Tensor feature_adjust_loss(const FeatureExtractor& f, const PrototypeBank& bank,
                                  const Matrix& strong_l, const std::vector<int>& y_l,
                                  const Matrix& strong_u,
                                  const std::vector<PseudoLabelDecision>& dec) {
    Tensor lf = y_l.empty() ? Tensor::scalar(0.0) : extract(f, strong_l);
    Tensor uf = extract(f, strong_u);
    return feature_adjust_loss_from_features(bank, lf, y_l, uf, dec);
}

// L = L_l + lambda * L^_f (or the fixmatch unlabeled term).
inline Tensor total_loss(const Tensor& l_l, const Tensor& l_unlabeled, double lambda) {
    return add(l_l, scale(l_unlabeled, lambda));
}

}  // namespace pfalab

#endif
