#ifndef PFALAB_PSEUDO_HPP
#define PFALAB_PSEUDO_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/model.hpp"
#include "pfalab/ops.hpp"

namespace pfalab {

struct PseudoLabelDecision {
    std::size_t sample_id = 0;
    int label = -1;          // argmax class, ties broken by lowest id
    double confidence = 0.0; // weak-view posterior of that class
    bool accepted = false;   // confidence >= threshold
    double threshold = 1.0;  // threshold that was applied
};

// Scalar tau or per-class thresholds (curriculum variant).
struct Thresholds {
    double tau = 0.95;
    std::vector<double> per_class;  // empty -> scalar tau for every class

    double for_class(int c) const {
        return per_class.empty() ? tau : per_class[static_cast<std::size_t>(c)];
    }
};

// Weak-view posteriors with no gradient recorded; acceptance uses >=.
inline std::vector<PseudoLabelDecision> pseudo_label(const FeatureExtractor& f,
                                                     const LinearClassifier& w,
                                                     const Matrix& weak_x,
                                                     const std::vector<std::size_t>& ids,
                                                     const Thresholds& thr) {
    Tensor logits = classify(w, extract(f, weak_x)).detach();
    const std::size_t n = weak_x.n, c = w.classes();
    auto probs = detail::softmax_rows(logits.values(), n, c);
    std::vector<PseudoLabelDecision> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = probs.data() + i * c;
        int best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        auto& d = out[i];
        d.sample_id = ids.empty() ? i : ids[i];
        d.label = best;
        d.confidence = row[best];
        d.threshold = thr.for_class(best);
        d.accepted = d.confidence >= d.threshold;
    }
    return out;
}

// Curriculum thresholds: tau_c = tau * sigma_c / max(max_j sigma_j, n_u - sum_j sigma_j).
// sigma_c counts unlabeled samples confidently assigned to class c over the
// most recent full pass; the second denominator term is a warm-up guard that
// keeps thresholds low while most samples are still unused.
inline std::vector<double> cpl_thresholds(const std::vector<std::size_t>& counts, double tau,
                                          std::size_t n_u) {
    std::size_t mx = 0, total = 0;
    for (auto c : counts) {
        mx = std::max(mx, c);
        total += c;
    }
    const std::size_t unused = n_u > total ? n_u - total : 0;
    const std::size_t denom = std::max(mx, unused);
    std::vector<double> out(counts.size(), 0.0);
    if (denom == 0) return out;
    for (std::size_t c = 0; c < counts.size(); ++c)
        out[c] = tau * static_cast<double>(counts[c]) / static_cast<double>(denom);
    return out;
}

// Rolling per-class confident counts over one full pass of the unlabeled set.
class CplState {
public:
    CplState(std::size_t classes, std::size_t n_u, double tau)
        : n_u_(n_u), tau_(tau), current_(classes, 0) {}

    // Feed one batch of decisions (confidence measured against the base tau).
    // Returns true when a full pass completed and thresholds were refreshed.
    bool observe(const std::vector<PseudoLabelDecision>& decisions,
                 std::vector<double>& thresholds_out) {
        for (const auto& d : decisions) {
            if (d.confidence >= tau_) ++current_[static_cast<std::size_t>(d.label)];
            ++seen_;
        }
        if (seen_ >= n_u_) {
            thresholds_out = cpl_thresholds(current_, tau_, n_u_);
            std::fill(current_.begin(), current_.end(), 0);
            seen_ = 0;
            return true;
        }
        return false;
    }

private:
    std::size_t n_u_;
    double tau_;
    std::vector<std::size_t> current_;
    std::size_t seen_ = 0;
};

}  // namespace pfalab

#endif
