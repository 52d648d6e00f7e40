#ifndef PFALAB_DIAGNOSTICS_HPP
#define PFALAB_DIAGNOSTICS_HPP

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/losses.hpp"
#include "pfalab/model.hpp"
#include "pfalab/pseudo.hpp"

namespace pfalab {

// Per-unlabeled-sample pseudo-label bookkeeping. First-acceptance fields are
// write-once; the latest prediction tracks the current argmax. This is the
// only place hidden ground truth of the unlabeled split is consulted.
class PseudoHistory {
public:
    struct Record {
        std::optional<std::size_t> first_iteration;
        int first_label = -1;
        bool first_correct = false;
        int latest_prediction = -1;
    };

    explicit PseudoHistory(std::vector<int> hidden_truth)
        : truth_(std::move(hidden_truth)), records_(truth_.size()) {}

    const Record& record(std::size_t id) const { return records_.at(id); }
    std::size_t size() const { return records_.size(); }

    void record_decisions(std::size_t iteration,
                          const std::vector<PseudoLabelDecision>& decisions) {
        for (const auto& d : decisions) {
            if (d.sample_id >= records_.size())
                throw std::out_of_range("record_decisions: unknown sample id");
            auto& r = records_[d.sample_id];
            if (d.accepted && !r.first_iteration) {
                r.first_iteration = iteration;
                r.first_label = d.label;
                r.first_correct = d.label == truth_[d.sample_id];
            }
            r.latest_prediction = d.label;  // updated regardless of acceptance
        }
    }

    void update_latest(const std::vector<std::size_t>& ids, const std::vector<int>& preds) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            records_.at(ids[i]).latest_prediction = preds[i];
    }

    std::vector<std::size_t> ever_accepted_ids() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records_.size(); ++i)
            if (records_[i].first_iteration) out.push_back(i);
        return out;
    }

    // Fraction of first-correct samples whose latest prediction is still
    // correct; empty denominator reported as missing.
    std::optional<double> ckr() const { return rate(true); }

    // Fraction of first-wrong samples whose latest prediction is now correct.
    std::optional<double> ecr() const { return rate(false); }

private:
    std::optional<double> rate(bool first_correct) const {
        std::size_t denom = 0, num = 0;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (!r.first_iteration || r.first_correct != first_correct) continue;
            ++denom;
            if (r.latest_prediction == truth_[i]) ++num;
        }
        if (denom == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(denom);
    }

    std::vector<int> truth_;
    std::vector<Record> records_;
};

struct MetricsRow {
    std::size_t iteration = 0;
    double test_acc = 0.0;
    std::optional<double> ckr;
    std::optional<double> ecr;
    double accept_frac = 0.0;
    double mean_conf = 0.0;
    double loss_l = 0.0;
    std::optional<double> loss_u;
};

inline double evaluate(const FeatureExtractor& f, const LinearClassifier& w,
                       const LabeledSplit& test) {
    if (test.x.n == 0) throw EmptyBatchError("evaluate: empty test set");
    auto preds = predict(f, w, test.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == test.y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

namespace detail {

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
inline std::string fmt6(const std::optional<double>& v) {
    return v ? fmt6(*v) : std::string();
}

}  // namespace detail

inline void emit_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);  // binary: byte-identical across runs
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "iter,test_acc,ckr,ecr,accept_frac,mean_conf,loss_l,loss_u\n";
    for (const auto& r : rows) {
        os << r.iteration << ',' << detail::fmt6(r.test_acc) << ',' << detail::fmt6(r.ckr)
           << ',' << detail::fmt6(r.ecr) << ',' << detail::fmt6(r.accept_frac) << ','
           << detail::fmt6(r.mean_conf) << ',' << detail::fmt6(r.loss_l) << ','
           << detail::fmt6(r.loss_u) << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

// Raw feature dump for external scatter plotting: id, class, then the
// feature coordinates.
inline void emit_embeddings(const FeatureExtractor& f, const LabeledSplit& split,
                            const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    Tensor feats = extract(f, split.x);
    const std::size_t d = f.feature_dim();
    os << "id,class";
    for (std::size_t j = 0; j < d; ++j) os << ",f" << j;
    os << '\n';
    for (std::size_t i = 0; i < split.x.n; ++i) {
        os << i << ',' << split.y[i];
        for (std::size_t j = 0; j < d; ++j)
            os << ',' << detail::fmt6(feats.values()[i * d + j]);
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace pfalab

#endif
