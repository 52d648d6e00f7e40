#ifndef PFALAB_BATCHING_HPP
#define PFALAB_BATCHING_HPP

#include <cstddef>
#include <numeric>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/rng.hpp"

namespace pfalab {

// Epoch-wise shuffled index stream. A partial tail batch is dropped; over
// one epoch each index appears at most once and floor(n/batch)*batch indices
// are emitted in total.
class IndexStream {
public:
    IndexStream(std::size_t n, std::size_t batch, Rng& rng) : batch_(batch), rng_(&rng) {
        if (batch == 0 || batch > n) throw ConfigError("batch size must be in [1, n]");
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        cursor_ = n;  // force reshuffle on first batch
    }

    std::vector<std::size_t> next() {
        if (cursor_ + batch_ > order_.size()) {
            rng_->shuffle(order_);
            cursor_ = 0;
        }
        std::vector<std::size_t> out(order_.begin() + cursor_, order_.begin() + cursor_ + batch_);
        cursor_ += batch_;
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t cursor_;
    Rng* rng_;
};

struct LabeledBatch {
    Matrix x;
    std::vector<int> y;
};

struct UnlabeledBatch {
    Matrix x;
    std::vector<std::size_t> ids;  // stable sample ids, feed PseudoHistory
};

// Paired labeled/unlabeled sampler; the two streams cycle independently.
class BatchIter {
public:
    BatchIter(const LabeledSplit& labeled, const UnlabeledView& unlabeled,
              std::size_t batch_l, std::size_t batch_u, Rng& rng)
        : labeled_(&labeled),
          unlabeled_(unlabeled),
          lab_stream_(labeled.x.n, batch_l, rng),
          unl_stream_(unlabeled.size(), batch_u, rng) {}

    std::pair<LabeledBatch, UnlabeledBatch> next() {
        auto li = lab_stream_.next();
        auto ui = unl_stream_.next();
        LabeledBatch lb;
        lb.x = Matrix(li.size(), labeled_->x.d);
        lb.y.resize(li.size());
        for (std::size_t i = 0; i < li.size(); ++i) {
            const double* src = labeled_->x.row(li[i]);
            std::copy(src, src + labeled_->x.d, lb.x.row(i));
            lb.y[i] = labeled_->y[li[i]];
        }
        UnlabeledBatch ub;
        ub.x = Matrix(ui.size(), unlabeled_.x->d);
        ub.ids = ui;
        for (std::size_t i = 0; i < ui.size(); ++i) {
            const double* src = unlabeled_.x->row(ui[i]);
            std::copy(src, src + unlabeled_.x->d, ub.x.row(i));
        }
        return {std::move(lb), std::move(ub)};
    }

private:
    const LabeledSplit* labeled_;
    UnlabeledView unlabeled_;
    IndexStream lab_stream_;
    IndexStream unl_stream_;
};

}  // namespace pfalab

#endif
