#ifndef PFALAB_TRAIN_HPP
#define PFALAB_TRAIN_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfalab/augment.hpp"
#include "pfalab/batching.hpp"
#include "pfalab/checkpoint.hpp"
#include "pfalab/losses.hpp"
#include "pfalab/model.hpp"
#include "pfalab/prototypes.hpp"
#include "pfalab/pseudo.hpp"
#include "pfalab/rng.hpp"
#include "pfalab/sgd.hpp"

namespace pfalab {

enum class Method { finetune, fixmatch, pfa, pfa_cpl };

// Alternative prototype-update strategies.
enum class ProtoUpdateMode { standard, weak_aug, no_threshold };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::finetune: return "finetune";
        case Method::fixmatch: return "fixmatch";
        case Method::pfa: return "pfa";
        case Method::pfa_cpl: return "pfa_cpl";
    }
    return "?";
}

struct TrainConfig {
    Method method = Method::pfa;
    double tau = 0.9925;
    double temperature = 0.25;
    double lambda = 1.0;
    double beta = 0.99;
    std::size_t batch_l = 32;
    std::size_t batch_u = 64;
    std::size_t iterations = 4000;
    SgdConfig sgd{0.01, 0.9, 1e-4};
    ProtoUpdateMode proto_mode = ProtoUpdateMode::standard;
    bool strong_aug_labeled = true;  // strong views feed the labeled CE too
    std::size_t eval_every = 50;
    std::uint64_t seed = 1;

    void validate() const {
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must lie in (0,1]");
        if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
        if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0,1]");
        if (temperature <= 0.0) throw ConfigError("temperature must be positive");
        if (batch_l == 0 || batch_u == 0) throw ConfigError("batch sizes must be positive");
        if (eval_every == 0) throw ConfigError("eval_every must be positive");
    }
};

struct IterationStats {
    std::size_t iteration = 0;  // 1-based, after the step
    double loss_l = 0.0;
    std::optional<double> loss_u;  // unlabeled term; absent for finetune
    const std::vector<PseudoLabelDecision>* decisions = nullptr;
};

// Hooks for diagnostics; the training loop itself never touches hidden
// ground truth.
struct TrainObserver {
    std::function<void(const IterationStats&)> on_iteration;
    std::function<void(const IterationStats&, const FeatureExtractor&, const LinearClassifier&)>
        on_tick;
};

struct TrainResult {
    FeatureExtractor extractor;
    LinearClassifier classifier;
    std::optional<PrototypeBank> bank;
    Checkpoint state;  // model + optimizer + rng states at the final iteration
};

// Eq. 6-style EMA toward a labeled sample's strong-view feature.
inline void update_prototype_labeled(PrototypeBank& bank, const double* strong_feature, int y) {
    bank.update(static_cast<std::size_t>(y), strong_feature);
}

// Eq. 7-style gated update for an unlabeled sample.
inline void update_prototype_unlabeled(PrototypeBank& bank, const double* strong_feature,
                                       const double* weak_feature,
                                       const PseudoLabelDecision& dec, ProtoUpdateMode mode) {
    switch (mode) {
        case ProtoUpdateMode::standard:
            if (dec.accepted) bank.update(static_cast<std::size_t>(dec.label), strong_feature);
            break;
        case ProtoUpdateMode::weak_aug:
            if (dec.accepted) bank.update(static_cast<std::size_t>(dec.label), weak_feature);
            break;
        case ProtoUpdateMode::no_threshold:
            bank.update(static_cast<std::size_t>(dec.label), strong_feature);
            break;
    }
}

// One optimizer steps the extractor and the classifier together; the method
// only decides which loss terms exist. For pfa/pfa_cpl the classifier never
// enters the prototype loss graph, so its update comes from L_l alone.
inline TrainResult train(const TrainConfig& cfg, const ModelDims& dims,
                         const LabeledSplit& labeled, const UnlabeledView& unlabeled,
                         const AugmentConfig& aug,
                         const std::optional<FeatureExtractor>& pretrained,
                         const TrainObserver& obs = {}, const Checkpoint* resume = nullptr) {
    cfg.validate();

    Rng init_rng(derive_seed(cfg.seed, 0x1217));
    FeatureExtractor f =
        pretrained ? *pretrained : FeatureExtractor(dims.extractor, init_rng);
    if (pretrained) {
        // keep the stream aligned with the random-init path
        FeatureExtractor discard(dims.extractor, init_rng);
    }
    // the classifier is always fresh for the target task
    LinearClassifier w(f.feature_dim(), dims.classes, init_rng);

    auto params = f.parameters();
    for (auto& p : w.parameters()) params.push_back(p);
    SgdOptimizer opt(params, cfg.sgd);

    Rng aug_rng(derive_seed(cfg.seed, 0xA061));
    Rng batch_rng(derive_seed(cfg.seed, 0xBA7C));
    std::size_t start_iter = 0;
    if (resume) {
        restore_model(*resume, f, w);
        if (resume->optimizer_velocities) opt.set_velocities(*resume->optimizer_velocities);
        if (!resume->rng_states.empty()) aug_rng.load_state(resume->rng_states[0]);
        start_iter = resume->iteration;
        opt.set_step_count(start_iter);
    }

    const bool uses_prototypes = cfg.method == Method::pfa || cfg.method == Method::pfa_cpl;
    std::optional<PrototypeBank> bank;
    if (uses_prototypes)
        bank = init_prototypes(f, labeled, dims.classes, cfg.beta, cfg.temperature);

    Thresholds thr;
    thr.tau = cfg.tau;
    std::optional<CplState> cpl;
    if (cfg.method == Method::pfa_cpl)
        cpl.emplace(dims.classes, unlabeled.size(), cfg.tau);

    BatchIter batches(labeled, unlabeled, cfg.batch_l, cfg.batch_u, batch_rng);
    // the epoch shuffle position is not serialized: replay the stream from
    // its seed so a resumed run sees exactly the batches the full run would
    for (std::size_t it = 0; it < start_iter; ++it) batches.next();
    const std::size_t d_f = f.feature_dim();

    for (std::size_t it = start_iter; it < cfg.iterations; ++it) {
        auto [lb, ub] = batches.next();

        // fixed augmentation draw order so every method consumes the stream
        // identically
        std::vector<std::size_t> local_u(ub.x.n), local_l(lb.x.n);
        for (std::size_t i = 0; i < ub.x.n; ++i) local_u[i] = i;
        for (std::size_t i = 0; i < lb.x.n; ++i) local_l[i] = i;
        Matrix weak_u = weak_augment_rows(ub.x, local_u, aug, aug_rng);
        Matrix weak_l = weak_augment_rows(lb.x, local_l, aug, aug_rng);
        Matrix strong_u = strong_augment_rows(ub.x, local_u, aug, aug_rng);
        Matrix strong_l = strong_augment_rows(lb.x, local_l, aug, aug_rng);

        auto decisions = pseudo_label(f, w, weak_u, ub.ids, thr);

        const Matrix& lab_in = cfg.strong_aug_labeled ? strong_l : weak_l;
        Tensor lab_features = extract(f, lab_in);
        Tensor l_l = labeled_loss_from_features(w, lab_features, lb.y);

        IterationStats stats;
        stats.iteration = it + 1;
        stats.loss_l = l_l.item();
        stats.decisions = &decisions;

        Tensor total = l_l;
        Tensor strong_u_features;      // kept for prototype updates
        Tensor lab_strong_features;    // likewise
        switch (cfg.method) {
            case Method::finetune:
                break;
            case Method::fixmatch: {
                strong_u_features = extract(f, strong_u);
                Tensor l_u =
                    fixmatch_unlabeled_loss_from_features(w, strong_u_features, decisions);
                stats.loss_u = l_u.item();
                total = total_loss(l_l, l_u, cfg.lambda);
                break;
            }
            case Method::pfa:
            case Method::pfa_cpl: {
                strong_u_features = extract(f, strong_u);
                // L^_f's labeled term always uses the strong view
                lab_strong_features =
                    cfg.strong_aug_labeled ? lab_features : extract(f, strong_l);
                Tensor l_f = feature_adjust_loss_from_features(
                    *bank, lab_strong_features, lb.y, strong_u_features, decisions);
                stats.loss_u = l_f.item();
                total = total_loss(l_l, l_f, cfg.lambda);
                break;
            }
        }

        total.backward();
        opt.step();

        if (uses_prototypes) {
            // EMA updates after the optimizer step, reusing this step's
            // detached features
            const auto& lab_vals = lab_strong_features.values();
            for (std::size_t i = 0; i < lb.y.size(); ++i)
                update_prototype_labeled(*bank, lab_vals.data() + i * d_f, lb.y[i]);

            Tensor weak_u_features;
            const std::vector<double>* weak_vals = nullptr;
            if (cfg.proto_mode == ProtoUpdateMode::weak_aug) {
                weak_u_features = extract(f, weak_u).detach();
                weak_vals = &weak_u_features.values();
            }
            const auto& strong_vals = strong_u_features.values();
            for (std::size_t i = 0; i < decisions.size(); ++i) {
                const double* sf = strong_vals.data() + i * d_f;
                const double* wf = weak_vals ? weak_vals->data() + i * d_f : sf;
                update_prototype_unlabeled(*bank, sf, wf, decisions[i], cfg.proto_mode);
            }
        }

        if (cpl) {
            std::vector<double> new_thr;
            if (cpl->observe(decisions, new_thr)) thr.per_class = std::move(new_thr);
        }

        if (obs.on_iteration) obs.on_iteration(stats);
        if (obs.on_tick &&
            (stats.iteration % cfg.eval_every == 0 || stats.iteration == cfg.iterations))
            obs.on_tick(stats, f, w);
    }

    TrainResult res;
    res.state = snapshot_model(f, w);
    res.state.optimizer_velocities = opt.velocities();
    res.state.rng_states = {aug_rng.save_state(), batch_rng.save_state()};
    res.state.iteration = cfg.iterations;
    res.extractor = std::move(f);
    res.classifier = std::move(w);
    res.bank = std::move(bank);
    return res;
}

}  // namespace pfalab

#endif
