#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "pfalab/augment.hpp"
#include "pfalab/batching.hpp"
#include "pfalab/dataset.hpp"
#include "test_util.hpp"

using namespace pfalab;

static SyntheticTransferConfig small_cfg() {
    SyntheticTransferConfig c;
    c.classes = 5;
    c.d_core = 8;
    c.d_spur = 8;
    c.n_source = 500;
    c.n_l = 50;
    c.n_u = 400;
    c.n_test = 400;
    c.seed = 7;
    return c;
}

TEST_CASE("bundle generation is a pure function of the config") {
    auto a = make_bundle(small_cfg());
    auto b = make_bundle(small_cfg());
    CHECK(a.source.x.data == b.source.x.data);
    CHECK(a.labeled.x.data == b.labeled.x.data);
    CHECK(a.unlabeled_x.data == b.unlabeled_x.data);
    CHECK(a.test.x.data == b.test.x.data);
    CHECK(a.source.y == b.source.y);
    CHECK(a.hidden_unlabeled_labels() == b.hidden_unlabeled_labels());

    auto cfg2 = small_cfg();
    cfg2.seed = 8;
    auto c = make_bundle(cfg2);
    CHECK(a.source.x.data != c.source.x.data);
}

TEST_CASE("splits have the requested shapes and balanced labels") {
    auto cfg = small_cfg();
    auto b = make_bundle(cfg);
    CHECK(b.source.x.n == 500);
    CHECK(b.source.x.d == 16);
    CHECK(b.labeled.x.n == 50);
    CHECK(b.unlabeled_x.n == 400);
    CHECK(b.test.x.n == 400);
    std::vector<int> counts(cfg.classes, 0);
    for (int y : b.test.y) ++counts[y];
    for (int c : counts) CHECK(c == 400 / cfg.classes);
    CHECK(b.hidden_unlabeled_labels().size() == 400);
}

TEST_CASE("config validation rejects bad values") {
    auto cfg = small_cfg();
    cfg.rho_src = 1.5;
    CHECK_THROWS_AS(make_bundle(cfg), ConfigError);
    cfg = small_cfg();
    cfg.classes = 1;
    CHECK_THROWS_AS(make_bundle(cfg), ConfigError);
    cfg = small_cfg();
    cfg.separation = 0.0;
    CHECK_THROWS_AS(make_bundle(cfg), ConfigError);
}

TEST_CASE("rho_src=1, noise=0: source spurious block alone separates classes") {
    auto cfg = small_cfg();
    cfg.noise = 0.0;
    auto b = make_bundle(cfg);
    auto spur = testutil::slice_cols(b.source.x, cfg.d_core, cfg.dim());
    auto probe = testutil::train_probe(spur, b.source.y, cfg.classes, 200);
    CHECK(probe.accuracy(spur, b.source.y) == doctest::Approx(1.0));
}

TEST_CASE("rho_src=0: source spurious block is pure noise") {
    auto cfg = small_cfg();
    cfg.rho_src = 0.0;
    cfg.n_source = 1000;
    auto b = make_bundle(cfg);
    // mean of each spurious coordinate, per class, should be near zero
    for (int k = 0; k < cfg.classes; ++k) {
        for (int j = cfg.d_core; j < cfg.dim(); ++j) {
            double m = 0.0;
            int cnt = 0;
            for (std::size_t i = 0; i < b.source.x.n; ++i)
                if (b.source.y[i] == k) {
                    m += b.source.x.row(i)[j];
                    ++cnt;
                }
            CHECK(std::abs(m / cnt) < 0.35);  // sigma/sqrt(200) ~ 0.07, 5 sigma
        }
    }
}

TEST_CASE("target test spurious block carries no label signal (chance-level probe)") {
    auto cfg = small_cfg();
    cfg.n_u = 1000;
    cfg.n_test = 1000;
    auto b = make_bundle(cfg);
    // train on test spurious dims, evaluate on the unlabeled split's spurious
    // dims against its hidden truth: both are decorrelated, so accuracy must
    // sit at chance (1/C = 0.2 here)
    auto train_x = testutil::slice_cols(b.test.x, cfg.d_core, cfg.dim());
    auto eval_x = testutil::slice_cols(b.unlabeled_x, cfg.d_core, cfg.dim());
    auto probe = testutil::train_probe(train_x, b.test.y, cfg.classes, 200);
    double acc = probe.accuracy(eval_x, b.hidden_unlabeled_labels());
    MESSAGE("spurious probe accuracy on decorrelated split: ", acc);
    CHECK(acc > 0.12);
    CHECK(acc < 0.28);
    // while the core block alone remains highly predictive
    auto core_train = testutil::slice_cols(b.test.x, 0, cfg.d_core);
    auto core_eval = testutil::slice_cols(b.unlabeled_x, 0, cfg.d_core);
    auto core_probe = testutil::train_probe(core_train, b.test.y, cfg.classes, 200);
    CHECK(core_probe.accuracy(core_eval, b.hidden_unlabeled_labels()) > 0.7);
}

TEST_CASE("bundle save/load round-trips bitwise") {
    auto b = make_bundle(small_cfg());
    const char* path = "bundle_roundtrip.bin";
    save_bundle(path, b);
    auto r = load_bundle(path);
    CHECK(r.source.x.data == b.source.x.data);
    CHECK(r.labeled.x.data == b.labeled.x.data);
    CHECK(r.unlabeled_x.data == b.unlabeled_x.data);
    CHECK(r.test.x.data == b.test.x.data);
    CHECK(r.hidden_unlabeled_labels() == b.hidden_unlabeled_labels());
    CHECK(r.config.seed == b.config.seed);
    CHECK(r.config.rho_src == b.config.rho_src);
    std::remove(path);
}

TEST_CASE("bundle loader rejects a bad magic") {
    const char* path = "bundle_bad_magic.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE!junkjunkjunk";
    }
    CHECK_THROWS_AS(load_bundle(path), IoError);
    std::remove(path);
}

// ---- augmentations ----------------------------------------------------------

TEST_CASE("weak augment adds noise of the configured scale") {
    AugmentConfig cfg;
    cfg.weak_sigma = 0.1;
    Rng rng(3);
    std::vector<double> x(16, 1.0);
    // sigma -> 0 limit: perturbation shrinks with sigma (exact identity at 0
    // is excluded by validation, so check the scale empirically instead)
    const int trials = 20000;
    double sq = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto out = weak_augment(x, cfg, rng);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double dlt = out[j] - x[j];
            sq += dlt * dlt;
        }
    }
    const double emp_sigma = std::sqrt(sq / (trials * x.size()));
    CHECK(emp_sigma == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("strong augment zeroes exactly one contiguous block") {
    AugmentConfig cfg;  // mask_frac 0.25, d=16 -> block of 4
    Rng rng(11);
    std::vector<double> x(16, 5.0);  // large values: noise cannot hit 0 exactly
    std::set<std::size_t> starts;
    for (int t = 0; t < 500; ++t) {
        auto out = strong_augment(x, cfg, rng);
        std::vector<std::size_t> zeros;
        for (std::size_t j = 0; j < out.size(); ++j)
            if (out[j] == 0.0) zeros.push_back(j);
        REQUIRE(zeros.size() == 4);
        for (std::size_t i = 1; i < zeros.size(); ++i) CHECK(zeros[i] == zeros[i - 1] + 1);
        CHECK(zeros[0] <= 12);  // start in [0, d - block]
        starts.insert(zeros[0]);
    }
    CHECK(starts.size() == 13);  // all admissible starts observed
}

TEST_CASE("strong augment distorts more than weak augment") {
    AugmentConfig cfg;
    Rng rng(5);
    auto bundle = make_bundle(small_cfg());
    double weak_sq = 0.0, strong_sq = 0.0;
    const std::size_t d = bundle.unlabeled_x.d;
    for (std::size_t i = 0; i < 200; ++i) {
        const double* row = bundle.unlabeled_x.row(i);
        std::vector<double> x(row, row + d);
        auto w = weak_augment(x, cfg, rng);
        auto s = strong_augment(x, cfg, rng);
        for (std::size_t j = 0; j < d; ++j) {
            weak_sq += (w[j] - x[j]) * (w[j] - x[j]);
            strong_sq += (s[j] - x[j]) * (s[j] - x[j]);
        }
    }
    CHECK(strong_sq > 4.0 * weak_sq);
}

TEST_CASE("strong augment distortion grows with strong_sigma") {
    Rng rng(17);
    std::vector<double> x(32, 1.0);
    double prev = -1.0;
    for (double sigma : {0.3, 0.6, 1.2}) {
        AugmentConfig cfg;
        cfg.strong_sigma = sigma;
        double sq = 0.0;
        for (int t = 0; t < 5000; ++t) {
            auto out = strong_augment(x, cfg, rng);
            for (std::size_t j = 0; j < x.size(); ++j) sq += (out[j] - x[j]) * (out[j] - x[j]);
        }
        CHECK(sq > prev);
        prev = sq;
    }
}

TEST_CASE("augment config validation") {
    AugmentConfig cfg;
    cfg.weak_sigma = 0.7;  // >= strong_sigma
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.mask_frac = 0.6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.scale_jitter = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(AugmentConfig{}.validate());
}

// ---- batching ---------------------------------------------------------------

TEST_CASE("index stream visits each index once per epoch and drops the tail") {
    Rng rng(2);
    IndexStream s(10, 3, rng);
    std::vector<std::size_t> seen;
    for (int b = 0; b < 3; ++b) {  // one epoch = floor(10/3) = 3 batches
        auto batch = s.next();
        REQUIRE(batch.size() == 3);
        seen.insert(seen.end(), batch.begin(), batch.end());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());  // distinct
    for (auto i : seen) CHECK(i < 10);
}

TEST_CASE("index stream is deterministic for a fixed rng seed") {
    Rng r1(9), r2(9);
    IndexStream a(50, 7, r1), b(50, 7, r2);
    for (int t = 0; t < 30; ++t) CHECK(a.next() == b.next());
}

TEST_CASE("index stream rejects invalid batch sizes") {
    Rng rng(1);
    CHECK_THROWS_AS(IndexStream(5, 0, rng), ConfigError);
    CHECK_THROWS_AS(IndexStream(5, 6, rng), ConfigError);
}

TEST_CASE("batch iterator pairs labeled and unlabeled draws with stable ids") {
    auto bundle = make_bundle(small_cfg());
    UnlabeledView uv{&bundle.unlabeled_x};
    Rng rng(4);
    BatchIter it(bundle.labeled, uv, 8, 32, rng);
    for (int t = 0; t < 20; ++t) {
        auto [lb, ub] = it.next();
        REQUIRE(lb.x.n == 8);
        REQUIRE(ub.x.n == 32);
        REQUIRE(ub.ids.size() == 32);
        for (std::size_t i = 0; i < ub.ids.size(); ++i) {
            REQUIRE(ub.ids[i] < bundle.unlabeled_x.n);
            const double* src = bundle.unlabeled_x.row(ub.ids[i]);
            for (std::size_t j = 0; j < ub.x.d; ++j) CHECK(ub.x.row(i)[j] == src[j]);
        }
        // labeled rows carry their own labels
        for (std::size_t i = 0; i < lb.x.n; ++i) {
            bool found = false;
            for (std::size_t r = 0; r < bundle.labeled.x.n && !found; ++r) {
                if (std::equal(lb.x.row(i), lb.x.row(i) + lb.x.d, bundle.labeled.x.row(r)))
                    found = (lb.y[i] == bundle.labeled.y[r]);
            }
            CHECK(found);
        }
    }
}
