#ifndef PFALAB_EXPERIMENT_HPP
#define PFALAB_EXPERIMENT_HPP

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfalab/config.hpp"
#include "pfalab/diagnostics.hpp"
#include "pfalab/train.hpp"

namespace pfalab {

struct IncompleteRunError : std::runtime_error {
    explicit IncompleteRunError(const std::string& m) : std::runtime_error(m) {}
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

struct RunArtifacts {
    double final_test_acc = 0.0;
    std::vector<MetricsRow> rows;
};

// One arm x seed training run; writes metrics.csv, embeddings.csv and
// model.ckpt under dir.
inline RunArtifacts run_single(const ExperimentSpec& spec, const ArmSpec& arm,
                               std::uint64_t seed, const std::string& dir) {
    std::filesystem::create_directories(dir);
    DatasetBundle bundle = make_bundle(spec.data);
    ModelDims dims = default_model_dims(bundle.labeled.x.d,
                                        static_cast<std::size_t>(spec.data.classes));

    std::optional<FeatureExtractor> pretrained;
    if (spec.pretrain)
        pretrained = pretrain_on_source(bundle, dims, spec.pretrain_cfg, seed);

    TrainConfig tc = arm.train;
    tc.seed = seed;

    PseudoHistory history(bundle.hidden_unlabeled_labels());
    UnlabeledView unl{&bundle.unlabeled_x};
    std::vector<MetricsRow> rows;

    TrainObserver obs;
    obs.on_iteration = [&](const IterationStats& s) {
        history.record_decisions(s.iteration, *s.decisions);
    };
    obs.on_tick = [&](const IterationStats& s, const FeatureExtractor& f,
                      const LinearClassifier& w) {
        // refresh latest predictions of every ever-accepted sample with the
        // current model so CKR/ECR reflect the present decision state
        auto ids = history.ever_accepted_ids();
        if (!ids.empty()) {
            Matrix sub(ids.size(), bundle.unlabeled_x.d);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const double* src = bundle.unlabeled_x.row(ids[i]);
                std::copy(src, src + sub.d, sub.row(i));
            }
            history.update_latest(ids, predict(f, w, sub));
        }
        MetricsRow row;
        row.iteration = s.iteration;
        row.test_acc = evaluate(f, w, bundle.test);
        row.ckr = history.ckr();
        row.ecr = history.ecr();
        std::size_t accepted = 0;
        double conf = 0.0;
        for (const auto& d : *s.decisions) {
            accepted += d.accepted ? 1 : 0;
            conf += d.confidence;
        }
        row.accept_frac = s.decisions->empty()
                              ? 0.0
                              : static_cast<double>(accepted) / s.decisions->size();
        row.mean_conf = s.decisions->empty() ? 0.0 : conf / s.decisions->size();
        row.loss_l = s.loss_l;
        row.loss_u = s.loss_u;
        rows.push_back(row);
    };

    TrainResult result = train(tc, dims, bundle.labeled, unl, spec.aug, pretrained, obs);

    emit_metrics(rows, dir + "/metrics.csv");
    emit_embeddings(result.extractor, bundle.test, dir + "/embeddings.csv");
    save_checkpoint(dir + "/model.ckpt", result.state);

    RunArtifacts art;
    art.final_test_acc = rows.empty() ? evaluate(result.extractor, result.classifier, bundle.test)
                                      : rows.back().test_acc;
    art.rows = std::move(rows);
    return art;
}

inline std::string run_dir(const std::string& out, const std::string& arm, std::uint64_t seed) {
    return out + "/" + arm + "/" + std::to_string(seed);
}

// Final test accuracy from a finished run's metrics file.
inline double read_final_acc(const std::string& dir) {
    std::ifstream is(dir + "/metrics.csv");
    if (!is) throw IncompleteRunError("missing metrics: " + dir);
    std::string line, last;
    std::getline(is, line);  // header
    while (std::getline(is, line))
        if (!line.empty()) last = line;
    if (last.empty()) throw IncompleteRunError("empty metrics: " + dir);
    std::istringstream ss(last);
    std::string field;
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    return std::stod(field);
}

// Runs every arm x seed, sequentially or with up to `parallel` forked
// children, then writes summary.json.
inline void run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                           int parallel = 1) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir + "/config.txt", std::ios::binary);
        os << serialize_config(spec);
    }

    struct Job {
        const ArmSpec* arm;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& arm : spec.arms)
        for (auto seed : spec.seeds) jobs.push_back({&arm, seed});

    if (parallel <= 1) {
        for (const auto& j : jobs)
            run_single(spec, *j.arm, j.seed, run_dir(out_dir, j.arm->name, j.seed));
    } else {
        std::vector<pid_t> active;
        auto reap_one = [&]() {
            int status = 0;
            pid_t pid = waitpid(-1, &status, 0);
            active.erase(std::remove(active.begin(), active.end(), pid), active.end());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
                throw std::runtime_error("child run failed");
        };
        for (const auto& j : jobs) {
            while (active.size() >= static_cast<std::size_t>(parallel)) reap_one();
            pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("fork failed");
            if (pid == 0) {
                try {
                    run_single(spec, *j.arm, j.seed, run_dir(out_dir, j.arm->name, j.seed));
                    _exit(0);
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "[%s/%llu] %s\n", j.arm->name.c_str(),
                                 static_cast<unsigned long long>(j.seed), e.what());
                    _exit(3);
                }
            }
            active.push_back(pid);
        }
        while (!active.empty()) reap_one();
    }

    // summary: per arm x seed accuracy, per-arm medians, pairwise diffs
    nlohmann::ordered_json summary;
    std::map<std::string, double> medians;
    for (const auto& arm : spec.arms) {
        nlohmann::ordered_json per_seed;
        std::vector<double> accs;
        for (auto seed : spec.seeds) {
            double acc = read_final_acc(run_dir(out_dir, arm.name, seed));
            per_seed[std::to_string(seed)] = acc;
            accs.push_back(acc);
        }
        const double med = detail::median(accs);
        medians[arm.name] = med;
        summary["arms"][arm.name] = {{"seeds", per_seed}, {"median", med}};
    }
    for (std::size_t i = 0; i < spec.arms.size(); ++i)
        for (std::size_t j = i + 1; j < spec.arms.size(); ++j) {
            const auto& a = spec.arms[i].name;
            const auto& b = spec.arms[j].name;
            summary["median_diff"][a + "-" + b] = medians[a] - medians[b];
        }
    std::ofstream os(out_dir + "/summary.json", std::ios::binary);
    if (!os) throw IoError("cannot write summary.json");
    os << summary.dump(2) << '\n';
}

// ---- compare ---------------------------------------------------------------

struct ArmReport {
    std::string name;
    std::vector<double> final_accs;
    std::vector<double> final_ckrs;   // may be shorter if missing
    std::vector<double> final_ecrs;
    std::vector<double> accept_mid;   // accept_frac at ~50% of training
    std::vector<double> accept_final;
};

namespace detail {

inline std::vector<MetricsRow> read_metrics(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IncompleteRunError("missing metrics: " + path);
    std::string line;
    std::getline(is, line);
    if (line != "iter,test_acc,ckr,ecr,accept_frac,mean_conf,loss_l,loss_u")
        throw IncompleteRunError("unexpected metrics header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f;
        MetricsRow r;
        auto next = [&]() {
            std::getline(ss, f, ',');
            return f;
        };
        r.iteration = std::stoull(next());
        r.test_acc = std::stod(next());
        std::string s = next();
        if (!s.empty()) r.ckr = std::stod(s);
        s = next();
        if (!s.empty()) r.ecr = std::stod(s);
        r.accept_frac = std::stod(next());
        r.mean_conf = std::stod(next());
        r.loss_l = std::stod(next());
        std::getline(ss, f);
        if (!f.empty()) r.loss_u = std::stod(f);
        rows.push_back(r);
    }
    if (rows.empty()) throw IncompleteRunError("empty metrics: " + path);
    return rows;
}

}  // namespace detail

// Plain-text comparison table over an experiment directory; never mutates
// run artifacts other than writing report.txt.
inline std::string compare_report(const std::string& out_dir) {
    std::ifstream cfg(out_dir + "/config.txt");
    if (!cfg) throw IncompleteRunError("no config.txt in " + out_dir + "; incomplete run?");
    std::stringstream buf;
    buf << cfg.rdbuf();
    std::istringstream cfg_is(buf.str());
    ExperimentSpec spec = parse_config(cfg_is);

    std::vector<ArmReport> reports;
    for (const auto& arm : spec.arms) {
        ArmReport rep;
        rep.name = arm.name;
        for (auto seed : spec.seeds) {
            auto rows = detail::read_metrics(run_dir(out_dir, arm.name, seed) + "/metrics.csv");
            rep.final_accs.push_back(rows.back().test_acc);
            if (rows.back().ckr) rep.final_ckrs.push_back(*rows.back().ckr);
            if (rows.back().ecr) rep.final_ecrs.push_back(*rows.back().ecr);
            rep.accept_final.push_back(rows.back().accept_frac);
            rep.accept_mid.push_back(rows[(rows.size() - 1) / 2].accept_frac);
        }
        reports.push_back(std::move(rep));
    }

    std::ostringstream os;
    os << "arm            med_acc  min_acc  max_acc  ckr      ecr      acc50    accF\n";
    auto cell = [](std::optional<double> v) {
        char b[16];
        if (v) std::snprintf(b, sizeof(b), "%-8.4f", *v);
        else std::snprintf(b, sizeof(b), "%-8s", "-");
        return std::string(b);
    };
    for (const auto& r : reports) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-14s", r.name.c_str());
        os << name << ' ' << cell(detail::median(r.final_accs))
           << ' ' << cell(*std::min_element(r.final_accs.begin(), r.final_accs.end()))
           << ' ' << cell(*std::max_element(r.final_accs.begin(), r.final_accs.end())) << ' '
           << cell(r.final_ckrs.empty() ? std::optional<double>{}
                                        : detail::median(r.final_ckrs))
           << ' '
           << cell(r.final_ecrs.empty() ? std::optional<double>{}
                                        : detail::median(r.final_ecrs))
           << ' ' << cell(detail::median(r.accept_mid)) << ' '
           << cell(detail::median(r.accept_final)) << '\n';
    }
    return os.str();
}

inline void compare(const std::string& out_dir) {
    std::string report = compare_report(out_dir);
    std::cout << report;
    std::ofstream os(out_dir + "/report.txt", std::ios::binary);
    if (!os) throw IoError("cannot write report.txt");
    os << report;
}

}  // namespace pfalab

#endif
