#ifndef PFALAB_CONFIG_HPP
#define PFALAB_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pfalab/augment.hpp"
#include "pfalab/dataset.hpp"
#include "pfalab/model.hpp"
#include "pfalab/train.hpp"

namespace pfalab {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};

struct ArmSpec {
    std::string name;
    TrainConfig train;
};

struct ExperimentSpec {
    SyntheticTransferConfig data;
    AugmentConfig aug;
    bool pretrain = true;  // false: random-init extractor
    PretrainConfig pretrain_cfg;
    TrainConfig base;  // run-level defaults inherited by every arm
    std::vector<ArmSpec> arms;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs";
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct KeyValue {
    std::string section;  // "data", "run", "arm <name>", ...
    std::string key;
    std::string value;
    int line = 0;
};

inline std::vector<KeyValue> tokenize_config(std::istream& is) {
    std::vector<KeyValue> out;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ParseError("line " + std::to_string(lineno) + ": key outside any section");
        KeyValue kv;
        kv.section = section;
        kv.key = trim(line.substr(0, eq));
        kv.value = trim(line.substr(eq + 1));
        kv.line = lineno;
        if (kv.key.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

inline double parse_double(const KeyValue& kv) {
    try {
        std::size_t pos = 0;
        double v = std::stod(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ParseError("line " + std::to_string(kv.line) + ": key '" + kv.key +
                         "' expects a number, got '" + kv.value + "'");
    }
}

inline long long parse_int(const KeyValue& kv) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ParseError("line " + std::to_string(kv.line) + ": key '" + kv.key +
                         "' expects an integer, got '" + kv.value + "'");
    }
}

inline bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true") return true;
    if (kv.value == "false") return false;
    throw ParseError("line " + std::to_string(kv.line) + ": key '" + kv.key +
                     "' expects true/false, got '" + kv.value + "'");
}

inline void range_error(const KeyValue& kv, const std::string& what) {
    throw ParseError("line " + std::to_string(kv.line) + ": key '" + kv.key + "' " + what);
}

inline Method parse_method(const KeyValue& kv) {
    if (kv.value == "finetune") return Method::finetune;
    if (kv.value == "fixmatch") return Method::fixmatch;
    if (kv.value == "pfa") return Method::pfa;
    if (kv.value == "pfa_cpl") return Method::pfa_cpl;
    throw ParseError("line " + std::to_string(kv.line) +
                     ": method must be finetune|fixmatch|pfa|pfa_cpl, got '" + kv.value + "'");
}

inline ProtoUpdateMode parse_proto_mode(const KeyValue& kv) {
    if (kv.value == "default") return ProtoUpdateMode::standard;
    if (kv.value == "weak_aug") return ProtoUpdateMode::weak_aug;
    if (kv.value == "no_threshold") return ProtoUpdateMode::no_threshold;
    throw ParseError("line " + std::to_string(kv.line) +
                     ": proto_mode must be default|weak_aug|no_threshold, got '" + kv.value +
                     "'");
}

inline std::string proto_mode_name(ProtoUpdateMode m) {
    switch (m) {
        case ProtoUpdateMode::standard: return "default";
        case ProtoUpdateMode::weak_aug: return "weak_aug";
        case ProtoUpdateMode::no_threshold: return "no_threshold";
    }
    return "?";
}

// train keys are shared between [run] and [arm ...] sections
inline bool apply_train_key(const KeyValue& kv, TrainConfig& t) {
    if (kv.key == "method") {
        t.method = parse_method(kv);
    } else if (kv.key == "tau") {
        double v = parse_double(kv);
        if (v <= 0.0 || v > 1.0) range_error(kv, "must lie in (0, 1]");
        t.tau = v;
    } else if (kv.key == "temperature") {
        double v = parse_double(kv);
        if (v <= 0.0) range_error(kv, "must be positive");
        t.temperature = v;
    } else if (kv.key == "lambda") {
        double v = parse_double(kv);
        if (v < 0.0) range_error(kv, "must be non-negative");
        t.lambda = v;
    } else if (kv.key == "beta") {
        double v = parse_double(kv);
        if (v < 0.0 || v > 1.0) range_error(kv, "must lie in [0, 1]");
        t.beta = v;
    } else if (kv.key == "batch_l") {
        long long v = parse_int(kv);
        if (v < 1) range_error(kv, "must be >= 1");
        t.batch_l = static_cast<std::size_t>(v);
    } else if (kv.key == "batch_u") {
        long long v = parse_int(kv);
        if (v < 1) range_error(kv, "must be >= 1");
        t.batch_u = static_cast<std::size_t>(v);
    } else if (kv.key == "lr") {
        double v = parse_double(kv);
        if (v <= 0.0) range_error(kv, "must be positive");
        t.sgd.learning_rate = v;
    } else if (kv.key == "momentum") {
        double v = parse_double(kv);
        if (v < 0.0 || v >= 1.0) range_error(kv, "must lie in [0, 1)");
        t.sgd.momentum = v;
    } else if (kv.key == "weight_decay") {
        double v = parse_double(kv);
        if (v < 0.0) range_error(kv, "must be non-negative");
        t.sgd.weight_decay = v;
    } else if (kv.key == "proto_mode") {
        t.proto_mode = parse_proto_mode(kv);
    } else if (kv.key == "strong_aug_labeled") {
        t.strong_aug_labeled = parse_bool(kv);
    } else {
        return false;
    }
    return true;
}

}  // namespace detail

inline ExperimentSpec parse_config(std::istream& is) {
    ExperimentSpec spec;
    auto kvs = detail::tokenize_config(is);
    bool seeds_set = false;
    bool any_run_or_arm = false;
    std::vector<std::string> arm_order;
    std::map<std::string, TrainConfig> arm_overrides;

    // first pass: run-level defaults, so arm sections can appear anywhere
    for (const auto& kv : kvs) {
        if (kv.section != "run") continue;
        any_run_or_arm = true;
        if (detail::apply_train_key(kv, spec.base)) continue;
        if (kv.key == "seeds") {
            std::istringstream ss(kv.value);
            std::vector<std::uint64_t> seeds;
            long long s;
            while (ss >> s) {
                if (s < 0) detail::range_error(kv, "seeds must be non-negative");
                seeds.push_back(static_cast<std::uint64_t>(s));
            }
            if (!ss.eof() || seeds.empty())
                detail::range_error(kv, "expects a space-separated list of integers");
            spec.seeds = std::move(seeds);
            seeds_set = true;
        } else if (kv.key == "iterations") {
            long long v = detail::parse_int(kv);
            if (v < 0) detail::range_error(kv, "must be >= 0");
            spec.base.iterations = static_cast<std::size_t>(v);
        } else if (kv.key == "eval_every") {
            long long v = detail::parse_int(kv);
            if (v < 1) detail::range_error(kv, "must be >= 1");
            spec.base.eval_every = static_cast<std::size_t>(v);
        } else if (kv.key == "out") {
            spec.out_dir = kv.value;
        } else {
            throw ParseError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key +
                             "' in [run]");
        }
    }

    for (const auto& kv : kvs) {
        if (kv.section == "run") continue;
        if (kv.section == "data") {
            if (kv.key == "classes") spec.data.classes = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "d_core") spec.data.d_core = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "d_spur") spec.data.d_spur = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "n_source") spec.data.n_source = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "n_l") spec.data.n_l = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "n_u") spec.data.n_u = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "n_test") spec.data.n_test = static_cast<int>(detail::parse_int(kv));
            else if (kv.key == "separation") spec.data.separation = detail::parse_double(kv);
            else if (kv.key == "noise") spec.data.noise = detail::parse_double(kv);
            else if (kv.key == "rho_src") {
                double v = detail::parse_double(kv);
                if (v < 0.0 || v > 1.0) detail::range_error(kv, "must lie in [0, 1]");
                spec.data.rho_src = v;
            } else if (kv.key == "rho_lab") {
                double v = detail::parse_double(kv);
                if (v < 0.0 || v > 1.0) detail::range_error(kv, "must lie in [0, 1]");
                spec.data.rho_lab = v;
            } else if (kv.key == "seed") {
                spec.data.seed = static_cast<std::uint64_t>(detail::parse_int(kv));
            } else {
                throw ParseError("line " + std::to_string(kv.line) + ": unknown key '" +
                                 kv.key + "' in [data]");
            }
        } else if (kv.section == "augment") {
            if (kv.key == "weak_sigma") spec.aug.weak_sigma = detail::parse_double(kv);
            else if (kv.key == "strong_sigma") spec.aug.strong_sigma = detail::parse_double(kv);
            else if (kv.key == "mask_frac") {
                double v = detail::parse_double(kv);
                if (v < 0.0 || v > 0.5) detail::range_error(kv, "must lie in [0, 0.5]");
                spec.aug.mask_frac = v;
            } else if (kv.key == "scale_jitter") {
                double v = detail::parse_double(kv);
                if (v < 0.0 || v > 0.5) detail::range_error(kv, "must lie in [0, 0.5]");
                spec.aug.scale_jitter = v;
            } else {
                throw ParseError("line " + std::to_string(kv.line) + ": unknown key '" +
                                 kv.key + "' in [augment]");
            }
        } else if (kv.section == "pretrain") {
            if (kv.key == "init") {
                if (kv.value == "pretrained") spec.pretrain = true;
                else if (kv.value == "random") spec.pretrain = false;
                else detail::range_error(kv, "must be pretrained|random");
            } else if (kv.key == "epochs") {
                long long v = detail::parse_int(kv);
                if (v < 0) detail::range_error(kv, "must be >= 0");
                spec.pretrain_cfg.epochs = static_cast<int>(v);
            } else if (kv.key == "batch") {
                long long v = detail::parse_int(kv);
                if (v < 1) detail::range_error(kv, "must be >= 1");
                spec.pretrain_cfg.batch = static_cast<std::size_t>(v);
            } else if (kv.key == "lr") {
                spec.pretrain_cfg.sgd.learning_rate = detail::parse_double(kv);
            } else if (kv.key == "momentum") {
                spec.pretrain_cfg.sgd.momentum = detail::parse_double(kv);
            } else if (kv.key == "weight_decay") {
                spec.pretrain_cfg.sgd.weight_decay = detail::parse_double(kv);
            } else {
                throw ParseError("line " + std::to_string(kv.line) + ": unknown key '" +
                                 kv.key + "' in [pretrain]");
            }
        } else if (kv.section.rfind("arm ", 0) == 0) {
            any_run_or_arm = true;
            std::string name = detail::trim(kv.section.substr(4));
            if (name.empty())
                throw ParseError("line " + std::to_string(kv.line) + ": empty arm name");
            if (!arm_overrides.count(name)) {
                arm_order.push_back(name);
                arm_overrides.emplace(name, spec.base);
            }
            if (!detail::apply_train_key(kv, arm_overrides.at(name)))
                throw ParseError("line " + std::to_string(kv.line) + ": unknown key '" +
                                 kv.key + "' in [" + kv.section + "]");
        } else {
            throw ParseError("line " + std::to_string(kv.line) + ": unknown section [" +
                             kv.section + "]");
        }
    }
    (void)seeds_set;

    if (!arm_order.empty()) {
        for (const auto& name : arm_order)
            spec.arms.push_back({name, arm_overrides.at(name)});
    } else if (any_run_or_arm) {
        spec.arms.push_back({method_name(spec.base.method), spec.base});
    } else {
        throw ParseError("config defines no [run] section and no [arm ...] sections");
    }

    spec.data.validate();
    spec.aug.validate();
    for (auto& arm : spec.arms) {
        arm.train.iterations = spec.base.iterations;
        arm.train.eval_every = spec.base.eval_every;
        arm.train.validate();
    }
    return spec;
}

inline ExperimentSpec parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    return parse_config(is);
}

// Canonical text form; parse(serialize(spec)) reproduces the spec.
inline std::string serialize_config(const ExperimentSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    const auto& d = spec.data;
    os << "[data]\n"
       << "classes = " << d.classes << "\nd_core = " << d.d_core << "\nd_spur = " << d.d_spur
       << "\nn_source = " << d.n_source << "\nn_l = " << d.n_l << "\nn_u = " << d.n_u
       << "\nn_test = " << d.n_test << "\nseparation = " << d.separation
       << "\nnoise = " << d.noise << "\nrho_src = " << d.rho_src
       << "\nrho_lab = " << d.rho_lab << "\nseed = " << d.seed << "\n\n";
    const auto& a = spec.aug;
    os << "[augment]\n"
       << "weak_sigma = " << a.weak_sigma << "\nstrong_sigma = " << a.strong_sigma
       << "\nmask_frac = " << a.mask_frac << "\nscale_jitter = " << a.scale_jitter << "\n\n";
    const auto& p = spec.pretrain_cfg;
    os << "[pretrain]\n"
       << "init = " << (spec.pretrain ? "pretrained" : "random") << "\nepochs = " << p.epochs
       << "\nbatch = " << p.batch << "\nlr = " << p.sgd.learning_rate
       << "\nmomentum = " << p.sgd.momentum << "\nweight_decay = " << p.sgd.weight_decay
       << "\n\n";
    auto emit_train = [&os](const TrainConfig& t) {
        os << "method = " << method_name(t.method) << "\ntau = " << t.tau
           << "\ntemperature = " << t.temperature << "\nlambda = " << t.lambda
           << "\nbeta = " << t.beta << "\nbatch_l = " << t.batch_l
           << "\nbatch_u = " << t.batch_u << "\nlr = " << t.sgd.learning_rate
           << "\nmomentum = " << t.sgd.momentum << "\nweight_decay = " << t.sgd.weight_decay
           << "\nproto_mode = " << detail::proto_mode_name(t.proto_mode)
           << "\nstrong_aug_labeled = " << (t.strong_aug_labeled ? "true" : "false") << '\n';
    };
    os << "[run]\n"
       << "seeds =";
    for (auto s : spec.seeds) os << ' ' << s;
    os << "\niterations = " << spec.base.iterations << "\neval_every = " << spec.base.eval_every
       << "\nout = " << spec.out_dir << '\n';
    emit_train(spec.base);
    for (const auto& arm : spec.arms) {
        os << "\n[arm " << arm.name << "]\n";
        emit_train(arm.train);
    }
    return os.str();
}

}  // namespace pfalab

#endif
