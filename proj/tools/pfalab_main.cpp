#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfalab/experiment.hpp"
#include "pfalab/gradcheck.hpp"
#include "pfalab/losses.hpp"

namespace {

constexpr const char* kVersion = "pfalab 0.1.0";

// Smoke-level gradient verification of the loss stack, mirroring the unit
// suite; handy as a standalone sanity command.
int run_gradcheck() {
    using namespace pfalab;
    Rng rng(12345);
    const std::size_t d_in = 6, d_f = 4, classes = 3, n = 4;
    int failures = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> point(n * d_in);
        for (auto& v : point) v = rng.normal();
        std::vector<int> targets(n);
        for (auto& t : targets) t = static_cast<int>(rng.uniform_int(classes));
        Rng mrng(derive_seed(777, trial));
        FeatureExtractor f({d_in, d_f}, mrng);  // linear: keeps rows off zero
        LinearClassifier w(d_f, classes, mrng);
        PrototypeBank bank(classes, d_f, 0.99, 0.1);
        for (std::size_t c = 0; c < classes; ++c) {
            std::vector<double> mu(d_f);
            for (auto& v : mu) v = mrng.normal();
            bank.set_prototype(c, mu);
        }
        auto fn = [&](const pfalab::Tensor& p) {
            Tensor feats = f.forward(reshape(p, {n, d_in}));
            Tensor ce = softmax_cross_entropy(classify(w, feats), targets);
            Tensor proto = scale(sum(prototype_loss_rows(bank, feats, targets)), 1.0 / n);
            return add(ce, proto);
        };
        double err = grad_check(fn, point);
        worst = std::max(worst, err);
        if (err > 1e-4) ++failures;
    }
    std::printf("gradcheck: 100 random points, max relative error %.3g (%s)\n", worst,
                failures == 0 ? "OK" : "FAILED");
    return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised training laboratory for progressive feature adjustment"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(0, 1);

    std::string config_path, out_override, compare_dir;
    int parallel = 1;

    auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a config file");
    run_cmd->add_option("config", config_path, "Path to the experiment config")->required();
    run_cmd->add_option("--out", out_override, "Override the output directory");
    run_cmd->add_option("--parallel", parallel, "Max concurrent arm x seed processes")
        ->check(CLI::PositiveNumber);

    auto* compare_cmd =
        app.add_subcommand("compare", "Tabulate a finished experiment directory");
    compare_cmd->add_option("dir", compare_dir, "Experiment output directory")->required();

    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "Verify loss gradients against finite differences");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run_cmd) {
            pfalab::ExperimentSpec spec;
            try {
                spec = pfalab::parse_config_file(config_path);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return 2;
            }
            const std::string out = out_override.empty() ? spec.out_dir : out_override;
            pfalab::run_experiment(spec, out, parallel);
            std::cout << "wrote " << out << "/summary.json\n";
            return 0;
        }
        if (*compare_cmd) {
            pfalab::compare(compare_dir);
            return 0;
        }
        if (*gradcheck_cmd) return run_gradcheck();
        std::cout << app.help();
        return 1;
    } catch (const pfalab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const pfalab::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
