#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pfalab/config.hpp"
#include "pfalab/experiment.hpp"

using namespace pfalab;
namespace fs = std::filesystem;

namespace {

ExperimentSpec parse_text(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

std::string parse_error_of(const std::string& text) {
    try {
        parse_text(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    int rc = std::system((std::string(PFALAB_CLI_PATH) + " " + args).c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kTinyConfig =
    "[data]\n"
    "classes = 4\nd_core = 6\nd_spur = 6\n"
    "n_source = 200\nn_l = 40\nn_u = 200\nn_test = 100\nseed = 3\n"
    "[pretrain]\ninit = pretrained\nepochs = 1\n"
    "[run]\nseeds = 1\niterations = 20\neval_every = 10\n"
    "[arm finetune]\nmethod = finetune\n"
    "[arm pfa]\nmethod = pfa\n";

}  // namespace

TEST_CASE("a minimal config inherits every documented default") {
    auto spec = parse_text("[run]\nmethod = pfa\n");
    CHECK(spec.data.classes == 10);
    CHECK(spec.data.d_core == 16);
    CHECK(spec.data.d_spur == 16);
    CHECK(spec.data.n_l == 100);
    CHECK(spec.data.n_u == 5000);
    CHECK(spec.data.n_test == 2000);
    CHECK(spec.data.separation == 3.0);
    CHECK(spec.data.noise == 1.0);
    CHECK(spec.aug.weak_sigma == 0.1);
    CHECK(spec.pretrain);
    CHECK(spec.base.tau == 0.9925);
    CHECK(spec.base.temperature == 0.25);
    CHECK(spec.base.lambda == 1.0);
    CHECK(spec.base.beta == 0.99);
    CHECK(spec.base.batch_l == 32);
    CHECK(spec.base.batch_u == 64);
    CHECK(spec.base.iterations == 4000);
    CHECK(spec.base.eval_every == 50);
    CHECK(spec.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    REQUIRE(spec.arms.size() == 1);
    CHECK(spec.arms[0].name == "pfa");
}

TEST_CASE("range violations name the offending key and line") {
    std::string msg = parse_error_of("[run]\nmethod = pfa\ntau = 1.5\n");
    CHECK(msg.find("tau") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("(0, 1]") != std::string::npos);

    CHECK(parse_error_of("[run]\nmethod = pfa\nlambda = -1\n").find("lambda") !=
          std::string::npos);
    CHECK(parse_error_of("[data]\nrho_src = 2\n[run]\nmethod = pfa\n").find("rho_src") !=
          std::string::npos);
    CHECK(parse_error_of("[run]\nmethod = sgd\n").find("method") != std::string::npos);
}

TEST_CASE("unknown keys and sections are rejected, not ignored") {
    CHECK(parse_error_of("[run]\nmethod = pfa\nlearning = 3\n").find("unknown key") !=
          std::string::npos);
    CHECK(parse_error_of("[model]\nwidth = 9\n[run]\nmethod = pfa\n").find("unknown section") !=
          std::string::npos);
    CHECK(parse_error_of("").find("no [run]") != std::string::npos);
    CHECK(parse_error_of("tau = 1\n").find("outside any section") != std::string::npos);
}

TEST_CASE("arms inherit run-level values and apply their own overrides") {
    auto spec = parse_text(
        "[run]\nlambda = 0.5\ntau = 0.9\nseeds = 7 8\n"
        "[arm base]\nmethod = fixmatch\n"
        "[arm sharp]\nmethod = pfa\ntau = 0.99\n");
    REQUIRE(spec.arms.size() == 2);
    CHECK(spec.arms[0].name == "base");
    CHECK(spec.arms[0].train.method == Method::fixmatch);
    CHECK(spec.arms[0].train.lambda == 0.5);
    CHECK(spec.arms[0].train.tau == 0.9);
    CHECK(spec.arms[1].train.tau == 0.99);
    CHECK(spec.arms[1].train.lambda == 0.5);
    CHECK(spec.seeds == std::vector<std::uint64_t>{7, 8});
}

TEST_CASE("serialize/parse round-trips the spec") {
    auto spec = parse_text(
        "[data]\nclasses = 4\nd_core = 6\nd_spur = 6\nn_source = 200\nn_l = 40\n"
        "n_u = 200\nn_test = 100\nrho_lab = 0.75\nseed = 3\n"
        "[augment]\nstrong_sigma = 0.8\n"
        "[pretrain]\ninit = random\nepochs = 2\n"
        "[run]\nseeds = 4 5\niterations = 30\neval_every = 10\nout = somewhere\n"
        "[arm a]\nmethod = pfa_cpl\nbeta = 0.9\n");
    auto rt = parse_text(serialize_config(spec));
    CHECK(serialize_config(rt) == serialize_config(spec));
    CHECK(rt.data.rho_lab == 0.75);
    CHECK_FALSE(rt.pretrain);
    CHECK(rt.arms[0].train.method == Method::pfa_cpl);
    CHECK(rt.arms[0].train.beta == 0.9);
    CHECK(rt.out_dir == "somewhere");
}

TEST_CASE("run_experiment lays out the directory tree and is deterministic") {
    auto spec = parse_text(kTinyConfig);
    fs::remove_all("cli_run_a");
    fs::remove_all("cli_run_b");
    run_experiment(spec, "cli_run_a");
    for (const char* arm : {"finetune", "pfa"}) {
        fs::path dir = fs::path("cli_run_a") / arm / "1";
        CAPTURE(arm);
        CHECK(fs::exists(dir / "metrics.csv"));
        CHECK(fs::exists(dir / "embeddings.csv"));
        CHECK(fs::exists(dir / "model.ckpt"));
    }
    CHECK(fs::exists("cli_run_a/config.txt"));
    CHECK(fs::exists("cli_run_a/summary.json"));

    // metrics rows exist for each tick
    std::string metrics = slurp("cli_run_a/pfa/1/metrics.csv");
    CHECK(metrics.find("iter,test_acc,") == 0);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);  // header + ticks 10, 20

    run_experiment(spec, "cli_run_b");
    CHECK(slurp("cli_run_b/pfa/1/metrics.csv") == metrics);
    CHECK(slurp("cli_run_b/finetune/1/metrics.csv") == slurp("cli_run_a/finetune/1/metrics.csv"));
    fs::remove_all("cli_run_b");

    SUBCASE("compare reads the tree without touching run artifacts") {
        std::string before = slurp("cli_run_a/pfa/1/metrics.csv");
        std::string report = compare_report("cli_run_a");
        CHECK(report.find("arm") == 0);
        CHECK(report.find("finetune") != std::string::npos);
        CHECK(report.find("pfa") != std::string::npos);
        CHECK(slurp("cli_run_a/pfa/1/metrics.csv") == before);
        CHECK_THROWS_AS(compare_report("no_such_dir"), IncompleteRunError);
    }
    fs::remove_all("cli_run_a");
}

TEST_CASE("cli binary: version, usage and error exit codes") {
    CHECK(run_cli("--version > cli_version.txt") == 0);
    CHECK(slurp("cli_version.txt").find("pfalab") != std::string::npos);
    fs::remove("cli_version.txt");

    CHECK(run_cli("> /dev/null 2>&1") == 1);                     // usage
    CHECK(run_cli("run missing.cfg > /dev/null 2>&1") == 2);     // unreadable config
    {
        std::ofstream os("cli_bad.cfg");
        os << "[run]\nmethod = pfa\ntau = 7\n";
    }
    CHECK(run_cli("run cli_bad.cfg > /dev/null 2>&1") == 2);     // config error
    fs::remove("cli_bad.cfg");
    CHECK(run_cli("compare no_such_dir > /dev/null 2>&1") == 3); // runtime error
}

TEST_CASE("cli binary: run then compare end to end") {
    {
        std::ofstream os("cli_tiny.cfg");
        os << kTinyConfig;
    }
    fs::remove_all("cli_run_c");
    CHECK(run_cli("run cli_tiny.cfg --out cli_run_c > /dev/null") == 0);
    CHECK(fs::exists("cli_run_c/summary.json"));
    CHECK(fs::exists("cli_run_c/pfa/1/metrics.csv"));
    CHECK(run_cli("compare cli_run_c > /dev/null") == 0);
    CHECK(fs::exists("cli_run_c/report.txt"));
    std::string report = slurp("cli_run_c/report.txt");
    CHECK(report.find("finetune") != std::string::npos);
    fs::remove("cli_tiny.cfg");
    fs::remove_all("cli_run_c");
}
