// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests that drive the installed binary: artifact layout, exit
// codes, byte-level idempotence of reruns, and the plot-ready CSV contracts.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fwgan/config.hpp"
#include "fwgan/datasets.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/serialize.hpp"
#include "fwgan/trainer.hpp"

using namespace fwgan;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FWGAN_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Extract the value following "key=" up to the next whitespace.
std::string kv(const std::string& out, const std::string& key) {
    const auto pos = out.find(key + "=");
    REQUIRE(pos != std::string::npos);
    const auto start = pos + key.size() + 1;
    auto end = out.find_first_of(" \n\t", start);
    if (end == std::string::npos) end = out.size();
    return out.substr(start, end - start);
}

double kv_num(const std::string& out, const std::string& key) { return std::stod(kv(out, key)); }

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.dataset.name = "mog";
    cfg.dataset.n_train = 64;
    cfg.dataset.n_valid = 48;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.lr = 1e-3;
    cfg.gen_hidden = {8, 8};
    cfg.critic_hidden = {8, 8};
    cfg.eval_batch = 16;
    cfg.n_eval_samples = 32;
    cfg.eval_every = 0;
    cfg.seed = 3;
    return cfg;
}

const std::string kTmp = "cli_test_tmp";

std::string write_tiny_config() {
    std::filesystem::create_directories(kTmp);
    const std::string path = kTmp + "/tiny.json";
    atomic_write_text(path, config_to_json(tiny_config()).dump(2) + "\n");
    return path;
}

// Train once into a shared run directory; later cases reuse the artifacts.
const std::string& shared_run() {
    static const std::string dir = [] {
        std::filesystem::remove_all(kTmp);
        const std::string cfg = write_tiny_config();
        const std::string run = kTmp + "/run1";
        const CliResult r = run_cli("train --config " + cfg + " --out " + run);
        REQUIRE(r.code == 0);
        return run;
    }();
    return dir;
}

}  // namespace

TEST_CASE("version and help exit cleanly") {
    REQUIRE(run_cli("--version").code == 0);
    const CliResult help = run_cli("--help");
    REQUIRE(help.code == 0);
    REQUIRE(help.out.find("train") != std::string::npos);
    REQUIRE(run_cli("definitely-not-a-subcommand").code == 2);
}

TEST_CASE("train writes the full artifact set") {
    const std::string& run = shared_run();
    for (const char* name : {"config.json", "metrics.csv", "generator.csv", "critic.csv",
                             "optimizer.csv", "state.json", "manifest.json"})
        REQUIRE(std::filesystem::exists(run + "/" + name));

    const std::string metrics = read_text_file(run + "/metrics.csv");
    REQUIRE(count_lines(metrics) == 1 + 2);  // header + one row per epoch
    REQUIRE(metrics.rfind("epoch,divergence,nll,mmd_x1e3\n", 0) == 0);

    const Json manifest = Json::parse(read_text_file(run + "/manifest.json"));
    REQUIRE(manifest.at("library_version").get<std::string>() == "1.0.0");
    REQUIRE(manifest.at("mmd_statistic").get<std::string>() == "biased_v");
    REQUIRE(manifest.at("config").at("batch_size").get<int>() == 8);
    REQUIRE(manifest.at("h_kde_used").get<double>() > 0.0);

    const Json cfg = Json::parse(read_text_file(run + "/config.json"));
    REQUIRE(cfg.at("epochs").get<int>() == 2);
}

TEST_CASE("train prints final metrics on stdout") {
    // Retrain into a second directory; also the byte-idempotence fixture.
    const std::string cfg = write_tiny_config();
    const std::string run2 = kTmp + "/run2";
    const CliResult r = run_cli("train --config " + cfg + " --out " + run2);
    REQUIRE(r.code == 0);
    REQUIRE(kv(r.out, "run_dir") == run2);
    REQUIRE(std::isfinite(kv_num(r.out, "final_divergence")));
    REQUIRE(std::isfinite(kv_num(r.out, "final_nll")));
    REQUIRE(std::isfinite(kv_num(r.out, "final_mmd_x1e3")));
}

TEST_CASE("reruns of the same config are byte-identical") {
    const std::string& run1 = shared_run();
    const std::string run2 = kTmp + "/run2";
    REQUIRE(std::filesystem::exists(run2 + "/metrics.csv"));
    for (const char* name : {"metrics.csv", "generator.csv", "critic.csv", "optimizer.csv",
                             "config.json"})
        REQUIRE(read_text_file(run1 + "/" + name) ==
                read_text_file(run2 + "/" + std::string(name)));
}

TEST_CASE("eval reports metrics and honors bandwidth overrides") {
    const std::string& run = shared_run();
    const CliResult r = run_cli("eval --run " + run);
    REQUIRE(r.code == 0);
    REQUIRE(std::isfinite(kv_num(r.out, "nll")));
    REQUIRE(std::isfinite(kv_num(r.out, "mmd_x1e3")));
    REQUIRE(kv_num(r.out, "h_kde") == 0.25);
    REQUIRE(kv_num(r.out, "h_mmd") == 0.5);
    REQUIRE(std::filesystem::exists(run + "/eval.csv"));

    const CliResult wide = run_cli("eval --run " + run + " --h-kde 0.7 --h-mmd 0.9");
    REQUIRE(wide.code == 0);
    REQUIRE(kv_num(wide.out, "h_kde") == 0.7);
    REQUIRE(kv_num(wide.out, "h_mmd") == 0.9);

    const CliResult again = run_cli("eval --run " + run);
    REQUIRE(again.out == r.out);  // deterministic for a fixed seed
}

TEST_CASE("eval scores externally provided samples") {
    const std::string& run = shared_run();
    // The validation set itself should score a vanishing MMD against itself.
    const DataBundle data = make_data(tiny_config());
    const std::string csv = kTmp + "/valid_copy.csv";
    write_csv(csv, data.valid, {"x1", "x2"});
    const CliResult r = run_cli("eval --run " + run + " --samples-csv " + csv);
    REQUIRE(r.code == 0);
    REQUIRE(std::fabs(kv_num(r.out, "mmd_x1e3")) < 1e-6);

    // Column mismatch is a configuration error.
    Tensor wide(4, 3);
    const std::string bad = kTmp + "/three_cols.csv";
    write_csv(bad, wide, {"a", "b", "c"});
    const CliResult mismatch = run_cli("eval --run " + run + " --samples-csv " + bad);
    REQUIRE(mismatch.code == 2);
    REQUIRE(mismatch.out.find("columns") != std::string::npos);
}

TEST_CASE("ratio exports a grid CSV in row-major order") {
    const std::string& run = shared_run();
    const std::string out = kTmp + "/ratio_small.csv";
    const CliResult r = run_cli("ratio --run " + run +
                                " --x-lo -1 --x-hi 1 --y-lo 0 --y-hi 3 --res-x 5 --res-y 4"
                                " --n-ref 64 --out " + out);
    REQUIRE(r.code == 0);
    REQUIRE(kv(r.out, "rows") == "20");
    const std::string text = read_text_file(out);
    REQUIRE(count_lines(text) == 21);
    REQUIRE(text.rfind("x,y,q_density_estimate,ratio\n", 0) == 0);

    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::getline(in, line);
    REQUIRE(line.rfind("-1,0,", 0) == 0);  // first point is (x_lo, y_lo)
    int rows = 0;
    double x = 0, y = 0, q = 0, ratio = 0;
    while (std::getline(in, line)) {
        char comma;
        std::istringstream cells(line);
        cells >> x >> comma >> y >> comma >> q >> comma >> ratio;
        REQUIRE(std::isfinite(ratio));
        REQUIRE(ratio >= 0.0);
        REQUIRE(q >= 0.0);
        ++rows;
    }
    REQUIRE(rows == 19);  // remaining grid rows after the probed one
}

TEST_CASE("ratio refuses non-planar generators") {
    // Train on a 3-column CSV dataset, then ask for a 2-D ratio field.
    std::filesystem::create_directories(kTmp);
    RngStream rng = RngStream::from_seed_and_salt(11, salt::kData);
    const Tensor raw = rng.normal_tensor(60, 3);
    const std::string data_csv = kTmp + "/three_d.csv";
    write_csv(data_csv, raw);

    TrainConfig cfg = tiny_config();
    cfg.dataset.kind = "csv";
    cfg.dataset.path = data_csv;
    cfg.epochs = 1;
    const std::string cfg_path = kTmp + "/three_d.json";
    atomic_write_text(cfg_path, config_to_json(cfg).dump(2) + "\n");
    const std::string run = kTmp + "/run3d";
    REQUIRE(run_cli("train --config " + cfg_path + " --out " + run).code == 0);

    const CliResult r = run_cli("ratio --run " + run + " --res-x 3 --res-y 3 --n-ref 16");
    REQUIRE(r.code == 2);
    REQUIRE(r.out.find("2-D") != std::string::npos);
}

TEST_CASE("curves smooths the divergence log") {
    const std::string& run = shared_run();
    const std::string out = kTmp + "/curves.csv";
    const CliResult r = run_cli("curves --run " + run + " --window 2 --out " + out);
    REQUIRE(r.code == 0);
    const int negatives = std::stoi(kv(r.out, "negative_estimates"));
    REQUIRE(negatives >= 0);
    const std::string text = read_text_file(out);
    REQUIRE(text.rfind("epoch,divergence_smoothed\n", 0) == 0);
    REQUIRE(count_lines(text) == 1 + 2);

    // A metrics file with no rows is a configuration error.
    const std::string empty_dir = kTmp + "/empty_run";
    std::filesystem::create_directories(empty_dir);
    atomic_write_text(empty_dir + "/metrics.csv", "epoch,divergence,nll,mmd_x1e3\n");
    REQUIRE(run_cli("curves --run " + empty_dir).code == 2);
}

TEST_CASE("print-config resolves overrides without training") {
    const std::string cfg = write_tiny_config();
    const CliResult r = run_cli("train --config " + cfg +
                                " --override lr=0.75 --override dataset.name=rings"
                                " --print-config");
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    REQUIRE(j.at("lr").get<double>() == 0.75);
    REQUIRE(j.at("dataset").at("name").get<std::string>() == "rings");
    REQUIRE(j.at("batch_size").get<int>() == 8);
}

TEST_CASE("configuration errors exit with status 2") {
    const std::string cfg = write_tiny_config();
    REQUIRE(run_cli("train --config " + cfg + " --override no_such_key=1 --print-config").code ==
            2);
    REQUIRE(run_cli("train --config " + cfg + " --override epochs --print-config").code == 2);
    REQUIRE(run_cli("train --config " + kTmp + "/missing.json --print-config").code == 2);

    const CliResult missing_data =
        run_cli("train --config " + cfg + " --override dataset.kind=csv"
                " --override dataset.path=" + kTmp + "/nowhere.csv --out " + kTmp + "/runx");
    REQUIRE(missing_data.code == 2);
    REQUIRE(missing_data.out.find("nowhere.csv") != std::string::npos);

    REQUIRE(run_cli("eval --run " + kTmp + "/not_a_run").code == 2);
}

TEST_CASE("numerical aborts exit with status 3") {
    const std::string cfg = write_tiny_config();
    const CliResult r = run_cli(
        "train --config " + cfg +
        " --override loss_variant=fgan_kl --override init_scale=50"
        " --override spectral_norm_critic=false --override epochs=5"
        " --out " + kTmp + "/run_abort");
    REQUIRE(r.code == 3);
    REQUIRE(r.out.find("numerical abort") != std::string::npos);
}

TEST_CASE("seed fan-out trains one run per seed") {
    const std::string cfg = write_tiny_config();
    const std::string base = kTmp + "/sweep";
    const CliResult r = run_cli("train --config " + cfg + " --seeds 1 2 --out " + base);
    REQUIRE(r.code == 0);
    for (int s : {1, 2}) {
        const std::string sub = base + "/seed" + std::to_string(s);
        REQUIRE(std::filesystem::exists(sub + "/metrics.csv"));
        const Json j = Json::parse(read_text_file(sub + "/config.json"));
        REQUIRE(j.at("seed").get<int>() == s);
    }
    REQUIRE(read_text_file(base + "/seed1/metrics.csv") !=
            read_text_file(base + "/seed2/metrics.csv"));
}

TEST_CASE("sample exports deterministic synthetic draws") {
    const std::string out1 = kTmp + "/rings1.csv";
    const std::string out2 = kTmp + "/rings2.csv";
    std::filesystem::create_directories(kTmp);
    const CliResult r = run_cli("sample --name rings --n 50 --seed 7 --out " + out1);
    REQUIRE(r.code == 0);
    REQUIRE(kv(r.out, "rows") == "50");
    const std::string text = read_text_file(out1);
    REQUIRE(text.rfind("x1,x2\n", 0) == 0);
    REQUIRE(count_lines(text) == 51);

    REQUIRE(run_cli("sample --name rings --n 50 --seed 7 --out " + out2).code == 0);
    REQUIRE(read_text_file(out2) == text);

    REQUIRE(run_cli("sample --name spiral --n 10 --seed 0 --out " + kTmp + "/x.csv").code == 2);
}
