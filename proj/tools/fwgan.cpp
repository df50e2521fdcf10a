// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
//
// fwgan: train/evaluate the toy adversarial-training laboratory and export
// plot-ready CSV (metrics, smoothed divergence curves, density-ratio fields).
//
// Exit codes: 0 success, 2 configuration/input error, 3 numerical abort.

#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fwgan/config.hpp"
#include "fwgan/datasets.hpp"
#include "fwgan/errors.hpp"
#include "fwgan/metrics.hpp"
#include "fwgan/net.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/serialize.hpp"
#include "fwgan/trainer.hpp"
#include "fwgan/version.hpp"

namespace {

using namespace fwgan;

TrainConfig resolve_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = parse_config_text(read_text_file(config_path));
    validate(cfg);
    return apply_overrides(cfg, overrides);
}

TrainConfig load_run_config(const std::string& run_dir) {
    return parse_config_text(read_text_file(run_dir + "/config.json"));
}

struct LoadedRun {
    TrainConfig cfg;
    Tensor valid;
    Mlp gen;
    Mlp critic;
    double h_kde = 0.0;
    double h_mmd = 0.0;
};

LoadedRun load_run(const std::string& run_dir, bool need_critic) {
    LoadedRun r;
    r.cfg = load_run_config(run_dir);
    DataBundle data = make_data(r.cfg);
    r.valid = std::move(data.valid);
    const int dim = data.train.cols();
    r.gen = make_mlp(r.cfg.latent_dim, r.cfg.gen_hidden, dim, r.cfg.leaky_slope,
                     r.cfg.spectral_norm_gen, r.cfg.power_iterations);
    apply_network_tensors(r.gen, load_named_tensors(run_dir + "/generator.csv"),
                          run_dir + "/generator.csv");
    if (need_critic) {
        r.critic = make_mlp(dim, r.cfg.critic_hidden, 1, r.cfg.leaky_slope,
                            r.cfg.spectral_norm_critic, r.cfg.power_iterations);
        apply_network_tensors(r.critic, load_named_tensors(run_dir + "/critic.csv"),
                              run_dir + "/critic.csv");
    }
    if (r.cfg.bandwidth_median) {
        const double med = median_pairwise_distance(r.valid);
        r.h_kde = med;
        r.h_mmd = med;
    } else {
        r.h_kde = r.cfg.h_kde;
        r.h_mmd = r.cfg.h_mmd;
    }
    return r;
}

std::string default_out_root() {
    const char* env = std::getenv("FWGAN_OUT_ROOT");
    return env && *env ? std::string(env) : std::string("runs");
}

int run_one_training(TrainConfig cfg, const std::string& run_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(run_dir);
    atomic_write_text(run_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");

    TrainState state = train(make_train_state(cfg), run_dir);

    write_metrics_csv(run_dir + "/metrics.csv", state.log);
    save_checkpoint(state, run_dir);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Json manifest;
    manifest["library_version"] = kVersion;
    manifest["config"] = config_to_json(cfg);
    Json artifacts;
    artifacts["config"] = "config.json";
    artifacts["metrics"] = "metrics.csv";
    artifacts["generator"] = "generator.csv";
    artifacts["critic"] = "critic.csv";
    artifacts["optimizer"] = "optimizer.csv";
    artifacts["state"] = "state.json";
    manifest["artifacts"] = artifacts;
    manifest["h_kde_used"] = state.h_kde_eff;
    manifest["h_mmd_used"] = state.h_mmd_eff;
    manifest["mmd_statistic"] = "biased_v";
    manifest["wall_clock_seconds"] = wall;
    atomic_write_text(run_dir + "/manifest.json", manifest.dump(2) + "\n");

    const MetricRecord& last = state.log.back();
    std::cout << "run_dir=" << run_dir << "\n";
    std::cout << "final_divergence=" << format_g17(last.divergence)
              << " final_nll=" << format_g17(last.nll)
              << " final_mmd_x1e3=" << format_g17(last.mmd_x1e3) << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::string out_dir, const std::vector<std::uint64_t>& seeds, bool print_config) {
    TrainConfig cfg = resolve_config(config_path, overrides);
    if (print_config) {
        std::cout << config_to_json(cfg).dump(2) << "\n";
        return 0;
    }
    if (out_dir.empty())
        out_dir = default_out_root() + "/" +
                  (cfg.dataset.kind == "synthetic" ? cfg.dataset.name : "csv") + "_" +
                  cfg.loss_variant + "_seed" + std::to_string(cfg.seed);
    if (seeds.empty()) return run_one_training(cfg, out_dir);
    for (std::uint64_t s : seeds) {
        TrainConfig c = cfg;
        c.seed = s;
        const int rc = run_one_training(c, out_dir + "/seed" + std::to_string(s));
        if (rc != 0) return rc;
    }
    return 0;
}

int cmd_eval(const std::string& run_dir, double h_kde, double h_mmd, std::int64_t seed,
             const std::string& samples_csv, bool samples_header, std::string out_csv) {
    LoadedRun r = load_run(run_dir, /*need_critic=*/false);
    if (h_kde > 0.0) r.h_kde = h_kde;
    if (h_mmd > 0.0) r.h_mmd = h_mmd;
    const std::uint64_t eval_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : r.cfg.seed;

    Tensor samples;
    if (!samples_csv.empty()) {
        samples = load_csv(samples_csv, CsvOptions{samples_header, ','});
        if (samples.cols() != r.valid.cols())
            throw config_error(samples_csv + ": has " + std::to_string(samples.cols()) +
                               " columns, dataset has " + std::to_string(r.valid.cols()));
    } else {
        RngStream rng = RngStream::from_seed_and_salt(eval_seed, salt::kEval);
        const Tensor z = sample_latent(r.cfg.n_eval_samples, r.cfg.latent_dim, rng);
        samples = r.gen.forward_eval(z, SpectralMode::Frozen);
    }

    const double nll = kde_nll(samples, r.valid, r.h_kde);
    const double mmd = mmd2_gaussian(samples, r.valid, r.h_mmd) * 1e3;
    std::cout << "nll=" << format_g17(nll) << " mmd_x1e3=" << format_g17(mmd)
              << " h_kde=" << format_g17(r.h_kde) << " h_mmd=" << format_g17(r.h_mmd) << "\n";

    if (out_csv.empty()) out_csv = run_dir + "/eval.csv";
    std::ostringstream csv;
    csv << "nll,mmd_x1e3,h_kde,h_mmd\n"
        << format_g17(nll) << ',' << format_g17(mmd) << ',' << format_g17(r.h_kde) << ','
        << format_g17(r.h_mmd) << '\n';
    atomic_write_text(out_csv, csv.str());
    return 0;
}

int cmd_ratio(const std::string& run_dir, double x_lo, double x_hi, double y_lo, double y_hi,
              int res_x, int res_y, double temp, int n_ref, std::int64_t seed,
              std::string out_csv) {
    LoadedRun r = load_run(run_dir, /*need_critic=*/true);
    if (r.gen.out_dim() != 2)
        throw config_error("ratio fields require a 2-D model; this generator outputs " +
                           std::to_string(r.gen.out_dim()) + " dimensions");
    if (res_x < 2 || res_y < 2) throw config_error("ratio grid resolution must be >= 2");
    if (n_ref < 2) throw config_error("ratio needs at least 2 reference samples");
    const double t = temp > 0.0 ? temp : r.cfg.temp;

    const std::uint64_t eval_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : r.cfg.seed;
    RngStream rng = RngStream::from_seed_and_salt(eval_seed, salt::kEval);
    const Tensor z = sample_latent(n_ref, r.cfg.latent_dim, rng);
    const Tensor reference = r.gen.forward_eval(z, SpectralMode::Frozen);

    const Grid2D grid = make_grid(x_lo, x_hi, y_lo, y_hi, res_x, res_y);
    auto critic_fn = [&](const Tensor& pts) {
        return r.critic.forward_eval(pts, SpectralMode::Frozen);
    };
    const Tensor ratio = ratio_field(critic_fn, grid, reference, t);
    const Tensor q_density = kde_density(grid.points, reference, r.h_kde);

    if (out_csv.empty()) out_csv = run_dir + "/ratio.csv";
    std::ostringstream csv;
    csv << "x,y,q_density_estimate,ratio\n";
    for (int k = 0; k < grid.points.rows(); ++k)
        csv << format_g17(grid.points(k, 0)) << ',' << format_g17(grid.points(k, 1)) << ','
            << format_g17(q_density[k]) << ',' << format_g17(ratio[k]) << '\n';
    atomic_write_text(out_csv, csv.str());
    std::cout << "ratio_csv=" << out_csv << " rows=" << grid.points.rows() << "\n";
    return 0;
}

int cmd_curves(const std::string& run_dir, int window, std::string out_csv) {
    const std::vector<MetricRecord> log = read_metrics_csv(run_dir + "/metrics.csv");
    if (log.empty()) throw config_error(run_dir + "/metrics.csv: no metric rows");
    const std::vector<double> smoothed = divergence_curve(log, window);
    if (out_csv.empty()) out_csv = run_dir + "/curves.csv";
    std::ostringstream csv;
    csv << "epoch,divergence_smoothed\n";
    for (std::size_t i = 0; i < log.size(); ++i)
        csv << log[i].epoch << ',' << format_g17(smoothed[i]) << '\n';
    atomic_write_text(out_csv, csv.str());
    std::cout << "negative_estimates=" << negative_estimate_count(log) << "\n";
    return 0;
}

int cmd_sample(const std::string& name, int n, std::uint64_t seed, const std::string& out_csv) {
    const SyntheticName sname = synthetic_from_string(name);
    RngStream rng = RngStream::from_seed_and_salt(seed, salt::kData);
    const Tensor x = sample_synthetic(sname, n, rng);
    write_csv(out_csv, x, {"x1", "x2"});
    std::cout << "samples_csv=" << out_csv << " rows=" << n << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fwgan: toy adversarial-training laboratory"};
    app.set_version_flag("--version", std::string(fwgan::kVersion));
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "run a training experiment");
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    bool print_config = false;
    train_cmd->add_option("--config", config_path, "JSON config file (defaults when omitted)");
    train_cmd->add_option("--override", overrides, "key=value config override (repeatable)");
    train_cmd->add_option("--out", out_dir, "run directory (default under $FWGAN_OUT_ROOT)");
    train_cmd->add_option("--seeds", seeds,
                          "fan out one run per seed into <out>/seed<N> subdirectories");
    train_cmd->add_flag("--print-config", print_config,
                        "print the resolved config as JSON and exit");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "NLL and MMD of a trained generator");
    std::string eval_run;
    double eval_h_kde = 0.0, eval_h_mmd = 0.0;
    std::int64_t eval_seed = -1;
    std::string samples_csv, eval_out;
    bool samples_header = true;
    eval_cmd->add_option("--run", eval_run, "run directory")->required();
    eval_cmd->add_option("--h-kde", eval_h_kde, "KDE bandwidth override");
    eval_cmd->add_option("--h-mmd", eval_h_mmd, "MMD bandwidth override");
    eval_cmd->add_option("--seed", eval_seed, "evaluation seed (default: config seed)");
    eval_cmd->add_option("--samples-csv", samples_csv,
                         "score these samples instead of generating");
    eval_cmd->add_flag("--samples-header,!--no-samples-header", samples_header,
                       "whether --samples-csv has a header row (default yes)");
    eval_cmd->add_option("--out", eval_out, "output CSV (default <run>/eval.csv)");

    // ratio
    auto* ratio_cmd = app.add_subcommand("ratio", "density-ratio field on a grid");
    std::string ratio_run, ratio_out;
    double x_lo = -4.0, x_hi = 4.0, y_lo = -4.0, y_hi = 4.0, ratio_temp = 0.0;
    int res_x = 100, res_y = 100, n_ref = 5000;
    std::int64_t ratio_seed = -1;
    ratio_cmd->add_option("--run", ratio_run, "run directory")->required();
    ratio_cmd->add_option("--x-lo", x_lo, "grid x lower bound");
    ratio_cmd->add_option("--x-hi", x_hi, "grid x upper bound");
    ratio_cmd->add_option("--y-lo", y_lo, "grid y lower bound");
    ratio_cmd->add_option("--y-hi", y_hi, "grid y upper bound");
    ratio_cmd->add_option("--res-x", res_x, "grid points along x");
    ratio_cmd->add_option("--res-y", res_y, "grid points along y");
    ratio_cmd->add_option("--temp", ratio_temp, "temperature (default: config temp)");
    ratio_cmd->add_option("--n-ref", n_ref, "reference samples for the normalizer");
    ratio_cmd->add_option("--seed", ratio_seed, "sampling seed (default: config seed)");
    ratio_cmd->add_option("--out", ratio_out, "output CSV (default <run>/ratio.csv)");

    // curves
    auto* curves_cmd = app.add_subcommand("curves", "smoothed divergence curve + stability count");
    std::string curves_run, curves_out;
    int window = 10;
    curves_cmd->add_option("--run", curves_run, "run directory")->required();
    curves_cmd->add_option("--window", window, "trailing moving-average window");
    curves_cmd->add_option("--out", curves_out, "output CSV (default <run>/curves.csv)");

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "export synthetic dataset draws as CSV");
    std::string sample_name = "mog", sample_out = "samples.csv";
    int sample_n = 5000;
    std::uint64_t sample_seed = 0;
    sample_cmd->add_option("--name", sample_name, "mog|banana|rings|square|cosine|funnel");
    sample_cmd->add_option("--n", sample_n, "number of samples");
    sample_cmd->add_option("--seed", sample_seed, "seed");
    sample_cmd->add_option("--out", sample_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(config_path, overrides, out_dir, seeds, print_config);
        if (eval_cmd->parsed())
            return cmd_eval(eval_run, eval_h_kde, eval_h_mmd, eval_seed, samples_csv,
                            samples_header, eval_out);
        if (ratio_cmd->parsed())
            return cmd_ratio(ratio_run, x_lo, x_hi, y_lo, y_hi, res_x, res_y, ratio_temp, n_ref,
                             ratio_seed, ratio_out);
        if (curves_cmd->parsed()) return cmd_curves(curves_run, window, curves_out);
        if (sample_cmd->parsed())
            return cmd_sample(sample_name, sample_n, sample_seed, sample_out);
    } catch (const fwgan::numerical_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const fwgan::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
