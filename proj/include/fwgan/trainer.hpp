// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fwgan/config.hpp"
#include "fwgan/datasets.hpp"
#include "fwgan/errors.hpp"
#include "fwgan/metrics.hpp"
#include "fwgan/net.hpp"
#include "fwgan/objectives.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/serialize.hpp"
#include "fwgan/version.hpp"

namespace fwgan {

struct StepMetrics {
    double critic_real = 0.0;
    double critic_fake = 0.0;
    double critic_total = 0.0;
    double gen_loss = 0.0;
    double divergence = 0.0;  // estimator on the step's final critic batch
};

/// Everything a run owns. A state is a pure function of its config: the
/// master seed fans out into decorrelated streams for data, initialization,
/// training, and evaluation, and evaluation never touches the training
/// stream, so metric cadence cannot change the trajectory.
struct TrainState {
    TrainConfig cfg;
    LossVariant variant = LossVariant::Klwgan;
    Tensor train_data;  // n x d (standardized for csv datasets)
    Tensor valid_data;  // held-out rows, same preprocessing
    int data_dim = 0;
    Mlp gen;
    Mlp critic;
    RmsProp opt_gen{1.0};
    RmsProp opt_critic{1.0};
    RngStream train_rng;
    RngStream eval_rng;
    int epoch = 0;
    std::vector<MetricRecord> log;
    double h_kde_eff = 0.0;  // resolved bandwidths (median heuristic applied once)
    double h_mmd_eff = 0.0;
    bool force_unit_weights = false;  // test hook: klwgan path with w = 1 exactly
};

struct DataBundle {
    Tensor train;
    Tensor valid;
};

/// Training/validation tensors for a config. Synthetic validation uses its
/// own stream, so it is reproducible without re-drawing the training set.
inline DataBundle make_data(const TrainConfig& cfg) {
    if (cfg.dataset.kind == "synthetic") {
        const SyntheticName name = synthetic_from_string(cfg.dataset.name);
        RngStream train_rng = RngStream::from_seed_and_salt(cfg.seed, salt::kData);
        RngStream valid_rng = RngStream::from_seed_and_salt(cfg.seed, salt::kValidData);
        return DataBundle{sample_synthetic(name, cfg.dataset.n_train, train_rng),
                          sample_synthetic(name, cfg.dataset.n_valid, valid_rng)};
    }
    const Tensor raw = load_csv(cfg.dataset.path,
                                CsvOptions{cfg.dataset.has_header, cfg.dataset.delimiter[0]});
    TabularDataset split = standardize_split(raw, cfg.dataset.valid_fraction, cfg.seed);
    return DataBundle{std::move(split.train), std::move(split.valid)};
}

/// Fresh state: data, Glorot-initialized networks (generator first, then
/// critic, one init stream), optimizers, and resolved bandwidths.
inline TrainState make_train_state(const TrainConfig& cfg) {
    validate(cfg);
    TrainState s;
    s.cfg = cfg;
    s.variant = loss_variant_from_string(cfg.loss_variant);
    DataBundle data = make_data(cfg);
    s.train_data = std::move(data.train);
    s.valid_data = std::move(data.valid);
    s.data_dim = s.train_data.cols();
    if (s.train_data.rows() < cfg.batch_size * cfg.critic_steps_per_gen_step)
        throw config_error("config: training set smaller than one batch group");

    s.gen = make_mlp(cfg.latent_dim, cfg.gen_hidden, s.data_dim, cfg.leaky_slope,
                     cfg.spectral_norm_gen, cfg.power_iterations);
    s.critic = make_mlp(s.data_dim, cfg.critic_hidden, 1, cfg.leaky_slope,
                        cfg.spectral_norm_critic, cfg.power_iterations);
    RngStream init_rng = RngStream::from_seed_and_salt(cfg.seed, salt::kInit);
    init_params(s.gen, init_rng, cfg.init_scale);
    init_params(s.critic, init_rng, cfg.init_scale);

    s.opt_gen = RmsProp(cfg.lr, cfg.rho, cfg.eps);
    s.opt_critic = RmsProp(cfg.lr, cfg.rho, cfg.eps);
    s.train_rng = RngStream::from_seed_and_salt(cfg.seed, salt::kTrain);
    s.eval_rng = RngStream::from_seed_and_salt(cfg.seed, salt::kEval);

    if (cfg.bandwidth_median) {
        const double med = median_pairwise_distance(s.valid_data);
        s.h_kde_eff = med;
        s.h_mmd_eff = med;
    } else {
        s.h_kde_eff = cfg.h_kde;
        s.h_mmd_eff = cfg.h_mmd;
    }
    return s;
}

namespace detail {

inline std::string batch_stats(const std::string& name, const Tensor& t) {
    double mn = t[0], mx = t[0], sum = 0.0;
    for (std::int64_t k = 0; k < t.size(); ++k) {
        mn = std::min(mn, t[k]);
        mx = std::max(mx, t[k]);
        sum += t[k];
    }
    std::ostringstream os;
    os << name << "[min=" << mn << " max=" << mx << " mean=" << sum / t.size() << "]";
    return os.str();
}

inline StagedParams stage_constants(Tape& tape, const Mlp& net) {
    StagedParams sp;
    sp.vars.reserve(net.layers.size() * 2);
    for (const auto& l : net.layers) {
        sp.vars.push_back(tape.constant(l.weight));
        sp.vars.push_back(tape.constant(l.bias));
    }
    return sp;
}

inline double divergence_estimate(LossVariant variant, const Tensor& t_p, const Tensor& t_q) {
    switch (variant) {
        case LossVariant::Klwgan: return estimator_dv(t_p, t_q);
        case LossVariant::Wgan: return estimator_ipm(t_p, t_q);
        case LossVariant::FganKl: return estimator_nwj(FGenerator::kl(), t_p, t_q);
    }
    throw std::logic_error("divergence_estimate: unreachable");
}

}  // namespace detail

/// One generator update preceded by critic_steps_per_gen_step critic updates,
/// one real batch per critic update. Stream draw order (train stream only):
/// per critic update one latent batch, then one latent batch for the
/// generator update. Throws numerical_error with batch statistics as soon as
/// any loss goes non-finite.
inline StepMetrics train_step(TrainState& s, const std::vector<Tensor>& real_batches) {
    const TrainConfig& cfg = s.cfg;
    if (static_cast<int>(real_batches.size()) != cfg.critic_steps_per_gen_step)
        throw std::invalid_argument("train_step: expected one real batch per critic step");
    const LossOptions opt{cfg.temp, cfg.stop_grad_weights, s.force_unit_weights};
    StepMetrics out;

    auto guard = [&](double v, const char* what, const Tensor& t_p, const Tensor& t_q) {
        if (std::isfinite(v)) return;
        std::ostringstream os;
        os << "non-finite " << what << " at epoch " << s.epoch << " (" << v << "); "
           << detail::batch_stats("t_real", t_p) << " " << detail::batch_stats("t_fake", t_q);
        throw numerical_error(os.str());
    };

    for (const Tensor& real : real_batches) {
        if (real.rows() != cfg.batch_size)
            throw std::invalid_argument("train_step: real batch has wrong row count");
        const Tensor z = sample_latent(cfg.batch_size, cfg.latent_dim, s.train_rng);
        const Tensor fake = s.gen.forward_eval(z, SpectralMode::Frozen);

        Tape tape;
        StagedParams sp = s.critic.stage_params(tape);
        Var x_real = tape.constant(real);
        Var x_fake = tape.constant(fake);
        // One power iteration per critic update: the real-batch forward
        // refreshes sigma, the fake-batch forward reuses it.
        Var t_real = s.critic.forward_staged(tape, sp, x_real, SpectralMode::Update);
        Var t_fake = s.critic.forward_staged(tape, sp, x_fake, SpectralMode::Frozen);
        HingeLossVars loss = critic_loss_tape(tape, s.variant, t_real, t_fake, opt);
        guard(tape.value(loss.total)[0], "critic loss", tape.value(t_real), tape.value(t_fake));
        tape.backward(loss.total);
        std::vector<Tensor> grads;
        grads.reserve(sp.vars.size());
        for (Var v : sp.vars) grads.push_back(tape.grad(v));
        s.opt_critic.step(s.critic.params(), grads);

        out.critic_real = tape.value(loss.real)[0];
        out.critic_fake = tape.value(loss.fake)[0];
        out.critic_total = tape.value(loss.total)[0];
        out.divergence =
            detail::divergence_estimate(s.variant, tape.value(t_real), tape.value(t_fake));
    }

    {
        const Tensor z = sample_latent(cfg.batch_size, cfg.latent_dim, s.train_rng);
        Tape tape;
        StagedParams gp = s.gen.stage_params(tape);
        StagedParams cp = detail::stage_constants(tape, s.critic);
        Var zv = tape.constant(z);
        Var x_fake = s.gen.forward_staged(tape, gp, zv, SpectralMode::Update);
        Var t_fake = s.critic.forward_staged(tape, cp, x_fake, SpectralMode::Update);
        Var loss = generator_loss_tape(tape, s.variant, t_fake, opt);
        guard(tape.value(loss)[0], "generator loss", tape.value(t_fake), tape.value(t_fake));
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(gp.vars.size());
        for (Var v : gp.vars) grads.push_back(tape.grad(v));
        s.opt_gen.step(s.gen.params(), grads);
        out.gen_loss = tape.value(loss)[0];
    }
    return out;
}

/// Held-out divergence estimate on eval_batch validation rows (drawn with
/// replacement) against a fresh generator batch; frozen spectral norms, eval
/// stream only. Draw order: validation indices, then latents.
inline double heldout_divergence(TrainState& s) {
    const TrainConfig& cfg = s.cfg;
    const std::vector<int> idx =
        s.eval_rng.choice_with_replacement(cfg.eval_batch, s.valid_data.rows());
    const Tensor real = s.valid_data.rows_at(idx);
    const Tensor z = sample_latent(cfg.eval_batch, cfg.latent_dim, s.eval_rng);
    const Tensor fake = s.gen.forward_eval(z, SpectralMode::Frozen);
    const Tensor t_p = s.critic.forward_eval(real, SpectralMode::Frozen);
    const Tensor t_q = s.critic.forward_eval(fake, SpectralMode::Frozen);
    return detail::divergence_estimate(s.variant, t_p, t_q);
}

/// NLL and MMD x 10^3 of a fresh n_eval_samples generation against the
/// validation set (eval stream latents, frozen spectral norms).
inline std::pair<double, double> heldout_quality(TrainState& s) {
    const TrainConfig& cfg = s.cfg;
    const Tensor z = sample_latent(cfg.n_eval_samples, cfg.latent_dim, s.eval_rng);
    const Tensor samples = s.gen.forward_eval(z, SpectralMode::Frozen);
    const double nll = kde_nll(samples, s.valid_data, s.h_kde_eff);
    const double mmd = mmd2_gaussian(samples, s.valid_data, s.h_mmd_eff) * 1e3;
    return {nll, mmd};
}

/// One pass over the shuffled training set. Batch groups of size
/// batch_size x critic_steps_per_gen_step feed train_step; a trailing partial
/// group is dropped. Appends this epoch's MetricRecord (divergence every
/// epoch; NLL/MMD on the eval_every cadence and always at the final epoch).
inline void run_epoch(TrainState& s) {
    const TrainConfig& cfg = s.cfg;
    const int n = s.train_data.rows();
    const int m = cfg.batch_size;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    s.train_rng.shuffle(order);

    const int group = m * cfg.critic_steps_per_gen_step;
    const int n_groups = n / group;
    for (int g = 0; g < n_groups; ++g) {
        std::vector<Tensor> reals;
        reals.reserve(static_cast<std::size_t>(cfg.critic_steps_per_gen_step));
        for (int cstep = 0; cstep < cfg.critic_steps_per_gen_step; ++cstep) {
            const int base = g * group + cstep * m;
            std::vector<int> idx(order.begin() + base, order.begin() + base + m);
            reals.push_back(s.train_data.rows_at(idx));
        }
        train_step(s, reals);
    }

    s.epoch += 1;
    MetricRecord rec;
    rec.epoch = s.epoch;
    rec.divergence = heldout_divergence(s);
    const bool final_epoch = s.epoch == cfg.epochs;
    const bool cadence = cfg.eval_every > 0 && s.epoch % cfg.eval_every == 0;
    if (cadence || final_epoch) {
        const auto [nll, mmd] = heldout_quality(s);
        rec.nll = nll;
        rec.mmd_x1e3 = mmd;
    }
    s.log.push_back(rec);
}

/// Named tensors for a network checkpoint: layer<i>.weight / .bias and, for
/// spectrally normalized layers, .sn_u / .sn_sigma.
inline std::vector<std::pair<std::string, Tensor>> network_tensors(const Mlp& net) {
    std::vector<std::pair<std::string, Tensor>> items;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        const std::string p = "layer" + std::to_string(i) + ".";
        items.emplace_back(p + "weight", l.weight);
        items.emplace_back(p + "bias", l.bias);
        if (l.spectral) {
            items.emplace_back(p + "sn_u", l.spectral->u);
            items.emplace_back(p + "sn_sigma", Tensor::scalar(l.spectral->sigma));
        }
    }
    return items;
}

inline void apply_network_tensors(Mlp& net,
                                  const std::vector<std::pair<std::string, Tensor>>& items,
                                  const std::string& path) {
    auto expect_shape = [&](const Tensor& got, const Tensor& want, const std::string& name) {
        if (!got.same_shape(want))
            throw config_error(path + ": tensor '" + name + "' is " + got.shape_str() +
                               ", architecture expects " + want.shape_str());
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        const std::string p = "layer" + std::to_string(i) + ".";
        const Tensor& w = find_named_tensor(items, p + "weight", path);
        expect_shape(w, l.weight, p + "weight");
        l.weight = w;
        const Tensor& b = find_named_tensor(items, p + "bias", path);
        expect_shape(b, l.bias, p + "bias");
        l.bias = b;
        if (l.spectral) {
            const Tensor& u = find_named_tensor(items, p + "sn_u", path);
            expect_shape(u, l.spectral->u, p + "sn_u");
            l.spectral->u = u;
            l.spectral->sigma = find_named_tensor(items, p + "sn_sigma", path)[0];
        }
    }
    if (items.size() != net.layers.size() * 2 +
                            2 * static_cast<std::size_t>(std::count_if(
                                    net.layers.begin(), net.layers.end(),
                                    [](const DenseLayer& l) { return l.spectral.has_value(); })))
        throw config_error(path + ": tensor count does not match the architecture");
}

inline std::vector<std::pair<std::string, Tensor>> optimizer_tensors(const TrainState& s) {
    std::vector<std::pair<std::string, Tensor>> items;
    const auto& ga = s.opt_gen.accumulators();
    for (std::size_t i = 0; i < ga.size(); ++i)
        items.emplace_back("gen." + std::to_string(i), ga[i]);
    const auto& ca = s.opt_critic.accumulators();
    for (std::size_t i = 0; i < ca.size(); ++i)
        items.emplace_back("critic." + std::to_string(i), ca[i]);
    return items;
}

/// Checkpoint = generator.csv + critic.csv + optimizer.csv + state.json.
/// Loading a checkpoint into a fresh state resumes bit-identically.
inline void save_checkpoint(const TrainState& s, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_named_tensors(dir + "/generator.csv", network_tensors(s.gen));
    save_named_tensors(dir + "/critic.csv", network_tensors(s.critic));
    const auto opt = optimizer_tensors(s);
    if (!opt.empty()) save_named_tensors(dir + "/optimizer.csv", opt);
    Json j;
    j["version"] = kVersion;
    j["epoch"] = s.epoch;
    j["rng_train"] = s.train_rng.save();
    j["rng_eval"] = s.eval_rng.save();
    atomic_write_text(dir + "/state.json", j.dump(2) + "\n");
}

inline TrainState load_checkpoint(const TrainConfig& cfg, const std::string& dir) {
    TrainState s = make_train_state(cfg);
    apply_network_tensors(s.gen, load_named_tensors(dir + "/generator.csv"),
                          dir + "/generator.csv");
    apply_network_tensors(s.critic, load_named_tensors(dir + "/critic.csv"),
                          dir + "/critic.csv");
    if (std::filesystem::exists(dir + "/optimizer.csv")) {
        const auto items = load_named_tensors(dir + "/optimizer.csv");
        auto load_slots = [&](const std::string& prefix, RmsProp& opt,
                              const std::vector<Tensor*>& params) {
            std::vector<Tensor>& acc = opt.accumulators();
            acc.clear();
            for (std::size_t i = 0; i < params.size(); ++i) {
                const Tensor& t = find_named_tensor(items, prefix + std::to_string(i),
                                                    dir + "/optimizer.csv");
                if (!t.same_shape(*params[i]))
                    throw config_error(dir + "/optimizer.csv: slot " + prefix +
                                       std::to_string(i) + " shape mismatch");
                acc.push_back(t);
            }
        };
        load_slots("gen.", s.opt_gen, s.gen.params());
        load_slots("critic.", s.opt_critic, s.critic.params());
    }
    Json j;
    try {
        j = Json::parse(read_text_file(dir + "/state.json"));
    } catch (const nlohmann::json::exception& e) {
        throw config_error(dir + "/state.json: not valid JSON: " + std::string(e.what()));
    }
    s.epoch = j.at("epoch").get<int>();
    s.train_rng.restore(j.at("rng_train").get<std::string>());
    s.eval_rng.restore(j.at("rng_eval").get<std::string>());
    if (std::filesystem::exists(dir + "/metrics.csv"))
        s.log = read_metrics_csv(dir + "/metrics.csv");
    return s;
}

/// Run the remaining epochs (checkpointing on the checkpoint_every cadence
/// when a run directory is given). Returns the final state.
inline TrainState train(TrainState s, const std::string& run_dir = "") {
    while (s.epoch < s.cfg.epochs) {
        run_epoch(s);
        if (!run_dir.empty() && s.cfg.checkpoint_every > 0 &&
            s.epoch % s.cfg.checkpoint_every == 0 && s.epoch < s.cfg.epochs) {
            save_checkpoint(s, run_dir + "/ckpt_epoch" + std::to_string(s.epoch));
            write_metrics_csv(run_dir + "/ckpt_epoch" + std::to_string(s.epoch) + "/metrics.csv",
                              s.log);
        }
    }
    return s;
}

inline TrainState train(const TrainConfig& cfg, const std::string& run_dir = "") {
    return train(make_train_state(cfg), run_dir);
}

/// Trailing moving average of the divergence column; window 1 is the
/// identity and the first window-1 entries average what is available.
inline std::vector<double> divergence_curve(const std::vector<MetricRecord>& log, int window) {
    if (window < 1) throw std::invalid_argument("divergence_curve: window must be >= 1");
    std::vector<double> out;
    out.reserve(log.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        acc += log[i].divergence;
        const std::size_t w = static_cast<std::size_t>(window);
        if (i >= w) acc -= log[i - w].divergence;
        const double denom = static_cast<double>(std::min(i + 1, w));
        out.push_back(acc / denom);
    }
    return out;
}

}  // namespace fwgan
