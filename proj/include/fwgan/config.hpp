// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwgan/datasets.hpp"
#include "fwgan/errors.hpp"
#include "fwgan/objectives.hpp"

namespace fwgan {

using Json = nlohmann::ordered_json;

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | csv
    std::string name = "mog";        // synthetic distribution name
    std::string path;                // csv file
    bool has_header = false;
    std::string delimiter = ",";
    int n_train = 5000;
    int n_valid = 5000;
    double valid_fraction = 0.2;  // csv split
};

/// Full experiment description. Serialized as flat JSON with a nested
/// "dataset" object; unknown or ill-typed fields are rejected by name.
struct TrainConfig {
    int version = 1;
    DatasetConfig dataset;
    std::string loss_variant = "klwgan";  // wgan | klwgan | fgan_kl
    double temp = 1.0;
    int batch_size = 256;
    int epochs = 500;
    int critic_steps_per_gen_step = 1;
    double lr = 0.2;  // verbatim reported value; see README on using 2e-4
    double rho = 0.9;
    double eps = 1e-8;
    int latent_dim = 2;
    std::vector<int> gen_hidden = {100, 100};
    std::vector<int> critic_hidden = {100, 100};
    double leaky_slope = 0.2;
    bool spectral_norm_critic = true;
    bool spectral_norm_gen = false;
    int power_iterations = 1;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
    int eval_every = 100;  // NLL/MMD cadence in epochs; 0 = final epoch only
    int eval_batch = 256;  // held-out batch for per-epoch divergence estimates
    int n_eval_samples = 5000;  // generator draws for NLL/MMD
    int checkpoint_every = 0;   // epochs between checkpoints; 0 = final only
    double h_kde = 0.25;
    double h_mmd = 0.5;
    bool bandwidth_median = false;  // replace h_* with the median heuristic
    bool stop_grad_weights = false;
};

inline void validate(const TrainConfig& c) {
    auto fail = [](const std::string& msg) { throw config_error("config: " + msg); };
    if (c.version != 1) fail("version must be 1");
    if (c.epochs < 1) fail("epochs must be >= 1");
    if (c.batch_size < 2) fail("batch_size must be >= 2");
    if (c.critic_steps_per_gen_step < 1) fail("critic_steps_per_gen_step must be >= 1");
    if (!(c.temp > 0.0)) fail("temp must be > 0");
    if (!(c.lr > 0.0)) fail("lr must be > 0");
    if (!(c.rho >= 0.0 && c.rho < 1.0)) fail("rho must be in [0, 1)");
    if (!(c.eps > 0.0)) fail("eps must be > 0");
    if (c.latent_dim < 1) fail("latent_dim must be >= 1");
    for (int h : c.gen_hidden)
        if (h < 1) fail("gen_hidden entries must be >= 1");
    for (int h : c.critic_hidden)
        if (h < 1) fail("critic_hidden entries must be >= 1");
    if (!(c.leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
    if (c.power_iterations < 1) fail("power_iterations must be >= 1");
    if (!(c.init_scale > 0.0)) fail("init_scale must be > 0");
    if (c.eval_every < 0) fail("eval_every must be >= 0");
    if (c.eval_batch < 2) fail("eval_batch must be >= 2");
    if (c.n_eval_samples < 2) fail("n_eval_samples must be >= 2");
    if (c.checkpoint_every < 0) fail("checkpoint_every must be >= 0");
    if (!(c.h_kde > 0.0)) fail("h_kde must be > 0");
    if (!(c.h_mmd > 0.0)) fail("h_mmd must be > 0");
    loss_variant_from_string(c.loss_variant);
    if (c.dataset.kind == "synthetic") {
        synthetic_from_string(c.dataset.name);
        if (c.dataset.n_train < c.batch_size * c.critic_steps_per_gen_step)
            fail("dataset.n_train must cover at least one batch group");
        if (c.dataset.n_valid < 2) fail("dataset.n_valid must be >= 2");
    } else if (c.dataset.kind == "csv") {
        if (c.dataset.path.empty()) fail("dataset.path is required for kind=csv");
        if (c.dataset.delimiter.size() != 1) fail("dataset.delimiter must be one character");
        if (!(c.dataset.valid_fraction > 0.0 && c.dataset.valid_fraction < 1.0))
            fail("dataset.valid_fraction must be in (0, 1)");
    } else {
        fail("dataset.kind must be 'synthetic' or 'csv'");
    }
}

inline Json config_to_json(const TrainConfig& c) {
    Json d;
    d["kind"] = c.dataset.kind;
    d["name"] = c.dataset.name;
    d["path"] = c.dataset.path;
    d["has_header"] = c.dataset.has_header;
    d["delimiter"] = c.dataset.delimiter;
    d["n_train"] = c.dataset.n_train;
    d["n_valid"] = c.dataset.n_valid;
    d["valid_fraction"] = c.dataset.valid_fraction;
    Json j;
    j["version"] = c.version;
    j["dataset"] = d;
    j["loss_variant"] = c.loss_variant;
    j["temp"] = c.temp;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["critic_steps_per_gen_step"] = c.critic_steps_per_gen_step;
    j["lr"] = c.lr;
    j["rho"] = c.rho;
    j["eps"] = c.eps;
    j["latent_dim"] = c.latent_dim;
    j["gen_hidden"] = c.gen_hidden;
    j["critic_hidden"] = c.critic_hidden;
    j["leaky_slope"] = c.leaky_slope;
    j["spectral_norm_critic"] = c.spectral_norm_critic;
    j["spectral_norm_gen"] = c.spectral_norm_gen;
    j["power_iterations"] = c.power_iterations;
    j["init_scale"] = c.init_scale;
    j["seed"] = c.seed;
    j["eval_every"] = c.eval_every;
    j["eval_batch"] = c.eval_batch;
    j["n_eval_samples"] = c.n_eval_samples;
    j["checkpoint_every"] = c.checkpoint_every;
    j["h_kde"] = c.h_kde;
    j["h_mmd"] = c.h_mmd;
    j["bandwidth_median"] = c.bandwidth_median;
    j["stop_grad_weights"] = c.stop_grad_weights;
    return j;
}

namespace detail {

template <typename T>
T json_field(const Json& j, const std::string& name, const T& fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config field '" + name + "' has the wrong type");
    }
}

inline void reject_unknown(const Json& j, const std::vector<std::string>& known,
                           const std::string& scope) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const auto& k : known)
            if (item.key() == k) ok = true;
        if (!ok) throw config_error("unknown config field '" + scope + item.key() + "'");
    }
}

}  // namespace detail

/// Strict parse: starts from defaults, overlays present fields, rejects
/// unknown names and wrong types, then validates ranges.
inline TrainConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw config_error("config root must be a JSON object");
    detail::reject_unknown(
        j,
        {"version", "dataset", "loss_variant", "temp", "batch_size", "epochs",
         "critic_steps_per_gen_step", "lr", "rho", "eps", "latent_dim", "gen_hidden",
         "critic_hidden", "leaky_slope", "spectral_norm_critic", "spectral_norm_gen",
         "power_iterations", "init_scale", "seed", "eval_every", "eval_batch", "n_eval_samples",
         "checkpoint_every", "h_kde", "h_mmd", "bandwidth_median", "stop_grad_weights"},
        "");
    TrainConfig c;
    c.version = detail::json_field(j, "version", c.version);
    if (j.contains("dataset")) {
        const Json& d = j.at("dataset");
        if (!d.is_object()) throw config_error("config field 'dataset' must be an object");
        detail::reject_unknown(d,
                               {"kind", "name", "path", "has_header", "delimiter", "n_train",
                                "n_valid", "valid_fraction"},
                               "dataset.");
        c.dataset.kind = detail::json_field(d, "kind", c.dataset.kind);
        c.dataset.name = detail::json_field(d, "name", c.dataset.name);
        c.dataset.path = detail::json_field(d, "path", c.dataset.path);
        c.dataset.has_header = detail::json_field(d, "has_header", c.dataset.has_header);
        c.dataset.delimiter = detail::json_field(d, "delimiter", c.dataset.delimiter);
        c.dataset.n_train = detail::json_field(d, "n_train", c.dataset.n_train);
        c.dataset.n_valid = detail::json_field(d, "n_valid", c.dataset.n_valid);
        c.dataset.valid_fraction =
            detail::json_field(d, "valid_fraction", c.dataset.valid_fraction);
    }
    c.loss_variant = detail::json_field(j, "loss_variant", c.loss_variant);
    c.temp = detail::json_field(j, "temp", c.temp);
    c.batch_size = detail::json_field(j, "batch_size", c.batch_size);
    c.epochs = detail::json_field(j, "epochs", c.epochs);
    c.critic_steps_per_gen_step =
        detail::json_field(j, "critic_steps_per_gen_step", c.critic_steps_per_gen_step);
    c.lr = detail::json_field(j, "lr", c.lr);
    c.rho = detail::json_field(j, "rho", c.rho);
    c.eps = detail::json_field(j, "eps", c.eps);
    c.latent_dim = detail::json_field(j, "latent_dim", c.latent_dim);
    c.gen_hidden = detail::json_field(j, "gen_hidden", c.gen_hidden);
    c.critic_hidden = detail::json_field(j, "critic_hidden", c.critic_hidden);
    c.leaky_slope = detail::json_field(j, "leaky_slope", c.leaky_slope);
    c.spectral_norm_critic =
        detail::json_field(j, "spectral_norm_critic", c.spectral_norm_critic);
    c.spectral_norm_gen = detail::json_field(j, "spectral_norm_gen", c.spectral_norm_gen);
    c.power_iterations = detail::json_field(j, "power_iterations", c.power_iterations);
    c.init_scale = detail::json_field(j, "init_scale", c.init_scale);
    c.seed = detail::json_field(j, "seed", c.seed);
    c.eval_every = detail::json_field(j, "eval_every", c.eval_every);
    c.eval_batch = detail::json_field(j, "eval_batch", c.eval_batch);
    c.n_eval_samples = detail::json_field(j, "n_eval_samples", c.n_eval_samples);
    c.checkpoint_every = detail::json_field(j, "checkpoint_every", c.checkpoint_every);
    c.h_kde = detail::json_field(j, "h_kde", c.h_kde);
    c.h_mmd = detail::json_field(j, "h_mmd", c.h_mmd);
    c.bandwidth_median = detail::json_field(j, "bandwidth_median", c.bandwidth_median);
    c.stop_grad_weights = detail::json_field(j, "stop_grad_weights", c.stop_grad_weights);
    validate(c);
    return c;
}

inline TrainConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// Apply one `key=value` override (dotted keys address the dataset object).
namespace detail {

inline void patch_json(Json& j, const std::string& key, const std::string& value) {
    Json parsed;
    try {
        parsed = Json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
        j[key] = parsed;
    } else {
        const std::string head = key.substr(0, dot);
        const std::string tail = key.substr(dot + 1);
        if (head != "dataset")
            throw config_error("unknown config field '" + key + "'");
        j["dataset"][tail] = parsed;
    }
}

}  // namespace detail

/// The value is parsed as JSON when possible, else taken as a string; the
/// result is re-validated strictly.
inline TrainConfig apply_override(const TrainConfig& base, const std::string& key,
                                  const std::string& value) {
    Json j = config_to_json(base);
    detail::patch_json(j, key, value);
    return config_from_json(j);
}

/// Apply several `key=value` pairs and validate once at the end, so overrides
/// that are only jointly valid (e.g. dataset.kind=csv plus dataset.path) do
/// not depend on their order.
inline TrainConfig apply_overrides(const TrainConfig& base,
                                   const std::vector<std::string>& pairs) {
    Json j = config_to_json(base);
    for (const std::string& ov : pairs) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw config_error("override '" + ov + "' is not of the form key=value");
        detail::patch_json(j, ov.substr(0, eq), ov.substr(eq + 1));
    }
    return config_from_json(j);
}

}  // namespace fwgan
