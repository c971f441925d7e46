#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stegdiff/optimizer.hpp"
#include "stegdiff/pipeline.hpp"

namespace stegdiff {

/// Parsed and validated experiment description. Every numeric default mirrors
/// the owning module's defaults; unknown keys are rejected with their path.
struct ExperimentConfig {
    // pipeline
    PipelineMode mode = PipelineMode::pixel;
    std::array<std::uint32_t, 3> shape{3, 16, 16};
    long export_quantize_levels = 0; // pixel default off, latent default 256

    // codec
    int q = 1;
    double s = 1.0;
    Key256 key{};

    // schedule
    ScheduleKind schedule_kind = ScheduleKind::linear_beta;
    int t_steps = 50;
    ScheduleOptions schedule_options;

    // model
    ScoreModel::Kind model_kind = ScoreModel::Kind::unit_gaussian;
    double model_mean = 0.0;
    double model_var = 1.0;
    std::vector<double> mixture_weights;
    std::vector<double> mixture_means; // scalar per mode, broadcast
    double mixture_var = 0.25;

    // solver
    int solver_order = 3;
    int solver_steps = 50;

    // autoencoder (latent mode)
    struct AeSection {
        std::string basis = "patch2x2";
        std::size_t latent_dim = 0;
        double rho = 0.0;
        double prior_std = 1.0;
        double noise_cap_std = 0.0;
        bool shrinkage = false;
        bool clamp_decode = false;
        std::uint64_t seed = 11;
    };
    std::optional<AeSection> autoencoder;

    // optimizer
    OptConfig opt; // pipeline field filled by build_*()
    std::string opt_channel_text;

    // attacks
    std::vector<std::string> attack_specs;
    int attack_seeds = 32;
    int attack_messages_per_seed = 2;

    // output
    int csv_decimals = 6;

    std::size_t latent_or_pixel_dims() const {
        if (mode == PipelineMode::latent) return autoencoder->latent_dim;
        return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    }

    ScoreModel build_model() const {
        const std::size_t d = latent_or_pixel_dims();
        switch (model_kind) {
        case ScoreModel::Kind::unit_gaussian:
            return ScoreModel::unit_gaussian(d);
        case ScoreModel::Kind::gaussian:
            return ScoreModel::gaussian_broadcast(d, model_mean, model_var);
        case ScoreModel::Kind::gaussian_mixture:
            return ScoreModel::mixture_broadcast(d, mixture_weights, mixture_means, mixture_var);
        }
        throw validation_error("config: unknown model kind");
    }

    ToyAutoencoder build_autoencoder() const {
        if (!autoencoder) throw validation_error("config: autoencoder section missing");
        const AeSection& a = *autoencoder;
        ToyAutoencoder ae = (a.basis == "patch2x2")
                                ? ToyAutoencoder::patch(shape, a.seed)
                                : ToyAutoencoder::dense(shape, a.latent_dim, a.seed);
        ae.rho = a.rho;
        ae.prior_std = a.prior_std;
        ae.noise_cap_std = a.noise_cap_std;
        ae.shrinkage = a.shrinkage;
        ae.clamp_decode = a.clamp_decode;
        ae.validate();
        return ae;
    }

    PipelineConfig build_pipeline() const {
        PipelineConfig pl;
        pl.mode = mode;
        if (mode == PipelineMode::latent) {
            pl.autoencoder = build_autoencoder();
            const auto k = pl.autoencoder->latent_dim;
            pl.codec = CodecParams::create(q, s, key,
                                           {1, 1, static_cast<std::uint32_t>(k)});
        } else {
            pl.codec = CodecParams::create(q, s, key, shape);
        }
        pl.schedule = make_schedule(schedule_kind, t_steps, schedule_options);
        pl.model = build_model();
        pl.solver.order = solver_order;
        pl.solver.steps = solver_steps;
        pl.export_quantize_levels = export_quantize_levels;
        pl.validate();
        return pl;
    }

    OptConfig build_optimizer() const {
        OptConfig o = opt;
        o.pipeline = build_pipeline();
        if (!opt_channel_text.empty())
            o.channel = ChannelSpec::parse(opt_channel_text);
        o.validate();
        return o;
    }
};

namespace config_detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                           const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw validation_error("config: unknown key \"" + path + it.key() + "\"");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

} // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using config_detail::get_or;
    using config_detail::reject_unknown;
    using json = nlohmann::json;

    if (!j.is_object()) throw validation_error("config: top level must be an object");
    reject_unknown(j, {"pipeline", "codec", "schedule", "model", "solver", "autoencoder",
                       "optimizer", "attacks", "output", "prng_algorithm", "icdf_version"},
                   "");

    ExperimentConfig c;

    // algorithm identifiers are part of the interoperability contract
    const std::string prng = get_or<std::string>(j, "prng_algorithm", prng_algorithm_id);
    if (prng != prng_algorithm_id)
        throw validation_error("config: unsupported prng_algorithm \"" + prng + "\" (this build provides \"" +
                               std::string(prng_algorithm_id) + "\")");
    const std::string icdf = get_or<std::string>(j, "icdf_version", icdf_version_id);
    if (icdf != icdf_version_id)
        throw validation_error("config: unsupported icdf_version \"" + icdf + "\" (this build provides \"" +
                               std::string(icdf_version_id) + "\")");

    bool export_quantize_given = false;
    if (j.contains("pipeline")) {
        const json& p = j.at("pipeline");
        reject_unknown(p, {"mode", "shape", "export_quantize_levels"}, "pipeline.");
        const std::string mode = get_or<std::string>(p, "mode", "pixel");
        if (mode == "pixel") c.mode = PipelineMode::pixel;
        else if (mode == "latent") c.mode = PipelineMode::latent;
        else throw validation_error("config: pipeline.mode must be \"pixel\" or \"latent\"");
        if (p.contains("shape")) {
            const auto v = p.at("shape").get<std::vector<std::uint32_t>>();
            if (v.size() != 3)
                throw validation_error("config: pipeline.shape must have 3 entries");
            c.shape = {v[0], v[1], v[2]};
        }
        if (p.contains("export_quantize_levels")) {
            c.export_quantize_levels = p.at("export_quantize_levels").get<long>();
            export_quantize_given = true;
        }
    }
    if (!export_quantize_given)
        c.export_quantize_levels = (c.mode == PipelineMode::latent) ? 256 : 0;

    if (j.contains("codec")) {
        const json& p = j.at("codec");
        reject_unknown(p, {"q", "s", "key_hex"}, "codec.");
        c.q = get_or<int>(p, "q", 1);
        c.s = get_or<double>(p, "s", 1.0);
        if (p.contains("key_hex")) c.key = Key256::from_hex(p.at("key_hex").get<std::string>());
    }

    if (j.contains("schedule")) {
        const json& p = j.at("schedule");
        reject_unknown(p, {"kind", "t_steps", "beta_min", "beta_max", "base_steps", "t_min",
                           "cosine_s", "alpha_bar_min"},
                       "schedule.");
        c.schedule_kind = parse_schedule_kind(get_or<std::string>(p, "kind", "linear-beta"));
        c.t_steps = get_or<int>(p, "t_steps", 50);
        c.schedule_options.beta_min = get_or<double>(p, "beta_min", 1e-4);
        c.schedule_options.beta_max = get_or<double>(p, "beta_max", 0.02);
        c.schedule_options.base_steps = get_or<double>(p, "base_steps", 1000.0);
        c.schedule_options.t_min = get_or<double>(p, "t_min", 1e-3);
        c.schedule_options.cosine_s = get_or<double>(p, "cosine_s", 0.008);
        c.schedule_options.alpha_bar_min = get_or<double>(p, "alpha_bar_min", 1e-5);
    }

    if (j.contains("model")) {
        const json& p = j.at("model");
        reject_unknown(p, {"kind", "mean", "var", "weights", "means", "mixture_var"}, "model.");
        const std::string kind = get_or<std::string>(p, "kind", "unit_gaussian");
        if (kind == "unit_gaussian") c.model_kind = ScoreModel::Kind::unit_gaussian;
        else if (kind == "gaussian") c.model_kind = ScoreModel::Kind::gaussian;
        else if (kind == "gaussian_mixture") c.model_kind = ScoreModel::Kind::gaussian_mixture;
        else throw validation_error("config: model.kind unknown: " + kind);
        c.model_mean = get_or<double>(p, "mean", 0.0);
        c.model_var = get_or<double>(p, "var", 1.0);
        c.mixture_weights = get_or<std::vector<double>>(p, "weights", {});
        c.mixture_means = get_or<std::vector<double>>(p, "means", {});
        c.mixture_var = get_or<double>(p, "mixture_var", 0.25);
        if (c.model_kind == ScoreModel::Kind::gaussian_mixture &&
            (c.mixture_weights.empty() || c.mixture_weights.size() != c.mixture_means.size()))
            throw validation_error("config: model.weights and model.means must be nonempty and equal length");
    }

    if (j.contains("solver")) {
        const json& p = j.at("solver");
        reject_unknown(p, {"order", "steps"}, "solver.");
        c.solver_order = get_or<int>(p, "order", 3);
        c.solver_steps = get_or<int>(p, "steps", c.t_steps);
    } else {
        c.solver_steps = c.t_steps;
    }

    if (j.contains("autoencoder")) {
        const json& p = j.at("autoencoder");
        reject_unknown(p, {"basis", "latent_dim", "rho", "prior_std", "noise_cap_std",
                           "shrinkage", "clamp_decode", "seed"},
                       "autoencoder.");
        ExperimentConfig::AeSection a;
        a.basis = get_or<std::string>(p, "basis", "patch2x2");
        if (a.basis != "patch2x2" && a.basis != "dense")
            throw validation_error("config: autoencoder.basis must be \"patch2x2\" or \"dense\"");
        const std::size_t d = static_cast<std::size_t>(c.shape[0]) * c.shape[1] * c.shape[2];
        a.latent_dim = get_or<std::size_t>(p, "latent_dim", a.basis == "patch2x2" ? d / 4 : d);
        a.rho = get_or<double>(p, "rho", 0.0);
        a.prior_std = get_or<double>(p, "prior_std", 1.0);
        a.noise_cap_std = get_or<double>(p, "noise_cap_std", 0.0);
        a.shrinkage = get_or<bool>(p, "shrinkage", false);
        a.clamp_decode = get_or<bool>(p, "clamp_decode", false);
        a.seed = get_or<std::uint64_t>(p, "seed", 11);
        c.autoencoder = a;
    }
    if (c.mode == PipelineMode::latent && !c.autoencoder)
        throw validation_error("config: latent mode requires an \"autoencoder\" section");

    if (j.contains("optimizer")) {
        const json& p = j.at("optimizer");
        reject_unknown(p, {"acc_target", "beta_base", "gamma", "delta1", "eta", "batch",
                           "max_iters", "converge_window", "converge_tol", "s0", "s_max",
                           "fd_step", "margin_safety", "validation_batch", "seed", "channel"},
                       "optimizer.");
        c.opt.acc_target = get_or<double>(p, "acc_target", 0.99);
        c.opt.beta_base = get_or<double>(p, "beta_base", 1.0);
        if (p.contains("gamma")) {
            const auto g = p.at("gamma").get<std::vector<double>>();
            if (g.size() != 3)
                throw validation_error("config: optimizer.gamma must have 3 entries");
            c.opt.gamma = {g[0], g[1], g[2]};
        }
        c.opt.delta1 = get_or<double>(p, "delta1", 0.01);
        c.opt.eta = get_or<double>(p, "eta", 0.05);
        c.opt.batch = get_or<int>(p, "batch", 64);
        c.opt.max_iters = get_or<int>(p, "max_iters", 300);
        c.opt.converge_window = get_or<int>(p, "converge_window", 20);
        c.opt.converge_tol = get_or<double>(p, "converge_tol", 1e-3);
        c.opt.s0 = get_or<double>(p, "s0", 1.0);
        c.opt.s_max = get_or<double>(p, "s_max", 64.0);
        c.opt.fd_step = get_or<double>(p, "fd_step", 1e-2);
        c.opt.margin_safety = get_or<double>(p, "margin_safety", 1.0);
        c.opt.validation_batch = get_or<int>(p, "validation_batch", 256);
        c.opt.seed = get_or<std::uint64_t>(p, "seed", 1);
        c.opt_channel_text = get_or<std::string>(p, "channel", "");
    }

    if (j.contains("attacks")) {
        const json& p = j.at("attacks");
        reject_unknown(p, {"specs", "seeds", "messages_per_seed"}, "attacks.");
        c.attack_specs = get_or<std::vector<std::string>>(p, "specs", {});
        c.attack_seeds = get_or<int>(p, "seeds", 32);
        c.attack_messages_per_seed = get_or<int>(p, "messages_per_seed", 2);
        for (const auto& spec : c.attack_specs) ChannelSpec::parse(spec); // validate now
    }

    if (j.contains("output")) {
        const json& p = j.at("output");
        reject_unknown(p, {"decimals"}, "output.");
        c.csv_decimals = get_or<int>(p, "decimals", 6);
    }

    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("config file not found: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

} // namespace stegdiff
