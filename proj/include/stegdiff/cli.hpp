#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stegdiff/analysis.hpp"
#include "stegdiff/config.hpp"
#include "stegdiff/csv.hpp"
#include "stegdiff/gaussianity.hpp"
#include "stegdiff/optimizer.hpp"
#include "stegdiff/pipeline.hpp"

namespace stegdiff::cli {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> bytes_to_bits(const std::vector<std::uint8_t>& bytes) {
    std::vector<std::uint8_t> bits;
    bits.reserve(bytes.size() * 8);
    for (std::uint8_t b : bytes)
        for (int i = 7; i >= 0; --i) bits.push_back(static_cast<std::uint8_t>((b >> i) & 1u));
    return bits;
}

inline std::vector<std::uint8_t> bits_to_bytes(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint8_t> bytes(bits.size() / 8, 0);
    for (std::size_t i = 0; i < bytes.size() * 8; ++i)
        bytes[i / 8] = static_cast<std::uint8_t>((bytes[i / 8] << 1) | (bits[i] & 1u));
    return bytes;
}

inline std::vector<std::uint8_t> read_binary(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_binary(const fs::path& p, const std::vector<std::uint8_t>& data) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw io_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
    }
    fs::rename(tmp, p);
}

/// "1,2,4" -> values; "0.05:2.0:0.05" -> inclusive range.
inline std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::stringstream ss(text);
        std::string a, b, c;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        const double lo = std::stod(a), hi = std::stod(b), step = c.empty() ? 1.0 : std::stod(c);
        if (step <= 0.0) throw validation_error("range step must be positive");
        for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw validation_error("empty value list");
    return out;
}

// ---------------------------------------------------------------- kl-table

inline CsvWriter kl_table(const std::vector<double>& qs, const std::vector<double>& ss) {
    CsvWriter csv({"Q", "S", "kappa4", "kappa6", "kappa8", "kappa10", "dkl_analytic",
                   "dkl_term_share_k4"});
    for (double qd : qs) {
        const int q = static_cast<int>(qd);
        for (double s : ss) {
            const CumulantSet k = cumulants(s, q);
            const KlTerms t = analytic_kl_terms(s, q);
            csv.add_row({std::to_string(q), csv_number(s, 4), csv_number(k.kappa4, 9),
                         csv_number(k.kappa6, 9), csv_number(k.kappa8, 9),
                         csv_number(k.kappa10, 9), csv_number(t.total, 9),
                         csv_number(t.share_kappa4, 6)});
        }
    }
    return csv;
}

// --------------------------------------------------------------- robustness

struct BarPoint {
    std::string attack;
    double bar = 0.0;
};

/// Mean BAR of hide -> attack -> extract over the configured seed set.
inline double attacked_bar(const PipelineConfig& pl, const ChannelSpec& atk, int seeds,
                           int messages_per_seed, std::uint64_t seed0 = 0x61747461636bull) {
    const std::size_t payload_bits = pl.codec.dims() * static_cast<std::size_t>(pl.codec.q);
    std::size_t match = 0, total = 0;
    for (int sd = 0; sd < seeds; ++sd)
        for (int ms = 0; ms < messages_per_seed; ++ms) {
            const std::uint64_t trial = static_cast<std::uint64_t>(sd * messages_per_seed + ms);
            const Key256 pk = derive_key(seed0 + trial, domain_tag::message);
            std::vector<std::uint8_t> bits(payload_bits);
            for (std::size_t i = 0; i < bits.size(); ++i)
                bits[i] = static_cast<std::uint8_t>(keyed_bit(pk, domain_tag::message, i));
            PipelineConfig p2 = pl;
            p2.decode_noise_seq = trial;
            const StegoSample stego = hide(bits, p2);
            const NoiseTensor attacked = apply_channel(atk, stego.pixels, seed0 ^ (trial * 0x9e37ull));
            const std::vector<std::uint8_t> back = extract(attacked, stego.manifest, p2);
            for (std::size_t i = 0; i < bits.size(); ++i) {
                ++total;
                if (back[i] == bits[i]) ++match;
            }
        }
    return static_cast<double>(match) / static_cast<double>(total);
}

inline double lossless_bar(const PipelineConfig& pl, int trials,
                           std::uint64_t seed0 = 0x636c65616eull) {
    ChannelSpec none;
    none.kind = ChannelSpec::Kind::awgn;
    none.sigma = 0.0;
    return attacked_bar(pl, none, trials, 1, seed0);
}

// -------------------------------------------------- residual diagnostics

struct ResidualRun {
    ResidualStats stego;
    ResidualStats control;
    double w1 = 0.0;
};

/// Stego / baseline / control batches through one pipeline at scale s. The
/// control replaces the message signal with a keyed continuous-uniform signal
/// of equal variance; the baseline is the pure keyed-noise cover generation.
inline ResidualRun residual_diagnostic(const PipelineConfig& pl_in, double s, int batch,
                                       std::uint64_t seed0 = 0x7265736964ull) {
    PipelineConfig pl = pl_in;
    pl.codec = CodecParams::create(pl.codec.q, s, pl.codec.key, pl.codec.shape);
    const std::size_t d = pl.codec.dims();
    const double n_sym = std::ldexp(1.0, pl.codec.q);
    const double width = s * std::sqrt((n_sym + 1.0) / (n_sym - 1.0)); // energy-matched uniform

    SolverConfig gen = pl.solver;
    gen.direction = Direction::generate;

    std::vector<NoiseTensor> stego, baseline, control;
    for (int b = 0; b < batch; ++b) {
        const Key256 mk = derive_key(seed0 + static_cast<std::uint64_t>(b), domain_tag::message);
        SymbolStream st;
        st.symbols.resize(d);
        st.payload_len_bits = d * static_cast<std::size_t>(pl.codec.q);
        for (std::size_t i = 0; i < d; ++i)
            st.symbols[i] = static_cast<std::uint32_t>(keyed_word(mk, domain_tag::message, i)) &
                            (pl.codec.alphabet() - 1u);
        NoiseTensor xs = map_message(st, pl.codec);
        NoiseTensor xb(pl.codec.shape), xc(pl.codec.shape);
        for (std::size_t i = 0; i < d; ++i) {
            const double n = keyed_gaussian(pl.codec.key, domain_tag::noise, i);
            xb.values[i] = n;
            const double u_rand = width * (keyed_uniform(mk, domain_tag::control, i) - 0.5);
            xc.values[i] = (u_rand + n) / pl.codec.sigma;
        }
        auto decode = [&](const NoiseTensor& x_T) {
            NoiseTensor out = generate(pl.model, pl.schedule, x_T, gen);
            if (pl.mode == PipelineMode::latent) {
                auto px = pl.autoencoder->decode(out.values, seed0 + static_cast<std::uint64_t>(b));
                if (pl.export_quantize_levels >= 2)
                    for (double& v : px) v = quantize_value(v, pl.export_quantize_levels);
                NoiseTensor o2(pl.autoencoder->pixel_shape);
                o2.values = std::move(px);
                return o2;
            }
            if (pl.export_quantize_levels >= 2)
                for (double& v : out.values) v = quantize_value(v, pl.export_quantize_levels);
            return out;
        };
        stego.push_back(decode(xs));
        baseline.push_back(decode(xb));
        control.push_back(decode(xc));
    }
    auto [rs, rc] = residual_stats(stego, baseline, control);
    ResidualRun run{std::move(rs), std::move(rc), 0.0};
    run.w1 = wasserstein1(run.stego.histogram, run.control.histogram);
    return run;
}

/// S at capacity q whose analytic KL matches the target divergence.
inline double match_kl_scale(double kl_target, int q, double s_max = 64.0) {
    double lo = 1e-6, hi = s_max;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (analytic_kl(mid, q) < kl_target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ------------------------------------------------- manifold diagnostics

/// Fraction of attacked samples whose re-encoded latent sits closer to the
/// prior center than the unattacked sample's.
inline double manifold_reduction_fraction(const PipelineConfig& pl, double awgn_sigma,
                                          int samples, std::uint64_t seed0 = 0x6d616e69ull) {
    if (pl.mode != PipelineMode::latent)
        throw validation_error("manifold diagnostic needs a latent pipeline");
    ChannelSpec atk;
    atk.kind = ChannelSpec::Kind::awgn;
    atk.sigma = awgn_sigma;
    const std::size_t payload_bits = pl.codec.dims() * static_cast<std::size_t>(pl.codec.q);
    int reduced = 0;
    for (int t = 0; t < samples; ++t) {
        const std::uint64_t trial = static_cast<std::uint64_t>(t);
        const Key256 pk = derive_key(seed0 + trial, domain_tag::message);
        std::vector<std::uint8_t> bits(payload_bits);
        for (std::size_t i = 0; i < bits.size(); ++i)
            bits[i] = static_cast<std::uint8_t>(keyed_bit(pk, domain_tag::message, i));
        PipelineConfig p2 = pl;
        p2.decode_noise_seq = trial;
        const StegoSample stego = hide(bits, p2);
        const auto z_un = pl.autoencoder->encode(stego.pixels.values);
        const NoiseTensor attacked = apply_channel(atk, stego.pixels, seed0 ^ (trial * 131ull));
        const auto z_at = pl.autoencoder->encode(attacked.values);
        if (manifold_distance(z_at) < manifold_distance(z_un)) ++reduced;
    }
    return static_cast<double>(reduced) / static_cast<double>(samples);
}

// ------------------------------------------------------- tradeoff report

struct TradeoffReport {
    OptResult pixel_opt, latent_opt;
    double pixel_s_star = 0, latent_s_star = 0;
    double pixel_kl = 0, latent_kl = 0;
    std::vector<std::pair<std::string, double>> pixel_bars, latent_bars;
    double pixel_lossless_bar = 0, latent_lossless_bar = 0;
    double w1_pixel = 0, w1_latent = 0;
    double matched_pixel_scale = 0;
    std::vector<std::pair<double, double>> manifold; // sigma -> reduction fraction
};

inline TradeoffReport run_tradeoff(const ExperimentConfig& pixel_cfg,
                                   const ExperimentConfig& latent_cfg) {
    TradeoffReport r;
    OptConfig po = pixel_cfg.build_optimizer();
    OptConfig lo = latent_cfg.build_optimizer();
    r.pixel_opt = optimize_scale(po);
    r.latent_opt = optimize_scale(lo);
    if (!r.pixel_opt.feasible || !r.latent_opt.feasible)
        throw error("tradeoff report: optimization did not reach a feasible scale: " +
                    r.pixel_opt.diagnostic + " / " + r.latent_opt.diagnostic);
    r.pixel_s_star = r.pixel_opt.s_star;
    r.latent_s_star = r.latent_opt.s_star;
    r.pixel_kl = analytic_kl(r.pixel_s_star, pixel_cfg.q);
    r.latent_kl = analytic_kl(r.latent_s_star, latent_cfg.q);

    PipelineConfig ppl = po.pipeline;
    ppl.codec = CodecParams::create(ppl.codec.q, r.pixel_s_star, ppl.codec.key, ppl.codec.shape);
    PipelineConfig lpl = lo.pipeline;
    lpl.codec = CodecParams::create(lpl.codec.q, r.latent_s_star, lpl.codec.key, lpl.codec.shape);

    r.pixel_lossless_bar = lossless_bar(ppl, 32);
    r.latent_lossless_bar = lossless_bar(lpl, 32);

    const auto& specs = latent_cfg.attack_specs.empty() ? pixel_cfg.attack_specs
                                                        : latent_cfg.attack_specs;
    for (const std::string& spec_text : specs) {
        const ChannelSpec atk = ChannelSpec::parse(spec_text);
        r.pixel_bars.emplace_back(spec_text, attacked_bar(ppl, atk, pixel_cfg.attack_seeds,
                                                          pixel_cfg.attack_messages_per_seed));
        r.latent_bars.emplace_back(spec_text, attacked_bar(lpl, atk, latent_cfg.attack_seeds,
                                                           latent_cfg.attack_messages_per_seed));
    }

    // residual shift at matched analytic KL: the latent pipeline at its
    // operating point vs the pixel pipeline at capacity 4 with S solved for
    // the same divergence
    r.w1_latent = residual_diagnostic(lpl, r.latent_s_star, 48).w1;
    PipelineConfig ppl4 = po.pipeline;
    r.matched_pixel_scale = match_kl_scale(r.latent_kl, 4);
    ppl4.codec = CodecParams::create(4, r.matched_pixel_scale, ppl4.codec.key, ppl4.codec.shape);
    r.w1_pixel = residual_diagnostic(ppl4, r.matched_pixel_scale, 48).w1;

    for (const double sg : {0.001, 0.01, 0.1})
        r.manifold.emplace_back(sg, manifold_reduction_fraction(lpl, sg, 400));
    return r;
}

inline void write_tradeoff_outputs(const TradeoffReport& r, const ExperimentConfig& pixel_cfg,
                                   const ExperimentConfig& latent_cfg, const fs::path& out_dir) {
    CsvWriter summary({"pipeline", "Q", "Acc_target", "S_star", "L_retr", "D_KL",
                       "validation_acc", "lossless_bar"});
    const OptState& pt = r.pixel_opt.trace.back();
    const OptState& lt = r.latent_opt.trace.back();
    summary.add_row({"pixel", std::to_string(pixel_cfg.q), csv_number(pixel_cfg.opt.acc_target, 4),
                     csv_number(r.pixel_s_star, 6), csv_number(pt.l_retr, 6),
                     csv_number(r.pixel_kl, 9), csv_number(r.pixel_opt.validation_acc, 6),
                     csv_number(r.pixel_lossless_bar, 6)});
    summary.add_row({"latent", std::to_string(latent_cfg.q), csv_number(latent_cfg.opt.acc_target, 4),
                     csv_number(r.latent_s_star, 6), csv_number(lt.l_retr, 6),
                     csv_number(r.latent_kl, 9), csv_number(r.latent_opt.validation_acc, 6),
                     csv_number(r.latent_lossless_bar, 6)});
    summary.write(out_dir / "summary.csv");

    CsvWriter rob({"pipeline", "Q", "attack", "bar"});
    for (const auto& [spec, bar] : r.pixel_bars)
        rob.add_row({"pixel", std::to_string(pixel_cfg.q), spec, csv_number(bar, 6)});
    for (const auto& [spec, bar] : r.latent_bars)
        rob.add_row({"latent", std::to_string(latent_cfg.q), spec, csv_number(bar, 6)});
    rob.write(out_dir / "robustness.csv");

    CsvWriter kl = kl_table({1, 2, 4}, {0.05, 0.0938, 0.1966, 0.2, 0.2111, 0.4, 0.5413, 0.5768,
                                        0.6, 0.8, 1.0, 1.5});
    kl.write(out_dir / "kl_table.csv");

    CsvWriter man({"awgn_sigma", "manifold_reduction_fraction"});
    for (const auto& [sg, frac] : r.manifold)
        man.add_row({csv_number(sg, 4), csv_number(frac, 6)});
    man.write(out_dir / "manifold.csv");

    CsvWriter resid({"pipeline", "Q", "S", "dkl_analytic", "wasserstein1"});
    resid.add_row({"pixel", "4", csv_number(r.matched_pixel_scale, 6),
                   csv_number(analytic_kl(r.matched_pixel_scale, 4), 9), csv_number(r.w1_pixel, 6)});
    resid.add_row({"latent", std::to_string(latent_cfg.q), csv_number(r.latent_s_star, 6),
                   csv_number(r.latent_kl, 9), csv_number(r.w1_latent, 6)});
    resid.write(out_dir / "residual_w1.csv");

    std::ostringstream md;
    md << "# Security-robustness trade-off report\n\n"
       << "Desk-scale reproduction with analytic score models. All randomness flows\n"
       << "from the config-declared seeds; rerunning with the same configs is\n"
       << "byte-identical.\n\n"
       << "## Optimized scales\n\n"
       << "| pipeline | Q | Acc_target | S* | D_KL | lossless BAR |\n"
       << "|---|---|---|---|---|---|\n"
       << "| pixel | " << pixel_cfg.q << " | " << csv_number(pixel_cfg.opt.acc_target, 4) << " | "
       << csv_number(r.pixel_s_star, 6) << " | " << csv_number(r.pixel_kl, 9) << " | "
       << csv_number(r.pixel_lossless_bar, 6) << " |\n"
       << "| latent | " << latent_cfg.q << " | " << csv_number(latent_cfg.opt.acc_target, 4)
       << " | " << csv_number(r.latent_s_star, 6) << " | " << csv_number(r.latent_kl, 9) << " | "
       << csv_number(r.latent_lossless_bar, 6) << " |\n\n"
       << "S*_latent / S*_pixel = " << csv_number(r.latent_s_star / r.pixel_s_star, 2)
       << ", D_KL ratio = " << csv_number(r.latent_kl / r.pixel_kl, 3) << "\n\n"
       << "## Robustness (mean BAR over seeded attacks)\n\n"
       << "| attack | pixel | latent |\n|---|---|---|\n";
    for (std::size_t i = 0; i < r.pixel_bars.size(); ++i)
        md << "| " << r.pixel_bars[i].first << " | " << csv_number(r.pixel_bars[i].second, 4)
           << " | " << csv_number(r.latent_bars[i].second, 4) << " |\n";
    md << "\n## Encoder regularization (manifold-distance reduction fraction)\n\n"
       << "| AWGN sigma | fraction |\n|---|---|\n";
    for (const auto& [sg, frac] : r.manifold)
        md << "| " << csv_number(sg, 4) << " | " << csv_number(frac, 4) << " |\n";
    md << "\n## Residual distribution shift at matched analytic KL\n\n"
       << "Wasserstein-1 between stego and energy-matched control residual\n"
       << "histograms: pixel (Q=4, S=" << csv_number(r.matched_pixel_scale, 4)
       << ") = " << csv_number(r.w1_pixel, 6) << ", latent (Q=" << latent_cfg.q
       << ", S=" << csv_number(r.latent_s_star, 4) << ") = " << csv_number(r.w1_latent, 6)
       << "\n";
    write_text_atomic(out_dir / "tradeoff_report.md", md.str());
}

// ---------------------------------------------------------------- run()

inline int run(std::vector<std::string> args) {
    CLI::App app{"diffusion steganography experiment harness"};
    app.require_subcommand(1);

    std::uint64_t global_seed = 0;
    int threads = 1;
    std::string out_dir = ".";
    app.add_option("--seed", global_seed, "override the base seed for stochastic subcommands");
    app.add_option("--threads", threads, "worker hint (all current paths are sequential)");
    app.add_option("--out-dir", out_dir, "directory for default output paths");

    // kl-table
    auto* sc_kl = app.add_subcommand("kl-table", "emit cumulants and analytic KL over a grid");
    std::string kl_q = "1,2,4", kl_s = "0.05:2.0:0.05", kl_out;
    sc_kl->add_option("--q", kl_q, "capacity list, e.g. 1,2,4");
    sc_kl->add_option("--s", kl_s, "scale list or range lo:hi:step");
    sc_kl->add_option("--out", kl_out, "output CSV path");

    // hide / extract
    auto* sc_hide = app.add_subcommand("hide", "embed a payload file into a stego tensor");
    std::string hide_payload, hide_config, hide_out;
    sc_hide->add_option("--payload", hide_payload)->required();
    sc_hide->add_option("--config", hide_config)->required();
    sc_hide->add_option("--out", hide_out)->required();

    auto* sc_extract = app.add_subcommand("extract", "recover a payload from a stego tensor");
    std::string ex_stego, ex_config, ex_out;
    sc_extract->add_option("--stego", ex_stego)->required();
    sc_extract->add_option("--config", ex_config)->required();
    sc_extract->add_option("--out", ex_out)->required();

    // attack
    auto* sc_attack = app.add_subcommand("attack", "apply one channel distortion to a tensor");
    std::string at_in, at_out, at_spec;
    std::uint64_t at_seed = 1;
    sc_attack->add_option("--in", at_in)->required();
    sc_attack->add_option("--out", at_out)->required();
    sc_attack->add_option("--spec", at_spec, "kind:key=value,... e.g. awgn:sigma=0.01")->required();
    sc_attack->add_option("--seed", at_seed);

    // robustness
    auto* sc_rob = app.add_subcommand("robustness", "BAR sweep over the configured attack grid");
    std::string rob_config, rob_out, rob_s;
    sc_rob->add_option("--config", rob_config)->required();
    sc_rob->add_option("--s", rob_s, "override the codec scale (default: config value)");
    sc_rob->add_option("--out", rob_out);

    // optimize-s
    auto* sc_opt = app.add_subcommand("optimize-s", "adaptive search for the scale factor");
    std::string opt_config, opt_pipeline;
    int opt_q = 0;
    sc_opt->add_option("--config", opt_config)->required();
    sc_opt->add_option("--q", opt_q, "override the capacity");
    sc_opt->add_option("--pipeline", opt_pipeline, "must match the config mode (pixel|latent)");

    // spectrum
    auto* sc_spec = app.add_subcommand("spectrum", "radially averaged power spectrum of a tensor");
    std::string sp_in, sp_out;
    int sp_channel = 0;
    sc_spec->add_option("--in", sp_in)->required();
    sc_spec->add_option("--channel", sp_channel);
    sc_spec->add_option("--out", sp_out);

    // residuals
    auto* sc_res = app.add_subcommand("residuals", "stego vs control residual histograms");
    std::string res_config, res_out;
    double res_s = 0.0;
    int res_batch = 48;
    sc_res->add_option("--config", res_config)->required();
    sc_res->add_option("--s", res_s, "scale factor (default: config codec.s)");
    sc_res->add_option("--batch", res_batch);
    sc_res->add_option("--out", res_out);

    // tradeoff-report
    auto* sc_trade = app.add_subcommand("tradeoff-report", "full desk-scale reproduction");
    std::string tr_pixel, tr_latent;
    sc_trade->add_option("--pixel-config", tr_pixel)->required();
    sc_trade->add_option("--latent-config", tr_latent)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help() << std::endl;
            return 0;
        }
        std::cerr << e.what() << "\n" << app.help() << std::endl;
        return 1;
    }

    try {
        const fs::path out_base = out_dir;
        if (sc_kl->parsed()) {
            const CsvWriter csv = kl_table(parse_value_list(kl_q), parse_value_list(kl_s));
            csv.write(kl_out.empty() ? out_base / "kl_table.csv" : fs::path(kl_out));
            return 0;
        }
        if (sc_hide->parsed()) {
            const ExperimentConfig cfg = load_config(hide_config);
            const PipelineConfig pl = cfg.build_pipeline();
            const auto bits = bytes_to_bits(read_binary(hide_payload));
            const StegoSample stego = hide(bits, pl);
            save_tensor(hide_out, stego.pixels, stego.manifest);
            return 0;
        }
        if (sc_extract->parsed()) {
            const ExperimentConfig cfg = load_config(ex_config);
            const PipelineConfig pl = cfg.build_pipeline();
            std::string manifest;
            const NoiseTensor stego = load_tensor(ex_stego, &manifest);
            const auto bits = extract(stego, manifest, pl);
            write_binary(ex_out, bits_to_bytes(bits));
            return 0;
        }
        if (sc_attack->parsed()) {
            const ChannelSpec spec = ChannelSpec::parse(at_spec);
            std::string manifest;
            const NoiseTensor x = load_tensor(at_in, &manifest);
            const NoiseTensor y = apply_channel(spec, x, at_seed ^ global_seed);
            save_tensor(at_out, y, manifest);
            return 0;
        }
        if (sc_rob->parsed()) {
            const ExperimentConfig cfg = load_config(rob_config);
            PipelineConfig pl = cfg.build_pipeline();
            if (!rob_s.empty())
                pl.codec = CodecParams::create(pl.codec.q, std::stod(rob_s), pl.codec.key,
                                               pl.codec.shape);
            CsvWriter csv({"pipeline", "Q", "attack", "bar"});
            const std::string mode = cfg.mode == PipelineMode::pixel ? "pixel" : "latent";
            csv.add_row({mode, std::to_string(cfg.q), "none",
                         csv_number(lossless_bar(pl, cfg.attack_seeds), 6)});
            for (const std::string& spec_text : cfg.attack_specs) {
                const ChannelSpec atk = ChannelSpec::parse(spec_text);
                const double bar =
                    attacked_bar(pl, atk, cfg.attack_seeds, cfg.attack_messages_per_seed);
                csv.add_row({mode, std::to_string(cfg.q), spec_text, csv_number(bar, 6)});
            }
            csv.write(rob_out.empty() ? out_base / "robustness.csv" : fs::path(rob_out));
            return 0;
        }
        if (sc_opt->parsed()) {
            ExperimentConfig cfg = load_config(opt_config);
            if (opt_q > 0) cfg.q = opt_q;
            if (!opt_pipeline.empty()) {
                const bool want_latent = (opt_pipeline == "latent");
                if (want_latent != (cfg.mode == PipelineMode::latent))
                    throw validation_error("--pipeline does not match the config mode");
            }
            OptConfig oc = cfg.build_optimizer();
            if (global_seed) oc.seed = global_seed;
            const OptResult res = optimize_scale(oc);
            CsvWriter trace({"iter", "S", "Acc_curr", "L_retr", "D_KL", "beta_eff"});
            for (const OptState& st : res.trace)
                trace.add_row({std::to_string(st.iter), csv_number(st.s, 8),
                               csv_number(st.acc_curr, 6), csv_number(st.l_retr, 8),
                               csv_number(st.d_kl, 9), csv_number(st.beta_eff, 6)});
            trace.write(out_base / "optimize_trace.csv");
            CsvWriter summary({"Q", "Acc_target", "S_star", "L_retr", "D_KL", "feasible",
                               "validation_acc", "diagnostic"});
            summary.add_row({std::to_string(cfg.q), csv_number(oc.acc_target, 4),
                             csv_number(res.s_star, 8),
                             csv_number(res.trace.back().l_retr, 8),
                             csv_number(analytic_kl(res.s_star, cfg.q), 9),
                             res.feasible ? "1" : "0", csv_number(res.validation_acc, 6),
                             res.diagnostic.empty() ? "ok" : res.diagnostic});
            summary.write(out_base / "optimize_summary.csv");
            if (!res.feasible) {
                std::cerr << res.diagnostic << std::endl;
                return 2;
            }
            return 0;
        }
        if (sc_spec->parsed()) {
            const NoiseTensor x = load_tensor(sp_in);
            if (sp_channel < 0 || static_cast<std::uint32_t>(sp_channel) >= x.shape[0])
                throw validation_error("spectrum: channel index out of range");
            const std::size_t h = x.shape[1], w = x.shape[2];
            const std::size_t off = static_cast<std::size_t>(sp_channel) * h * w;
            const RadialSpectrum sp =
                radial_power_spectrum({x.values.data() + off, h * w}, h, w);
            CsvWriter csv({"radius", "power"});
            csv.add_row({"0", csv_number(sp.dc, 9)});
            for (std::size_t i = 0; i < sp.radii.size(); ++i)
                csv.add_row({csv_number(sp.radii[i], 1), csv_number(sp.power[i], 9)});
            csv.write(sp_out.empty() ? out_base / "spectrum.csv" : fs::path(sp_out));
            return 0;
        }
        if (sc_res->parsed()) {
            const ExperimentConfig cfg = load_config(res_config);
            const PipelineConfig pl = cfg.build_pipeline();
            const double s = res_s > 0.0 ? res_s : cfg.s;
            const ResidualRun run = residual_diagnostic(pl, s, res_batch);
            CsvWriter csv({"bin_center", "stego_density", "control_density"});
            const auto& hs = run.stego.histogram;
            const auto& hc = run.control.histogram;
            for (std::size_t b = 0; b < hs.mass.size(); ++b)
                csv.add_row({csv_number(hs.bin_center(b), 8),
                             csv_number(hs.mass[b] / hs.bin_width(), 8),
                             csv_number(hc.mass[b] / hc.bin_width(), 8)});
            csv.write(res_out.empty() ? out_base / "residuals.csv" : fs::path(res_out));
            return 0;
        }
        if (sc_trade->parsed()) {
            const ExperimentConfig pc = load_config(tr_pixel);
            const ExperimentConfig lc = load_config(tr_latent);
            const TradeoffReport r = run_tradeoff(pc, lc);
            write_tradeoff_outputs(r, pc, lc, out_base);
            return 0;
        }
        std::cerr << "no subcommand selected" << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

} // namespace stegdiff::cli
