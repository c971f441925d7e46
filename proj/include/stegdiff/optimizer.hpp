#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stegdiff/gaussianity.hpp"
#include "stegdiff/pipeline.hpp"

namespace stegdiff {

/// Three-stage multipliers on beta_base, keyed by where the current accuracy
/// sits relative to the target.
struct StageGammas {
    double deficit = 0.01;
    double approaching = 1.0;
    double achieved = 100.0;
};

struct OptConfig {
    double acc_target = 0.99;
    double beta_base = 1.0;
    StageGammas gamma;
    double delta1 = 0.01;
    double eta = 0.05;            // learning rate for log-S updates
    int batch = 64;               // messages per iteration
    int max_iters = 300;
    int converge_window = 20;
    double converge_tol = 1e-3;
    double s0 = 1.0;
    double s_max = 64.0;
    double fd_step = 1e-2;        // relative step in log S
    double margin_safety = 1.0;   // validation demands |m~ - m| <= 0.5/margin_safety
    int validation_batch = 256;
    std::uint64_t seed = 1;

    PipelineConfig pipeline;               // codec.s is overwritten per iterate
    std::optional<ChannelSpec> channel;    // optional in-loop attack
    std::string channel_text;              // parse source (autoencoder_cycle unsupported here)

    void validate() const {
        if (!(acc_target > 0.0 && acc_target <= 1.0))
            throw validation_error("OptConfig: Acc_target must lie in (0,1]");
        if (beta_base < 0.0) throw validation_error("OptConfig: beta_base must be >= 0");
        if (!(gamma.deficit < gamma.approaching && gamma.approaching < gamma.achieved))
            throw validation_error("OptConfig: gamma stages must be strictly increasing");
        if (!(delta1 > 0.0 && delta1 < acc_target))
            throw validation_error("OptConfig: delta1 must lie in (0, Acc_target)");
        if (eta <= 0.0 || batch < 1 || max_iters < 1 || converge_window < 1)
            throw validation_error("OptConfig: bad loop parameters");
        if (!(s0 > 0.0 && s0 <= s_max))
            throw validation_error("OptConfig: S0 must lie in (0, S_max]");
        if (margin_safety < 1.0)
            throw validation_error("OptConfig: margin_safety must be >= 1");
        pipeline.validate();
        if (channel) channel->validate();
    }
};

/// One optimizer iterate, logged into the trace.
struct OptState {
    int iter = 0;
    double s = 0;
    double acc_curr = 0;
    double l_retr = 0;
    double d_kl = 0;
    double beta_eff = 0;
    double l_total = 0;
};

/// Mean L1 distance between original symbols and continuous estimates.
inline double retrieval_loss(const SymbolStream& orig, std::span<const double> m_cont) {
    if (orig.symbols.size() != m_cont.size())
        throw validation_error("retrieval_loss: length mismatch");
    if (orig.symbols.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < m_cont.size(); ++i)
        acc += std::abs(static_cast<double>(orig.symbols[i]) - m_cont[i]);
    return acc / static_cast<double>(m_cont.size());
}

/// The three-stage weight schedule. Boundaries follow the stage inequalities:
/// deficit for Acc < target - delta1, approaching for
/// target - delta1 <= Acc < target, achieved for Acc >= target.
inline double adapt_weight(double acc_curr, double acc_target, double delta1,
                           double beta_base, const StageGammas& gamma) {
    if (acc_curr >= acc_target) return beta_base * gamma.achieved;
    if (acc_curr >= acc_target - delta1) return beta_base * gamma.approaching;
    return beta_base * gamma.deficit;
}

/// L_total = L_retr + beta_eff * L_sec(D_KL), with D_KL clamped into the
/// transform's domain.
inline double total_loss(double l_retr, double dkl, double beta_eff) {
    return l_retr + beta_eff * security_loss(clamp_dkl(dkl));
}

struct RoundTripResult {
    double acc = 0.0;          // exact symbol-match fraction
    double acc_margin = 0.0;   // |m~ - m| <= 0.5/margin_safety fraction
    double l_retr = 0.0;
    double max_abs_err = 0.0;  // max |m~ - m| over the batch
};

/// One steganography round trip over a batch of fresh uniform messages with
/// common random numbers: the same seed reproduces the same messages, decode
/// noise and channel draws for any S, so finite differences in S are smooth.
inline RoundTripResult roundtrip_eval(double s, const OptConfig& cfg, std::uint64_t seed,
                                      double margin_safety = 1.0) {
    PipelineConfig pl = cfg.pipeline;
    pl.codec = CodecParams::create(pl.codec.q, s, pl.codec.key, pl.codec.shape);

    const std::size_t d = pl.codec.dims();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch);
    const std::uint32_t mask = pl.codec.alphabet() - 1u;
    const Key256 msg_key = derive_key(seed, domain_tag::message);

    // batch of messages, mapped with the shared codec noise stream
    std::vector<SymbolStream> streams(batch);
    NoiseTensor x_T(static_cast<std::uint32_t>(batch), 1, static_cast<std::uint32_t>(d));
    for (std::size_t b = 0; b < batch; ++b) {
        auto& st = streams[b];
        st.symbols.resize(d);
        st.payload_len_bits = d * static_cast<std::size_t>(pl.codec.q);
        for (std::size_t i = 0; i < d; ++i)
            st.symbols[i] = static_cast<std::uint32_t>(
                keyed_word(msg_key, domain_tag::message, b * d + i)) & mask;
        const NoiseTensor one = map_message(st, pl.codec);
        std::copy(one.values.begin(), one.values.end(), x_T.values.begin() + b * d);
    }

    SolverConfig gen = pl.solver;
    gen.direction = Direction::generate;
    gen.validate(pl.schedule);
    NoiseTensor x0 = detail::integrate(pl.model, pl.schedule, x_T, gen.order, false);

    // per-message pixel stage: latent decode/cycle and the optional channel
    NoiseTensor back = x0;
    if (pl.mode == PipelineMode::latent || cfg.channel) {
        const auto pixel_shape = pl.pixel_shape();
        for (std::size_t b = 0; b < batch; ++b) {
            NoiseTensor px(pixel_shape);
            if (pl.mode == PipelineMode::latent) {
                auto vals = pl.autoencoder->decode({x0.values.data() + b * d, d},
                                                   seed * batch + b);
                if (pl.export_quantize_levels >= 2)
                    for (double& v : vals) v = quantize_value(v, pl.export_quantize_levels);
                px.values = std::move(vals);
            } else {
                px.values.assign(x0.values.begin() + b * d, x0.values.begin() + (b + 1) * d);
            }
            if (cfg.channel)
                px = apply_channel(*cfg.channel, px, seed ^ (0x9e3779b9u + b));
            if (pl.mode == PipelineMode::latent) {
                auto z = pl.autoencoder->encode(px.values);
                std::copy(z.begin(), z.end(), back.values.begin() + b * d);
            } else {
                std::copy(px.values.begin(), px.values.end(), back.values.begin() + b * d);
            }
        }
    }

    NoiseTensor x_T_hat = detail::integrate(pl.model, pl.schedule, back, gen.order, true);

    RoundTripResult out;
    const double half = 0.5 / margin_safety;
    NoiseTensor one(pl.codec.shape);
    std::size_t exact = 0, within = 0;
    double l1 = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy(x_T_hat.values.begin() + b * d, x_T_hat.values.begin() + (b + 1) * d,
                  one.values.begin());
        const std::vector<double> cont = demap_continuous(one, pl.codec);
        const SymbolStream hat = demap_noise(one, pl.codec);
        for (std::size_t i = 0; i < d; ++i) {
            const double err = std::abs(cont[i] - static_cast<double>(streams[b].symbols[i]));
            l1 += err;
            if (err > out.max_abs_err) out.max_abs_err = err;
            if (err <= half) ++within;
            if (hat.symbols[i] == streams[b].symbols[i]) ++exact;
        }
    }
    const double total = static_cast<double>(batch * d);
    out.acc = static_cast<double>(exact) / total;
    out.acc_margin = static_cast<double>(within) / total;
    out.l_retr = l1 / total;
    return out;
}

struct OptResult {
    bool feasible = false;
    double s_star = 0.0;
    double validation_acc = 0.0;
    std::vector<OptState> trace;
    std::string diagnostic;
};

/// Algorithm: per iteration run a fresh-batch round trip, compute the
/// analytic KL, set beta_eff by the three-stage rule, and descend the
/// composite loss in log S with a common-random-numbers central finite
/// difference. Afterwards the iterate must pass fresh-batch validation at
/// Acc_target - delta1 (with the configured margin safety) or the search
/// walks S upward; if the cap is hit the run is reported infeasible.
inline OptResult optimize_scale(const OptConfig& cfg) {
    cfg.validate();
    OptResult out;

    double ln_s = std::log(cfg.s0);
    const double ln_s_max = std::log(cfg.s_max);
    const int q = cfg.pipeline.codec.q;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double s = std::exp(ln_s);
        const std::uint64_t iter_seed = cfg.seed * 0x10001ull + static_cast<std::uint64_t>(iter);

        const RoundTripResult rt = roundtrip_eval(s, cfg, iter_seed);
        const double dkl = analytic_kl(s, q);
        const double beta_eff = adapt_weight(rt.acc, cfg.acc_target, cfg.delta1,
                                             cfg.beta_base, cfg.gamma);
        const double l_total = total_loss(rt.l_retr, dkl, beta_eff);
        out.trace.push_back({iter, s, rt.acc, rt.l_retr, dkl, beta_eff, l_total});

        // central finite difference in log S, common random numbers
        const double sp = std::exp(ln_s + cfg.fd_step);
        const double sm = std::exp(ln_s - cfg.fd_step);
        const RoundTripResult rp = roundtrip_eval(sp, cfg, iter_seed);
        const RoundTripResult rm = roundtrip_eval(sm, cfg, iter_seed);
        const double lp = total_loss(rp.l_retr, analytic_kl(sp, q), beta_eff);
        const double lm = total_loss(rm.l_retr, analytic_kl(sm, q), beta_eff);
        const double grad = (lp - lm) / (2.0 * cfg.fd_step);

        ln_s -= cfg.eta * grad;
        if (ln_s > ln_s_max) ln_s = ln_s_max;

        // convergence: relative S change over the trailing window
        if (static_cast<int>(out.trace.size()) > cfg.converge_window) {
            bool settled = true;
            const std::size_t n = out.trace.size();
            for (std::size_t i = n - static_cast<std::size_t>(cfg.converge_window); i < n; ++i) {
                const double a = out.trace[i - 1].s, b = out.trace[i].s;
                if (std::abs(b - a) / a >= cfg.converge_tol) {
                    settled = false;
                    break;
                }
            }
            if (settled && std::abs(std::exp(ln_s) - out.trace.back().s) / out.trace.back().s <
                               cfg.converge_tol)
                break;
        }
    }

    // fresh-batch validation, with upward lifts while it fails
    const double required = cfg.acc_target - cfg.delta1;
    OptConfig vcfg = cfg;
    vcfg.batch = cfg.validation_batch;
    double s_star = std::exp(ln_s);
    const std::uint64_t vseed = cfg.seed ^ 0xfeedbeefcafef00dull;
    int lifts = 0;
    while (true) {
        const RoundTripResult v = roundtrip_eval(s_star, vcfg, vseed, cfg.margin_safety);
        out.validation_acc = std::min(v.acc, v.acc_margin);
        if (out.validation_acc >= required) {
            out.feasible = true;
            out.s_star = s_star;
            if (lifts > 0) {
                std::ostringstream os;
                os << "validation lifted S " << lifts << " time(s) to " << s_star;
                out.diagnostic = os.str();
            }
            return out;
        }
        if (s_star >= cfg.s_max) break;
        s_star = std::min(s_star * 1.15, cfg.s_max);
        ++lifts;
    }
    std::ostringstream os;
    os << "no feasible S: validation accuracy " << out.validation_acc << " < required "
       << required << " at S_max = " << cfg.s_max << " (Q = " << q << ")";
    out.diagnostic = os.str();
    out.s_star = s_star;
    return out;
}

} // namespace stegdiff
