#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stegdiff/channels.hpp"
#include "stegdiff/codec.hpp"
#include "stegdiff/errors.hpp"
#include "stegdiff/solver.hpp"

namespace stegdiff {

enum class PipelineMode { pixel, latent };

/// Everything needed for one hide/extract system. In latent mode the codec
/// and model live in the autoencoder's latent space and the emitted sample
/// is the decoded pixel tensor.
struct PipelineConfig {
    PipelineMode mode = PipelineMode::pixel;
    CodecParams codec;
    ScheduleParams schedule;
    ScoreModel model;
    SolverConfig solver;
    std::optional<ToyAutoencoder> autoencoder;
    long export_quantize_levels = 0; // 0 = off
    std::uint64_t decode_noise_seq = 0;

    std::array<std::uint32_t, 3> pixel_shape() const {
        return mode == PipelineMode::latent ? autoencoder->pixel_shape : codec.shape;
    }

    void validate() const {
        codec.validate();
        model.validate();
        if (mode == PipelineMode::latent) {
            if (!autoencoder)
                throw validation_error("PipelineConfig: latent mode requires an autoencoder");
            autoencoder->validate();
            if (codec.dims() != autoencoder->latent_dim)
                throw validation_error("PipelineConfig: codec dims must equal latent_dim");
        }
        if (model.dims != codec.dims())
            throw validation_error("PipelineConfig: model dims must equal codec dims");
        if (export_quantize_levels != 0 && export_quantize_levels < 2)
            throw validation_error("PipelineConfig: export_quantize_levels must be 0 or >= 2");
        SolverConfig gen = solver;
        gen.direction = Direction::generate;
        gen.validate(schedule);
    }

    /// Hash of the public codec geometry (never the key or the scale).
    std::uint64_t codec_public_hash() const {
        std::uint64_t h = fnv1a(&codec.q, sizeof codec.q);
        h = fnv1a(codec.shape.data(), sizeof codec.shape, h);
        const int m = static_cast<int>(mode);
        h = fnv1a(&m, sizeof m, h);
        return h;
    }
};

/// Stego sample plus the public manifest stored in the tensor header.
struct StegoSample {
    NoiseTensor pixels;
    std::string manifest;
};

namespace manifest_detail {

inline std::string build(const PipelineConfig& cfg, std::size_t payload_len_bits) {
    std::ostringstream os;
    os << "v=1;mode=" << (cfg.mode == PipelineMode::pixel ? "pixel" : "latent")
       << ";schedule_fp=" << hex64(cfg.schedule.fingerprint())
       << ";codec_hash=" << hex64(cfg.codec_public_hash())
       << ";payload_len_bits=" << payload_len_bits
       << ";export_quantize=" << cfg.export_quantize_levels;
    return os.str();
}

inline std::map<std::string, std::string> parse(const std::string& manifest) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(manifest);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw io_error("malformed manifest entry: " + item);
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}

} // namespace manifest_detail

/// Embed a payload: pack -> map -> generate (-> decode in latent mode)
/// -> optional export quantization. An empty payload still embeds keyed
/// padding symbols, so the output is a deterministic cover generation.
inline StegoSample hide(std::span<const std::uint8_t> payload_bits, const PipelineConfig& cfg) {
    cfg.validate();
    const SymbolStream stream =
        pack_message(payload_bits, cfg.codec.q, cfg.codec.dims(), cfg.codec.key);
    const NoiseTensor x_T = map_message(stream, cfg.codec);

    SolverConfig gen = cfg.solver;
    gen.direction = Direction::generate;
    NoiseTensor sample = generate(cfg.model, cfg.schedule, x_T, gen);

    if (cfg.mode == PipelineMode::latent) {
        auto px = cfg.autoencoder->decode(sample.values, cfg.decode_noise_seq);
        sample = NoiseTensor(cfg.autoencoder->pixel_shape);
        sample.values = std::move(px);
    }
    if (cfg.export_quantize_levels >= 2)
        for (double& v : sample.values) v = quantize_value(v, cfg.export_quantize_levels);

    return {std::move(sample), manifest_detail::build(cfg, payload_bits.size())};
}

/// Recover the payload from a stego sample. The manifest's schedule
/// fingerprint and codec hash must match the receiver's configuration.
inline std::vector<std::uint8_t> extract(const NoiseTensor& stego, const std::string& manifest,
                                         const PipelineConfig& cfg) {
    cfg.validate();
    const auto kv = manifest_detail::parse(manifest);
    const auto fp = hex64(cfg.schedule.fingerprint());
    if (auto it = kv.find("schedule_fp"); it != kv.end() && it->second != fp)
        throw mismatch_error("schedule fingerprint mismatch: stego carries " + it->second +
                             ", receiver has " + fp);
    if (auto it = kv.find("codec_hash"); it != kv.end() && it->second != hex64(cfg.codec_public_hash()))
        throw mismatch_error("codec configuration mismatch (Q/shape/mode differ)");
    std::size_t payload_len_bits = cfg.codec.dims() * static_cast<std::size_t>(cfg.codec.q);
    if (auto it = kv.find("payload_len_bits"); it != kv.end())
        payload_len_bits = static_cast<std::size_t>(std::stoull(it->second));

    NoiseTensor state = stego;
    if (cfg.mode == PipelineMode::latent) {
        if (stego.dims() != cfg.autoencoder->pixel_dim())
            throw validation_error("extract: stego dims do not match the autoencoder");
        auto z = cfg.autoencoder->encode(stego.values);
        state = NoiseTensor(cfg.codec.shape);
        state.values = std::move(z);
    } else if (stego.dims() != cfg.codec.dims()) {
        throw validation_error("extract: stego dims do not match the codec");
    }

    SolverConfig inv = cfg.solver;
    inv.direction = Direction::invert;
    const NoiseTensor x_T_hat = invert(cfg.model, cfg.schedule, state, inv);

    SymbolStream hat = demap_noise(x_T_hat, cfg.codec);
    hat.payload_len_bits = payload_len_bits;
    return unpack_message(hat, cfg.codec.q);
}

} // namespace stegdiff
