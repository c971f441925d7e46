#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "stegdiff/errors.hpp"
#include "stegdiff/prng.hpp"
#include "stegdiff/tensor.hpp"

namespace stegdiff {

/// Var(u) = S^2 (2^Q + 1) / (12 (2^Q - 1)) for the discrete uniform symbol law.
inline double message_variance(double s, int q) {
    if (s < 0.0) throw validation_error("message_variance: S must be >= 0");
    if (q < 1 || q > 16) throw validation_error("message_variance: Q out of [1,16]");
    const double n = std::ldexp(1.0, q); // 2^Q
    return s * s * (n + 1.0) / (12.0 * (n - 1.0));
}

/// sigma = sqrt(1 + Var(u)), the unit-variance normalizer of the mapping.
inline double message_sigma(double s, int q) {
    return std::sqrt(1.0 + message_variance(s, q));
}

/// Shared codec state: capacity Q, scale S, normalizer sigma, noise key and
/// the tensor geometry the symbols fill.
struct CodecParams {
    int q = 1;
    double s = 1.0;
    double sigma = 0.0;
    Key256 key{};
    std::array<std::uint32_t, 3> shape{1, 1, 1};

    std::size_t dims() const {
        return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    }
    std::uint32_t alphabet() const { return 1u << q; }

    static CodecParams create(int q, double s, const Key256& key,
                              const std::array<std::uint32_t, 3>& shape) {
        CodecParams p;
        p.q = q;
        p.s = s;
        p.key = key;
        p.shape = shape;
        p.sigma = message_sigma(s, q);
        p.validate();
        return p;
    }

    /// Rejects out-of-range Q/S and a stored sigma that drifted more than
    /// 1 ulp from its recomputation (catches serialization corruption).
    void validate() const {
        if (q < 1 || q > 16) throw validation_error("CodecParams: Q must be in [1,16]");
        if (!(s > 0.0)) throw validation_error("CodecParams: S must be > 0");
        if (dims() == 0) throw validation_error("CodecParams: empty shape");
        const double expect = message_sigma(s, q);
        const double lo = std::nextafter(expect, -1.0);
        const double hi = std::nextafter(expect, 1e300);
        if (sigma < lo || sigma > hi)
            throw validation_error("CodecParams: stored sigma differs from recomputation by more than 1 ulp");
    }
};

/// Q-bit integers plus the original (pre-padding) bit count.
struct SymbolStream {
    std::vector<std::uint32_t> symbols;
    std::size_t payload_len_bits = 0;
};

/// Largest per-component perturbation of recovered noise that can never
/// change a demapped symbol: S / (2 sigma (2^Q - 1)).
inline double decision_margin(const CodecParams& p) {
    return p.s / (2.0 * p.sigma * (std::ldexp(1.0, p.q) - 1.0));
}

/// Group payload bits big-endian (most significant first) into Q-bit symbols,
/// filling components in row-major order. Missing bits are drawn from a keyed
/// padding stream so that padded symbols stay uniform.
inline SymbolStream pack_message(std::span<const std::uint8_t> bits, int q, std::size_t dims,
                                 const Key256& key) {
    if (q < 1 || q > 16) throw validation_error("pack_message: Q out of [1,16]");
    const std::size_t capacity = dims * static_cast<std::size_t>(q);
    if (bits.size() > capacity)
        throw capacity_error("pack_message: payload of " + std::to_string(bits.size()) +
                             " bits exceeds capacity " + std::to_string(capacity));
    SymbolStream out;
    out.payload_len_bits = bits.size();
    out.symbols.resize(dims);
    std::size_t bit_index = 0;
    for (std::size_t i = 0; i < dims; ++i) {
        std::uint32_t sym = 0;
        for (int b = 0; b < q; ++b) {
            int bit;
            if (bit_index < bits.size()) {
                bit = bits[bit_index] ? 1 : 0;
            } else {
                bit = keyed_bit(key, domain_tag::padding, bit_index);
            }
            sym = (sym << 1) | static_cast<std::uint32_t>(bit);
            ++bit_index;
        }
        out.symbols[i] = sym;
    }
    return out;
}

/// Inverse of pack_message: the first payload_len_bits of the big-endian
/// expansion.
inline std::vector<std::uint8_t> unpack_message(const SymbolStream& stream, int q) {
    if (q < 1 || q > 16) throw validation_error("unpack_message: Q out of [1,16]");
    const std::uint32_t limit = 1u << q;
    if (stream.payload_len_bits > stream.symbols.size() * static_cast<std::size_t>(q))
        throw malformed_stream_error("unpack_message: payload_len_bits exceeds stream capacity");
    std::vector<std::uint8_t> bits;
    bits.reserve(stream.payload_len_bits);
    for (std::size_t i = 0; i < stream.symbols.size() && bits.size() < stream.payload_len_bits; ++i) {
        const std::uint32_t sym = stream.symbols[i];
        if (sym >= limit)
            throw malformed_stream_error("unpack_message: symbol " + std::to_string(sym) +
                                         " does not fit in " + std::to_string(q) + " bits");
        for (int b = q - 1; b >= 0 && bits.size() < stream.payload_len_bits; --b)
            bits.push_back(static_cast<std::uint8_t>((sym >> b) & 1u));
    }
    return bits;
}

/// LUT[m] = S (m/(2^Q-1) - 0.5) / sigma. map_message uses exactly this table,
/// so the LUT path and the direct path are bit-identical by construction.
inline std::vector<double> build_lut(const CodecParams& p) {
    p.validate();
    const std::uint32_t n = p.alphabet();
    const double denom = static_cast<double>(n) - 1.0;
    std::vector<double> lut(n);
    for (std::uint32_t m = 0; m < n; ++m)
        lut[m] = p.s * (static_cast<double>(m) / denom - 0.5) / p.sigma;
    return lut;
}

/// Map symbols to the initial noise tensor with caller-supplied auxiliary
/// noise (test hook). x_i = LUT[m_i] + n_i / sigma.
inline NoiseTensor map_message_with_noise(const SymbolStream& stream, const CodecParams& p,
                                          std::span<const double> noise) {
    if (stream.symbols.size() != p.dims())
        throw validation_error("map_message: stream length != codec dims");
    if (noise.size() != p.dims())
        throw validation_error("map_message: noise length != codec dims");
    const std::uint32_t limit = p.alphabet();
    const std::vector<double> lut = build_lut(p);
    const double inv_sigma = 1.0 / p.sigma;
    NoiseTensor t(p.shape);
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        const std::uint32_t m = stream.symbols[i];
        if (m >= limit)
            throw malformed_stream_error("map_message: symbol out of range");
        t.values[i] = lut[m] + noise[i] * inv_sigma;
    }
    return t;
}

/// Map symbols with the keyed auxiliary noise stream n_i = Phi^-1(u_i),
/// u_i from (key, noise tag, i). Deterministic in (stream, params).
inline NoiseTensor map_message(const SymbolStream& stream, const CodecParams& p) {
    std::vector<double> noise(p.dims());
    for (std::size_t i = 0; i < noise.size(); ++i)
        noise[i] = keyed_gaussian(p.key, domain_tag::noise, i);
    return map_message_with_noise(stream, p, noise);
}

/// Pre-rounding continuous symbol estimates
/// m~_i = ((x_i sigma - n_i)/S + 0.5) (2^Q - 1).
inline std::vector<double> demap_continuous(const NoiseTensor& noise_est, const CodecParams& p) {
    if (noise_est.dims() != p.dims())
        throw validation_error("demap: tensor dims != codec dims");
    const double levels = std::ldexp(1.0, p.q) - 1.0;
    std::vector<double> m(noise_est.values.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double n_i = keyed_gaussian(p.key, domain_tag::noise, i);
        m[i] = ((noise_est.values[i] * p.sigma - n_i) / p.s + 0.5) * levels;
    }
    return m;
}

/// Round the continuous estimate and clamp into symbol range.
inline SymbolStream demap_noise(const NoiseTensor& noise_est, const CodecParams& p) {
    const std::vector<double> cont = demap_continuous(noise_est, p);
    const double levels = std::ldexp(1.0, p.q) - 1.0;
    SymbolStream out;
    out.symbols.resize(cont.size());
    out.payload_len_bits = cont.size() * static_cast<std::size_t>(p.q);
    for (std::size_t i = 0; i < cont.size(); ++i) {
        double r = std::round(cont[i]);
        if (r < 0.0) r = 0.0;
        if (r > levels) r = levels;
        out.symbols[i] = static_cast<std::uint32_t>(r);
    }
    return out;
}

} // namespace stegdiff
