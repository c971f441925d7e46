#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "stegdiff/errors.hpp"

namespace stegdiff {

/// 256-bit shared secret used to seed every keyed stream.
struct Key256 {
    std::array<std::uint64_t, 4> words{};

    friend bool operator==(const Key256&, const Key256&) = default;

    /// Parse from a 64-character hex string (big-endian word order).
    static Key256 from_hex(const std::string& hex) {
        if (hex.size() != 64)
            throw validation_error("key_hex must be exactly 64 hex characters");
        Key256 k;
        for (int w = 0; w < 4; ++w) {
            std::uint64_t v = 0;
            for (int i = 0; i < 16; ++i) {
                char c = hex[static_cast<std::size_t>(w * 16 + i)];
                int d;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
                else throw validation_error("key_hex contains a non-hex character");
                v = (v << 4) | static_cast<std::uint64_t>(d);
            }
            k.words[static_cast<std::size_t>(w)] = v;
        }
        return k;
    }
};

// Domain-separation tags. Each keyed stream mixes one of these so that
// e.g. padding bits and mapping noise never collide.
namespace domain_tag {
inline constexpr std::uint64_t noise    = 0x6e6f6973652d3031ull;
inline constexpr std::uint64_t padding  = 0x7061642d62697473ull;
inline constexpr std::uint64_t control  = 0x636f6e74726f6c2dull;
inline constexpr std::uint64_t channel  = 0x6368616e2d726e67ull;
inline constexpr std::uint64_t decoder  = 0x6465632d6e6f6973ull;
inline constexpr std::uint64_t message  = 0x6d73672d64726177ull;
inline constexpr std::uint64_t basis    = 0x61652d6261736973ull;
} // namespace domain_tag

/// Identifier of the counter-based generator below; recorded in configs so
/// that both parties can check they run the same algorithm.
inline constexpr const char* prng_algorithm_id = "splitmix64-ctr";

/// Identifier of the normal inverse-CDF approximation (Wichura's AS 241,
/// routine PPND16). Absolute error is below 1e-15 over the full open
/// interval, well inside the 1e-9 contract.
inline constexpr const char* icdf_version_id = "as241";

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

} // namespace detail

/// Stateless keyed word: value i of the stream (key, tag).
inline std::uint64_t keyed_word(const Key256& key, std::uint64_t tag, std::uint64_t counter) {
    using detail::mix64;
    std::uint64_t h = mix64(key.words[0] ^ tag ^ 0x243f6a8885a308d3ull);
    h = mix64(h ^ key.words[1] ^ (counter * 0x9e3779b97f4a7c15ull));
    h = mix64(h ^ key.words[2] ^ ((counter << 32) | (counter >> 32)));
    h = mix64(h ^ key.words[3]);
    return h;
}

/// Uniform draw in the open interval (0,1) with 53-bit resolution.
inline double keyed_uniform(const Key256& key, std::uint64_t tag, std::uint64_t counter) {
    const std::uint64_t w = keyed_word(key, tag, counter);
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

inline int keyed_bit(const Key256& key, std::uint64_t tag, std::uint64_t counter) {
    return static_cast<int>(keyed_word(key, tag, counter) & 1u);
}

/// Derive an unrelated sub-key (used for e.g. per-seed channel draws).
inline Key256 derive_key(std::uint64_t seed, std::uint64_t tag) {
    using detail::mix64;
    Key256 k;
    std::uint64_t z = seed ^ tag;
    for (auto& w : k.words) {
        z += 0x9e3779b97f4a7c15ull;
        w = mix64(z);
    }
    return k;
}

/// Inverse of the standard normal CDF (AS 241 / PPND16).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw domain_error("inverse_normal_cdf: p must lie in (0,1)");

    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                  + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
              + 1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                  + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
              + 4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }

    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                  + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
              + 4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                  + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
              + 2.05319162663775882187e0) * r + 1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                  + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
              + 5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                  + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
              + 5.99832206555887937690e-1) * r + 1.0);
        x = num / den;
    }
    return (q < 0.0) ? -x : x;
}

/// Standard normal draw n_i for the stream (key, tag).
inline double keyed_gaussian(const Key256& key, std::uint64_t tag, std::uint64_t counter) {
    return inverse_normal_cdf(keyed_uniform(key, tag, counter));
}

} // namespace stegdiff
