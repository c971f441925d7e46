#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stegdiff/errors.hpp"
#include "stegdiff/prng.hpp"
#include "stegdiff/tensor.hpp"

namespace stegdiff {

// Pixel domain is fixed to [-1, 1]; salt-and-pepper extremes and the
// quantizer are defined over it.
inline constexpr double pixel_min = -1.0;
inline constexpr double pixel_max = 1.0;

/// Uniform re-quantization of [-1,1] to `levels` values.
inline double quantize_value(double x, long levels) {
    const double t = std::clamp(x, pixel_min, pixel_max);
    const double n = static_cast<double>(levels - 1);
    return std::round((t - pixel_min) / (pixel_max - pixel_min) * n) / n *
               (pixel_max - pixel_min) + pixel_min;
}

/// Linear autoencoder with orthonormal encoder rows; the decoder is the
/// transpose plus seeded Gaussian noise. Stands in for the VAE of the
/// latent pipeline.
///
/// The optional encoder shrinkage models the manifold-regularizing role of a
/// trained encoder: the energy of the input that falls outside the decoder
/// range (which for a clean decode is exactly zero) is read as a pixel-noise
/// estimate, and the latent projection is shrunk by the matching linear-MMSE
/// factor prior_std^2 / (prior_std^2 + rho_hat^2). On-range inputs are
/// untouched (the factor is exactly 1), so encode(decode(z)) == z still holds
/// whenever rho = 0 and no quantization is applied.
struct ToyAutoencoder {
    enum class Basis { dense_orthonormal, patch2x2 };

    Basis basis = Basis::patch2x2;
    std::array<std::uint32_t, 3> pixel_shape{1, 1, 1};
    std::size_t latent_dim = 0;
    double rho = 0.0;            // decoder noise std
    bool clamp_decode = false;

    bool shrinkage = false;      // encoder regularization on/off
    double prior_std = 1.0;      // tau
    double noise_cap_std = 0.0;  // saturation of the noise estimate

    std::vector<double> w;       // dense basis: latent_dim x D, row major
    Key256 decode_key{};         // seeds the decoder noise stream

    std::size_t pixel_dim() const {
        return static_cast<std::size_t>(pixel_shape[0]) * pixel_shape[1] * pixel_shape[2];
    }

    void validate() const {
        if (latent_dim == 0 || latent_dim > pixel_dim())
            throw validation_error("ToyAutoencoder: latent_dim must be in [1, D]");
        if (rho < 0.0) throw validation_error("ToyAutoencoder: rho must be >= 0");
        if (basis == Basis::patch2x2) {
            if (pixel_shape[1] % 2 != 0 || pixel_shape[2] % 2 != 0)
                throw validation_error("ToyAutoencoder: patch basis needs even height/width");
            if (latent_dim != pixel_dim() / 4)
                throw validation_error("ToyAutoencoder: patch basis fixes latent_dim = D/4");
        } else {
            if (w.size() != latent_dim * pixel_dim())
                throw validation_error("ToyAutoencoder: dense basis matrix has wrong size");
        }
    }

    /// Dense variant: orthonormal rows from modified Gram-Schmidt over a
    /// keyed Gaussian matrix.
    static ToyAutoencoder dense(const std::array<std::uint32_t, 3>& shape, std::size_t k,
                                std::uint64_t seed) {
        ToyAutoencoder ae;
        ae.basis = Basis::dense_orthonormal;
        ae.pixel_shape = shape;
        ae.latent_dim = k;
        const std::size_t d = ae.pixel_dim();
        if (k == 0 || k > d) throw validation_error("ToyAutoencoder: latent_dim must be in [1, D]");
        const Key256 key = derive_key(seed, domain_tag::basis);
        ae.decode_key = derive_key(seed ^ 0x5a5a5a5a5a5a5a5aull, domain_tag::decoder);
        ae.w.resize(k * d);
        for (std::size_t i = 0; i < ae.w.size(); ++i)
            ae.w[i] = keyed_gaussian(key, domain_tag::basis, i);
        // modified Gram-Schmidt on rows
        for (std::size_t r = 0; r < k; ++r) {
            double* row = ae.w.data() + r * d;
            for (std::size_t p = 0; p < r; ++p) {
                const double* prev = ae.w.data() + p * d;
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += row[i] * prev[i];
                for (std::size_t i = 0; i < d; ++i) row[i] -= dot * prev[i];
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < d; ++i) norm += row[i] * row[i];
            norm = std::sqrt(norm);
            if (norm < 1e-12) throw validation_error("ToyAutoencoder: rank collapse in basis");
            for (std::size_t i = 0; i < d; ++i) row[i] /= norm;
        }
        ae.validate();
        return ae;
    }

    /// Patch variant: one latent per 2x2 pixel block per channel, pattern
    /// [1,1,1,1]/2 (average-pool encoder, nearest-neighbour upsample decoder).
    /// Local support keeps latent structure visible in pixel space, the way a
    /// convolutional decoder does.
    static ToyAutoencoder patch(const std::array<std::uint32_t, 3>& shape, std::uint64_t seed) {
        ToyAutoencoder ae;
        ae.basis = Basis::patch2x2;
        ae.pixel_shape = shape;
        ae.latent_dim = (static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]) / 4;
        ae.decode_key = derive_key(seed ^ 0x5a5a5a5a5a5a5a5aull, domain_tag::decoder);
        ae.validate();
        return ae;
    }

    /// Projection Wx without shrinkage.
    void project(std::span<const double> x, std::span<double> z) const {
        const std::size_t d = pixel_dim();
        if (basis == Basis::dense_orthonormal) {
            for (std::size_t r = 0; r < latent_dim; ++r) {
                const double* row = w.data() + r * d;
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += row[i] * x[i];
                z[r] = acc;
            }
        } else {
            const std::size_t ch = pixel_shape[0], hh = pixel_shape[1], ww = pixel_shape[2];
            const std::size_t hb = hh / 2, wb = ww / 2;
            std::size_t r = 0;
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t by = 0; by < hb; ++by)
                    for (std::size_t bx = 0; bx < wb; ++bx, ++r) {
                        const std::size_t base = c * hh * ww + (2 * by) * ww + 2 * bx;
                        z[r] = 0.5 * (x[base] + x[base + 1] + x[base + ww] + x[base + ww + 1]);
                    }
        }
    }

    /// Transpose map W^T z.
    void lift(std::span<const double> z, std::span<double> x) const {
        const std::size_t d = pixel_dim();
        if (basis == Basis::dense_orthonormal) {
            std::fill(x.begin(), x.end(), 0.0);
            for (std::size_t r = 0; r < latent_dim; ++r) {
                const double* row = w.data() + r * d;
                const double zr = z[r];
                for (std::size_t i = 0; i < d; ++i) x[i] += row[i] * zr;
            }
        } else {
            const std::size_t ch = pixel_shape[0], hh = pixel_shape[1], ww = pixel_shape[2];
            const std::size_t hb = hh / 2, wb = ww / 2;
            std::size_t r = 0;
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t by = 0; by < hb; ++by)
                    for (std::size_t bx = 0; bx < wb; ++bx, ++r) {
                        const std::size_t base = c * hh * ww + (2 * by) * ww + 2 * bx;
                        const double v = 0.5 * z[r];
                        x[base] = v;
                        x[base + 1] = v;
                        x[base + ww] = v;
                        x[base + ww + 1] = v;
                    }
        }
    }

    std::vector<double> encode(std::span<const double> x) const {
        if (x.size() != pixel_dim())
            throw validation_error("ae_encode: pixel dims mismatch");
        std::vector<double> z(latent_dim);
        project(x, z);
        if (shrinkage && latent_dim < pixel_dim()) {
            // off-range residual energy -> pixel noise estimate
            std::vector<double> back(pixel_dim());
            lift(z, back);
            double resid = 0.0;
            for (std::size_t i = 0; i < back.size(); ++i) {
                const double e = x[i] - back[i];
                resid += e * e;
            }
            double rho_hat2 = resid / static_cast<double>(pixel_dim() - latent_dim);
            const double cap2 = noise_cap_std * noise_cap_std;
            if (cap2 > 0.0 && rho_hat2 > cap2) rho_hat2 = cap2;
            const double tau2 = prior_std * prior_std;
            const double g = tau2 / (tau2 + rho_hat2);
            for (double& v : z) v *= g;
        }
        return z;
    }

    std::vector<double> decode(std::span<const double> z, std::uint64_t noise_seq = 0) const {
        if (z.size() != latent_dim)
            throw validation_error("ae_decode: latent dims mismatch");
        std::vector<double> x(pixel_dim());
        lift(z, x);
        if (rho > 0.0) {
            const std::uint64_t base = noise_seq * pixel_dim();
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] += rho * keyed_gaussian(decode_key, domain_tag::decoder, base + i);
        }
        if (clamp_decode)
            for (double& v : x) v = std::clamp(v, pixel_min, pixel_max);
        return x;
    }
};

/// || z ||_2 / sqrt(k): distance of a latent from the prior center.
inline double manifold_distance(std::span<const double> z) {
    double acc = 0.0;
    for (double v : z) {
        if (!std::isfinite(v)) throw validation_error("manifold_distance: non-finite latent");
        acc += v * v;
    }
    return std::sqrt(acc) / std::sqrt(static_cast<double>(z.size()));
}

/// Tagged description of one channel distortion.
struct ChannelSpec {
    enum class Kind { awgn, salt_pepper, gaussian_blur, quantize, dct_compress, autoencoder_cycle };

    Kind kind = Kind::awgn;
    double sigma = 0.0;        // awgn
    double rate = 0.0;         // salt_pepper
    int kernel_size = 1;       // gaussian_blur
    double kernel_sigma = 1.0; // gaussian_blur
    long levels = 256;         // quantize
    int block = 8;             // dct_compress
    int quality = 90;          // dct_compress
    const ToyAutoencoder* ae = nullptr; // autoencoder_cycle
    bool with_quantize = false;         // autoencoder_cycle: 8-bit pixel stage

    void validate() const {
        switch (kind) {
        case Kind::awgn:
            if (sigma < 0.0) throw validation_error("awgn: sigma must be >= 0");
            break;
        case Kind::salt_pepper:
            if (rate < 0.0 || rate > 1.0) throw validation_error("salt_pepper: rate in [0,1]");
            break;
        case Kind::gaussian_blur:
            if (kernel_size < 1 || kernel_size % 2 == 0)
                throw validation_error("gaussian_blur: kernel_size must be odd and >= 1");
            if (kernel_sigma <= 0.0) throw validation_error("gaussian_blur: kernel_sigma > 0");
            break;
        case Kind::quantize:
            if (levels < 2) throw validation_error("quantize: levels must be >= 2");
            break;
        case Kind::dct_compress:
            if (block != 4 && block != 8) throw validation_error("dct_compress: block in {4,8}");
            if (quality < 1 || quality > 100) throw validation_error("dct_compress: quality in [1,100]");
            break;
        case Kind::autoencoder_cycle:
            if (!ae) throw validation_error("autoencoder_cycle: missing autoencoder");
            break;
        }
    }

    /// Parse "kind:key=value,key=value" (e.g. "awgn:sigma=0.01").
    static ChannelSpec parse(const std::string& text);
    std::string to_string() const;
};

namespace detail {

inline void blur_plane(std::vector<double>& plane, std::size_t h, std::size_t w,
                       int ksize, double ksigma) {
    const int half = ksize / 2;
    std::vector<double> kernel(static_cast<std::size_t>(ksize));
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (ksigma * ksigma));
        kernel[static_cast<std::size_t>(i + half)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    auto reflect = [](long i, long n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return static_cast<std::size_t>(i);
    };

    std::vector<double> tmp(plane.size());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                acc += kernel[static_cast<std::size_t>(i + half)] *
                       plane[y * w + reflect(static_cast<long>(x) + i, static_cast<long>(w))];
            tmp[y * w + x] = acc;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                acc += kernel[static_cast<std::size_t>(i + half)] *
                       tmp[reflect(static_cast<long>(y) + i, static_cast<long>(h)) * w + x];
            plane[y * w + x] = acc;
        }
}

// Standard JPEG luminance quantization table.
inline constexpr int jpeg_luma_table[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

inline double quality_scale(int quality) {
    return quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
}

/// Quantization step for coefficient (u,v) in the [-1,1] pixel domain.
/// JPEG tables are calibrated for the 0..255 range; 2/255 rescales them.
inline double dct_step(int u, int v, int block, int quality) {
    const int tu = u * (8 / block), tv = v * (8 / block);
    const double scale = quality_scale(quality);
    double tab = std::floor((jpeg_luma_table[tu * 8 + tv] * scale + 50.0) / 100.0);
    if (tab < 1.0) tab = 1.0;
    if (tab > 255.0) tab = 255.0;
    return tab * (2.0 / 255.0);
}

inline void dct_compress_plane(std::vector<double>& plane, std::size_t h, std::size_t w,
                               int block, int quality) {
    const std::size_t b = static_cast<std::size_t>(block);
    // orthonormal DCT-II basis, b x b
    std::vector<double> basis(b * b);
    for (std::size_t k = 0; k < b; ++k) {
        const double norm = (k == 0) ? std::sqrt(1.0 / b) : std::sqrt(2.0 / b);
        for (std::size_t i = 0; i < b; ++i)
            basis[k * b + i] = norm * std::cos(M_PI * (i + 0.5) * k / b);
    }
    auto reflect = [](std::size_t i, std::size_t n) {
        return i < n ? i : 2 * n - 1 - i;
    };
    const std::size_t hb = (h + b - 1) / b, wb = (w + b - 1) / b;
    std::vector<double> cell(b * b), coef(b * b);
    for (std::size_t by = 0; by < hb; ++by)
        for (std::size_t bx = 0; bx < wb; ++bx) {
            for (std::size_t y = 0; y < b; ++y)
                for (std::size_t x = 0; x < b; ++x)
                    cell[y * b + x] = plane[reflect(by * b + y, h) * w + reflect(bx * b + x, w)];
            // forward, quantize, inverse
            for (std::size_t u = 0; u < b; ++u)
                for (std::size_t v = 0; v < b; ++v) {
                    double acc = 0.0;
                    for (std::size_t y = 0; y < b; ++y)
                        for (std::size_t x = 0; x < b; ++x)
                            acc += basis[u * b + y] * basis[v * b + x] * cell[y * b + x];
                    const double step = dct_step(static_cast<int>(u), static_cast<int>(v),
                                                 block, quality);
                    coef[u * b + v] = std::round(acc / step) * step;
                }
            for (std::size_t y = 0; y < b; ++y)
                for (std::size_t x = 0; x < b; ++x) {
                    if (by * b + y >= h || bx * b + x >= w) continue;
                    double acc = 0.0;
                    for (std::size_t u = 0; u < b; ++u)
                        for (std::size_t v = 0; v < b; ++v)
                            acc += basis[u * b + y] * basis[v * b + x] * coef[u * b + v];
                    plane[(by * b + y) * w + (bx * b + x)] = acc;
                }
        }
}

} // namespace detail

/// Apply one channel distortion. All stochastic channels draw from a keyed
/// stream derived from `seed`, so results are reproducible and independent
/// of evaluation order.
inline NoiseTensor apply_channel(const ChannelSpec& spec, const NoiseTensor& x,
                                 std::uint64_t seed) {
    spec.validate();
    if (!x.all_finite()) throw validation_error("apply_channel: non-finite input");
    NoiseTensor out = x;
    const Key256 key = derive_key(seed, domain_tag::channel);

    switch (spec.kind) {
    case ChannelSpec::Kind::awgn: {
        if (spec.sigma == 0.0) return out;
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += spec.sigma * keyed_gaussian(key, domain_tag::channel, i);
        return out;
    }
    case ChannelSpec::Kind::salt_pepper: {
        if (spec.rate == 0.0) return out;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            if (keyed_uniform(key, domain_tag::channel, 2 * i) < spec.rate)
                out.values[i] = keyed_bit(key, domain_tag::channel, 2 * i + 1) ? pixel_max
                                                                               : pixel_min;
        }
        return out;
    }
    case ChannelSpec::Kind::gaussian_blur: {
        if (spec.kernel_size == 1) return out;
        const std::size_t h = x.shape[1], w = x.shape[2];
        if (h < static_cast<std::size_t>(spec.kernel_size) ||
            w < static_cast<std::size_t>(spec.kernel_size))
            throw validation_error("gaussian_blur: plane smaller than kernel");
        std::vector<double> plane(h * w);
        for (std::uint32_t c = 0; c < x.shape[0]; ++c) {
            std::copy_n(out.values.begin() + c * h * w, h * w, plane.begin());
            detail::blur_plane(plane, h, w, spec.kernel_size, spec.kernel_sigma);
            std::copy_n(plane.begin(), h * w, out.values.begin() + c * h * w);
        }
        return out;
    }
    case ChannelSpec::Kind::quantize: {
        for (double& v : out.values) v = quantize_value(v, spec.levels);
        return out;
    }
    case ChannelSpec::Kind::dct_compress: {
        const std::size_t h = x.shape[1], w = x.shape[2];
        if (h < static_cast<std::size_t>(spec.block) || w < static_cast<std::size_t>(spec.block))
            throw validation_error("dct_compress: plane smaller than block");
        std::vector<double> plane(h * w);
        for (std::uint32_t c = 0; c < x.shape[0]; ++c) {
            std::copy_n(out.values.begin() + c * h * w, h * w, plane.begin());
            detail::dct_compress_plane(plane, h, w, spec.block, spec.quality);
            std::copy_n(plane.begin(), h * w, out.values.begin() + c * h * w);
        }
        return out;
    }
    case ChannelSpec::Kind::autoencoder_cycle: {
        const auto z = spec.ae->encode(out.values);
        auto px = spec.ae->decode(z, seed);
        if (spec.with_quantize)
            for (double& v : px) v = quantize_value(v, 256);
        out.values = std::move(px);
        return out;
    }
    }
    throw validation_error("apply_channel: unknown channel kind");
}

inline ChannelSpec ChannelSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind_s = text.substr(0, colon);
    ChannelSpec spec;
    if (kind_s == "awgn") spec.kind = Kind::awgn;
    else if (kind_s == "salt_pepper" || kind_s == "sp") spec.kind = Kind::salt_pepper;
    else if (kind_s == "gaussian_blur" || kind_s == "blur") spec.kind = Kind::gaussian_blur;
    else if (kind_s == "quantize") spec.kind = Kind::quantize;
    else if (kind_s == "dct_compress" || kind_s == "dct") spec.kind = Kind::dct_compress;
    else throw validation_error("unknown channel kind: " + kind_s);

    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw validation_error("channel spec parameter needs key=value: " + item);
            const std::string k = item.substr(0, eq);
            const double v = std::stod(item.substr(eq + 1));
            if (k == "sigma") spec.sigma = v;
            else if (k == "rate") spec.rate = v;
            else if (k == "kernel_size") spec.kernel_size = static_cast<int>(v);
            else if (k == "kernel_sigma") spec.kernel_sigma = v;
            else if (k == "levels") spec.levels = static_cast<long>(v);
            else if (k == "block") spec.block = static_cast<int>(v);
            else if (k == "quality") spec.quality = static_cast<int>(v);
            else throw validation_error("unknown channel parameter: " + k);
        }
    }
    spec.validate();
    return spec;
}

inline std::string ChannelSpec::to_string() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::awgn: os << "awgn:sigma=" << sigma; break;
    case Kind::salt_pepper: os << "salt_pepper:rate=" << rate; break;
    case Kind::gaussian_blur:
        os << "gaussian_blur:kernel_size=" << kernel_size << ",kernel_sigma=" << kernel_sigma;
        break;
    case Kind::quantize: os << "quantize:levels=" << levels; break;
    case Kind::dct_compress: os << "dct_compress:block=" << block << ",quality=" << quality; break;
    case Kind::autoencoder_cycle: os << "autoencoder_cycle"; break;
    }
    return os.str();
}

} // namespace stegdiff
