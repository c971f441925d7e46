#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "stegdiff/codec.hpp"
#include "stegdiff/errors.hpp"
#include "stegdiff/tensor.hpp"

namespace stegdiff {

/// Fraction of matching payload bits between the big-endian Q-bit expansions
/// of two symbol streams. Padding bits (beyond payload_len_bits of the
/// original) are excluded.
inline double bit_accuracy(const SymbolStream& orig, const SymbolStream& hat, int q) {
    if (orig.symbols.size() != hat.symbols.size())
        throw validation_error("bit_accuracy: stream length mismatch");
    const std::size_t n_bits = orig.payload_len_bits;
    if (n_bits == 0) return 1.0;
    std::size_t match = 0, seen = 0;
    for (std::size_t i = 0; i < orig.symbols.size() && seen < n_bits; ++i) {
        for (int b = q - 1; b >= 0 && seen < n_bits; --b, ++seen) {
            const std::uint32_t x = (orig.symbols[i] >> b) & 1u;
            const std::uint32_t y = (hat.symbols[i] >> b) & 1u;
            if (x == y) ++match;
        }
    }
    return static_cast<double>(match) / static_cast<double>(n_bits);
}

/// Normalized histogram over [lo, hi] with equal-width bins.
struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<double> mass; // sums to 1

    double bin_width() const { return (hi - lo) / static_cast<double>(mass.size()); }
    double bin_center(std::size_t b) const { return lo + (static_cast<double>(b) + 0.5) * bin_width(); }
};

inline Histogram make_histogram(std::span<const double> values, double lo, double hi, int bins) {
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    if (values.empty()) return h;
    const double width = (hi - lo) / bins;
    for (double v : values) {
        int b = static_cast<int>(std::floor((v - lo) / width));
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        h.mass[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& m : h.mass) m /= static_cast<double>(values.size());
    return h;
}

/// W1 between two histograms on the same grid: integral of |CDF1 - CDF2|.
inline double wasserstein1(const Histogram& a, const Histogram& b) {
    if (a.mass.size() != b.mass.size() || a.lo != b.lo || a.hi != b.hi)
        throw validation_error("wasserstein1: histograms must share a grid");
    double cdf_a = 0.0, cdf_b = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < a.mass.size(); ++i) {
        cdf_a += a.mass[i];
        cdf_b += b.mass[i];
        acc += std::abs(cdf_a - cdf_b);
    }
    return acc * a.bin_width();
}

/// Mean absolute residual field plus its magnitude histogram.
struct ResidualStats {
    std::vector<double> mean_abs; // same shape as one sample
    Histogram histogram;
    std::size_t batch = 0;
};

/// |stego - baseline| and |control - baseline| statistics over a batch, with
/// the two histograms sharing one bin grid for direct overlay.
inline std::pair<ResidualStats, ResidualStats> residual_stats(
    std::span<const NoiseTensor> stego, std::span<const NoiseTensor> baseline,
    std::span<const NoiseTensor> control, int bins = 128) {
    if (stego.size() != baseline.size() || control.size() != baseline.size())
        throw validation_error("residual_stats: batch size mismatch");
    if (stego.empty()) throw validation_error("residual_stats: empty batch");
    const std::size_t d = stego[0].dims();
    for (std::size_t s = 0; s < stego.size(); ++s)
        if (stego[s].dims() != d || baseline[s].dims() != d || control[s].dims() != d)
            throw validation_error("residual_stats: shape mismatch");

    std::vector<double> res_s, res_c;
    res_s.reserve(stego.size() * d);
    res_c.reserve(stego.size() * d);
    ResidualStats rs, rc;
    rs.mean_abs.assign(d, 0.0);
    rc.mean_abs.assign(d, 0.0);
    rs.batch = rc.batch = stego.size();
    double max_r = 0.0;
    for (std::size_t s = 0; s < stego.size(); ++s) {
        for (std::size_t i = 0; i < d; ++i) {
            const double a = std::abs(stego[s].values[i] - baseline[s].values[i]);
            const double b = std::abs(control[s].values[i] - baseline[s].values[i]);
            rs.mean_abs[i] += a;
            rc.mean_abs[i] += b;
            res_s.push_back(a);
            res_c.push_back(b);
            if (a > max_r) max_r = a;
            if (b > max_r) max_r = b;
        }
    }
    for (double& v : rs.mean_abs) v /= static_cast<double>(stego.size());
    for (double& v : rc.mean_abs) v /= static_cast<double>(stego.size());
    if (max_r == 0.0) max_r = 1.0;
    rs.histogram = make_histogram(res_s, 0.0, max_r, bins);
    rc.histogram = make_histogram(res_c, 0.0, max_r, bins);
    return {std::move(rs), std::move(rc)};
}

/// Radially averaged power spectrum of one 2D plane.
struct RadialSpectrum {
    std::vector<double> radii;
    std::vector<double> power;       // mean |X|^2 per annulus
    std::vector<std::size_t> counts; // bins per annulus
    double dc = 0.0;

    double total_power() const {
        double acc = dc;
        for (std::size_t i = 0; i < power.size(); ++i)
            acc += power[i] * static_cast<double>(counts[i]);
        return acc;
    }
};

/// Direct orthonormal DFT (permitted up to 64x64), |X|^2 averaged over
/// integer-radius annuli in wrapped frequency coordinates; the zero-frequency
/// term is reported separately.
inline RadialSpectrum radial_power_spectrum(std::span<const double> plane,
                                            std::size_t h, std::size_t w) {
    if (h * w != plane.size())
        throw validation_error("radial_power_spectrum: plane size mismatch");
    if (h > 64 || w > 64)
        throw validation_error("radial_power_spectrum: plane too large for direct transform");

    const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
    const std::size_t max_r = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>((h / 2) * (h / 2) + (w / 2) * (w / 2)))));
    std::vector<double> acc(max_r + 1, 0.0);
    std::vector<std::size_t> cnt(max_r + 1, 0);

    for (std::size_t ky = 0; ky < h; ++ky) {
        const double fy = static_cast<double>(ky <= h / 2 ? ky : h - ky);
        for (std::size_t kx = 0; kx < w; ++kx) {
            const double fx = static_cast<double>(kx <= w / 2 ? kx : w - kx);
            std::complex<double> X = 0.0;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double phase = -2.0 * M_PI *
                        (static_cast<double>(ky * y) / h + static_cast<double>(kx * x) / w);
                    X += plane[y * w + x] * std::complex<double>(std::cos(phase), std::sin(phase));
                }
            X *= norm;
            const double p = std::norm(X);
            const std::size_t r = static_cast<std::size_t>(std::lround(std::sqrt(fy * fy + fx * fx)));
            if (r <= max_r) {
                acc[r] += p;
                cnt[r] += 1;
            }
        }
    }

    RadialSpectrum out;
    out.dc = acc[0];
    for (std::size_t r = 1; r <= max_r; ++r) {
        if (cnt[r] == 0) continue;
        out.radii.push_back(static_cast<double>(r));
        out.power.push_back(acc[r] / static_cast<double>(cnt[r]));
        out.counts.push_back(cnt[r]);
    }
    return out;
}

} // namespace stegdiff
