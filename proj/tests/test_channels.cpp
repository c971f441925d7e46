#include <catch2/catch.hpp>

#include <cmath>

#include "stegdiff/channels.hpp"
#include "stegdiff/prng.hpp"

using namespace stegdiff;

namespace {

NoiseTensor pixel_field(std::uint32_t c, std::uint32_t h, std::uint32_t w, double scale = 0.3,
                        std::uint64_t salt = 0) {
    const Key256 key = derive_key(1234 + salt, domain_tag::noise);
    NoiseTensor t(c, h, w);
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        const double v = scale * keyed_gaussian(key, domain_tag::noise, i);
        t.values[i] = std::clamp(v, -0.95, 0.95); // keep inside the pixel domain
    }
    return t;
}

double max_abs_diff(const NoiseTensor& a, const NoiseTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

} // namespace

TEST_CASE("identity-parameter channels are the identity map") {
    const NoiseTensor x = pixel_field(3, 16, 16);
    SECTION("awgn sigma = 0, bitwise") {
        ChannelSpec s;
        s.kind = ChannelSpec::Kind::awgn;
        s.sigma = 0.0;
        REQUIRE(apply_channel(s, x, 5).values == x.values);
    }
    SECTION("salt and pepper rate = 0, bitwise") {
        ChannelSpec s;
        s.kind = ChannelSpec::Kind::salt_pepper;
        s.rate = 0.0;
        REQUIRE(apply_channel(s, x, 5).values == x.values);
    }
    SECTION("1x1 blur kernel") {
        ChannelSpec s;
        s.kind = ChannelSpec::Kind::gaussian_blur;
        s.kernel_size = 1;
        REQUIRE(max_abs_diff(apply_channel(s, x, 5), x) < 1e-10);
    }
    SECTION("quantize with effectively continuous levels") {
        ChannelSpec s;
        s.kind = ChannelSpec::Kind::quantize;
        s.levels = 1L << 40;
        REQUIRE(max_abs_diff(apply_channel(s, x, 5), x) < 1e-10);
    }
    SECTION("autoencoder cycle at rho = 0, full rank, no quantize") {
        const auto ae = ToyAutoencoder::dense({1, 4, 4}, 16, 99);
        const NoiseTensor y = pixel_field(1, 4, 4);
        ChannelSpec s;
        s.kind = ChannelSpec::Kind::autoencoder_cycle;
        s.ae = &ae;
        REQUIRE(max_abs_diff(apply_channel(s, y, 5), y) < 1e-10);
    }
}

TEST_CASE("awgn adds seeded noise of the requested strength") {
    const NoiseTensor x = pixel_field(3, 32, 32, 0.0);
    ChannelSpec s;
    s.kind = ChannelSpec::Kind::awgn;
    s.sigma = 0.05;
    const NoiseTensor a = apply_channel(s, x, 17);
    REQUIRE(apply_channel(s, x, 17).values == a.values);     // same seed, same draw
    REQUIRE(apply_channel(s, x, 18).values != a.values);     // fresh seed, fresh draw
    double var = 0.0;
    for (double v : a.values) var += v * v;
    var /= static_cast<double>(a.values.size());
    REQUIRE(std::sqrt(var) == Approx(0.05).epsilon(0.05));
}

TEST_CASE("salt and pepper alters the expected fraction at the extremes") {
    const NoiseTensor x = pixel_field(1, 1000, 1000, 0.1);
    ChannelSpec s;
    s.kind = ChannelSpec::Kind::salt_pepper;
    s.rate = 0.01;
    const NoiseTensor a = apply_channel(s, x, 3);
    std::size_t altered = 0, extremes = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] != x.values[i]) ++altered;
        if (a.values[i] == pixel_min || a.values[i] == pixel_max) ++extremes;
    }
    const double frac = static_cast<double>(altered) / static_cast<double>(a.values.size());
    REQUIRE(frac >= 0.0097);
    REQUIRE(frac <= 0.0103);
    REQUIRE(extremes >= altered); // every altered pixel sits at an extreme
}

TEST_CASE("gaussian blur preserves constant planes and smooths") {
    NoiseTensor c(1, 8, 8);
    for (auto& v : c.values) v = 0.37;
    ChannelSpec s;
    s.kind = ChannelSpec::Kind::gaussian_blur;
    s.kernel_size = 5;
    s.kernel_sigma = 1.2;
    REQUIRE(max_abs_diff(apply_channel(s, c, 1), c) < 1e-12);

    const NoiseTensor noisy = pixel_field(1, 16, 16, 0.5);
    const NoiseTensor blurred = apply_channel(s, noisy, 1);
    double v0 = 0, v1 = 0;
    for (std::size_t i = 0; i < noisy.values.size(); ++i) {
        v0 += noisy.values[i] * noisy.values[i];
        v1 += blurred.values[i] * blurred.values[i];
    }
    REQUIRE(v1 < 0.5 * v0); // strong energy reduction on white noise

    SECTION("plane must fit the kernel") {
        const NoiseTensor tiny = pixel_field(1, 4, 4);
        ChannelSpec big;
        big.kind = ChannelSpec::Kind::gaussian_blur;
        big.kernel_size = 7;
        REQUIRE_THROWS_AS(apply_channel(big, tiny, 1), validation_error);
    }
}

TEST_CASE("quantizer maps onto the uniform lattice") {
    ChannelSpec s;
    s.kind = ChannelSpec::Kind::quantize;
    s.levels = 256;
    const NoiseTensor x = pixel_field(1, 16, 16, 0.4);
    const NoiseTensor qx = apply_channel(s, x, 1);
    const double step = 2.0 / 255.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        REQUIRE(std::abs(qx.values[i] - x.values[i]) <= 0.5 * step + 1e-12);
        const double lattice = (qx.values[i] + 1.0) / step;
        REQUIRE(std::abs(lattice - std::round(lattice)) < 1e-9);
    }
    // out-of-domain values clamp onto the lattice ends
    NoiseTensor far(1, 1, 2);
    far.values = {3.0, -3.0};
    const NoiseTensor qf = apply_channel(s, far, 1);
    REQUIRE(qf.values[0] == 1.0);
    REQUIRE(qf.values[1] == -1.0);
}

TEST_CASE("dct compression is gentle at quality 100 and lossy at quality 50") {
    // smooth field: low-frequency energy only
    NoiseTensor smooth(1, 16, 16);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            smooth.values[y * 16 + x] =
                0.4 * std::sin(2.0 * M_PI * y / 16.0) * std::cos(2.0 * M_PI * x / 16.0);
    ChannelSpec best;
    best.kind = ChannelSpec::Kind::dct_compress;
    best.block = 8;
    best.quality = 100;
    const double unit_step = 2.0 / 255.0; // unit quantization table in the [-1,1] domain
    REQUIRE(max_abs_diff(apply_channel(best, smooth, 1), smooth) <= unit_step);

    ChannelSpec mid = best;
    mid.quality = 50;
    const double err50 = max_abs_diff(apply_channel(mid, smooth, 1), smooth);
    REQUIRE(err50 > max_abs_diff(apply_channel(best, smooth, 1), smooth));

    SECTION("4x4 blocks work too") {
        ChannelSpec four = best;
        four.block = 4;
        REQUIRE_NOTHROW(apply_channel(four, smooth, 1));
    }
    SECTION("invalid parameters") {
        ChannelSpec bad = best;
        bad.block = 5;
        REQUIRE_THROWS_AS(apply_channel(bad, smooth, 1), validation_error);
        bad = best;
        bad.quality = 0;
        REQUIRE_THROWS_AS(apply_channel(bad, smooth, 1), validation_error);
    }
}

TEST_CASE("channel spec parsing") {
    const ChannelSpec a = ChannelSpec::parse("awgn:sigma=0.01");
    REQUIRE(a.kind == ChannelSpec::Kind::awgn);
    REQUIRE(a.sigma == 0.01);
    const ChannelSpec b = ChannelSpec::parse("blur:kernel_size=5,kernel_sigma=1.5");
    REQUIRE(b.kernel_size == 5);
    REQUIRE(b.kernel_sigma == 1.5);
    const ChannelSpec d = ChannelSpec::parse("dct:block=8,quality=70");
    REQUIRE(d.quality == 70);
    REQUIRE_THROWS_AS(ChannelSpec::parse("rotate:deg=5"), validation_error);
    REQUIRE_THROWS_AS(ChannelSpec::parse("awgn:badkey=1"), validation_error);
}

TEST_CASE("toy autoencoder bases are orthonormal") {
    SECTION("dense rows") {
        const auto ae = ToyAutoencoder::dense({3, 8, 8}, 48, 7);
        const std::size_t d = ae.pixel_dim();
        for (std::size_t r = 0; r < ae.latent_dim; ++r)
            for (std::size_t p = r; p < ae.latent_dim; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    dot += ae.w[r * d + i] * ae.w[p * d + i];
                REQUIRE(dot == Approx(r == p ? 1.0 : 0.0).margin(1e-10));
            }
    }
    SECTION("patch basis via the cycle identity on lifted latents") {
        auto ae = ToyAutoencoder::patch({3, 16, 16}, 7);
        REQUIRE(ae.latent_dim == 192);
        std::vector<double> z(ae.latent_dim);
        const Key256 key = derive_key(5, domain_tag::noise);
        for (std::size_t i = 0; i < z.size(); ++i)
            z[i] = keyed_gaussian(key, domain_tag::noise, i);
        const auto x = ae.decode(z);
        const auto z2 = ae.encode(x);
        for (std::size_t i = 0; i < z.size(); ++i)
            REQUIRE(z2[i] == Approx(z[i]).margin(1e-12));
    }
}

TEST_CASE("autoencoder encode/decode contracts") {
    auto ae = ToyAutoencoder::dense({1, 4, 4}, 4, 21);
    SECTION("x in the row space is fixed by the cycle") {
        std::vector<double> z = {0.3, -1.2, 0.5, 2.0};
        const auto x = ae.decode(z);
        const auto back = ae.decode(ae.encode(x));
        for (std::size_t i = 0; i < x.size(); ++i)
            REQUIRE(back[i] == Approx(x[i]).margin(1e-10));
    }
    SECTION("x orthogonal to the row space encodes to zero") {
        const NoiseTensor raw = pixel_field(1, 4, 4, 1.0, 3);
        auto z = ae.encode(raw.values);
        std::vector<double> lifted(16);
        ae.lift(z, lifted);
        std::vector<double> ortho(16);
        for (std::size_t i = 0; i < 16; ++i) ortho[i] = raw.values[i] - lifted[i];
        const auto z0 = ae.encode(ortho);
        for (double v : z0) REQUIRE(v == Approx(0.0).margin(1e-10));
    }
    SECTION("full-rank dense autoencoder reconstructs anything") {
        const auto full = ToyAutoencoder::dense({1, 4, 4}, 16, 11);
        const NoiseTensor raw = pixel_field(1, 4, 4, 1.0, 4);
        const auto back = full.decode(full.encode(raw.values));
        for (std::size_t i = 0; i < raw.values.size(); ++i)
            REQUIRE(back[i] == Approx(raw.values[i]).margin(1e-10));
    }
    SECTION("decoder noise has the configured strength") {
        auto noisy = ToyAutoencoder::dense({1, 10, 10}, 25, 31);
        noisy.rho = 0.05;
        std::vector<double> z(25, 0.0);
        double acc = 0.0;
        std::size_t count = 0;
        for (std::uint64_t trial = 0; trial < 1000; ++trial) {
            const auto x = noisy.decode(z, trial);
            for (double v : x) {
                acc += v * v;
                ++count;
            }
        }
        REQUIRE(std::sqrt(acc / static_cast<double>(count)) == Approx(0.05).epsilon(0.02));
    }
    SECTION("shape validation") {
        std::vector<double> wrong(9, 0.0);
        REQUIRE_THROWS_AS(ae.encode(wrong), validation_error);
        REQUIRE_THROWS_AS(ae.decode(wrong), validation_error);
    }
}

TEST_CASE("encoder shrinkage activates only off the decoder range") {
    auto ae = ToyAutoencoder::patch({1, 8, 8}, 13);
    ae.shrinkage = true;
    ae.prior_std = 0.3;
    ae.noise_cap_std = 0.1;
    std::vector<double> z(ae.latent_dim);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 0.2 * static_cast<double>(i % 5) - 0.4;
    SECTION("clean decode is a fixed point") {
        const auto x = ae.decode(z);
        const auto z2 = ae.encode(x);
        for (std::size_t i = 0; i < z.size(); ++i)
            REQUIRE(z2[i] == Approx(z[i]).margin(1e-12));
    }
    SECTION("off-range noise shrinks the projection") {
        auto x = ae.decode(z);
        const Key256 key = derive_key(77, domain_tag::channel);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += 0.05 * keyed_gaussian(key, domain_tag::channel, i);
        const auto z2 = ae.encode(x);
        double norm_ratio = 0.0;
        double na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            na += z2[i] * z2[i];
            nb += z[i] * z[i];
        }
        norm_ratio = std::sqrt(na / nb);
        const double expect = (0.3 * 0.3) / (0.3 * 0.3 + 0.05 * 0.05);
        REQUIRE(norm_ratio == Approx(expect).epsilon(0.15));
    }
}

TEST_CASE("manifold distance") {
    SECTION("zero latent") {
        std::vector<double> z(16, 0.0);
        REQUIRE(manifold_distance(z) == 0.0);
    }
    SECTION("2 * unit vector at k = 4") {
        std::vector<double> z = {2.0, 0.0, 0.0, 0.0};
        REQUIRE(manifold_distance(z) == Approx(1.0).margin(1e-15));
    }
    SECTION("standard normal latents concentrate near 1") {
        const Key256 key = derive_key(3, domain_tag::noise);
        double acc = 0.0;
        const int trials = 200;
        for (int t = 0; t < trials; ++t) {
            std::vector<double> z(256);
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] = keyed_gaussian(key, domain_tag::noise,
                                      static_cast<std::uint64_t>(t) * 256 + i);
            acc += manifold_distance(z);
        }
        REQUIRE(acc / trials == Approx(1.0).epsilon(0.01));
    }
}
