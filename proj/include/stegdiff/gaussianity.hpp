#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stegdiff/codec.hpp"
#include "stegdiff/errors.hpp"

namespace stegdiff {

/// Central moments of the discrete uniform distribution on {0..N-1}, N = 2^Q.
struct MomentSet {
    double n = 0;
    double mu2 = 0, mu4 = 0, mu6 = 0, mu8 = 0, mu10 = 0;
};

/// Closed-form central moments. The even moments up to order eight follow the
/// classical polynomials in N; the tenth is
///   mu10 = (N^2-1)(3N^8 - 52N^6 + 410N^4 - 1636N^2 + 2555) / 33792,
/// which matches direct summation for every N (the commonly quoted variant
/// with denominator 24024 does not).
inline MomentSet uniform_moments(int q) {
    if (q < 1 || q > 16) throw validation_error("uniform_moments: Q out of [1,16]");
    const double n = std::ldexp(1.0, q);
    const double n2 = n * n;
    const double n4 = n2 * n2;
    const double n6 = n4 * n2;
    const double n8 = n4 * n4;
    MomentSet m;
    m.n = n;
    m.mu2 = (n2 - 1.0) / 12.0;
    m.mu4 = (n2 - 1.0) * (3.0 * n2 - 7.0) / 240.0;
    m.mu6 = (n2 - 1.0) * (3.0 * n4 - 18.0 * n2 + 31.0) / 1344.0;
    m.mu8 = (n2 - 1.0) * (5.0 * n6 - 55.0 * n4 + 239.0 * n2 - 381.0) / 11520.0;
    m.mu10 = (n2 - 1.0) * (3.0 * n8 - 52.0 * n6 + 410.0 * n4 - 1636.0 * n2 + 2555.0) / 33792.0;
    return m;
}

/// Even cumulants kappa_4..kappa_10 of the normalized mapped noise x_T.
struct CumulantSet {
    double kappa4 = 0, kappa6 = 0, kappa8 = 0, kappa10 = 0;
};

/// Closed forms in S and N = 2^Q. All four share the denominator base
/// B = 12(N-1) + S^2(N+1). They are equivalent to
///   kappa_r(x_T) = (B_r / r) (N^r - 1) (S/(N-1))^r / sigma^r
/// with Bernoulli numbers B_r, i.e. the exact cumulants of the discrete
/// uniform signal carried through the additivity and scaling rules.
inline CumulantSet cumulants(double s, int q) {
    if (!(s > 0.0)) throw validation_error("cumulants: S must be > 0");
    if (q < 1 || q > 16) throw validation_error("cumulants: Q out of [1,16]");
    const double n = std::ldexp(1.0, q);
    const double b = 12.0 * (n - 1.0) + s * s * (n + 1.0);
    const double s2 = s * s;
    const double s4 = s2 * s2;
    const double nm1 = n - 1.0;

    CumulantSet k;
    k.kappa4 = -6.0 * s4 * (n + 1.0) * (n * n + 1.0) / (5.0 * nm1 * b * b);
    k.kappa6 = 48.0 * s4 * s2 * (std::pow(n, 6) - 1.0) /
               (7.0 * nm1 * nm1 * nm1 * b * b * b);
    k.kappa8 = -432.0 * s4 * s4 * (std::pow(n, 8) - 1.0) /
               (5.0 * std::pow(nm1, 4) * std::pow(b, 4));
    k.kappa10 = 20736.0 * s4 * s4 * s2 * (std::pow(n, 10) - 1.0) /
                (11.0 * std::pow(nm1, 5) * std::pow(b, 5));
    return k;
}

/// Per-term decomposition of the truncated Gram-Charlier KL sum.
struct KlTerms {
    double term4 = 0, term6 = 0, term8 = 0, term10 = 0;
    double total = 0;
    double share_kappa4 = 0;   // term4 / total
    bool small_s_valid = true; // false once kappa8/kappa10 terms exceed kappa4's
};

inline KlTerms analytic_kl_terms(double s, int q) {
    const CumulantSet k = cumulants(s, q);
    KlTerms t;
    t.term4 = 0.5 * k.kappa4 * k.kappa4 / 24.0;
    t.term6 = 0.5 * k.kappa6 * k.kappa6 / 720.0;
    t.term8 = 0.5 * k.kappa8 * k.kappa8 / 40320.0;
    t.term10 = 0.5 * k.kappa10 * k.kappa10 / 3628800.0;
    t.total = t.term4 + t.term6 + t.term8 + t.term10;
    t.share_kappa4 = (t.total > 0.0) ? t.term4 / t.total : 1.0;
    t.small_s_valid = (t.term8 <= t.term4) && (t.term10 <= t.term4);
    return t;
}

/// D_KL(p(x_T) || N(0,1)) ~= 1/2 (k4^2/4! + k6^2/6! + k8^2/8! + k10^2/10!).
inline double analytic_kl(double s, int q) {
    return analytic_kl_terms(s, q).total;
}

/// L_sec = -1/log(D_KL), valid only on (0,1) where the log is negative.
inline double security_loss(double dkl) {
    if (!(dkl > 0.0) || !(dkl < 1.0))
        throw domain_error("security_loss: D_KL must lie in (0,1)");
    return -1.0 / std::log(dkl);
}

/// Clamp used by the optimizer before the transform.
inline double clamp_dkl(double dkl) {
    if (dkl < 1e-300) return 1e-300;
    if (dkl > 1.0 - 1e-12) return 1.0 - 1e-12;
    return dkl;
}

/// Histogram estimate of D_KL(p_hat || N(0,1)).
struct EmpiricalKl {
    double value = 0;
    int bins = 0;
    std::size_t samples = 0;
    bool capped = false;
    std::string bias_note;
};

/// Fixed-width histogram on [-8,8] with add-eps smoothing of the reference
/// bin masses. A degenerate sample set (zero variance) is not absolutely
/// continuous w.r.t. the reference, so the estimate is reported at the cap.
inline EmpiricalKl empirical_kl(std::span<const double> samples, int bins, double cap = 1e6) {
    if (samples.size() < 100000)
        throw validation_error("empirical_kl: need at least 1e5 samples");
    if (bins < 32) throw validation_error("empirical_kl: need at least 32 bins");

    constexpr double lo = -8.0, hi = 8.0;
    constexpr double eps = 1e-12;
    const double width = (hi - lo) / bins;

    EmpiricalKl out;
    out.bins = bins;
    out.samples = samples.size();
    out.bias_note = "histogram estimator: expected sampling bias ~ (bins-1)/(2n); "
                    "binning additionally underestimates the continuous divergence";

    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size());
    if (var < 1e-18) {
        out.value = cap;
        out.capped = true;
        return out;
    }

    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double v : samples) {
        int b = static_cast<int>(std::floor((v - lo) / width));
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        counts[static_cast<std::size_t>(b)] += 1.0;
    }

    const double n = static_cast<double>(samples.size());
    const double inv_sqrt2 = 0.70710678118654752440;
    double kl = 0.0;
    double prev_cdf = 0.5 * std::erfc(-lo * inv_sqrt2);
    for (int b = 0; b < bins; ++b) {
        const double edge = lo + width * (b + 1);
        const double cdf = 0.5 * std::erfc(-edge * inv_sqrt2);
        const double qmass = std::max(cdf - prev_cdf, eps);
        prev_cdf = cdf;
        const double pmass = counts[static_cast<std::size_t>(b)] / n;
        if (pmass > 0.0) kl += pmass * std::log(pmass / qmass);
    }
    out.value = std::min(kl, cap);
    out.capped = (kl >= cap);
    return out;
}

} // namespace stegdiff
