#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stegdiff/errors.hpp"
#include "stegdiff/tensor.hpp"

namespace stegdiff {

enum class ScheduleKind { linear_beta, cosine };

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::linear_beta;
    if (s == "cosine") return ScheduleKind::cosine;
    throw validation_error("unknown schedule kind: " + s);
}

struct ScheduleOptions {
    double beta_min = 1e-4;
    double beta_max = 0.02;
    double base_steps = 1000.0;  // DDPM training horizon the betas refer to
    double t_min = 1e-3;         // generation endpoint (t=0 is singular in lambda)
    double cosine_s = 0.008;
    double alpha_bar_min = 1e-5; // cosine schedule: clip of the t=T endpoint
};

/// Discretized variance-preserving schedule on a grid uniform in the
/// half-log-SNR lambda = log(alpha_t / sigma_t). Tables are stored in
/// generation order (t = T down to t = t_min, lambda increasing), and every
/// entry satisfies alpha^2 + sigma^2 = 1 because alpha_bar is reconstructed
/// from lambda.
struct ScheduleParams {
    ScheduleKind kind = ScheduleKind::linear_beta;
    int t_steps = 0; // number of solver intervals; tables have t_steps+1 points
    ScheduleOptions options;
    std::vector<double> t_grid;
    std::vector<double> lambda;
    std::vector<double> alpha_bar;
    std::vector<double> alpha;
    std::vector<double> sigma;

    std::size_t points() const { return lambda.size(); }

    std::uint64_t fingerprint() const {
        std::uint64_t h = fnv1a(&kind, sizeof kind);
        h = fnv1a(&t_steps, sizeof t_steps, h);
        h = fnv1a(lambda.data(), lambda.size() * sizeof(double), h);
        h = fnv1a(alpha_bar.data(), alpha_bar.size() * sizeof(double), h);
        return h;
    }
};

namespace detail {

// log alpha_bar(t) for the continuous-time linear-beta schedule:
// the limit of the discrete cumulative product with beta ramping linearly.
inline double log_abar_linear(double t, const ScheduleOptions& o) {
    return -(o.beta_min * t + 0.5 * (o.beta_max - o.beta_min) * t * t) * o.base_steps;
}

inline double log_abar_cosine(double t, const ScheduleOptions& o) {
    const double c0 = std::cos(0.5 * M_PI * o.cosine_s / (1.0 + o.cosine_s));
    const double c = std::cos(0.5 * M_PI * (t + o.cosine_s) / (1.0 + o.cosine_s));
    return 2.0 * (std::log(std::abs(c)) - std::log(c0));
}

inline double lambda_of_log_abar(double la) {
    // lambda = 0.5 (log abar - log(1 - abar)), stable for abar near 1
    const double one_minus = -std::expm1(la);
    return 0.5 * (la - std::log(one_minus));
}

inline double lambda_of_t(ScheduleKind kind, double t, const ScheduleOptions& o) {
    const double la = (kind == ScheduleKind::linear_beta) ? log_abar_linear(t, o)
                                                          : log_abar_cosine(t, o);
    return lambda_of_log_abar(la);
}

// Inverse map lambda -> t, closed-form per schedule kind.
inline double t_of_lambda(ScheduleKind kind, double lam, const ScheduleOptions& o) {
    // alpha_bar = sigmoid(2 lambda); work with log alpha_bar directly
    const double la = -std::log1p(std::exp(-2.0 * lam)); // log sigmoid(2 lam)
    if (kind == ScheduleKind::linear_beta) {
        const double a = 0.5 * (o.beta_max - o.beta_min) * o.base_steps;
        const double b = o.beta_min * o.base_steps;
        const double disc = b * b - 4.0 * a * la;
        return (-b + std::sqrt(disc)) / (2.0 * a);
    }
    const double c0 = std::cos(0.5 * M_PI * o.cosine_s / (1.0 + o.cosine_s));
    const double c = std::exp(0.5 * la) * c0;
    return (2.0 * (1.0 + o.cosine_s) / M_PI) * std::acos(std::min(1.0, c)) - o.cosine_s;
}

} // namespace detail

inline ScheduleParams make_schedule(ScheduleKind kind, int t_steps,
                                    const ScheduleOptions& options = {}) {
    if (t_steps < 2) throw validation_error("make_schedule: T_steps must be >= 2");
    ScheduleParams sp;
    sp.kind = kind;
    sp.t_steps = t_steps;
    sp.options = options;

    double t_start = 1.0;
    if (kind == ScheduleKind::cosine) {
        // place the t=T endpoint where alpha_bar hits its clip floor
        const double la = std::log(options.alpha_bar_min);
        const double c0 = std::cos(0.5 * M_PI * options.cosine_s / (1.0 + options.cosine_s));
        const double c = std::exp(0.5 * la) * c0;
        t_start = (2.0 * (1.0 + options.cosine_s) / M_PI) * std::acos(c) - options.cosine_s;
    }
    const double lam_start = detail::lambda_of_t(kind, t_start, options);
    const double lam_end = detail::lambda_of_t(kind, options.t_min, options);
    if (!(lam_end > lam_start))
        throw validation_error("make_schedule: degenerate lambda range");

    const std::size_t n = static_cast<std::size_t>(t_steps) + 1;
    sp.lambda.resize(n);
    sp.t_grid.resize(n);
    sp.alpha_bar.resize(n);
    sp.alpha.resize(n);
    sp.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / t_steps;
        const double lam = lam_start + frac * (lam_end - lam_start);
        sp.lambda[i] = lam;
        sp.t_grid[i] = detail::t_of_lambda(kind, lam, options);
        const double abar = 1.0 / (1.0 + std::exp(-2.0 * lam));
        sp.alpha_bar[i] = abar;
        sp.alpha[i] = std::sqrt(abar);
        sp.sigma[i] = std::sqrt(1.0 - abar);
    }
    return sp;
}

} // namespace stegdiff
