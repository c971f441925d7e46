#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stegdiff/errors.hpp"

namespace stegdiff {

/// Closed-form noise predictor standing in for a trained denoiser. The score
/// of the forward marginal p_t is available analytically for Gaussian and
/// Gaussian-mixture data, and eps(x,t) = -sigma_t * score.
struct ScoreModel {
    enum class Kind { unit_gaussian, gaussian, gaussian_mixture };

    Kind kind = Kind::unit_gaussian;
    std::size_t dims = 0;

    // gaussian: per-component mean / diagonal variance
    std::vector<double> mean;
    std::vector<double> var;

    // gaussian_mixture: per-component means per mode, shared scalar variance
    std::vector<double> weights;
    std::vector<std::vector<double>> mixture_means;
    double mixture_var = 0.0;

    static ScoreModel unit_gaussian(std::size_t dims) {
        ScoreModel m;
        m.kind = Kind::unit_gaussian;
        m.dims = dims;
        return m;
    }

    static ScoreModel gaussian(std::size_t dims, std::vector<double> mean,
                               std::vector<double> var) {
        ScoreModel m;
        m.kind = Kind::gaussian;
        m.dims = dims;
        m.mean = std::move(mean);
        m.var = std::move(var);
        m.validate();
        return m;
    }

    static ScoreModel gaussian_broadcast(std::size_t dims, double mean, double var) {
        return gaussian(dims, std::vector<double>(dims, mean), std::vector<double>(dims, var));
    }

    static ScoreModel mixture(std::size_t dims, std::vector<double> weights,
                              std::vector<std::vector<double>> means, double shared_var) {
        ScoreModel m;
        m.kind = Kind::gaussian_mixture;
        m.dims = dims;
        m.weights = std::move(weights);
        m.mixture_means = std::move(means);
        m.mixture_var = shared_var;
        m.validate();
        return m;
    }

    /// Scalar means broadcast across all components.
    static ScoreModel mixture_broadcast(std::size_t dims, std::vector<double> weights,
                                        const std::vector<double>& mean_scalars,
                                        double shared_var) {
        std::vector<std::vector<double>> means;
        means.reserve(mean_scalars.size());
        for (double s : mean_scalars) means.emplace_back(dims, s);
        return mixture(dims, std::move(weights), std::move(means), shared_var);
    }

    void validate() const {
        if (dims == 0) throw validation_error("ScoreModel: dims must be > 0");
        if (kind == Kind::gaussian) {
            if (mean.size() != dims || var.size() != dims)
                throw validation_error("ScoreModel: mean/var size != dims");
            for (double v : var)
                if (v < 0.0) throw validation_error("ScoreModel: negative variance");
        } else if (kind == Kind::gaussian_mixture) {
            if (weights.empty() || weights.size() != mixture_means.size())
                throw validation_error("ScoreModel: weights/means count mismatch");
            if (weights.size() > 16)
                throw validation_error("ScoreModel: at most 16 mixture modes supported");
            double sum = 0.0;
            for (double w : weights) {
                if (!(w > 0.0)) throw validation_error("ScoreModel: weights must be positive");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw validation_error("ScoreModel: weights must sum to 1 within 1e-12");
            for (const auto& mu : mixture_means)
                if (mu.size() != dims)
                    throw validation_error("ScoreModel: mixture mean size != dims");
            if (mixture_var < 0.0) throw validation_error("ScoreModel: negative variance");
        }
    }
};

/// eps(x, t) for the forward marginal at (alpha_bar, sigma_t).
/// gaussian:  p_t = N(sqrt(abar) mu, abar v + sigma^2) per component,
///            eps = sigma (x - sqrt(abar) mu) / (abar v + sigma^2).
/// mixture:   responsibility-weighted combination of per-mode terms,
///            computed per component (components are treated i.i.d.).
inline void eps_eval(const ScoreModel& model, std::span<const double> x,
                     double alpha_bar, double sigma_t, std::span<double> out) {
    if (x.size() != out.size())
        throw validation_error("eps_eval: output size mismatch");
    if (model.dims == 0 || x.size() % model.dims != 0)
        throw validation_error("eps_eval: input is not a whole number of model blocks");

    const double sqrt_abar = std::sqrt(alpha_bar);
    switch (model.kind) {
    case ScoreModel::Kind::unit_gaussian:
        // p_t = N(0, abar + sigma^2) = N(0,1): eps = sigma_t * x
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigma_t * x[i];
        return;
    case ScoreModel::Kind::gaussian: {
        const std::size_t d = model.dims;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t j = i % d;
            const double v_t = alpha_bar * model.var[j] + sigma_t * sigma_t;
            out[i] = sigma_t * (x[i] - sqrt_abar * model.mean[j]) / v_t;
        }
        return;
    }
    case ScoreModel::Kind::gaussian_mixture: {
        const std::size_t d = model.dims;
        const std::size_t kmodes = model.weights.size();
        const double v_t = alpha_bar * model.mixture_var + sigma_t * sigma_t;
        const double inv_vt = 1.0 / v_t;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t j = i % d;
            // log responsibilities, stabilized by the max exponent
            double best = -1e300;
            double expo[16];
            const std::size_t km = kmodes > 16 ? 16 : kmodes;
            for (std::size_t k = 0; k < km; ++k) {
                const double diff = x[i] - sqrt_abar * model.mixture_means[k][j];
                expo[k] = -0.5 * diff * diff * inv_vt + std::log(model.weights[k]);
                if (expo[k] > best) best = expo[k];
            }
            double norm = 0.0, acc = 0.0;
            for (std::size_t k = 0; k < km; ++k) {
                const double r = std::exp(expo[k] - best);
                norm += r;
                acc += r * (x[i] - sqrt_abar * model.mixture_means[k][j]);
            }
            out[i] = sigma_t * (acc / norm) * inv_vt;
        }
        return;
    }
    }
    throw validation_error("eps_eval: unknown model kind");
}

} // namespace stegdiff
