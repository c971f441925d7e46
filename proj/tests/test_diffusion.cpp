#include <catch2/catch.hpp>

#include <cmath>

#include "stegdiff/prng.hpp"
#include "stegdiff/schedule.hpp"
#include "stegdiff/score_model.hpp"
#include "stegdiff/solver.hpp"

using namespace stegdiff;

namespace {

NoiseTensor standard_tensor(std::size_t n, std::uint64_t salt = 0) {
    const Key256 key = derive_key(42 + salt, domain_tag::noise);
    NoiseTensor t(1, 1, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) t.values[i] = keyed_gaussian(key, domain_tag::noise, i);
    return t;
}

double max_abs_diff(const NoiseTensor& a, const NoiseTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

} // namespace

TEST_CASE("schedules satisfy the variance-preserving identities") {
    for (const ScheduleKind kind : {ScheduleKind::linear_beta, ScheduleKind::cosine}) {
        const ScheduleParams sp = make_schedule(kind, 50);
        REQUIRE(sp.points() == 51);
        for (std::size_t i = 0; i < sp.points(); ++i) {
            REQUIRE(sp.alpha[i] * sp.alpha[i] + sp.sigma[i] * sp.sigma[i] ==
                    Approx(1.0).margin(1e-12));
            if (i > 0) {
                REQUIRE(sp.lambda[i] > sp.lambda[i - 1]);   // increasing toward t=0
                REQUIRE(sp.alpha_bar[i] > sp.alpha_bar[i - 1]);
                REQUIRE(sp.sigma[i] < sp.sigma[i - 1]);
                REQUIRE(sp.t_grid[i] < sp.t_grid[i - 1]);
            }
        }
    }
}

TEST_CASE("lambda vanishes where alpha_bar crosses one half") {
    // locate t with alpha_bar = 0.5 by bisection on the continuous schedule
    const ScheduleOptions o;
    double lo = 1e-3, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::exp(detail::log_abar_linear(mid, o)) > 0.5 ? lo : hi) = mid;
    }
    const double t_half = 0.5 * (lo + hi);
    REQUIRE(detail::lambda_of_t(ScheduleKind::linear_beta, t_half, o) ==
            Approx(0.0).margin(1e-9));
}

TEST_CASE("linear-beta terminal alpha_bar falls below 1e-4") {
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 10);
    REQUIRE(sp.alpha_bar.front() < 1e-4); // generation-order front is t = T
}

TEST_CASE("schedule rejects degenerate step counts and unknown kinds") {
    REQUIRE_THROWS_AS(make_schedule(ScheduleKind::linear_beta, 1), validation_error);
    REQUIRE_THROWS_AS(parse_schedule_kind("quartic"), validation_error);
}

TEST_CASE("schedule fingerprints detect any grid change") {
    const auto a = make_schedule(ScheduleKind::linear_beta, 50);
    const auto b = make_schedule(ScheduleKind::linear_beta, 49);
    const auto c = make_schedule(ScheduleKind::cosine, 50);
    REQUIRE(a.fingerprint() == make_schedule(ScheduleKind::linear_beta, 50).fingerprint());
    REQUIRE(a.fingerprint() != b.fingerprint());
    REQUIRE(a.fingerprint() != c.fingerprint());
}

TEST_CASE("eps_eval closed forms") {
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 10);
    const std::size_t i = 4;
    const NoiseTensor x = standard_tensor(32);
    std::vector<double> eps(32);

    SECTION("unit gaussian gives sigma_t * x") {
        const ScoreModel m = ScoreModel::unit_gaussian(32);
        eps_eval(m, x.values, sp.alpha_bar[i], sp.sigma[i], eps);
        for (std::size_t j = 0; j < 32; ++j)
            REQUIRE(eps[j] == Approx(sp.sigma[i] * x.values[j]).margin(1e-15));
    }
    SECTION("gaussian score vanishes at the scaled mean") {
        std::vector<double> mean(32, 0.7);
        const ScoreModel m = ScoreModel::gaussian(32, mean, std::vector<double>(32, 0.0));
        NoiseTensor at_mean(1, 1, 32);
        for (auto& v : at_mean.values) v = std::sqrt(sp.alpha_bar[i]) * 0.7;
        eps_eval(m, at_mean.values, sp.alpha_bar[i], sp.sigma[i], eps);
        for (double e : eps) REQUIRE(e == Approx(0.0).margin(1e-14));
    }
    SECTION("single-mode mixture equals the gaussian model") {
        const ScoreModel g = ScoreModel::gaussian_broadcast(32, 0.4, 0.09);
        const ScoreModel mix = ScoreModel::mixture_broadcast(32, {1.0}, {0.4}, 0.09);
        std::vector<double> eg(32), em(32);
        eps_eval(g, x.values, sp.alpha_bar[i], sp.sigma[i], eg);
        eps_eval(mix, x.values, sp.alpha_bar[i], sp.sigma[i], em);
        for (std::size_t j = 0; j < 32; ++j) REQUIRE(em[j] == Approx(eg[j]).margin(1e-14));
    }
    SECTION("model validation") {
        REQUIRE_THROWS_AS(ScoreModel::mixture_broadcast(8, {0.6, 0.5}, {-1.0, 1.0}, 0.1),
                          validation_error);
        REQUIRE_THROWS_AS(ScoreModel::mixture_broadcast(8, {0.6, -0.4}, {-1.0, 1.0}, 0.1),
                          validation_error);
    }
}

TEST_CASE("unit-gaussian flow is stationary at any step count") {
    const ScoreModel unit = ScoreModel::unit_gaussian(64);
    const NoiseTensor xT = standard_tensor(64);
    for (int steps : {3, 7, 50}) {
        const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, steps);
        const SolverConfig gen{3, steps, Direction::generate};
        const SolverConfig inv{3, steps, Direction::invert};
        REQUIRE(max_abs_diff(generate(unit, sp, xT, gen), xT) < 1e-10);
        REQUIRE(max_abs_diff(invert(unit, sp, xT, inv), xT) < 1e-10);
    }
}

TEST_CASE("gaussian-model generation matches the closed-form affine flow") {
    const ScoreModel g = ScoreModel::gaussian_broadcast(64, 2.0, 0.25);
    const NoiseTensor xT = standard_tensor(64);
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 50);
    const SolverConfig gen{3, 50, Direction::generate};
    const NoiseTensor x0 = generate(g, sp, xT, gen);
    const NoiseTensor ref = gaussian_closed_form(g, sp, xT, Direction::generate);
    // tolerance frozen from first measurement (6.5e-5 at 50 steps, order 3)
    REQUIRE(max_abs_diff(x0, ref) < 2e-4);
}

TEST_CASE("order-3 scheme gains at least the configured order per halving") {
    const ScoreModel g = ScoreModel::gaussian_broadcast(32, 2.0, 0.25);
    const NoiseTensor xT = standard_tensor(32, 5);
    double prev = 0.0;
    std::vector<double> errs;
    for (int steps : {40, 80, 160, 320, 640, 1280}) {
        const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, steps);
        const SolverConfig gen{3, steps, Direction::generate};
        const double err =
            max_abs_diff(generate(g, sp, xT, gen), gaussian_closed_form(g, sp, xT, Direction::generate));
        errs.push_back(err);
        if (prev > 0.0) REQUIRE(prev / err >= std::pow(2.0, 3) * 0.7);
        prev = err;
    }
    // least-squares slope of log2(err) against halving index
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        const double x = static_cast<double>(i), y = std::log2(errs[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double n = static_cast<double>(errs.size());
    const double slope = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    REQUIRE(slope >= 2.1);
}

TEST_CASE("cosine schedule drives the solver to the same closed form") {
    const ScoreModel g = ScoreModel::gaussian_broadcast(32, 1.5, 0.25);
    const NoiseTensor xT = standard_tensor(32, 14);
    const ScheduleParams sp = make_schedule(ScheduleKind::cosine, 64);
    const SolverConfig gen{3, 64, Direction::generate};
    const SolverConfig inv{3, 64, Direction::invert};
    const NoiseTensor x0 = generate(g, sp, xT, gen);
    const NoiseTensor ref = gaussian_closed_form(g, sp, xT, Direction::generate);
    REQUIRE(max_abs_diff(x0, ref) < 2e-4);
    REQUIRE(max_abs_diff(invert(g, sp, x0, inv), xT) < 2e-4);
}

TEST_CASE("lower-order schemes converge at their own rate") {
    const ScoreModel g = ScoreModel::gaussian_broadcast(16, 1.0, 0.25);
    const NoiseTensor xT = standard_tensor(16, 9);
    for (int order : {1, 2}) {
        double prev = 0.0;
        for (int steps : {80, 160, 320}) {
            const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, steps);
            const SolverConfig gen{order, steps, Direction::generate};
            const double err = max_abs_diff(generate(g, sp, xT, gen),
                                            gaussian_closed_form(g, sp, xT, Direction::generate));
            if (prev > 0.0) REQUIRE(prev / err >= std::pow(2.0, order) * 0.7);
            prev = err;
        }
    }
}

TEST_CASE("round-trip inversion error stays within the frozen bound") {
    const ScoreModel g = ScoreModel::gaussian_broadcast(64, 2.0, 0.25);
    const NoiseTensor xT = standard_tensor(64, 3);
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 50);
    const SolverConfig gen{3, 50, Direction::generate};
    const SolverConfig inv{3, 50, Direction::invert};
    const NoiseTensor back = invert(g, sp, generate(g, sp, xT, gen), inv);
    REQUIRE(max_abs_diff(back, xT) < 1e-4);
}

TEST_CASE("solver configuration is validated") {
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 10);
    const ScoreModel unit = ScoreModel::unit_gaussian(8);
    const NoiseTensor x = standard_tensor(8);
    SECTION("steps below order") {
        const ScheduleParams tiny = make_schedule(ScheduleKind::linear_beta, 2);
        REQUIRE_THROWS_AS(generate(unit, tiny, x, SolverConfig{3, 2, Direction::generate}),
                          validation_error);
    }
    SECTION("direction mismatch") {
        REQUIRE_THROWS_AS(generate(unit, sp, x, SolverConfig{3, 10, Direction::invert}),
                          validation_error);
        REQUIRE_THROWS_AS(invert(unit, sp, x, SolverConfig{3, 10, Direction::generate}),
                          validation_error);
    }
    SECTION("steps must match the schedule grid") {
        REQUIRE_THROWS_AS(generate(unit, sp, x, SolverConfig{3, 20, Direction::generate}),
                          validation_error);
    }
}

TEST_CASE("divergence is reported with the step index") {
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 10);
    SECTION("non-finite input is rejected up front") {
        const ScoreModel unit = ScoreModel::unit_gaussian(8);
        NoiseTensor x = standard_tensor(8);
        x.values[3] = std::numeric_limits<double>::infinity();
        REQUIRE_THROWS_AS(generate(unit, sp, x, SolverConfig{3, 10, Direction::generate}),
                          divergence_error);
    }
    SECTION("overflow mid-integration names the failing step") {
        // inversion of the gaussian flow expands by sqrt(V_T/V_0) = 2, which
        // overflows from the largest representable values within a few steps
        const ScoreModel g = ScoreModel::gaussian_broadcast(4, 0.0, 0.25);
        NoiseTensor x(1, 1, 4);
        for (auto& v : x.values) v = 1e308;
        try {
            invert(g, sp, x, SolverConfig{3, 10, Direction::invert});
            FAIL("expected divergence_error");
        } catch (const divergence_error& e) {
            REQUIRE(std::string(e.what()).find("step") != std::string::npos);
            REQUIRE(e.step_index >= 1);
        }
    }
}

TEST_CASE("reference integrator is a usable oracle") {
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 50);
    const NoiseTensor xT = standard_tensor(48, 8);
    SECTION("identity on the unit-gaussian model") {
        const ScoreModel unit = ScoreModel::unit_gaussian(48);
        const NoiseTensor y = reference_integrate(unit, sp, xT, Direction::generate, 500);
        REQUIRE(max_abs_diff(y, xT) < 1e-12);
    }
    SECTION("agrees with the multistep solver on the gaussian model") {
        const ScoreModel g = ScoreModel::gaussian_broadcast(48, 2.0, 0.25);
        const NoiseTensor fine = reference_integrate(g, sp, xT, Direction::generate, 10000);
        const NoiseTensor fast = generate(g, sp, xT, SolverConfig{3, 50, Direction::generate});
        // frozen from first measurement: euler(1e4) ~ 1.8e-4, multistep ~ 6.5e-5
        REQUIRE(max_abs_diff(fine, fast) < 5e-4);
    }
    SECTION("inversion direction agrees with the multistep inverter") {
        const ScoreModel g = ScoreModel::gaussian_broadcast(48, 2.0, 0.25);
        const NoiseTensor x0 = gaussian_closed_form(g, sp, xT, Direction::generate);
        const NoiseTensor fine = reference_integrate(g, sp, x0, Direction::invert, 10000);
        const NoiseTensor fast = invert(g, sp, x0, SolverConfig{3, 50, Direction::invert});
        REQUIRE(max_abs_diff(fine, fast) < 5e-4);
    }
    SECTION("fine-step floor") {
        const ScoreModel unit = ScoreModel::unit_gaussian(48);
        REQUIRE_THROWS_AS(reference_integrate(unit, sp, xT, Direction::generate, 499),
                          validation_error);
    }
}

TEST_CASE("generation and inversion are bit-deterministic") {
    const ScoreModel g = ScoreModel::mixture_broadcast(32, {0.5, 0.5}, {-0.3, 0.3}, 0.07);
    const NoiseTensor xT = standard_tensor(32, 2);
    const ScheduleParams sp = make_schedule(ScheduleKind::linear_beta, 24);
    const SolverConfig gen{3, 24, Direction::generate};
    const NoiseTensor a = generate(g, sp, xT, gen);
    const NoiseTensor b = generate(g, sp, xT, gen);
    REQUIRE(a.values == b.values);
}
