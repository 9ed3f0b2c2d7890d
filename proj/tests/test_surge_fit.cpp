#include "scalefit/error.hpp"
#include "scalefit/noise_scale.hpp"
#include "scalefit/surge_fit.hpp"
#include "scalefit/synth_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace scalefit;

namespace {

constexpr double kJitter[] = {1.03, 0.97, 1.05, 0.98, 1.01, 0.96, 1.04, 0.99, 1.02, 0.95, 1.06};
constexpr double kSigma[] = {1, 2, 1, 3, 2, 0, 1, 2, 4, 1, 2};

// Same data as tests/oracle/fit_oracles.py.
std::vector<SurgePoint> jittered() {
    std::vector<SurgePoint> pts;
    for (int i = 0; i < 11; ++i) {
        const double b = std::exp2(16 + i);
        pts.push_back({b, eval_surge(0.01, std::exp2(20.0), b) * kJitter[i], 1e-4 * kSigma[i]});
    }
    return pts;
}

std::vector<SurgePoint> noiseless(double eta_c, double b_c) {
    std::vector<SurgePoint> pts;
    for (int e = 16; e <= 26; ++e) pts.push_back({std::exp2(e), eval_surge(eta_c, b_c, std::exp2(e)), 0.0});
    return pts;
}

void expect_rel(double got, double want, double tol) { EXPECT_NEAR(got, want, std::abs(want) * tol) << want; }

}  // namespace

TEST(EvalSurge, Examples) {
    EXPECT_DOUBLE_EQ(eval_surge(0.01, std::exp2(20.0), std::exp2(20.0)), 0.005);
    EXPECT_NEAR(eval_surge(0.01, std::exp2(20.0), std::exp2(24.0)), 0.01 / 4.25, 1e-17);
    EXPECT_NEAR(eval_surge(0.01, std::exp2(20.0), std::exp2(24.0)), 2.35294e-3, 1e-8);
    EXPECT_DOUBLE_EQ(eval_surge(0.01, std::exp2(20.0), std::exp2(16.0)), eval_surge(0.01, std::exp2(20.0), std::exp2(24.0)));
    EXPECT_THROW(eval_surge(0.0, 1.0, 1.0), DataError);
    EXPECT_THROW(eval_surge(0.01, -1.0, 1.0), DataError);
    EXPECT_THROW(eval_surge(0.01, 1.0, 0.0), DataError);
}

TEST(EvalSurge, MonotoneOnEachSide) {
    const double bc = std::exp2(20.0);
    double prev = 0.0;
    for (double e = 10.0; e <= 20.0; e += 0.25) {
        const double v = eval_surge(0.01, bc, std::exp2(e));
        EXPECT_GT(v, prev);
        prev = v;
    }
    for (double e = 20.25; e <= 30.0; e += 0.25) {
        const double v = eval_surge(0.01, bc, std::exp2(e));
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(EffectiveSigmas, Policies) {
    const std::vector<double> s{0.0, 2.0, 4.0};
    EXPECT_EQ(effective_sigmas(s, FitVariant::no_error), (std::vector<double>{1.0, 1.0, 1.0}));
    EXPECT_EQ(effective_sigmas(s, FitVariant::eps_floor), (std::vector<double>{1e-15, 2.0, 4.0}));
    EXPECT_EQ(effective_sigmas(s, FitVariant::mean_sigma), (std::vector<double>{3.0, 2.0, 4.0}));
    const std::vector<double> zeros{0.0, 0.0};
    EXPECT_EQ(effective_sigmas(zeros, FitVariant::mean_sigma), (std::vector<double>{1.0, 1.0}));
    const std::vector<double> negative{-1.0};
    EXPECT_THROW(effective_sigmas(negative, FitVariant::no_error), DataError);
}

TEST(EffectiveSigmas, VariantNames) {
    EXPECT_EQ(parse_variant("eps"), FitVariant::eps_floor);
    EXPECT_EQ(parse_variant("eps_floor"), FitVariant::eps_floor);
    EXPECT_EQ(parse_variant("no-error"), FitVariant::no_error);
    EXPECT_EQ(parse_variant("mean-sigma"), FitVariant::mean_sigma);
    EXPECT_EQ(to_string(FitVariant::mean_sigma), "mean_sigma");
    EXPECT_THROW(parse_variant("median"), DataError);
}

TEST(FitSurge, NoiselessRecovery) {
    for (FitVariant v : kAllVariants) {
        for (double bc : {std::exp2(20.0), 3.0e5, std::exp2(17.5)}) {
            const auto pts = noiseless(0.01, bc);
            const auto fit = fit_surge(pts, v);
            EXPECT_TRUE(fit.diagnostics.converged);
            expect_rel(fit.eta_crit, 0.01, 1e-6);
            expect_rel(fit.b_crit, bc, 1e-6);
            EXPECT_EQ(fit.variant, v);
            EXPECT_EQ(fit.diagnostics.n_points, 11);
        }
    }
}

TEST(FitSurge, LogResidualsRecover) {
    SurgeFitOptions options;
    options.log_residuals = true;
    const auto pts = noiseless(0.02, 3.0e6);
    const auto fit = fit_surge(pts, FitVariant::no_error, options);
    expect_rel(fit.eta_crit, 0.02, 1e-9);
    expect_rel(fit.b_crit, 3.0e6, 1e-9);
}

TEST(FitSurge, MatchesScipyNoError) {
    const auto pts = jittered();
    const auto fit = fit_surge(pts, FitVariant::no_error);
    EXPECT_TRUE(fit.diagnostics.converged);
    expect_rel(fit.eta_crit, 0.010014878682356789, 1e-7);
    expect_rel(fit.b_crit, 1038516.5154491119, 1e-7);
    expect_rel(fit.sigma_eta_crit, 0.00010732654499918914, 1e-6);
    expect_rel(fit.sigma_b_crit, 40635.83770803515, 1e-6);
}

TEST(FitSurge, MatchesScipyMeanSigma) {
    const auto pts = jittered();
    const auto fit = fit_surge(pts, FitVariant::mean_sigma);
    EXPECT_TRUE(fit.diagnostics.converged);
    expect_rel(fit.eta_crit, 0.010189345149454148, 1e-7);
    expect_rel(fit.b_crit, 1015497.4895533039, 1e-7);
    expect_rel(fit.sigma_eta_crit, 0.000109038847382522, 1e-6);
    expect_rel(fit.sigma_b_crit, 35384.25693568945, 1e-6);
}

// One point carries sigma 1e-15 and is fitted essentially exactly; the
// remaining freedom lives on a curved one-dimensional valley.
TEST(FitSurge, MatchesScipyEpsFloor) {
    const auto pts = jittered();
    const auto fit = fit_surge(pts, FitVariant::eps_floor);
    EXPECT_TRUE(fit.diagnostics.converged);
    expect_rel(fit.eta_crit, 0.00979381727554047, 1e-5);
    expect_rel(fit.b_crit, 937740.5048835598, 1e-5);
    expect_rel(fit.sigma_eta_crit, 9.88475204152158e-05, 1e-4);
    expect_rel(fit.sigma_b_crit, 49548.68915727676, 1e-4);
    EXPECT_NEAR(fit.diagnostics.residual_norm * fit.diagnostics.residual_norm, 19.5619907215, 1e-5);
}

TEST(FitSurge, UniformSigmasLeaveCentralValuesAlone) {
    auto pts = jittered();
    for (auto& p : pts) p.sigma = 0.0;
    const auto plain = fit_surge(pts, FitVariant::no_error);
    const auto eps = fit_surge(pts, FitVariant::eps_floor);
    expect_rel(eps.eta_crit, plain.eta_crit, 1e-9);
    expect_rel(eps.b_crit, plain.b_crit, 1e-9);
    // Relative-sigma scaling: a common sigma cancels in the covariance too.
    expect_rel(eps.sigma_b_crit, plain.sigma_b_crit, 1e-6);

    auto scaled = jittered();
    for (auto& p : scaled) p.sigma *= 7.0;
    const auto a = fit_surge(jittered(), FitVariant::mean_sigma);
    const auto b = fit_surge(scaled, FitVariant::mean_sigma);
    expect_rel(b.eta_crit, a.eta_crit, 1e-9);
    expect_rel(b.b_crit, a.b_crit, 1e-9);
    expect_rel(b.sigma_b_crit, a.sigma_b_crit, 1e-6);
}

TEST(FitSurge, NoisyMedianWithinFactorTwo) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> recovered;
    for (int seed = 0; seed < 20; ++seed) {
        auto pts = noiseless(0.01, std::exp2(20.0));
        for (auto& p : pts) p.eta_star *= std::exp2(0.25 * z(rng));
        recovered.push_back(fit_surge(pts, FitVariant::no_error).b_crit);
    }
    std::nth_element(recovered.begin(), recovered.begin() + 10, recovered.end());
    const double median = recovered[10];
    EXPECT_GT(median, std::exp2(19.0));
    EXPECT_LT(median, std::exp2(21.0));
}

TEST(FitSurge, Preconditions) {
    const std::vector<SurgePoint> two{{1.0, 1.0, 0.0}, {2.0, 1.0, 0.0}};
    EXPECT_THROW(fit_surge(two, FitVariant::no_error), DataError);
    const std::vector<SurgePoint> repeated{{1.0, 1.0, 0.0}, {2.0, 1.0, 0.0}, {2.0, 1.5, 0.0}};
    EXPECT_THROW(fit_surge(repeated, FitVariant::no_error), DataError);
}

TEST(FitAllBudgets, EightBudgetsThreeVariants) {
    const auto spec = OracleSpec::reference();
    OptimumTable table;
    for (int lt = 30; lt <= 37; ++lt) {
        const double t = std::exp2(lt);
        for (int lb = 16; lb <= 26; lb += 2) {
            OptimumCell cell;
            cell.log2_eta_star_mean = std::log2(ground_truth_eta_star(spec, t, std::exp2(lb)));
            cell.n_contributing = 1;
            table.entries.emplace(std::pair{std::int64_t{1} << lb, std::int64_t{1} << lt}, cell);
        }
    }
    const auto set = fit_all_budgets(table);
    ASSERT_EQ(set.fits.size(), 8u);
    std::size_t total = 0;
    for (const auto& [t, fits] : set.fits) {
        total += fits.size();
        ASSERT_EQ(fits.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(fits[i].variant, kAllVariants[i]);
        const double truth = eval_powerlaw(spec.b_crit_law, static_cast<double>(t));
        for (const auto& f : fits) {
            EXPECT_EQ(f.tokens, t);
            EXPECT_NEAR(f.b_crit, truth, 0.01 * truth);
        }
    }
    EXPECT_EQ(total, 24u);
    EXPECT_TRUE(set.diagnostics.empty());
}

TEST(FitAllBudgets, ThinBudgetSkipped) {
    OptimumTable table;
    for (int lb : {16, 18, 20, 22}) {
        OptimumCell c;
        c.log2_eta_star_mean = std::log2(eval_surge(0.01, std::exp2(20.0), std::exp2(lb)));
        c.n_contributing = 1;
        table.entries.emplace(std::pair{std::int64_t{1} << lb, std::int64_t{1} << 30}, c);
    }
    for (int lb : {16, 18}) {
        OptimumCell c;
        c.log2_eta_star_mean = -9.0;
        c.n_contributing = 1;
        table.entries.emplace(std::pair{std::int64_t{1} << lb, std::int64_t{1} << 31}, c);
    }
    const auto set = fit_all_budgets(table);
    EXPECT_EQ(set.fits.size(), 1u);
    ASSERT_EQ(set.diagnostics.size(), 1u);
    EXPECT_NE(set.diagnostics.front().find("2147483648"), std::string::npos);
}

TEST(LiForm, TwiceSurge) {
    for (double b : {1e3, 2e5, 1e6, 3e7}) EXPECT_NEAR(eta_star_li(0.01, 2e5, b), 2.0 * eval_surge(0.01, 2e5, b), 1e-18);
}
