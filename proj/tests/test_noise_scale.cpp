#include "scalefit/error.hpp"
#include "scalefit/noise_scale.hpp"
#include "scalefit/surge_fit.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace scalefit;

TEST(NoiseScale, CritRatio) {
    EXPECT_DOUBLE_EQ(b_crit_ratio(1e9, 1e4), 1e5);
    EXPECT_EQ(b_crit_ratio(3.7, 3.7), 1.0);
    EXPECT_EQ(b_crit_ratio(std::exp2(30.0), std::exp2(10.0)), std::exp2(20.0));
    EXPECT_THROW(b_crit_ratio(-1.0, 1.0), DataError);
}

TEST(NoiseScale, CurvatureForms) {
    EXPECT_EQ(b_noise_curv(10.0, 2.0), 5.0);
    EXPECT_EQ(b_noise_curv(4.2, 4.2), 1.0);
    EXPECT_EQ(b_simple_curv(4096.0, 1.0), 4096.0);
    EXPECT_THROW(b_noise_curv(1.0, 0.0), DataError);
    EXPECT_THROW(b_simple_curv(1.0, 0.0), DataError);
}

TEST(NoiseScale, FromLoss) {
    EXPECT_EQ(b_crit_from_loss(std::exp2(19.0), 1.0, 2.0), std::exp2(18.0));
    EXPECT_EQ(b_crit_from_loss(12345.0, 0.7, 1.0), 12345.0);
    EXPECT_DOUBLE_EQ(b_crit_from_loss(std::exp2(19.0), 2.0, 4.0), std::exp2(18.0));
    EXPECT_THROW(b_crit_from_loss(1.0, 0.0, 2.0), DataError);
}

TEST(NoiseScale, Sde) {
    const double v = b_noise_sde(std::exp2(-9.0), std::exp2(30.0), std::exp2(20.0));
    EXPECT_DOUBLE_EQ(v, 1023.0 / 512.0);
    EXPECT_NEAR(v, 1.998, 1e-3);
    EXPECT_EQ(b_noise_sde(0.1, 1e6, 1e6), 0.0);
    EXPECT_DOUBLE_EQ(b_noise_sde(2e-3, 1e9, 1e5), 2.0 * b_noise_sde(1e-3, 1e9, 1e5));
    EXPECT_THROW(b_noise_sde(1e-3, 1e5, 1e6), DataError);
}

TEST(NoiseScale, NormalizedSde) {
    const double eta = std::exp2(-9.0);
    const double t = std::exp2(30.0);
    const double b = std::exp2(20.0);
    EXPECT_EQ(b_noise_norm(eta, t, b, 1.0), b_noise_sde(eta, t, b));
    EXPECT_DOUBLE_EQ(b_noise_norm(eta, t, b, 2.0), 0.5 * b_noise_sde(eta, t, b));
    EXPECT_NEAR(b_noise_norm(eta, t, b, 4.0), 0.4995, 1e-4);
}

TEST(NoiseScale, LiForm) {
    EXPECT_EQ(eta_star_li(0.01, std::exp2(20.0), std::exp2(20.0)), 0.01);
    EXPECT_NEAR(eta_star_li(0.01, std::exp2(20.0), std::exp2(24.0)), 0.01 / 2.125, 1e-18);
    EXPECT_NEAR(eta_star_li(0.01, std::exp2(20.0), std::exp2(24.0)), 4.7059e-3, 1e-7);
    for (double b = 1e2; b < 1e9; b *= 3.7) {
        EXPECT_NEAR(eta_star_li(0.02, 3e5, b), 2.0 * eval_surge(0.02, 3e5, b), 1e-15 * eta_star_li(0.02, 3e5, b));
    }
}
