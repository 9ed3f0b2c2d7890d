#pragma once

namespace scalefit {

/// E_min / S_min.
double b_crit_ratio(double e_min, double s_min);

/// tr(H Sigma) / (G^T H G).
double b_noise_curv(double tr_h_sigma, double gt_h_g);

/// tr(Sigma) / |G|^2.
double b_simple_curv(double tr_sigma, double g_sq);

/// B0 / L^(1/alpha_B).
double b_crit_from_loss(double b0, double alpha_b, double loss);

/// eta * (T/B - 1), T the training-set size.
double b_noise_sde(double eta, double t_examples, double batch_size);

/// b_noise_sde / |w|^2.
double b_noise_norm(double eta, double t_examples, double batch_size, double w_norm_sq);

/// eta_crit / (0.5 (sqrt(B_peak/B) + sqrt(B/B_peak))); peaks at eta_crit.
double eta_star_li(double eta_crit, double b_peak, double batch_size);

}  // namespace scalefit
