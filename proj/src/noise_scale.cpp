#include "scalefit/noise_scale.hpp"

#include "scalefit/error.hpp"

#include <cmath>
#include <string>

namespace scalefit {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError(std::string(what) + " must be positive");
}

}  // namespace

double b_crit_ratio(double e_min, double s_min) {
    require_positive(e_min, "E_min");
    require_positive(s_min, "S_min");
    return e_min / s_min;
}

double b_noise_curv(double tr_h_sigma, double gt_h_g) {
    if (gt_h_g == 0.0) throw DataError("G^T H G is zero");
    require_positive(tr_h_sigma, "tr(H Sigma)");
    require_positive(gt_h_g, "G^T H G");
    return tr_h_sigma / gt_h_g;
}

double b_simple_curv(double tr_sigma, double g_sq) {
    if (g_sq == 0.0) throw DataError("|G|^2 is zero");
    require_positive(tr_sigma, "tr(Sigma)");
    require_positive(g_sq, "|G|^2");
    return tr_sigma / g_sq;
}

double b_crit_from_loss(double b0, double alpha_b, double loss) {
    require_positive(b0, "B0");
    require_positive(loss, "loss");
    if (alpha_b == 0.0 || !std::isfinite(alpha_b)) throw DataError("alpha_B must be nonzero");
    return b0 / std::pow(loss, 1.0 / alpha_b);
}

double b_noise_sde(double eta, double t_examples, double batch_size) {
    require_positive(eta, "eta");
    require_positive(t_examples, "T");
    require_positive(batch_size, "B");
    if (batch_size > t_examples) throw DataError("batch size exceeds the training-set size");
    return eta * (t_examples / batch_size - 1.0);
}

double b_noise_norm(double eta, double t_examples, double batch_size, double w_norm_sq) {
    require_positive(w_norm_sq, "|w|^2");
    return b_noise_sde(eta, t_examples, batch_size) / w_norm_sq;
}

double eta_star_li(double eta_crit, double b_peak, double batch_size) {
    require_positive(eta_crit, "eta_crit");
    require_positive(b_peak, "B_peak");
    require_positive(batch_size, "B");
    // Same denominator as the surge curve, so this is exactly twice eval_surge.
    return 2.0 * (eta_crit / (std::sqrt(batch_size / b_peak) + std::sqrt(b_peak / batch_size)));
}

}  // namespace scalefit
