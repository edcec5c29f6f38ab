#pragma once

#include <cmath>
#include <cstddef>

#include "boxlab/box.hpp"

namespace boxlab {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// d/dt log smooth_hinge(t, beta) = sigmoid(t/beta) / smooth_hinge(t, beta).
/// For t/beta << 0 both factors decay like e^{t/beta}; the ratio tends to
/// 1/beta, which the direct quotient cannot reach once both underflow.
inline double dlog_smooth_hinge(double t, double beta) {
    double x = t / beta;
    if (x < -30.0) return 1.0 / beta;
    return sigmoid(x) / (beta * softplus(x));
}

namespace detail {

/// One dimension of a two-box Gumbel overlap: the smoothed upper/lower gap
/// plus the softmin/softmax weights of each box's corner, i.e. the partial
/// derivatives of t with respect to the four corners.
struct DimOverlap {
    double t;
    double wu_a, wu_c;  // d t / d upper_a, d t / d upper_c
    double wl_a, wl_c;  // -d t / d lower_a, -d t / d lower_c
};

inline DimOverlap dim_overlap(double ua, double uc, double la, double lc, double beta) {
    DimOverlap o;
    double mu = std::min(ua, uc);
    double ml = std::max(la, lc);
    double smooth_u = mu - beta * std::log1p(std::exp(-std::abs(ua - uc) / beta));
    double smooth_l = ml + beta * std::log1p(std::exp(-std::abs(la - lc) / beta));
    o.t = smooth_u - smooth_l;
    o.wu_a = sigmoid((uc - ua) / beta);
    o.wu_c = 1.0 - o.wu_a;
    o.wl_a = sigmoid((la - lc) / beta);
    o.wl_c = 1.0 - o.wl_a;
    return o;
}

}  // namespace detail
}  // namespace boxlab
