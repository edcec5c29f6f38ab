#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boxlab/errors.hpp"

namespace boxlab {

inline constexpr double kMinWidth = 1e-9;

// Above this dimensionality volume products are carried in log space and
// exponentiated only at the API boundary; a raw product over hundreds of
// dimensions underflows double precision.
inline constexpr std::size_t kLogSpaceDim = 16;

/// Axis-aligned box in R^D, parameterized by a center vector and a strictly
/// positive per-dimension half-width (delta). Immutable after construction.
class BoxEmbed {
public:
    BoxEmbed(std::vector<double> center, std::vector<double> delta)
        : center_(std::move(center)), delta_(std::move(delta)) {
        if (center_.size() != delta_.size())
            throw input_error("box center and delta lengths differ");
        if (center_.empty()) throw input_error("box must have at least one dimension");
        for (std::size_t d = 0; d < delta_.size(); ++d) {
            if (!std::isfinite(center_[d]) || !std::isfinite(delta_[d]))
                throw input_error("box coordinates must be finite");
            if (delta_[d] < kMinWidth)
                throw input_error("box half-width below 1e-9 in dimension " + std::to_string(d));
        }
    }

    static BoxEmbed from_corners(const std::vector<double>& lower,
                                 const std::vector<double>& upper) {
        if (lower.size() != upper.size()) throw dimension_mismatch(lower.size(), upper.size());
        std::vector<double> center(lower.size()), delta(lower.size());
        for (std::size_t d = 0; d < lower.size(); ++d) {
            center[d] = 0.5 * (lower[d] + upper[d]);
            delta[d] = 0.5 * (upper[d] - lower[d]);
        }
        return BoxEmbed(std::move(center), std::move(delta));
    }

    std::size_t dim() const { return center_.size(); }
    const std::vector<double>& center() const { return center_; }
    const std::vector<double>& delta() const { return delta_; }

    double lower(std::size_t d) const { return center_[d] - delta_[d]; }
    double upper(std::size_t d) const { return center_[d] + delta_[d]; }

    BoxEmbed translated(const std::vector<double>& shift) const {
        if (shift.size() != dim()) throw dimension_mismatch(shift.size(), dim());
        std::vector<double> c(center_);
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += shift[d];
        return BoxEmbed(std::move(c), delta_);
    }

private:
    std::vector<double> center_;
    std::vector<double> delta_;
};

/// Gumbel smoothing temperatures: beta_vol for single-box volumes, beta_int
/// for anything crossing two boxes.
struct GumbelParams {
    double beta_vol = 1.0;
    double beta_int = 0.001;

    GumbelParams() = default;
    GumbelParams(double bv, double bi) : beta_vol(bv), beta_int(bi) {
        if (!(bv > 0.0) || !(bi > 0.0)) throw input_error("Gumbel temperatures must be positive");
    }
};

struct VectorEmbed {
    std::vector<double> values;
};

inline std::pair<std::vector<double>, std::vector<double>> corners(const BoxEmbed& box) {
    std::vector<double> lo(box.dim()), hi(box.dim());
    for (std::size_t d = 0; d < box.dim(); ++d) {
        lo[d] = box.lower(d);
        hi[d] = box.upper(d);
    }
    return {std::move(lo), std::move(hi)};
}

inline void check_same_dim(const BoxEmbed& a, const BoxEmbed& b) {
    if (a.dim() != b.dim()) throw dimension_mismatch(a.dim(), b.dim());
}

// ---------------------------------------------------------------------------
// Hard (exact) volumes
// ---------------------------------------------------------------------------

inline double log_hard_volume(const BoxEmbed& box) {
    double s = 0.0;
    for (std::size_t d = 0; d < box.dim(); ++d) s += std::log(box.upper(d) - box.lower(d));
    return s;
}

inline double hard_volume(const BoxEmbed& box) {
    if (box.dim() > kLogSpaceDim) return std::exp(log_hard_volume(box));
    double v = 1.0;
    for (std::size_t d = 0; d < box.dim(); ++d) v *= box.upper(d) - box.lower(d);
    return v;
}

// Per-dimension overlap length; <= 0 means the boxes are disjoint along d.
inline double interval_overlap(const BoxEmbed& a, const BoxEmbed& b, std::size_t d) {
    return std::min(a.upper(d), b.upper(d)) - std::max(a.lower(d), b.lower(d));
}

// -inf when the intersection is empty.
inline double log_hard_intersection_volume(const BoxEmbed& a, const BoxEmbed& b) {
    check_same_dim(a, b);
    double s = 0.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double o = interval_overlap(a, b, d);
        if (o <= 0.0) return -std::numeric_limits<double>::infinity();
        s += std::log(o);
    }
    return s;
}

inline double hard_intersection_volume(const BoxEmbed& a, const BoxEmbed& b) {
    check_same_dim(a, b);
    if (a.dim() > kLogSpaceDim) {
        double lv = log_hard_intersection_volume(a, b);
        return std::isinf(lv) ? 0.0 : std::exp(lv);
    }
    double v = 1.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double o = interval_overlap(a, b, d);
        if (o <= 0.0) return 0.0;
        v *= o;
    }
    return v;
}

/// p(b | a) = VolInt(a, b) / Vol(a): 1 exactly when Box(a) lies inside Box(b).
/// Computed as a difference of log volumes so the containment case cancels
/// term by term and nested pairs report exactly 1.
inline double entailment_prob(const BoxEmbed& a, const BoxEmbed& b) {
    check_same_dim(a, b);
    double num = 0.0, den = 0.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double o = interval_overlap(a, b, d);
        if (o <= 0.0) return 0.0;
        num += std::log(o);
        den += std::log(a.upper(d) - a.lower(d));
    }
    return std::exp(num - den);
}

// ---------------------------------------------------------------------------
// Gumbel-smoothed quantities
// ---------------------------------------------------------------------------

// Temperature-controlled log-sum-exp, shift-stabilized. Negative beta yields
// a smooth minimum.
inline double lse(std::span<const double> xs, double beta) {
    double m = xs[0];
    if (beta > 0.0) {
        for (double x : xs) m = std::max(m, x);
    } else {
        for (double x : xs) m = std::min(m, x);
    }
    double s = 0.0;
    for (double x : xs) s += std::exp((x - m) / beta);
    return m + beta * std::log(s);
}

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// lse_beta(t, 0) = beta * softplus(t / beta): the smooth "max with 0".
inline double smooth_hinge(double t, double beta) { return beta * softplus(t / beta); }

// log of smooth_hinge without underflow for far-apart boxes; the asymptotic
// branch uses log softplus(x) -> x as x -> -inf.
inline double log_smooth_hinge(double t, double beta) {
    double x = t / beta;
    if (x < -33.0) return std::log(beta) + x;
    return std::log(beta) + std::log(softplus(x));
}

/// Smooth approximation of max(min(uppers) - max(lowers), 0) at temperature
/// beta. Strictly positive for all finite inputs.
inline double gumbel_interval_overlap(std::span<const double> lowers,
                                      std::span<const double> uppers, double beta) {
    if (lowers.empty() || lowers.size() != uppers.size())
        throw input_error("gumbel_interval_overlap needs matched non-empty corner lists");
    double u = lse(uppers, -beta);
    double l = lse(lowers, beta);
    return smooth_hinge(u - l, beta);
}

inline double log_gumbel_interval_overlap(std::span<const double> lowers,
                                          std::span<const double> uppers, double beta) {
    if (lowers.empty() || lowers.size() != uppers.size())
        throw input_error("gumbel_interval_overlap needs matched non-empty corner lists");
    double u = lse(uppers, -beta);
    double l = lse(lowers, beta);
    return log_smooth_hinge(u - l, beta);
}

// The smoothed single-box volume works on widths directly rather than on
// corners: 2*delta is exactly translation invariant, where (center+delta) -
// (center-delta) picks up rounding from the center.
inline double log_gumbel_volume(const BoxEmbed& box, const GumbelParams& params) {
    double s = 0.0;
    for (std::size_t d = 0; d < box.dim(); ++d)
        s += log_smooth_hinge(2.0 * box.delta()[d], params.beta_vol);
    return s;
}

inline double gumbel_volume(const BoxEmbed& box, const GumbelParams& params) {
    if (box.dim() > kLogSpaceDim) return std::exp(log_gumbel_volume(box, params));
    double v = 1.0;
    for (std::size_t d = 0; d < box.dim(); ++d)
        v *= smooth_hinge(2.0 * box.delta()[d], params.beta_vol);
    return v;
}

inline double log_gumbel_intersection_volume(const BoxEmbed& a, const BoxEmbed& b,
                                             const GumbelParams& params) {
    check_same_dim(a, b);
    double s = 0.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double lo[2] = {a.lower(d), b.lower(d)};
        double hi[2] = {a.upper(d), b.upper(d)};
        double u = lse(hi, -params.beta_int);
        double l = lse(lo, params.beta_int);
        s += log_smooth_hinge(u - l, params.beta_int);
    }
    return s;
}

inline double gumbel_intersection_volume(const BoxEmbed& a, const BoxEmbed& b,
                                         const GumbelParams& params) {
    if (a.dim() != b.dim()) throw dimension_mismatch(a.dim(), b.dim());
    if (a.dim() > kLogSpaceDim) return std::exp(log_gumbel_intersection_volume(a, b, params));
    double v = 1.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double lo[2] = {a.lower(d), b.lower(d)};
        double hi[2] = {a.upper(d), b.upper(d)};
        double u = lse(hi, -params.beta_int);
        double l = lse(lo, params.beta_int);
        v *= smooth_hinge(u - l, params.beta_int);
    }
    return v;
}

inline double log_gumbel_entailment_prob(const BoxEmbed& a, const BoxEmbed& b,
                                         const GumbelParams& params) {
    return log_gumbel_intersection_volume(a, b, params) - log_gumbel_volume(a, params);
}

/// Smoothed p(b | a): intersection at beta_int over volume at beta_vol.
/// Strictly positive, may slightly exceed the hard ratio.
inline double gumbel_entailment_prob(const BoxEmbed& a, const BoxEmbed& b,
                                     const GumbelParams& params) {
    return std::exp(log_gumbel_entailment_prob(a, b, params));
}

// ---------------------------------------------------------------------------
// Join and the vector baseline
// ---------------------------------------------------------------------------

/// Smallest bounding box containing both inputs.
inline BoxEmbed join(const BoxEmbed& a, const BoxEmbed& b) {
    check_same_dim(a, b);
    std::vector<double> center(a.dim()), delta(a.dim());
    for (std::size_t d = 0; d < a.dim(); ++d) {
        double lo = std::min(a.lower(d), b.lower(d));
        double hi = std::max(a.upper(d), b.upper(d));
        double c = 0.5 * (lo + hi);
        double w = 0.5 * (hi - lo);
        // Center/delta storage can lose an ulp against the requested corners;
        // widen until the recomputed corners cover [lo, hi] so the join
        // always contains both arguments.
        while (c - w > lo || c + w < hi)
            w = std::nextafter(w, std::numeric_limits<double>::infinity());
        center[d] = c;
        delta[d] = w;
    }
    return BoxEmbed(std::move(center), std::move(delta));
}

inline bool contains(const BoxEmbed& outer, const BoxEmbed& inner) {
    check_same_dim(outer, inner);
    for (std::size_t d = 0; d < outer.dim(); ++d) {
        if (inner.lower(d) < outer.lower(d) || inner.upper(d) > outer.upper(d)) return false;
    }
    return true;
}

/// Cosine similarity scaled by the difference of L1 norms; the sign encodes
/// which vector is the "larger" (more general) one.
inline double csdelta_entailment(const VectorEmbed& wa, const VectorEmbed& wb) {
    if (wa.values.size() != wb.values.size())
        throw dimension_mismatch(wa.values.size(), wb.values.size());
    double dot = 0.0, na2 = 0.0, nb2 = 0.0, na1 = 0.0, nb1 = 0.0;
    for (std::size_t d = 0; d < wa.values.size(); ++d) {
        dot += wa.values[d] * wb.values[d];
        na2 += wa.values[d] * wa.values[d];
        nb2 += wb.values[d] * wb.values[d];
        na1 += std::abs(wa.values[d]);
        nb1 += std::abs(wb.values[d]);
    }
    if (na2 == 0.0 || nb2 == 0.0) throw input_error("csdelta requires nonzero vectors");
    return dot / (std::sqrt(na2) * std::sqrt(nb2)) * (na1 - nb1);
}

inline double cosine_similarity(const VectorEmbed& wa, const VectorEmbed& wb) {
    if (wa.values.size() != wb.values.size())
        throw dimension_mismatch(wa.values.size(), wb.values.size());
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t d = 0; d < wa.values.size(); ++d) {
        dot += wa.values[d] * wb.values[d];
        na2 += wa.values[d] * wa.values[d];
        nb2 += wb.values[d] * wb.values[d];
    }
    if (na2 == 0.0 || nb2 == 0.0) throw input_error("cosine requires nonzero vectors");
    return dot / (std::sqrt(na2) * std::sqrt(nb2));
}

}  // namespace boxlab
