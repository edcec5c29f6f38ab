#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/fit.hpp"
#include "boxlab/grads.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/stats.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

struct SneWeights {
    double alpha = 0.8;
    double beta = 0.2;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0) throw input_error("sne weights must be non-negative");
        if (!(alpha + beta > 0.0)) throw input_error("sne weights must not both be zero");
    }
};

/// Low-dimensional box with one shared width: the scalar delta rules out
/// needle-shaped embeddings by construction.
struct LowDimBox {
    std::vector<double> center;
    double delta_scalar = 1.0;

    BoxEmbed to_box() const {
        return BoxEmbed(center, std::vector<double>(center.size(), delta_scalar));
    }
};

enum class SneRelation { volint, boxent };

inline std::string to_string(SneRelation r) { return r == SneRelation::volint ? "volint" : "boxent"; }

/// Pairwise relation strengths held in log form. Gumbel smoothing keeps
/// every log entry finite, which is the positivity the normalization in
/// conditional_probs depends on; the raw value() can still underflow for
/// very distant boxes.
struct RelationMatrix {
    SneRelation kind = SneRelation::volint;
    std::vector<std::vector<double>> log_values;

    std::size_t size() const { return log_values.size(); }
    double log_value(std::size_t i, std::size_t j) const { return log_values[i][j]; }
    double value(std::size_t i, std::size_t j) const { return std::exp(log_values[i][j]); }
};

inline RelationMatrix relation_matrix(const BoxTable& table, SneRelation kind,
                                      const GumbelParams& gumbel = {}) {
    if (table.size() < 2) throw input_error("relation_matrix needs at least two boxes");
    std::size_t n = table.size();
    RelationMatrix m;
    m.kind = kind;
    m.log_values.assign(n, std::vector<double>(n, 0.0));
    std::vector<double> log_vol(n, 0.0);
    if (kind == SneRelation::boxent) {
        for (std::size_t j = 0; j < n; ++j) log_vol[j] = log_gumbel_volume(table.box(j), gumbel);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = log_gumbel_intersection_volume(table.box(i), table.box(j), gumbel);
            if (kind == SneRelation::boxent) v -= log_vol[j];
            m.log_values[i][j] = v;
        }
    }
    return m;
}

inline BoxTable to_box_table(const std::vector<LowDimBox>& low) {
    BoxTable t;
    for (std::size_t i = 0; i < low.size(); ++i) t.add("p" + std::to_string(i), low[i].to_box());
    return t;
}

namespace detail {

/// Row-wise log-softmax over off-diagonal entries.
inline std::vector<std::vector<double>> log_conditionals(const RelationMatrix& m) {
    std::size_t n = m.size();
    if (n < 2) throw input_error("conditionals need at least two items");
    std::vector<std::vector<double>> lq(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, m.log_values[i][j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) z += std::exp(m.log_values[i][j] - mx);
        double log_z = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) lq[i][j] = j == i ? 0.0 : m.log_values[i][j] - log_z;
    }
    return lq;
}

inline std::vector<std::vector<double>> exp_off_diagonal(
    const std::vector<std::vector<double>>& lq) {
    std::size_t n = lq.size();
    std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) p[i][j] = std::exp(lq[i][j]);
    return p;
}

/// KL with the q side supplied in log form, so deeply improbable q cannot
/// underflow the quotient.
inline double kl_from_logs(const std::vector<std::vector<double>>& p,
                           const std::vector<std::vector<double>>& lq) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (i == j || p[i][j] <= 0.0) continue;
            sum += p[i][j] * (std::log(p[i][j]) - lq[i][j]);
        }
    }
    return std::max(0.0, sum);
}

}  // namespace detail

/// Conditional neighbor probabilities p_{j|i}: each row i is normalized over
/// j != i. The diagonal stays zero.
inline std::vector<std::vector<double>> conditional_probs(const RelationMatrix& m) {
    return detail::exp_off_diagonal(detail::log_conditionals(m));
}

/// Sum over ordered pairs i != j of p * ln(p/q). Zero p entries contribute
/// nothing; a zero q under a positive p is an error.
inline double kl_cost(const std::vector<std::vector<double>>& p,
                      const std::vector<std::vector<double>>& q) {
    if (p.size() != q.size()) throw input_error("kl_cost requires matched shapes");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i].size() != p.size() || q[i].size() != q.size())
            throw input_error("kl_cost requires square matrices");
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (i == j || p[i][j] <= 0.0) continue;
            if (q[i][j] <= 0.0) throw input_error("kl_cost: zero q under positive p");
            sum += p[i][j] * std::log(p[i][j] / q[i][j]);
        }
    }
    return std::max(0.0, sum);
}

namespace detail {

struct SneTargets {
    std::vector<std::vector<double>> p_volint;
    std::vector<std::vector<double>> p_boxent;
};

inline SneTargets sne_targets(const BoxTable& high, const GumbelParams& gumbel) {
    SneTargets t;
    t.p_volint = conditional_probs(relation_matrix(high, SneRelation::volint, gumbel));
    t.p_boxent = conditional_probs(relation_matrix(high, SneRelation::boxent, gumbel));
    return t;
}

struct SneGrad {
    std::vector<std::vector<double>> center;
    std::vector<double> delta;

    SneGrad(std::size_t n, std::size_t p) : center(n, std::vector<double>(p, 0.0)), delta(n, 0.0) {}
};

/// Loss for a low-dim state against cached high-dim targets; optionally adds
/// gradients with respect to low centers and scalar deltas. Uses the SNE
/// identity dC/dtheta = -sum_{i!=j} (p_{j|i} - q_{j|i}) dln s_{ij}/dtheta.
inline double sne_loss_grad(const SneTargets& targets, const std::vector<LowDimBox>& low,
                            const SneWeights& weights, const GumbelParams& gumbel,
                            SneGrad* grad) {
    std::size_t n = low.size();
    if (n != targets.p_volint.size()) throw input_error("low-dim table size mismatch");
    if (n < 2) throw input_error("sne_loss needs at least two boxes");
    std::size_t p = low[0].center.size();

    auto low_table = to_box_table(low);
    auto m_volint = relation_matrix(low_table, SneRelation::volint, gumbel);
    auto m_boxent = relation_matrix(low_table, SneRelation::boxent, gumbel);
    auto lq_v = log_conditionals(m_volint);
    auto lq_e = log_conditionals(m_boxent);
    double loss = weights.alpha * kl_from_logs(targets.p_volint, lq_v) +
                  weights.beta * kl_from_logs(targets.p_boxent, lq_e);
    if (!grad) return loss;

    auto q_v = exp_off_diagonal(lq_v);
    auto q_e = exp_off_diagonal(lq_e);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dv = targets.p_volint[i][j] - q_v[i][j];
            double de = targets.p_boxent[i][j] - q_e[i][j];
            double int_coeff = -(weights.alpha * dv + weights.beta * de);
            if (int_coeff != 0.0) {
                for (std::size_t d = 0; d < p; ++d) {
                    auto o = dim_overlap(low[i].center[d] + low[i].delta_scalar,
                                         low[j].center[d] + low[j].delta_scalar,
                                         low[i].center[d] - low[i].delta_scalar,
                                         low[j].center[d] - low[j].delta_scalar,
                                         gumbel.beta_int);
                    double g = int_coeff * dlog_smooth_hinge(o.t, gumbel.beta_int);
                    grad->center[i][d] += g * (o.wu_a - o.wl_a);
                    grad->delta[i] += g * (o.wu_a + o.wl_a);
                    grad->center[j][d] += g * (o.wu_c - o.wl_c);
                    grad->delta[j] += g * (o.wu_c + o.wl_c);
                }
            }
            // The boxent denominator Vol(j) enters with opposite sign.
            double vol_coeff = weights.beta * de;
            grad->delta[j] += vol_coeff * static_cast<double>(p) *
                              dlog_smooth_hinge(2.0 * low[j].delta_scalar, gumbel.beta_vol) * 2.0;
        }
    }
    return loss;
}

}  // namespace detail

/// Joint KL objective: alpha weights the intersection-volume neighborhoods,
/// beta the entailment neighborhoods.
inline double sne_loss(const BoxTable& high, const std::vector<LowDimBox>& low,
                       const SneWeights& weights = {}, const GumbelParams& gumbel = {}) {
    weights.validate();
    if (high.size() != low.size()) throw input_error("high/low table size mismatch");
    auto targets = detail::sne_targets(high, gumbel);
    return detail::sne_loss_grad(targets, low, weights, gumbel, nullptr);
}

namespace detail {

/// Top principal directions of the high-dim centers by power iteration with
/// deflation; falls back to seeded random directions for degenerate spreads.
inline std::vector<std::vector<double>> principal_directions(const BoxTable& table,
                                                             std::size_t p, Rng& rng) {
    std::size_t n = table.size(), dim = table.dim();
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) mean[d] += table.box(i).center()[d];
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<std::vector<double>> x(n, std::vector<double>(dim));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) x[i][d] = table.box(i).center()[d] - mean[d];

    auto random_unit = [&] {
        std::vector<double> v(dim);
        double norm = 0.0;
        for (auto& e : v) {
            e = rng.normal();
            norm += e * e;
        }
        norm = std::sqrt(norm);
        for (auto& e : v) e /= norm > 0 ? norm : 1.0;
        return v;
    };

    std::vector<std::vector<double>> dirs;
    for (std::size_t k = 0; k < p; ++k) {
        std::vector<double> v = random_unit();
        for (int iter = 0; iter < 200; ++iter) {
            // w = X^T X v with previous directions projected out of v
            for (const auto& d0 : dirs) {
                double dot = std::inner_product(v.begin(), v.end(), d0.begin(), 0.0);
                for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * d0[d];
            }
            std::vector<double> w(dim, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double xi_v = std::inner_product(x[i].begin(), x[i].end(), v.begin(), 0.0);
                for (std::size_t d = 0; d < dim; ++d) w[d] += xi_v * x[i][d];
            }
            double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
            if (norm < 1e-12) {
                w = random_unit();
                norm = 1.0;
            } else {
                for (auto& e : w) e /= norm;
            }
            v = std::move(w);
        }
        dirs.push_back(v);
    }
    return dirs;
}

}  // namespace detail

struct SneResult {
    std::vector<LowDimBox> boxes;
    std::vector<double> trace;  // loss per accepted iteration, entry 0 = initialization
};

/// Initial low-dim state: centers projected onto principal directions,
/// per-box widths chosen so each low box roughly reproduces its high-dim
/// volume.
inline std::vector<LowDimBox> sne_init(const BoxTable& high, std::size_t p, std::uint64_t seed) {
    Rng rng(seed, 8);
    auto dirs = detail::principal_directions(high, p, rng);
    std::vector<LowDimBox> low(high.size());
    for (std::size_t i = 0; i < high.size(); ++i) {
        const auto& c = high.box(i).center();
        low[i].center.resize(p);
        for (std::size_t k = 0; k < p; ++k)
            low[i].center[k] = std::inner_product(c.begin(), c.end(), dirs[k].begin(), 0.0);
        double log_vol = log_hard_volume(high.box(i));
        low[i].delta_scalar =
            std::max(1e-6, 0.5 * std::exp(log_vol / static_cast<double>(p)));
    }
    return low;
}

inline SneResult reduce(const BoxTable& high, std::size_t p, const SneWeights& weights,
                        const GumbelParams& gumbel, int iters, double learning_rate,
                        std::uint64_t seed) {
    weights.validate();
    if (p < 1) throw input_error("target dimension must be >= 1");
    if (high.size() < 3) throw input_error("reduce needs at least three boxes");
    if (iters < 0) throw input_error("iters must be >= 0");
    if (!(learning_rate > 0.0)) throw input_error("learning_rate must be positive");

    auto targets = detail::sne_targets(high, gumbel);
    SneResult result;
    result.boxes = sne_init(high, p, seed);
    std::size_t n = high.size();

    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i)
        rho[i] = inverse_softplus(std::max(result.boxes[i].delta_scalar - kMinWidth, 1e-12));

    const double momentum = 0.9;
    double lr = learning_rate;
    detail::SneGrad velocity(n, p);
    double current = detail::sne_loss_grad(targets, result.boxes, weights, gumbel, nullptr);
    result.trace.push_back(current);

    for (int iter = 0; iter < iters; ++iter) {
        detail::SneGrad grad(n, p);
        detail::sne_loss_grad(targets, result.boxes, weights, gumbel, &grad);

        bool accepted = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            std::vector<LowDimBox> cand = result.boxes;
            std::vector<double> cand_rho = rho;
            detail::SneGrad cand_vel = velocity;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t d = 0; d < p; ++d) {
                    cand_vel.center[i][d] =
                        momentum * cand_vel.center[i][d] - lr * grad.center[i][d];
                    cand[i].center[d] += cand_vel.center[i][d];
                }
                double drho = grad.delta[i] * sigmoid(rho[i]);
                cand_vel.delta[i] = momentum * cand_vel.delta[i] - lr * drho;
                cand_rho[i] += cand_vel.delta[i];
                cand[i].delta_scalar = effective_width(cand_rho[i]);
            }
            double cand_loss = detail::sne_loss_grad(targets, cand, weights, gumbel, nullptr);
            if (cand_loss <= current) {
                result.boxes = std::move(cand);
                rho = std::move(cand_rho);
                velocity = std::move(cand_vel);
                current = cand_loss;
                lr = std::min(lr * 1.2, learning_rate);
                accepted = true;
            } else {
                lr *= 0.5;
                velocity = detail::SneGrad(n, p);
            }
        }
        result.trace.push_back(current);
    }
    return result;
}

struct PreservationReport {
    std::optional<double> volume_spearman;
    std::optional<double> intersection_spearman;
    std::optional<double> entailment_spearman;
};

/// Rank agreement between high- and low-dimensional structure. Smoothed log
/// quantities are used on both sides so exact hard zeros do not collapse
/// into rank ties.
inline PreservationReport evaluate_preservation(const BoxTable& high,
                                                const std::vector<LowDimBox>& low,
                                                const GumbelParams& gumbel = {}) {
    if (high.size() != low.size()) throw input_error("high/low table size mismatch");
    if (high.size() < 2) throw input_error("evaluate_preservation needs at least two boxes");
    auto low_table = to_box_table(low);
    std::size_t n = high.size();

    std::vector<double> vol_h, vol_l, int_h, int_l, ent_h, ent_l;
    for (std::size_t i = 0; i < n; ++i) {
        vol_h.push_back(log_gumbel_volume(high.box(i), gumbel));
        vol_l.push_back(log_gumbel_volume(low_table.box(i), gumbel));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double hi = log_gumbel_intersection_volume(high.box(i), high.box(j), gumbel);
            double li = log_gumbel_intersection_volume(low_table.box(i), low_table.box(j), gumbel);
            if (i < j) {
                int_h.push_back(hi);
                int_l.push_back(li);
            }
            ent_h.push_back(hi - log_gumbel_volume(high.box(i), gumbel));
            ent_l.push_back(li - log_gumbel_volume(low_table.box(i), gumbel));
        }
    }
    PreservationReport report;
    report.volume_spearman = spearman(vol_h, vol_l);
    report.intersection_spearman = spearman(int_h, int_l);
    report.entailment_spearman = spearman(ent_h, ent_l);
    return report;
}

}  // namespace boxlab
