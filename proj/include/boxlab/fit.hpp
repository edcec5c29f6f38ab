#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/grads.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

enum class LossSpace { log, raw };

inline std::string to_string(LossSpace s) { return s == LossSpace::log ? "log" : "raw"; }

inline LossSpace loss_space_from_string(const std::string& s) {
    if (s == "log") return LossSpace::log;
    if (s == "raw") return LossSpace::raw;
    throw input_error("unknown loss space: " + s);
}

struct FitConfig {
    int dim = 4;
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 16;
    GumbelParams gumbel{};
    std::uint64_t seed = 0;
    LossSpace loss_space = LossSpace::log;
    double softmax_scale = 1.0;
    double momentum = 0.0;

    void validate() const {
        if (dim < 1) throw input_error("dim must be >= 1");
        if (!(learning_rate > 0.0)) throw input_error("learning_rate must be positive");
        if (epochs < 0) throw input_error("epochs must be >= 0");
        if (batch_size < 2) throw input_error("batch_size must be >= 2");
        if (!(softmax_scale > 0.0)) throw input_error("softmax_scale must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw input_error("momentum must lie in [0, 1)");
    }
};

/// Trainable box: center is free, width goes through softplus so it stays
/// strictly positive no matter what gradient steps do to raw_width. The
/// kMinWidth offset keeps the map positive even where softplus itself
/// underflows to zero.
inline double effective_width(double raw) { return kMinWidth + softplus(raw); }

struct ParamBox {
    std::vector<double> center;
    std::vector<double> raw_width;

    std::vector<double> effective_delta() const {
        std::vector<double> d(raw_width.size());
        for (std::size_t i = 0; i < raw_width.size(); ++i) d[i] = effective_width(raw_width[i]);
        return d;
    }

    BoxEmbed to_box() const { return BoxEmbed(center, effective_delta()); }
};

inline double inverse_softplus(double y) {
    if (!(y > 0.0)) throw input_error("inverse_softplus needs a positive argument");
    return y + std::log1p(-std::exp(-y));
}

struct ParamTable {
    std::vector<std::string> ids;
    std::vector<ParamBox> boxes;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return boxes.size(); }
    std::size_t dim() const { return boxes.empty() ? 0 : boxes[0].center.size(); }

    std::size_t index_of(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) throw input_error("unknown item id: " + id);
        return it->second;
    }

    BoxTable to_box_table() const {
        BoxTable t;
        for (std::size_t i = 0; i < boxes.size(); ++i) t.add(ids[i], boxes[i].to_box());
        return t;
    }
};

inline ParamTable init_table(const std::vector<std::string>& ids, const FitConfig& config) {
    config.validate();
    if (ids.empty()) throw input_error("init_table needs at least one id");
    ParamTable table;
    Rng rng(config.seed, 6);
    double raw_unit = inverse_softplus(1.0);
    for (const auto& id : ids) {
        ParamBox box;
        box.center.resize(config.dim);
        box.raw_width.resize(config.dim);
        for (int d = 0; d < config.dim; ++d) {
            box.center[d] = rng.uniform(-0.1, 0.1);
            box.raw_width[d] = raw_unit + rng.uniform(-0.1, 0.1);
        }
        if (table.index.contains(id)) throw input_error("duplicate item id: " + id);
        table.index.emplace(id, table.boxes.size());
        table.ids.push_back(id);
        table.boxes.push_back(std::move(box));
    }
    return table;
}

inline ParamTable init_table(std::size_t n, const FitConfig& config) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("b" + std::to_string(i));
    return init_table(ids, config);
}

/// Softmax cross-entropy with the positive candidate in slot 0:
/// -s0 + log sum_j exp(sj).
inline double softmax_cross_entropy(const std::vector<double>& scores) {
    if (scores.size() < 2) throw input_error("softmax needs a positive and at least one negative");
    double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    return -scores[0] + m + std::log(z);
}

/// Log-domain candidate score: log Gumbel intersection volume for the
/// similarity kind, log Gumbel entailment probability (anchor given) for the
/// entailment kind.
inline double log_pair_score(const BoxEmbed& anchor, const BoxEmbed& cand, RelationKind kind,
                             const GumbelParams& gumbel) {
    double s = log_gumbel_intersection_volume(anchor, cand, gumbel);
    if (kind == RelationKind::entailment) s -= log_gumbel_volume(anchor, gumbel);
    return s;
}

inline double pair_score(const BoxEmbed& anchor, const BoxEmbed& cand, RelationKind kind,
                         const FitConfig& config) {
    double s = log_pair_score(anchor, cand, kind, config.gumbel);
    return config.loss_space == LossSpace::log ? s : std::exp(s);
}

inline double triplet_loss(const BoxEmbed& anchor, const BoxEmbed& positive,
                           const std::vector<BoxEmbed>& negatives, RelationKind kind,
                           const FitConfig& config) {
    if (negatives.empty()) throw input_error("triplet needs at least one negative");
    std::vector<double> scores;
    scores.push_back(config.softmax_scale * pair_score(anchor, positive, kind, config));
    for (const auto& neg : negatives)
        scores.push_back(config.softmax_scale * pair_score(anchor, neg, kind, config));
    return softmax_cross_entropy(scores);
}

namespace detail {

struct Grad {
    std::vector<std::vector<double>> center;
    std::vector<std::vector<double>> raw_width;

    explicit Grad(const ParamTable& table) {
        center.resize(table.size());
        raw_width.resize(table.size());
        for (std::size_t i = 0; i < table.size(); ++i) {
            center[i].assign(table.boxes[i].center.size(), 0.0);
            raw_width[i].assign(table.boxes[i].center.size(), 0.0);
        }
    }

    void zero() {
        for (auto& c : center) std::fill(c.begin(), c.end(), 0.0);
        for (auto& w : raw_width) std::fill(w.begin(), w.end(), 0.0);
    }

    void scale(double f) {
        for (auto& c : center)
            for (auto& v : c) v *= f;
        for (auto& w : raw_width)
            for (auto& v : w) v *= f;
    }
};

/// Adds coeff * d(log score)/d(params) for one anchor/candidate pair.
inline double accumulate_log_pair_score(const ParamTable& table, std::size_t ai, std::size_t ci,
                                        RelationKind kind, const GumbelParams& gumbel,
                                        double coeff, Grad* grad) {
    const ParamBox& a = table.boxes[ai];
    const ParamBox& c = table.boxes[ci];
    std::size_t dim = a.center.size();
    double score = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        double da = effective_width(a.raw_width[d]);
        double dc = effective_width(c.raw_width[d]);
        auto o = dim_overlap(a.center[d] + da, c.center[d] + dc, a.center[d] - da,
                             c.center[d] - dc, gumbel.beta_int);
        score += log_smooth_hinge(o.t, gumbel.beta_int);
        if (grad) {
            double g = coeff * dlog_smooth_hinge(o.t, gumbel.beta_int);
            grad->center[ai][d] += g * (o.wu_a - o.wl_a);
            grad->raw_width[ai][d] += g * (o.wu_a + o.wl_a) * sigmoid(a.raw_width[d]);
            grad->center[ci][d] += g * (o.wu_c - o.wl_c);
            grad->raw_width[ci][d] += g * (o.wu_c + o.wl_c) * sigmoid(c.raw_width[d]);
        }
    }
    if (kind == RelationKind::entailment) {
        for (std::size_t d = 0; d < dim; ++d) {
            double da = effective_width(a.raw_width[d]);
            double width = 2.0 * da;
            score -= log_smooth_hinge(width, gumbel.beta_vol);
            if (grad) {
                double g = coeff * dlog_smooth_hinge(width, gumbel.beta_vol);
                grad->raw_width[ai][d] -= g * 2.0 * sigmoid(a.raw_width[d]);
            }
        }
    }
    return score;
}

/// Loss of one triplet plus, optionally, its gradient added into grad.
inline double triplet_loss_grad(const ParamTable& table, const RelationTriplet& triplet,
                                const FitConfig& config, Grad* grad) {
    if (triplet.negatives.empty()) throw input_error("triplet needs at least one negative");
    std::size_t ai = table.index_of(triplet.anchor);
    std::vector<std::size_t> cands;
    cands.push_back(table.index_of(triplet.positive));
    for (const auto& n : triplet.negatives) cands.push_back(table.index_of(n));

    std::vector<double> log_scores(cands.size());
    for (std::size_t j = 0; j < cands.size(); ++j)
        log_scores[j] = accumulate_log_pair_score(table, ai, cands[j], triplet.kind,
                                                  config.gumbel, 0.0, nullptr);

    bool raw = config.loss_space == LossSpace::raw;
    std::vector<double> scores(cands.size());
    for (std::size_t j = 0; j < cands.size(); ++j)
        scores[j] = config.softmax_scale * (raw ? std::exp(log_scores[j]) : log_scores[j]);
    double loss = softmax_cross_entropy(scores);
    if (!grad) return loss;

    double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    for (std::size_t j = 0; j < cands.size(); ++j) {
        double prob = std::exp(scores[j] - m) / z;
        double dloss_dscore = config.softmax_scale * (prob - (j == 0 ? 1.0 : 0.0));
        double chain = raw ? dloss_dscore * std::exp(log_scores[j]) : dloss_dscore;
        if (chain != 0.0)
            accumulate_log_pair_score(table, ai, cands[j], triplet.kind, config.gumbel, chain,
                                      grad);
    }
    return loss;
}

}  // namespace detail

inline double triplet_loss(const ParamTable& table, const RelationTriplet& triplet,
                           const FitConfig& config) {
    return detail::triplet_loss_grad(table, triplet, config, nullptr);
}

/// Gradient descent over the parameter table. Batches are homogeneous in
/// relation kind and alternate between kinds. Returns the per-epoch mean
/// triplet loss.
inline std::vector<double> train(ParamTable& table, const std::vector<RelationTriplet>& triplets,
                                 const FitConfig& config) {
    config.validate();
    for (const auto& t : triplets) {
        table.index_of(t.anchor);
        table.index_of(t.positive);
        for (const auto& n : t.negatives) table.index_of(n);
    }

    std::vector<std::size_t> by_kind[2];
    for (std::size_t i = 0; i < triplets.size(); ++i)
        by_kind[triplets[i].kind == RelationKind::entailment ? 1 : 0].push_back(i);

    detail::Grad grad(table), velocity(table);
    Rng rng(config.seed, 7);
    std::vector<double> curve;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(by_kind[0]);
        rng.shuffle(by_kind[1]);
        std::size_t cursor[2] = {0, 0};
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        int side = by_kind[0].empty() ? 1 : 0;
        while (cursor[0] < by_kind[0].size() || cursor[1] < by_kind[1].size()) {
            if (cursor[side] >= by_kind[side].size()) side = 1 - side;
            grad.zero();
            std::size_t batch = 0;
            while (batch < static_cast<std::size_t>(config.batch_size) &&
                   cursor[side] < by_kind[side].size()) {
                const auto& t = triplets[by_kind[side][cursor[side]++]];
                epoch_loss += detail::triplet_loss_grad(table, t, config, &grad);
                ++batch;
                ++seen;
            }
            grad.scale(1.0 / static_cast<double>(batch));
            for (std::size_t i = 0; i < table.size(); ++i) {
                for (std::size_t d = 0; d < table.boxes[i].center.size(); ++d) {
                    velocity.center[i][d] = config.momentum * velocity.center[i][d] -
                                            config.learning_rate * grad.center[i][d];
                    velocity.raw_width[i][d] = config.momentum * velocity.raw_width[i][d] -
                                               config.learning_rate * grad.raw_width[i][d];
                    table.boxes[i].center[d] += velocity.center[i][d];
                    table.boxes[i].raw_width[d] += velocity.raw_width[i][d];
                }
            }
            side = 1 - side;
        }
        curve.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
    }
    return curve;
}

/// Fraction of triplets of the requested kind whose positive outranks every
/// negative strictly.
inline double eval_triplet_accuracy(const BoxTable& table,
                                    const std::vector<RelationTriplet>& triplets,
                                    RelationKind kind, const GumbelParams& gumbel = {}) {
    std::size_t hits = 0, total = 0;
    for (const auto& t : triplets) {
        if (t.kind != kind) continue;
        if (t.negatives.empty()) throw input_error("triplet needs at least one negative");
        ++total;
        double pos = log_pair_score(table.at(t.anchor), table.at(t.positive), kind, gumbel);
        bool ok = true;
        for (const auto& n : t.negatives) {
            if (log_pair_score(table.at(t.anchor), table.at(n), kind, gumbel) >= pos) {
                ok = false;
                break;
            }
        }
        if (ok) ++hits;
    }
    if (total == 0) throw input_error("no triplets of the requested kind");
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace boxlab
