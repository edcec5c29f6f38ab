#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/cluster.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

enum class KnnMetric { intersection, entailment, cosine, csdelta, random };

inline std::string to_string(KnnMetric metric) {
    switch (metric) {
        case KnnMetric::intersection: return "intersection";
        case KnnMetric::entailment: return "entailment";
        case KnnMetric::cosine: return "cosine";
        case KnnMetric::csdelta: return "csdelta";
        case KnnMetric::random: return "random";
    }
    throw input_error("bad knn metric");
}

inline KnnMetric knn_metric_from_string(const std::string& name) {
    if (name == "intersection") return KnnMetric::intersection;
    if (name == "entailment") return KnnMetric::entailment;
    if (name == "cosine") return KnnMetric::cosine;
    if (name == "csdelta") return KnnMetric::csdelta;
    if (name == "random") return KnnMetric::random;
    throw input_error("unknown knn metric: " + name);
}

/// Score a held-out query as the mean gold score of its k nearest corpus
/// items. Intersection and entailment rank by the smoothed log quantities so
/// that even disjoint boxes are ordered by proximity instead of collapsing
/// into a tie at zero; exact ties go to the smaller id. The random metric is
/// the control: k corpus items drawn without replacement, geometry unseen.
inline double knn_predict(const BoxEmbed& query, const BoxTable& corpus, const ScoreTable& scores,
                          std::size_t k, KnnMetric metric, std::uint64_t seed = 0) {
    if (k == 0) throw input_error("knn needs k >= 1");
    if (k > corpus.size())
        throw input_error("knn k=" + std::to_string(k) + " exceeds corpus size " +
                          std::to_string(corpus.size()));

    std::vector<std::string> picked;
    picked.reserve(k);
    if (metric == KnnMetric::random) {
        Rng rng(seed, 9);
        std::vector<std::size_t> order(corpus.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i = 0; i < k; ++i) picked.push_back(corpus.id(order[i]));
    } else {
        const VectorEmbed query_center{query.center()};
        const GumbelParams gumbel;
        std::vector<std::pair<double, std::string>> ranked;
        ranked.reserve(corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const BoxEmbed& cand = corpus.box(i);
            double s = 0.0;
            switch (metric) {
                case KnnMetric::intersection:
                    s = log_gumbel_intersection_volume(query, cand, gumbel);
                    break;
                case KnnMetric::entailment:
                    s = log_gumbel_intersection_volume(query, cand, gumbel) -
                        log_gumbel_volume(cand, gumbel);
                    break;
                case KnnMetric::cosine:
                    s = cosine_similarity(VectorEmbed{cand.center()}, query_center);
                    break;
                case KnnMetric::csdelta:
                    s = csdelta_entailment(VectorEmbed{cand.center()}, query_center);
                    break;
                case KnnMetric::random:
                    break;
            }
            ranked.emplace_back(s, corpus.id(i));
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        for (std::size_t i = 0; i < k; ++i) picked.push_back(ranked[i].second);
    }

    double total = 0.0;
    for (const auto& id : picked) total += scores.at(id);
    return total / static_cast<double>(k);
}

inline double rmse(const std::vector<double>& predicted, const std::vector<double>& gold) {
    if (predicted.size() != gold.size())
        throw dimension_mismatch(predicted.size(), gold.size());
    if (predicted.empty()) throw input_error("rmse needs at least one pair");
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double diff = predicted[i] - gold[i];
        total += diff * diff;
    }
    return std::sqrt(total / static_cast<double>(predicted.size()));
}

struct LocalConsistency {
    double method_diff = 0.0;
    double random_diff = 0.0;
    double improvement_percent = 0.0;
};

/// Mean absolute score difference across sibling leaf pairs, against the same
/// statistic with the partner replaced by a uniformly drawn other leaf.
inline LocalConsistency local_score_consistency(const ClusterTree& tree, const ScoreTable& scores,
                                                std::uint64_t seed = 0) {
    auto pairs = leaf_neighbors(tree);
    if (pairs.empty()) throw input_error("tree has no sibling leaf pairs");

    std::vector<std::string> leaves;
    for (const auto& node : tree.nodes)
        if (node.is_leaf()) leaves.push_back(node.leaf_id);

    LocalConsistency out;
    for (const auto& [a, b] : pairs) out.method_diff += std::abs(scores.at(a) - scores.at(b));
    out.method_diff /= static_cast<double>(pairs.size());

    Rng rng(seed, 10);
    std::size_t qualifying = 0;
    for (const auto& [a, b] : pairs) {
        for (const std::string& id : {a, b}) {
            std::size_t self = 0;
            while (leaves[self] != id) ++self;
            std::size_t other = rng.index(leaves.size() - 1);
            if (other >= self) ++other;
            out.random_diff += std::abs(scores.at(id) - scores.at(leaves[other]));
            ++qualifying;
        }
    }
    out.random_diff /= static_cast<double>(qualifying);

    if (out.random_diff > 0.0)
        out.improvement_percent =
            (out.random_diff - out.method_diff) / out.random_diff * 100.0;
    return out;
}

struct SpecificityResult {
    double percent = 0.0;
    double direction_free = 0.0;
};

/// Fraction of labeled pairs where the deeper leaf is the one marked more
/// specific, scored +1 / 0.5 (equal depth) / -1 and scaled to a percentage.
inline SpecificityResult specificity_agreement(const ClusterTree& tree,
                                               const std::vector<SpecificityPair>& pairs) {
    if (pairs.empty()) throw input_error("specificity needs at least one pair");
    auto depths = node_depths(tree);
    double total = 0.0;
    for (const auto& pair : pairs) {
        auto da = depths.find(pair.id_a);
        auto db = depths.find(pair.id_b);
        if (da == depths.end()) throw input_error("unknown leaf id: " + pair.id_a);
        if (db == depths.end()) throw input_error("unknown leaf id: " + pair.id_b);
        if (da->second == db->second) {
            total += 0.5;
            continue;
        }
        char deeper = da->second > db->second ? 'a' : 'b';
        total += deeper == pair.more_specific ? 1.0 : -1.0;
    }
    SpecificityResult out;
    out.percent = total / static_cast<double>(pairs.size()) * 100.0;
    out.direction_free = std::max(out.percent, 100.0 - out.percent);
    return out;
}

struct WeaknessReport {
    double threshold = 0.0;
    std::map<int, int> counts;  // cluster size -> weak clusters at least that large
    int auc = 0;                // counts summed over sizes >= 2
};

/// Flag every tree node whose mean leaf score sits at or below the low-score
/// threshold, then tally how many flagged nodes reach each size. The
/// threshold is the nearest-rank percentile of leaf scores, snapped down to
/// an integer unless integer_snap is off.
inline WeaknessReport weakness_clusters(const ClusterTree& tree, const ScoreTable& scores,
                                        double percentile = 25.0, bool integer_snap = true) {
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw input_error("percentile must be in (0, 100]");

    std::vector<double> leaf_scores;
    for (const auto& node : tree.nodes)
        if (node.is_leaf()) leaf_scores.push_back(scores.at(node.leaf_id));
    std::sort(leaf_scores.begin(), leaf_scores.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(leaf_scores.size())));
    rank = std::max<std::size_t>(rank, 1);

    WeaknessReport report;
    report.threshold = leaf_scores[rank - 1];
    if (integer_snap) report.threshold = std::floor(report.threshold);

    const std::size_t n = leaf_scores.size();
    for (std::size_t t = 1; t <= n; ++t) report.counts[static_cast<int>(t)] = 0;
    for (const auto& node : tree.nodes) {
        double total = 0.0;
        for (const auto& id : node.members) total += scores.at(id);
        double mean = total / static_cast<double>(node.members.size());
        if (mean > report.threshold) continue;
        for (std::size_t t = 1; t <= node.members.size(); ++t)
            report.counts[static_cast<int>(t)] += 1;
    }
    for (std::size_t t = 2; t <= n; ++t) report.auc += report.counts[static_cast<int>(t)];
    return report;
}

struct WeaknessComparison {
    double pair_count_percent = 0.0;  // relative change in size>=2 clusters
    double auc_percent = 0.0;
};

inline WeaknessComparison compare_weakness(const WeaknessReport& a, const WeaknessReport& b) {
    auto count2 = [](const WeaknessReport& r) {
        auto it = r.counts.find(2);
        return it == r.counts.end() ? 0 : it->second;
    };
    if (count2(b) == 0 || b.auc == 0)
        throw input_error("baseline weakness report has no size>=2 clusters");
    WeaknessComparison out;
    out.pair_count_percent =
        static_cast<double>(count2(a) - count2(b)) / static_cast<double>(count2(b)) * 100.0;
    out.auc_percent = static_cast<double>(a.auc - b.auc) / static_cast<double>(b.auc) * 100.0;
    return out;
}

}  // namespace boxlab
