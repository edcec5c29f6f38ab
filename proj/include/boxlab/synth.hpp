#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

struct HierarchySpec {
    int depth = 3;
    int branching = 2;
    int dim = 2;
    double shrink = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (depth < 1) throw input_error("hierarchy depth must be >= 1");
        if (branching < 2) throw input_error("branching must be >= 2");
        if (dim < 1) throw input_error("dim must be >= 1");
        if (!(shrink > 0.0 && shrink < 1.0)) throw input_error("shrink must lie in (0, 1)");
    }
};

/// Nested-box hierarchy with known parent/level structure. Node ids are
/// "n0", "n1", ... in breadth-first order; n0 is the root.
struct GroundTruthTree {
    BoxTable nodes;
    std::unordered_map<std::string, std::string> parent;  // root has no entry
    std::unordered_map<std::string, int> level;           // root = 0
    std::uint64_t seed = 0;

    const std::string& root_id() const { return nodes.id(0); }

    bool is_ancestor(const std::string& anc, const std::string& node) const {
        auto it = parent.find(node);
        while (it != parent.end()) {
            if (it->second == anc) return true;
            it = parent.find(it->second);
        }
        return false;
    }

    std::vector<std::string> children_of(const std::string& id) const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            auto it = parent.find(nodes.id(i));
            if (it != parent.end() && it->second == id) out.push_back(nodes.id(i));
        }
        return out;
    }

    std::vector<std::string> leaves() const {
        std::unordered_set<std::string> parents;
        for (const auto& [child, par] : parent) parents.insert(par);
        std::vector<std::string> out;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!parents.contains(nodes.id(i))) out.push_back(nodes.id(i));
        }
        return out;
    }

    std::vector<std::string> subtree_leaves(const std::string& id) const {
        std::vector<std::string> out;
        for (const auto& leaf : leaves()) {
            if (leaf == id || is_ancestor(id, leaf)) out.push_back(leaf);
        }
        return out;
    }
};

namespace detail {

// Keep children strictly inside the parent with a placement margin so the
// containment invariant survives floating-point corner arithmetic.
inline constexpr double kPlacementMargin = 0.95;

}  // namespace detail

/// Deterministic nested-box generator: the root is the unit box [-1, 1]^dim,
/// every child shrinks its parent's half-widths by `shrink` and is placed
/// uniformly so that it stays strictly inside. Siblings share identical
/// widths, so no sibling can contain another.
inline GroundTruthTree gen_nested_boxes(const HierarchySpec& spec) {
    spec.validate();
    GroundTruthTree tree;
    tree.seed = spec.seed;
    Rng rng(spec.seed, /*stream=*/1);

    std::vector<double> root_center(spec.dim, 0.0), root_delta(spec.dim, 1.0);
    tree.nodes.add("n0", BoxEmbed(root_center, root_delta));
    tree.level["n0"] = 0;

    std::size_t next_id = 1;
    std::vector<std::string> frontier = {"n0"};
    for (int lvl = 1; lvl < spec.depth; ++lvl) {
        std::vector<std::string> next_frontier;
        for (const auto& parent_id : frontier) {
            const BoxEmbed pbox = tree.nodes.at(parent_id);  // copy: add() may reallocate
            std::vector<std::vector<double>> sibling_centers;
            for (int c = 0; c < spec.branching; ++c) {
                std::vector<double> delta(spec.dim), center(spec.dim);
                for (int d = 0; d < spec.dim; ++d) delta[d] = pbox.delta()[d] * spec.shrink;
                for (;;) {
                    for (int d = 0; d < spec.dim; ++d) {
                        double slack = (pbox.delta()[d] - delta[d]) * detail::kPlacementMargin;
                        center[d] = pbox.center()[d] + slack * rng.uniform(-1.0, 1.0);
                    }
                    bool clash = std::any_of(sibling_centers.begin(), sibling_centers.end(),
                                             [&](const auto& s) { return s == center; });
                    if (!clash) break;
                }
                sibling_centers.push_back(center);
                std::string id = "n" + std::to_string(next_id++);
                tree.nodes.add(id, BoxEmbed(center, delta));
                tree.parent[id] = parent_id;
                tree.level[id] = lvl;
                next_frontier.push_back(std::move(id));
            }
        }
        frontier = std::move(next_frontier);
    }
    return tree;
}

/// Relation triplets from a ground-truth tree. Entailment: anchor = any
/// non-root node, positive = its parent, negatives = siblings first, then
/// random non-ancestors. Similarity: anchor = leaf, positive = the next
/// sibling leaf, negatives = leaves under other parents. `salt` selects an
/// independent negative sample, e.g. for held-out evaluation sets.
inline std::vector<RelationTriplet> gen_triplets(const GroundTruthTree& tree, RelationKind kind,
                                                 int negatives_per, std::uint64_t salt = 0) {
    if (negatives_per < 1) throw input_error("negatives_per must be >= 1");
    Rng rng(tree.seed, 2 + (kind == RelationKind::entailment ? 0 : 1) + 16 * (salt + 1));
    std::vector<RelationTriplet> out;

    if (kind == RelationKind::entailment) {
        if (tree.nodes.size() < 2)
            throw input_error("entailment triplets require a tree of depth >= 2");
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const std::string& anchor = tree.nodes.id(i);
            auto pit = tree.parent.find(anchor);
            if (pit == tree.parent.end()) continue;  // root

            std::vector<std::string> siblings;
            for (const auto& s : tree.children_of(pit->second)) {
                if (s != anchor) siblings.push_back(s);
            }
            std::vector<std::string> others;
            for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
                const std::string& cand = tree.nodes.id(j);
                if (cand == anchor || tree.is_ancestor(cand, anchor)) continue;
                if (std::find(siblings.begin(), siblings.end(), cand) != siblings.end()) continue;
                others.push_back(cand);
            }
            rng.shuffle(siblings);
            rng.shuffle(others);
            std::vector<std::string> negatives;
            for (const auto& s : siblings) {
                if (static_cast<int>(negatives.size()) >= negatives_per) break;
                negatives.push_back(s);
            }
            for (const auto& o : others) {
                if (static_cast<int>(negatives.size()) >= negatives_per) break;
                negatives.push_back(o);
            }
            out.push_back({kind, anchor, pit->second, std::move(negatives)});
        }
        return out;
    }

    // similarity
    auto leaves = tree.leaves();
    std::unordered_set<std::string> leaf_set(leaves.begin(), leaves.end());
    for (const auto& anchor : leaves) {
        auto pit = tree.parent.find(anchor);
        if (pit == tree.parent.end()) continue;  // single-node tree
        std::vector<std::string> sibling_leaves;
        for (const auto& s : tree.children_of(pit->second)) {
            if (s != anchor && leaf_set.contains(s)) sibling_leaves.push_back(s);
        }
        if (sibling_leaves.empty()) continue;
        const std::string& positive = sibling_leaves.front();

        std::vector<std::string> pool;
        for (const auto& l : leaves) {
            if (l == anchor) continue;
            auto lp = tree.parent.find(l);
            if (lp != tree.parent.end() && lp->second == pit->second) continue;  // same parent
            pool.push_back(l);
        }
        if (pool.empty()) continue;
        rng.shuffle(pool);
        std::vector<std::string> negatives(pool.begin(),
                                           pool.begin() + std::min<std::size_t>(pool.size(),
                                                                                negatives_per));
        out.push_back({kind, anchor, positive, std::move(negatives)});
    }
    return out;
}

/// Scores with a planted weakness: leaves under `weak_subtree` draw from
/// weak_mean +- noise, all other leaves from strong_mean +- noise, clipped
/// to [1, 10]. Noise is uniform, so a gap above 2 * noise separates the two
/// groups with certainty.
inline ScoreTable gen_scores(const GroundTruthTree& tree, const std::string& weak_subtree,
                             double weak_mean, double strong_mean, double noise,
                             std::uint64_t seed) {
    if (!tree.nodes.has(weak_subtree)) throw input_error("unknown node id: " + weak_subtree);
    if (!(weak_mean < strong_mean)) throw input_error("weak_mean must be below strong_mean");
    if (noise < 0.0) throw input_error("noise must be non-negative");
    Rng rng(seed, 3);
    ScoreTable scores;
    for (const auto& leaf : tree.leaves()) {
        bool weak = (leaf == weak_subtree) || tree.is_ancestor(weak_subtree, leaf);
        double mean = weak ? weak_mean : strong_mean;
        double s = mean + (noise > 0.0 ? rng.uniform(-noise, noise) : 0.0);
        scores.set(leaf, std::clamp(s, 1.0, 10.0));
    }
    return scores;
}

enum class McMode { volume, intersection };

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Uniform-sampling volume oracle over the joint bounding box of the set.
/// volume mode measures the union, intersection mode the common region.
/// Reserved for low dimensions where hit rates stay resolvable.
inline McEstimate monte_carlo_volume(const std::vector<BoxEmbed>& boxes, McMode mode,
                                     std::size_t samples, std::uint64_t seed) {
    if (boxes.empty()) throw input_error("monte_carlo_volume needs at least one box");
    if (samples < 10000) throw input_error("monte_carlo_volume needs >= 10^4 samples");
    std::size_t dim = boxes[0].dim();
    for (const auto& b : boxes) {
        if (b.dim() != dim) throw dimension_mismatch(b.dim(), dim);
    }
    if (dim > 8) throw input_error("monte_carlo_volume is limited to D <= 8");

    BoxEmbed bound = boxes[0];
    for (std::size_t i = 1; i < boxes.size(); ++i) bound = join(bound, boxes[i]);
    double bound_vol = hard_volume(bound);

    Rng rng(seed, 4);
    std::vector<double> pt(dim);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t d = 0; d < dim; ++d)
            pt[d] = rng.uniform(bound.lower(d), bound.upper(d));
        bool hit = (mode == McMode::intersection);
        for (const auto& b : boxes) {
            bool inside = true;
            for (std::size_t d = 0; d < dim; ++d) {
                if (pt[d] < b.lower(d) || pt[d] > b.upper(d)) {
                    inside = false;
                    break;
                }
            }
            if (mode == McMode::intersection) {
                if (!inside) {
                    hit = false;
                    break;
                }
            } else if (inside) {
                hit = true;
                break;
            }
        }
        if (hit) ++hits;
    }
    double p = static_cast<double>(hits) / static_cast<double>(samples);
    McEstimate est;
    est.value = p * bound_vol;
    est.std_error = bound_vol * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    return est;
}

}  // namespace boxlab
