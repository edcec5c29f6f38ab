#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

/// Volume-based join distance: how much dead space the bounding join adds
/// over the plain union. Hard volumes on purpose: containment then gives
/// exactly zero, which is what makes this a useful linkage. All four volumes
/// are taken straight from the shared corner values and the subtraction is
/// grouped so that either containment direction cancels term by term.
inline double join_distance(const BoxEmbed& a, const BoxEmbed& b) {
    check_same_dim(a, b);
    const std::size_t dim = a.dim();
    if (dim <= kLogSpaceDim) {
        double vj = 1.0, va = 1.0, vb = 1.0, vi = 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            vj *= std::max(a.upper(d), b.upper(d)) - std::min(a.lower(d), b.lower(d));
            va *= a.upper(d) - a.lower(d);
            vb *= b.upper(d) - b.lower(d);
            vi *= std::max(0.0,
                           std::min(a.upper(d), b.upper(d)) - std::max(a.lower(d), b.lower(d)));
        }
        return std::max(0.0, (vj - va) - (vb - vi));
    }
    // High dimension: factor the join volume out of every term before
    // exponentiating, so the differences stay representable.
    double lj = 0.0, la = 0.0, lb = 0.0, li = 0.0;
    bool empty = false;
    for (std::size_t d = 0; d < dim; ++d) {
        lj += std::log(std::max(a.upper(d), b.upper(d)) - std::min(a.lower(d), b.lower(d)));
        la += std::log(a.upper(d) - a.lower(d));
        lb += std::log(b.upper(d) - b.lower(d));
        double overlap = std::min(a.upper(d), b.upper(d)) - std::max(a.lower(d), b.lower(d));
        if (overlap <= 0.0)
            empty = true;
        else
            li += std::log(overlap);
    }
    double xi = empty ? 0.0 : std::exp(li - lj);
    double rest = (1.0 - std::exp(la - lj)) - (std::exp(lb - lj) - xi);
    return std::max(0.0, std::exp(lj) * rest);
}

struct ClusterNode {
    BoxEmbed box;
    std::set<std::string> members;
    int left = -1;   // node indices; -1 on leaves
    int right = -1;
    int depth = 0;
    std::string leaf_id;  // empty on internal nodes

    bool is_leaf() const { return left < 0; }
};

/// Binary merge tree in creation order: the N leaves come first, every merge
/// appends a node, the root is the last entry.
struct ClusterTree {
    std::vector<ClusterNode> nodes;
    std::unordered_map<std::string, std::size_t> leaf_index;

    std::size_t leaf_count() const { return (nodes.size() + 1) / 2; }
    std::size_t root() const {
        if (nodes.empty()) throw input_error("empty cluster tree");
        return nodes.size() - 1;
    }
    const ClusterNode& leaf(const std::string& id) const {
        auto it = leaf_index.find(id);
        if (it == leaf_index.end()) throw input_error("unknown leaf id: " + id);
        return nodes[it->second];
    }
};

inline double join_distance(const ClusterNode& a, const ClusterNode& b) {
    return join_distance(a.box, b.box);
}

namespace detail {

inline void assign_depths(ClusterTree& tree) {
    if (tree.nodes.empty()) return;
    std::vector<std::size_t> stack = {tree.root()};
    tree.nodes[tree.root()].depth = 0;
    while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        const ClusterNode& node = tree.nodes[i];
        if (node.is_leaf()) continue;
        tree.nodes[node.left].depth = node.depth + 1;
        tree.nodes[node.right].depth = node.depth + 1;
        stack.push_back(static_cast<std::size_t>(node.left));
        stack.push_back(static_cast<std::size_t>(node.right));
    }
}

}  // namespace detail

/// Greedy agglomeration under join_distance. Ties go to the pair with the
/// lexicographically smallest creation indices, which makes the tree a pure
/// function of the input order.
inline ClusterTree agglomerate(const BoxTable& table) {
    if (table.size() == 0) throw input_error("agglomerate needs at least one box");
    ClusterTree tree;
    for (std::size_t i = 0; i < table.size(); ++i) {
        ClusterNode leaf{table.box(i), {table.id(i)}, -1, -1, 0, table.id(i)};
        tree.leaf_index.emplace(table.id(i), i);
        tree.nodes.push_back(std::move(leaf));
    }

    std::vector<std::size_t> active(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) active[i] = i;

    // dist[i][j] for j < i, filled when node i is created, freed on merge.
    std::vector<std::vector<double>> dist(table.size());
    for (std::size_t i = 1; i < table.size(); ++i) {
        dist[i].resize(i);
        for (std::size_t j = 0; j < i; ++j)
            dist[i][j] = join_distance(tree.nodes[i].box, tree.nodes[j].box);
    }

    while (active.size() > 1) {
        // active stays sorted by creation index (erase preserves order, new
        // nodes get the largest index yet), so this scan sees candidate pairs
        // in lexicographic (min,max) order and strict < keeps the first tie.
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                std::size_t lo = std::min(active[a], active[b]);
                std::size_t hi = std::max(active[a], active[b]);
                double d = dist[hi][lo];
                if (d < best) {
                    best = d;
                    bi = lo;
                    bj = hi;
                }
            }
        }

        ClusterNode merged{join(tree.nodes[bi].box, tree.nodes[bj].box), {}, static_cast<int>(bi),
                           static_cast<int>(bj), 0, ""};
        merged.members = tree.nodes[bi].members;
        merged.members.insert(tree.nodes[bj].members.begin(), tree.nodes[bj].members.end());
        std::size_t ni = tree.nodes.size();
        tree.nodes.push_back(std::move(merged));

        active.erase(std::remove_if(active.begin(), active.end(),
                                    [&](std::size_t x) { return x == bi || x == bj; }),
                     active.end());
        dist[bi].clear();
        dist[bi].shrink_to_fit();
        dist[bj].clear();
        dist[bj].shrink_to_fit();
        dist.emplace_back();
        dist[ni].resize(ni);
        for (std::size_t other : active)
            dist[ni][other] = join_distance(tree.nodes[ni].box, tree.nodes[other].box);
        active.push_back(ni);
    }

    detail::assign_depths(tree);
    return tree;
}

/// Sibling leaf pairs: both children of some merge are leaves. Each
/// qualifying leaf appears in exactly one pair.
inline std::vector<std::pair<std::string, std::string>> leaf_neighbors(const ClusterTree& tree) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const ClusterNode& l = tree.nodes[node.left];
        const ClusterNode& r = tree.nodes[node.right];
        if (l.is_leaf() && r.is_leaf()) pairs.emplace_back(l.leaf_id, r.leaf_id);
    }
    return pairs;
}

/// Leaf depths as edge counts from the root.
inline std::unordered_map<std::string, int> node_depths(const ClusterTree& tree) {
    std::unordered_map<std::string, int> depths;
    for (const auto& [id, idx] : tree.leaf_index) depths[id] = tree.nodes[idx].depth;
    return depths;
}

}  // namespace boxlab
