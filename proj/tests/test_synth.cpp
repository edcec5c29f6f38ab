#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "boxlab/synth.hpp"

using namespace boxlab;
using Catch::Matchers::WithinAbs;

namespace {

bool same_tree(const GroundTruthTree& a, const GroundTruthTree& b) {
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        if (a.nodes.id(i) != b.nodes.id(i)) return false;
        if (a.nodes.box(i).center() != b.nodes.box(i).center()) return false;
        if (a.nodes.box(i).delta() != b.nodes.box(i).delta()) return false;
    }
    return a.parent == b.parent && a.level == b.level;
}

}  // namespace

TEST_CASE("nested box generation shapes", "[synth]") {
    CHECK(gen_nested_boxes({1, 2, 2, 0.5, 0}).nodes.size() == 1);
    CHECK(gen_nested_boxes({3, 2, 2, 0.5, 1}).nodes.size() == 7);
    CHECK(gen_nested_boxes({4, 3, 2, 0.5, 2}).nodes.size() == 40);

    HierarchySpec bad = {0, 2, 2, 0.5, 0};
    CHECK_THROWS_AS(gen_nested_boxes(bad), input_error);
    bad = {2, 1, 2, 0.5, 0};
    CHECK_THROWS_AS(gen_nested_boxes(bad), input_error);
    bad = {2, 2, 2, 1.0, 0};
    CHECK_THROWS_AS(gen_nested_boxes(bad), input_error);
}

TEST_CASE("generation is deterministic per seed", "[synth]") {
    HierarchySpec spec{3, 3, 4, 0.6, 99};
    CHECK(same_tree(gen_nested_boxes(spec), gen_nested_boxes(spec)));
    HierarchySpec other = spec;
    other.seed = 100;
    CHECK_FALSE(same_tree(gen_nested_boxes(spec), gen_nested_boxes(other)));

    auto tree = gen_nested_boxes(spec);
    auto t1 = gen_triplets(tree, RelationKind::entailment, 2);
    auto t2 = gen_triplets(tree, RelationKind::entailment, 2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].anchor == t2[i].anchor);
        CHECK(t1[i].positive == t2[i].positive);
        CHECK(t1[i].negatives == t2[i].negatives);
    }

    auto held_out = gen_triplets(tree, RelationKind::entailment, 2, /*salt=*/1);
    bool differs = false;
    for (std::size_t i = 0; i < t1.size(); ++i) {
        if (t1[i].negatives != held_out[i].negatives) differs = true;
    }
    CHECK(differs);

    auto s1 = gen_scores(tree, tree.root_id(), 3, 8, 0.5, 7);
    auto s2 = gen_scores(tree, tree.root_id(), 3, 8, 0.5, 7);
    CHECK(s1.entries() == s2.entries());
}

TEST_CASE("containment soundness over whole trees", "[synth]") {
    for (HierarchySpec spec : {HierarchySpec{3, 2, 2, 0.5, 1}, HierarchySpec{4, 3, 3, 0.55, 2},
                               HierarchySpec{5, 2, 6, 0.7, 3}}) {
        auto tree = gen_nested_boxes(spec);
        REQUIRE(tree.nodes.size() <= 200);
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const auto& id = tree.nodes.id(i);
            for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
                const auto& anc = tree.nodes.id(j);
                if (tree.is_ancestor(anc, id)) {
                    CHECK(entailment_prob(tree.nodes.at(id), tree.nodes.at(anc)) == 1.0);
                }
            }
        }
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            auto kids = tree.children_of(tree.nodes.id(i));
            for (std::size_t a = 0; a < kids.size(); ++a) {
                for (std::size_t b = a + 1; b < kids.size(); ++b) {
                    CHECK(entailment_prob(tree.nodes.at(kids[a]), tree.nodes.at(kids[b])) < 1.0);
                    CHECK(entailment_prob(tree.nodes.at(kids[b]), tree.nodes.at(kids[a])) < 1.0);
                }
            }
        }
    }
}

TEST_CASE("volume decreases with level", "[synth]") {
    auto tree = gen_nested_boxes({4, 3, 2, 0.5, 2});
    double vol_by_level[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        int lvl = tree.level.at(tree.nodes.id(i));
        double v = hard_volume(tree.nodes.box(i));
        if (vol_by_level[lvl] == 0) vol_by_level[lvl] = v;
        // Same deltas per level; corner arithmetic may wobble by ulps.
        CHECK_THAT(v, Catch::Matchers::WithinRel(vol_by_level[lvl], 1e-12));
    }
    for (int lvl = 1; lvl < 4; ++lvl) CHECK(vol_by_level[lvl] < vol_by_level[lvl - 1]);
}

TEST_CASE("entailment triplets name true ancestors", "[synth]") {
    auto depth2 = gen_nested_boxes({2, 2, 2, 0.5, 4});
    auto trips = gen_triplets(depth2, RelationKind::entailment, 1);
    REQUIRE(trips.size() == 2);
    for (const auto& t : trips) {
        CHECK(t.positive == depth2.root_id());
        REQUIRE(t.negatives.size() == 1);
        CHECK(depth2.parent.at(t.negatives[0]) == depth2.root_id());
        CHECK(t.negatives[0] != t.anchor);
    }

    auto depth3 = gen_nested_boxes({3, 2, 2, 0.5, 5});
    auto trips3 = gen_triplets(depth3, RelationKind::entailment, 1);
    CHECK(trips3.size() == 6);
    for (const auto& t : trips3) {
        CHECK(depth3.is_ancestor(t.positive, t.anchor));
        for (const auto& n : t.negatives) CHECK_FALSE(depth3.is_ancestor(n, t.anchor));
    }

    auto depth4 = gen_nested_boxes({4, 2, 3, 0.5, 6});
    for (const auto& t : gen_triplets(depth4, RelationKind::entailment, 3)) {
        CHECK(depth4.is_ancestor(t.positive, t.anchor));
        CHECK(t.negatives.size() == 3);
        std::set<std::string> uniq(t.negatives.begin(), t.negatives.end());
        CHECK(uniq.size() == t.negatives.size());
        for (const auto& n : t.negatives) {
            CHECK_FALSE(depth4.is_ancestor(n, t.anchor));
            CHECK(n != t.anchor);
        }
    }

    auto rootonly = gen_nested_boxes({1, 2, 2, 0.5, 0});
    CHECK_THROWS_AS(gen_triplets(rootonly, RelationKind::entailment, 1), input_error);
}

TEST_CASE("similarity triplets pair sibling leaves", "[synth]") {
    auto tree = gen_nested_boxes({3, 3, 2, 0.5, 8});
    auto trips = gen_triplets(tree, RelationKind::similarity, 2);
    CHECK(trips.size() == 9);
    auto leaves = tree.leaves();
    for (const auto& t : trips) {
        CHECK(std::find(leaves.begin(), leaves.end(), t.anchor) != leaves.end());
        CHECK(tree.parent.at(t.positive) == tree.parent.at(t.anchor));
        CHECK(t.positive != t.anchor);
        for (const auto& n : t.negatives) {
            CHECK(tree.parent.at(n) != tree.parent.at(t.anchor));
            CHECK_FALSE(tree.is_ancestor(n, t.anchor));
        }
    }
}

TEST_CASE("planted score fields", "[synth]") {
    auto tree = gen_nested_boxes({3, 2, 2, 0.5, 5});
    auto weak_node = tree.children_of(tree.root_id())[0];

    auto noiseless = gen_scores(tree, weak_node, 3, 8, 0, 1);
    for (const auto& leaf : tree.subtree_leaves(weak_node)) CHECK(noiseless.at(leaf) == 3.0);

    auto noisy = gen_scores(tree, weak_node, 3, 8, 0.5, 5);
    auto weak_leaves = tree.subtree_leaves(weak_node);
    for (const auto& leaf : tree.leaves()) {
        bool weak = std::find(weak_leaves.begin(), weak_leaves.end(), leaf) != weak_leaves.end();
        double s = noisy.at(leaf);
        if (weak) {
            CHECK(s >= 2.5);
            CHECK(s <= 3.5);
        } else {
            CHECK(s >= 7.5);
            CHECK(s <= 8.5);
        }
    }

    auto all_weak = gen_scores(tree, tree.root_id(), 3, 8, 0.25, 2);
    for (const auto& [id, s] : all_weak.entries()) {
        CHECK(s >= 2.75);
        CHECK(s <= 3.25);
    }

    CHECK_THROWS_AS(gen_scores(tree, "nope", 3, 8, 0.5, 1), input_error);
    CHECK_THROWS_AS(gen_scores(tree, weak_node, 8, 3, 0.5, 1), input_error);
}

TEST_CASE("monte carlo oracle sanity", "[synth]") {
    BoxEmbed unit_square({0.5, 0.5}, {0.5, 0.5});
    auto est = monte_carlo_volume({unit_square}, McMode::volume, 1'000'000, 1);
    CHECK_THAT(est.value, WithinAbs(1.0, 3.0 * est.std_error + 1e-12));

    BoxEmbed far({10.0, 10.0}, {0.5, 0.5});
    auto none = monte_carlo_volume({unit_square, far}, McMode::intersection, 10'000, 2);
    CHECK(none.value == 0.0);

    BoxEmbed inner({0.5, 0.5}, {0.25, 0.25});
    auto nested = monte_carlo_volume({unit_square, inner}, McMode::intersection, 1'000'000, 3);
    CHECK_THAT(nested.value, WithinAbs(hard_volume(inner), 3.0 * nested.std_error));

    CHECK_THROWS_AS(monte_carlo_volume({}, McMode::volume, 10'000, 1), input_error);
    CHECK_THROWS_AS(monte_carlo_volume({unit_square}, McMode::volume, 100, 1), input_error);
    BoxEmbed big(std::vector<double>(9, 0.0), std::vector<double>(9, 1.0));
    CHECK_THROWS_AS(monte_carlo_volume({big}, McMode::volume, 10'000, 1), input_error);
}
