#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"

namespace boxlab {

/// Ordered collection of identified boxes sharing one dimensionality.
class BoxTable {
public:
    BoxTable() = default;
    explicit BoxTable(std::size_t dim) : dim_(dim) {}

    void add(std::string id, BoxEmbed box) {
        if (index_.contains(id)) throw input_error("duplicate box id: " + id);
        if (dim_ == 0) dim_ = box.dim();
        if (box.dim() != dim_) throw dimension_mismatch(box.dim(), dim_);
        index_.emplace(id, boxes_.size());
        ids_.push_back(std::move(id));
        boxes_.push_back(std::move(box));
    }

    std::size_t size() const { return boxes_.size(); }
    bool empty() const { return boxes_.empty(); }
    std::size_t dim() const { return dim_; }

    const std::string& id(std::size_t i) const { return ids_[i]; }
    const BoxEmbed& box(std::size_t i) const { return boxes_[i]; }

    bool has(const std::string& id) const { return index_.contains(id); }

    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw input_error("unknown box id: " + id);
        return it->second;
    }

    const BoxEmbed& at(const std::string& id) const { return boxes_[index_of(id)]; }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<BoxEmbed> boxes_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class RelationKind { similarity, entailment };

inline std::string to_string(RelationKind k) {
    return k == RelationKind::similarity ? "similarity" : "entailment";
}

inline RelationKind relation_kind_from_string(const std::string& s) {
    if (s == "similarity") return RelationKind::similarity;
    if (s == "entailment") return RelationKind::entailment;
    throw input_error("unknown relation kind: " + s);
}

/// (anchor, positive, negatives) with a relation kind.
struct RelationTriplet {
    RelationKind kind;
    std::string anchor;
    std::string positive;
    std::vector<std::string> negatives;
};

/// item id -> real quality score (e.g. 1-10 ratings).
class ScoreTable {
public:
    void set(const std::string& id, double score) {
        if (!std::isfinite(score)) throw input_error("score must be finite for id " + id);
        scores_[id] = score;
    }

    bool has(const std::string& id) const { return scores_.contains(id); }

    double at(const std::string& id) const {
        auto it = scores_.find(id);
        if (it == scores_.end()) throw input_error("no score for id: " + id);
        return it->second;
    }

    std::size_t size() const { return scores_.size(); }

    // ordered map keeps file output deterministic
    const std::map<std::string, double>& entries() const { return scores_; }

private:
    std::map<std::string, double> scores_;
};

/// Annotated specificity comparison between two items.
struct SpecificityPair {
    std::string id_a;
    std::string id_b;
    char more_specific;  // 'a' or 'b'
};

}  // namespace boxlab
