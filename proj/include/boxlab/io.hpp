#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/cluster.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw input_error("cannot format number");
    return std::string(buf, ptr);
}

inline input_error line_error(std::size_t line, const std::string& what) {
    return input_error("line " + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& field, std::size_t line) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw line_error(line, "bad number '" + field + "'");
    return value;
}

inline long long parse_int(const std::string& field, std::size_t line) {
    long long value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw line_error(line, "bad integer '" + field + "'");
    return value;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

/// Line source that tracks position and tolerates CRLF and a trailing
/// newline, so error messages can always point at a file line.
class LineReader {
public:
    explicit LineReader(const std::string& path) : in_(path) {
        if (!in_) throw input_error("cannot open " + path);
    }

    bool next(std::string& out) {
        while (std::getline(in_, out)) {
            ++line_;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            return true;
        }
        return false;
    }

    /// True when only blank lines remain.
    bool drained() {
        std::string rest;
        while (std::getline(in_, rest)) {
            ++line_;
            if (!rest.empty() && rest.back() == '\r') rest.pop_back();
            if (!rest.empty()) return false;
        }
        return true;
    }

    std::size_t line() const { return line_; }

private:
    std::ifstream in_;
    std::size_t line_ = 0;
};

inline std::vector<std::string> read_header(LineReader& reader, const std::string& magic,
                                            std::size_t fields) {
    std::string line;
    if (!reader.next(line)) throw input_error("line 1: missing header");
    auto parts = split_tabs(line);
    if (parts.empty() || parts[0] != magic)
        throw line_error(1, "expected '" + magic + "' header");
    if (parts.size() != fields)
        throw line_error(1, "header needs " + std::to_string(fields) + " fields");
    if (parts[1] != "1") throw line_error(1, "unsupported format version '" + parts[1] + "'");
    return parts;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write " + path);
    return out;
}

}  // namespace detail

inline void write_box_table(const BoxTable& table, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "boxlab-boxes\t1\t" << table.size() << '\t' << table.dim() << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.id(i);
        const BoxEmbed& box = table.box(i);
        for (double c : box.center()) out << '\t' << detail::format_double(c);
        for (double d : box.delta()) out << '\t' << detail::format_double(d);
        out << '\n';
    }
    if (!out) throw input_error("cannot write " + path);
}

inline BoxTable read_box_table(const std::string& path) {
    detail::LineReader reader(path);
    auto header = detail::read_header(reader, "boxlab-boxes", 4);
    long long n = detail::parse_int(header[2], 1);
    long long dim = detail::parse_int(header[3], 1);
    if (n < 0 || dim < 0 || (n > 0 && dim == 0))
        throw detail::line_error(1, "bad table shape");

    BoxTable table;
    std::string line;
    for (long long record = 0; record < n; ++record) {
        if (!reader.next(line))
            throw detail::line_error(reader.line() + 1,
                                     "expected " + std::to_string(n) + " records");
        auto fields = detail::split_tabs(line);
        if (fields.size() != 1 + 2 * static_cast<std::size_t>(dim))
            throw detail::line_error(reader.line(), "expected " + std::to_string(1 + 2 * dim) +
                                                        " fields, found " +
                                                        std::to_string(fields.size()));
        if (fields[0].empty()) throw detail::line_error(reader.line(), "empty id");
        std::vector<double> center(dim), delta(dim);
        for (long long d = 0; d < dim; ++d) {
            center[d] = detail::parse_double(fields[1 + d], reader.line());
            delta[d] = detail::parse_double(fields[1 + dim + d], reader.line());
        }
        try {
            table.add(fields[0], BoxEmbed(std::move(center), std::move(delta)));
        } catch (const input_error& e) {
            throw detail::line_error(reader.line(), e.what());
        }
    }
    if (!reader.drained())
        throw detail::line_error(reader.line(), "trailing data after " + std::to_string(n) +
                                                    " records");
    return table;
}

inline void write_scores(const ScoreTable& scores, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "boxlab-scores\t1\t" << scores.size() << '\n';
    for (const auto& [id, value] : scores.entries())
        out << id << '\t' << detail::format_double(value) << '\n';
    if (!out) throw input_error("cannot write " + path);
}

inline ScoreTable read_scores(const std::string& path) {
    detail::LineReader reader(path);
    auto header = detail::read_header(reader, "boxlab-scores", 3);
    long long n = detail::parse_int(header[2], 1);
    if (n < 0) throw detail::line_error(1, "bad score count");

    ScoreTable scores;
    std::string line;
    for (long long record = 0; record < n; ++record) {
        if (!reader.next(line))
            throw detail::line_error(reader.line() + 1,
                                     "expected " + std::to_string(n) + " records");
        auto fields = detail::split_tabs(line);
        if (fields.size() != 2)
            throw detail::line_error(reader.line(), "expected id and score");
        if (fields[0].empty()) throw detail::line_error(reader.line(), "empty id");
        if (scores.has(fields[0]))
            throw detail::line_error(reader.line(), "duplicate id '" + fields[0] + "'");
        double value = detail::parse_double(fields[1], reader.line());
        try {
            scores.set(fields[0], value);
        } catch (const input_error& e) {
            throw detail::line_error(reader.line(), e.what());
        }
    }
    if (!reader.drained())
        throw detail::line_error(reader.line(), "trailing data after " + std::to_string(n) +
                                                    " records");
    return scores;
}

inline void write_pairs(const std::vector<SpecificityPair>& pairs, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "boxlab-pairs\t1\t" << pairs.size() << '\n';
    for (const auto& pair : pairs)
        out << pair.id_a << '\t' << pair.id_b << '\t' << pair.more_specific << '\n';
    if (!out) throw input_error("cannot write " + path);
}

inline std::vector<SpecificityPair> read_pairs(const std::string& path) {
    detail::LineReader reader(path);
    auto header = detail::read_header(reader, "boxlab-pairs", 3);
    long long n = detail::parse_int(header[2], 1);
    if (n < 0) throw detail::line_error(1, "bad pair count");

    std::vector<SpecificityPair> pairs;
    std::string line;
    for (long long record = 0; record < n; ++record) {
        if (!reader.next(line))
            throw detail::line_error(reader.line() + 1,
                                     "expected " + std::to_string(n) + " records");
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw detail::line_error(reader.line(), "expected id_a, id_b, and a|b");
        if (fields[0].empty() || fields[1].empty())
            throw detail::line_error(reader.line(), "empty id");
        if (fields[0] == fields[1])
            throw detail::line_error(reader.line(), "pair references '" + fields[0] + "' twice");
        if (fields[2] != "a" && fields[2] != "b")
            throw detail::line_error(reader.line(), "more-specific flag must be 'a' or 'b'");
        pairs.push_back({fields[0], fields[1], fields[2][0]});
    }
    if (!reader.drained())
        throw detail::line_error(reader.line(), "trailing data after " + std::to_string(n) +
                                                    " records");
    return pairs;
}

inline void write_triplets(const std::vector<RelationTriplet>& triplets, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "boxlab-triplets\t1\t" << triplets.size() << '\n';
    for (const auto& t : triplets) {
        if (t.negatives.empty()) throw input_error("triplet without negatives for " + t.anchor);
        out << to_string(t.kind) << '\t' << t.anchor << '\t' << t.positive;
        for (const auto& n : t.negatives) out << '\t' << n;
        out << '\n';
    }
    if (!out) throw input_error("cannot write " + path);
}

namespace detail {

inline std::vector<RelationTriplet> read_triplets_impl(const std::string& path,
                                                       const std::set<std::string>* known_ids) {
    detail::LineReader reader(path);
    auto header = detail::read_header(reader, "boxlab-triplets", 3);
    long long n = detail::parse_int(header[2], 1);
    if (n < 0) throw detail::line_error(1, "bad triplet count");

    auto check_id = [&](const std::string& id, std::size_t line) {
        if (id.empty()) throw detail::line_error(line, "empty id");
        if (known_ids && !known_ids->contains(id))
            throw detail::line_error(line, "unknown id '" + id + "'");
    };

    std::vector<RelationTriplet> triplets;
    std::string line;
    for (long long record = 0; record < n; ++record) {
        if (!reader.next(line))
            throw detail::line_error(reader.line() + 1,
                                     "expected " + std::to_string(n) + " records");
        auto fields = detail::split_tabs(line);
        if (fields.size() < 4)
            throw detail::line_error(reader.line(),
                                     "expected kind, anchor, positive, and negatives");
        RelationTriplet t;
        try {
            t.kind = relation_kind_from_string(fields[0]);
        } catch (const input_error& e) {
            throw detail::line_error(reader.line(), e.what());
        }
        t.anchor = fields[1];
        t.positive = fields[2];
        check_id(t.anchor, reader.line());
        check_id(t.positive, reader.line());
        for (std::size_t i = 3; i < fields.size(); ++i) {
            check_id(fields[i], reader.line());
            t.negatives.push_back(fields[i]);
        }
        triplets.push_back(std::move(t));
    }
    if (!reader.drained())
        throw detail::line_error(reader.line(), "trailing data after " + std::to_string(n) +
                                                    " records");
    return triplets;
}

}  // namespace detail

/// Triplets usually reference items declared elsewhere; pass the id universe
/// to reject anything the file should not know about.
inline std::vector<RelationTriplet> read_triplets(const std::string& path,
                                                  const std::set<std::string>& known_ids) {
    return detail::read_triplets_impl(path, &known_ids);
}

inline std::vector<RelationTriplet> read_triplets(const std::string& path, const BoxTable& boxes) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < boxes.size(); ++i) ids.insert(boxes.id(i));
    return read_triplets(path, ids);
}

/// Without a universe the file's own ids are taken at face value — the form
/// used by training, where the triplets define the item set.
inline std::vector<RelationTriplet> read_triplets(const std::string& path) {
    return detail::read_triplets_impl(path, nullptr);
}

namespace detail {

inline std::string tree_node_id(const ClusterTree& tree, std::size_t index) {
    const ClusterNode& node = tree.nodes[index];
    return node.is_leaf() ? node.leaf_id : "#" + std::to_string(index);
}

}  // namespace detail

/// One line per node in creation order: id, parent id (-1 on the root),
/// depth, member count, then both corners. Children always precede their
/// parent, which is what lets the reader rebuild member sets in one pass.
inline void write_tree(const ClusterTree& tree, const std::string& path) {
    if (tree.nodes.empty()) throw input_error("empty cluster tree");
    for (const auto& node : tree.nodes)
        if (node.is_leaf() && !node.leaf_id.empty() && node.leaf_id[0] == '#')
            throw input_error("leaf id '" + node.leaf_id + "' collides with internal node ids");

    std::vector<std::string> parent_of(tree.nodes.size(), "-1");
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const ClusterNode& node = tree.nodes[i];
        if (node.is_leaf()) continue;
        parent_of[node.left] = detail::tree_node_id(tree, i);
        parent_of[node.right] = detail::tree_node_id(tree, i);
    }

    std::ofstream out = detail::open_out(path);
    std::size_t dim = tree.nodes[0].box.dim();
    out << "boxlab-tree\t1\t" << tree.nodes.size() << '\t' << dim << '\n';
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const ClusterNode& node = tree.nodes[i];
        out << detail::tree_node_id(tree, i) << '\t' << parent_of[i] << '\t' << node.depth << '\t'
            << node.members.size();
        for (std::size_t d = 0; d < dim; ++d) out << '\t'
                                                  << detail::format_double(node.box.lower(d));
        for (std::size_t d = 0; d < dim; ++d) out << '\t'
                                                  << detail::format_double(node.box.upper(d));
        out << '\n';
    }
    if (!out) throw input_error("cannot write " + path);
}

inline ClusterTree read_tree(const std::string& path) {
    detail::LineReader reader(path);
    auto header = detail::read_header(reader, "boxlab-tree", 4);
    long long n = detail::parse_int(header[2], 1);
    long long dim = detail::parse_int(header[3], 1);
    if (n <= 0 || dim <= 0) throw detail::line_error(1, "bad tree shape");
    if (n % 2 == 0) throw detail::line_error(1, "binary merge trees have an odd node count");

    struct RawNode {
        std::string id;
        std::string parent;
        int depth = 0;
        std::size_t member_count = 0;
        std::size_t line = 0;
    };

    ClusterTree tree;
    std::vector<RawNode> raw;
    std::map<std::string, std::size_t> index;
    std::string line;
    for (long long record = 0; record < n; ++record) {
        if (!reader.next(line))
            throw detail::line_error(reader.line() + 1,
                                     "expected " + std::to_string(n) + " nodes");
        auto fields = detail::split_tabs(line);
        if (fields.size() != 4 + 2 * static_cast<std::size_t>(dim))
            throw detail::line_error(reader.line(), "expected " + std::to_string(4 + 2 * dim) +
                                                        " fields, found " +
                                                        std::to_string(fields.size()));
        RawNode node;
        node.id = fields[0];
        node.parent = fields[1];
        node.line = reader.line();
        if (node.id.empty()) throw detail::line_error(reader.line(), "empty node id");
        if (index.contains(node.id))
            throw detail::line_error(reader.line(), "duplicate node id '" + node.id + "'");
        node.depth = static_cast<int>(detail::parse_int(fields[2], reader.line()));
        long long count = detail::parse_int(fields[3], reader.line());
        if (node.depth < 0 || count <= 0)
            throw detail::line_error(reader.line(), "bad depth or member count");
        node.member_count = static_cast<std::size_t>(count);

        std::vector<double> lo(dim), hi(dim);
        for (long long d = 0; d < dim; ++d) {
            lo[d] = detail::parse_double(fields[4 + d], reader.line());
            hi[d] = detail::parse_double(fields[4 + dim + d], reader.line());
        }
        BoxEmbed box = [&] {
            try {
                return BoxEmbed::from_corners(lo, hi);
            } catch (const input_error& e) {
                throw detail::line_error(reader.line(), e.what());
            }
        }();

        index.emplace(node.id, raw.size());
        raw.push_back(node);
        tree.nodes.push_back(ClusterNode{std::move(box), {}, -1, -1, node.depth, ""});
    }
    if (!reader.drained())
        throw detail::line_error(reader.line(), "trailing data after " + std::to_string(n) +
                                                    " nodes");

    std::size_t roots = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].parent == "-1") {
            ++roots;
            if (raw[i].depth != 0)
                throw detail::line_error(raw[i].line, "root must have depth 0");
            continue;
        }
        auto it = index.find(raw[i].parent);
        if (it == index.end())
            throw detail::line_error(raw[i].line, "unknown parent id '" + raw[i].parent + "'");
        std::size_t p = it->second;
        if (p <= i)
            throw detail::line_error(raw[i].line, "parent '" + raw[i].parent +
                                                      "' must come after its children");
        ClusterNode& parent = tree.nodes[p];
        if (parent.left < 0)
            parent.left = static_cast<int>(i);
        else if (parent.right < 0)
            parent.right = static_cast<int>(i);
        else
            throw detail::line_error(raw[i].line,
                                     "node '" + raw[i].parent + "' has more than two children");
        if (raw[i].depth != raw[p].depth + 1)
            throw detail::line_error(raw[i].line, "depth must be one below the parent");
    }
    if (roots != 1) throw input_error("tree must have exactly one root");
    if (raw.back().parent != "-1")
        throw detail::line_error(raw.back().line, "last node must be the root");

    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        ClusterNode& node = tree.nodes[i];
        if (node.left >= 0 && node.right < 0)
            throw detail::line_error(raw[i].line, "node '" + raw[i].id + "' has only one child");
        if (node.is_leaf()) {
            node.leaf_id = raw[i].id;
            node.members = {raw[i].id};
            tree.leaf_index.emplace(raw[i].id, i);
        } else {
            node.members = tree.nodes[node.left].members;
            node.members.insert(tree.nodes[node.right].members.begin(),
                                tree.nodes[node.right].members.end());
        }
        if (node.members.size() != raw[i].member_count)
            throw detail::line_error(raw[i].line,
                                     "member count does not match the subtree");
    }
    return tree;
}

}  // namespace boxlab
