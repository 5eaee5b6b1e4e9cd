#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hierlogit/detail/rng.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"

namespace hierlogit {

using NodeId = std::size_t;

/// Node sequence from a terminal up to the root, both inclusive.
using AncestralPath = std::vector<NodeId>;

/// Immutable rooted label tree whose leaves are index-aligned with logit positions.
///
/// Node ids are dense and assigned in order of first appearance in the edge
/// list; children keep the order in which their edges were given.
class LabelHierarchy {
public:
    using Edge = std::pair<std::string, std::string>;  // (child, parent)

    /// Validates and builds a tree. Throws ParseError on any structural defect.
    static LabelHierarchy build(std::vector<std::string> terminal_names, const std::vector<Edge>& edges);

    std::size_t node_count() const noexcept { return names_.size(); }
    std::size_t terminal_count() const noexcept { return terminal_nodes_.size(); }
    NodeId root() const noexcept { return root_; }

    const std::string& name(NodeId node) const { return names_.at(node); }
    std::optional<NodeId> parent(NodeId node) const {
        check(node);
        return node == root_ ? std::nullopt : std::optional<NodeId>(parents_[node]);
    }
    std::span<const NodeId> children(NodeId node) const { return children_.at(node); }
    std::size_t depth(NodeId node) const { return depths_.at(node); }
    bool is_terminal(NodeId node) const { return terminal_index(node).has_value(); }
    std::optional<std::size_t> terminal_index(NodeId node) const {
        check(node);
        const auto idx = terminal_of_node_[node];
        return idx == kNone ? std::nullopt : std::optional<std::size_t>(idx);
    }

    NodeId terminal_node(std::size_t label) const {
        if (label >= terminal_nodes_.size()) {
            throw InvalidArgument("unknown terminal index " + std::to_string(label));
        }
        return terminal_nodes_[label];
    }
    std::span<const std::string> terminal_names() const noexcept { return terminal_names_; }

    std::optional<NodeId> find(std::string_view node_name) const {
        const auto it = index_.find(std::string(node_name));
        return it == index_.end() ? std::nullopt : std::optional<NodeId>(it->second);
    }

    /// Sorted terminal indices under node (the node itself when terminal).
    std::span<const std::size_t> terminal_descendants(NodeId node) const { return descendants_.at(node); }

    /// Edges in root-first pre-order; feeding them back to build() reproduces this tree.
    std::vector<Edge> edges() const;

    /// Same names, same parent of every node, same child order, same terminal order.
    friend bool operator==(const LabelHierarchy& a, const LabelHierarchy& b);

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    void check(NodeId node) const {
        if (node >= names_.size()) {
            throw InvalidArgument("unknown node id " + std::to_string(node));
        }
    }

    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> index_;
    std::vector<NodeId> parents_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<std::size_t> depths_;
    std::vector<std::string> terminal_names_;
    std::vector<NodeId> terminal_nodes_;
    std::vector<std::size_t> terminal_of_node_;
    std::vector<std::vector<std::size_t>> descendants_;
    NodeId root_ = 0;
};

inline LabelHierarchy LabelHierarchy::build(std::vector<std::string> terminal_names, const std::vector<Edge>& edges) {
    using K = ParseError::Kind;
    LabelHierarchy h;

    {
        std::unordered_map<std::string, std::size_t> seen;
        for (const auto& t : terminal_names) {
            if (t.empty()) {
                throw ParseError(K::Syntax, "empty terminal name in header");
            }
            if (!seen.emplace(t, 0).second) {
                throw ParseError(K::DuplicateNode, "terminal '" + t + "' listed twice in header");
            }
        }
    }

    auto intern = [&h](const std::string& n) {
        auto [it, inserted] = h.index_.emplace(n, h.names_.size());
        if (inserted) {
            h.names_.push_back(n);
            h.parents_.push_back(kNone);
            h.children_.emplace_back();
        }
        return it->second;
    };

    for (const auto& [child, parent] : edges) {
        if (child.empty() || parent.empty()) {
            throw ParseError(K::Syntax, "edge with an empty node name");
        }
        if (child == parent) {
            throw ParseError(K::Cycle, "node '" + child + "' is its own parent");
        }
        const NodeId c = intern(child);
        const NodeId p = intern(parent);
        if (h.parents_[c] != kNone) {
            if (h.parents_[c] == p) {
                throw ParseError(K::DuplicateNode, "edge '" + child + "' -> '" + parent + "' given twice");
            }
            throw ParseError(K::MultipleParents, "node '" + child + "' has more than one parent");
        }
        h.parents_[c] = p;
        h.children_[p].push_back(c);
    }

    const std::size_t n = h.names_.size();

    // Parent chains must terminate: 0 = unvisited, 1 = on current chain, 2 = done.
    std::vector<std::uint8_t> state(n, 0);
    for (NodeId start = 0; start < n; ++start) {
        std::vector<NodeId> chain;
        NodeId cur = start;
        while (cur != kNone && state[cur] == 0) {
            state[cur] = 1;
            chain.push_back(cur);
            cur = h.parents_[cur];
        }
        if (cur != kNone && state[cur] == 1) {
            throw ParseError(K::Cycle, "cycle through node '" + h.names_[cur] + "'");
        }
        for (NodeId v : chain) {
            state[v] = 2;
        }
    }

    std::vector<NodeId> roots;
    for (NodeId v = 0; v < n; ++v) {
        if (h.parents_[v] == kNone) {
            roots.push_back(v);
        }
    }
    if (roots.size() != 1) {
        std::string msg = "expected exactly one root, found " + std::to_string(roots.size());
        for (NodeId r : roots) {
            msg += " '" + h.names_[r] + "'";
        }
        throw ParseError(roots.empty() ? K::Cycle : K::MultipleRoots, msg);
    }
    h.root_ = roots.front();

    h.terminal_of_node_.assign(n, kNone);
    for (std::size_t t = 0; t < terminal_names.size(); ++t) {
        const auto it = h.index_.find(terminal_names[t]);
        if (it == h.index_.end()) {
            throw ParseError(K::OrphanNode, "terminal '" + terminal_names[t] + "' does not appear in any edge");
        }
        if (!h.children_[it->second].empty()) {
            throw ParseError(K::TerminalMismatch, "terminal '" + terminal_names[t] + "' has children");
        }
        h.terminal_nodes_.push_back(it->second);
        h.terminal_of_node_[it->second] = t;
    }
    std::size_t leaves = 0;
    for (NodeId v = 0; v < n; ++v) {
        if (h.children_[v].empty()) {
            ++leaves;
            if (h.terminal_of_node_[v] == kNone) {
                throw ParseError(K::TerminalMismatch, "leaf '" + h.names_[v] + "' is not listed as a terminal");
            }
        }
    }
    if (leaves != terminal_names.size()) {
        throw ParseError(K::TerminalMismatch, "header lists " + std::to_string(terminal_names.size()) +
                                                  " terminals but the tree has " + std::to_string(leaves) + " leaves");
    }
    h.terminal_names_ = std::move(terminal_names);

    // Pre-order walk gives depths; reverse pre-order accumulates descendants bottom-up.
    std::vector<NodeId> order;
    order.reserve(n);
    h.depths_.assign(n, 0);
    std::vector<NodeId> stack{h.root_};
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        order.push_back(v);
        const auto& kids = h.children_[v];
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
            h.depths_[*it] = h.depths_[v] + 1;
            stack.push_back(*it);
        }
    }
    h.descendants_.assign(n, {});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeId v = *it;
        auto& td = h.descendants_[v];
        if (h.terminal_of_node_[v] != kNone) {
            td.push_back(h.terminal_of_node_[v]);
        }
        for (NodeId c : h.children_[v]) {
            td.insert(td.end(), h.descendants_[c].begin(), h.descendants_[c].end());
        }
        std::sort(td.begin(), td.end());
    }
    return h;
}

inline std::vector<LabelHierarchy::Edge> LabelHierarchy::edges() const {
    std::vector<Edge> out;
    out.reserve(names_.size() - 1);
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        if (v != root_) {
            out.emplace_back(names_[v], names_[parents_[v]]);
        }
        const auto& kids = children_[v];
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
            stack.push_back(*it);
        }
    }
    return out;
}

inline bool operator==(const LabelHierarchy& a, const LabelHierarchy& b) {
    if (a.terminal_names_ != b.terminal_names_ || a.names_.size() != b.names_.size()) {
        return false;
    }
    for (NodeId v = 0; v < a.names_.size(); ++v) {
        const auto other = b.find(a.names_[v]);
        if (!other) {
            return false;
        }
        const bool a_root = v == a.root_;
        const bool b_root = *other == b.root_;
        if (a_root != b_root) {
            return false;
        }
        if (!a_root && a.names_[a.parents_[v]] != b.names_[b.parents_[*other]]) {
            return false;
        }
        const auto& ka = a.children_[v];
        const auto& kb = b.children_[*other];
        if (ka.size() != kb.size()) {
            return false;
        }
        for (std::size_t i = 0; i < ka.size(); ++i) {
            if (a.names_[ka[i]] != b.names_[kb[i]]) {
                return false;
            }
        }
    }
    return true;
}

/// Parses the edge-list format:
///
///     terminals: a,b,c
///     a<TAB>R
///     ...
///
/// Blank lines and lines starting with '#' are ignored anywhere.
inline LabelHierarchy parse_hierarchy(std::string_view text) {
    using K = ParseError::Kind;
    std::optional<std::vector<std::string>> terminals;
    std::vector<LabelHierarchy::Edge> edges;
    std::size_t line_no = 0;
    for (auto raw : detail::lines(text)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!terminals) {
            constexpr std::string_view tag = "terminals:";
            if (line.substr(0, tag.size()) != tag) {
                throw ParseError(K::MissingHeader, "line " + std::to_string(line_no) + ": expected 'terminals:' header");
            }
            terminals.emplace();
            for (auto name : detail::split(line.substr(tag.size()), ',')) {
                terminals->emplace_back(detail::trim(name));
            }
            continue;
        }
        const auto fields = detail::split(raw, '\t');
        if (fields.size() != 2) {
            throw ParseError(K::Syntax, "line " + std::to_string(line_no) + ": expected 'child<TAB>parent'");
        }
        edges.emplace_back(std::string(detail::trim(fields[0])), std::string(detail::trim(fields[1])));
    }
    if (!terminals) {
        throw ParseError(K::MissingHeader, "missing 'terminals:' header");
    }
    return LabelHierarchy::build(std::move(*terminals), edges);
}

inline std::string serialize_hierarchy(const LabelHierarchy& h) {
    std::vector<std::string> names(h.terminal_names().begin(), h.terminal_names().end());
    std::string out = "terminals: " + detail::join(names, ",") + "\n";
    for (const auto& [child, parent] : h.edges()) {
        out += child + "\t" + parent + "\n";
    }
    return out;
}

/// Path from the leaf holding `label` up to the root.
inline AncestralPath ancestral_path(const LabelHierarchy& h, std::size_t label) {
    AncestralPath path;
    path.reserve(h.depth(h.terminal_node(label)) + 1);
    std::optional<NodeId> cur = h.terminal_node(label);
    while (cur) {
        path.push_back(*cur);
        cur = h.parent(*cur);
    }
    return path;
}

inline AncestralPath ancestral_path(const LabelHierarchy& h, std::string_view leaf) {
    const auto node = h.find(leaf);
    if (!node || !h.is_terminal(*node)) {
        throw InvalidArgument("unknown terminal '" + std::string(leaf) + "'");
    }
    return ancestral_path(h, *h.terminal_index(*node));
}

inline std::vector<std::size_t> terminal_descendants(const LabelHierarchy& h, std::string_view node) {
    const auto id = h.find(node);
    if (!id) {
        throw InvalidArgument("unknown node '" + std::string(node) + "'");
    }
    const auto td = h.terminal_descendants(*id);
    return {td.begin(), td.end()};
}

/// Moves terminal names between leaf slots: the leaf that held label k now
/// holds label permutation[k]. Internal structure and terminal order are kept.
inline LabelHierarchy permute_terminals(const LabelHierarchy& h, std::span<const std::size_t> permutation) {
    const std::size_t n = h.terminal_count();
    if (permutation.size() != n) {
        throw InvalidArgument("permutation size does not match terminal count");
    }
    std::vector<bool> used(n, false);
    for (std::size_t p : permutation) {
        if (p >= n || used[p]) {
            throw InvalidArgument("not a permutation of terminal indices");
        }
        used[p] = true;
    }
    std::map<std::string, std::string> rename;
    for (std::size_t k = 0; k < n; ++k) {
        rename[h.name(h.terminal_node(k))] = h.terminal_names()[permutation[k]];
    }
    auto edges = h.edges();
    for (auto& [child, parent] : edges) {
        if (const auto it = rename.find(child); it != rename.end()) {
            child = it->second;
        }
    }
    return LabelHierarchy::build({h.terminal_names().begin(), h.terminal_names().end()}, edges);
}

/// Seeded random relabelling of leaf positions with the tree shape held fixed.
inline LabelHierarchy shuffle_terminals(const LabelHierarchy& h, std::uint64_t seed) {
    std::vector<std::size_t> perm(h.terminal_count());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    detail::Rng rng(seed);
    rng.shuffle(perm);
    return permute_terminals(h, perm);
}

}  // namespace hierlogit
