#pragma once

// The section tree: sections own paragraphs, figures, tables and
// subsections in document order under a synthetic root titled with the
// document title.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "digest.hpp"
#include "error.hpp"
#include "ingest.hpp"

namespace treereader {

enum class NodeKind { Section, Paragraph, Figure, Table };

inline constexpr std::string_view to_string(NodeKind k) noexcept {
    switch (k) {
    case NodeKind::Section: return "section";
    case NodeKind::Paragraph: return "paragraph";
    case NodeKind::Figure: return "figure";
    case NodeKind::Table: return "table";
    }
    return "?";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
    if (s == "section") return NodeKind::Section;
    if (s == "paragraph") return NodeKind::Paragraph;
    if (s == "figure") return NodeKind::Figure;
    if (s == "table") return NodeKind::Table;
    return std::nullopt;
}

struct DocNode {
    std::string id;
    NodeKind kind = NodeKind::Paragraph;
    std::optional<std::string> title;   // Section
    std::optional<std::string> text;    // Paragraph
    std::optional<std::string> caption; // Figure, Table
    std::vector<std::string> children;
    int order_index = 0;
    int level = 0; // heading rank of a section; 0 for the root and leaves

    [[nodiscard]] bool is_leaf_kind() const noexcept { return kind != NodeKind::Section; }

    /// Title, text or caption: whichever the kind carries.
    [[nodiscard]] const std::string& label() const {
        static const std::string empty;
        switch (kind) {
        case NodeKind::Section: return title ? *title : empty;
        case NodeKind::Paragraph: return text ? *text : empty;
        default: return caption ? *caption : empty;
        }
    }

    friend bool operator==(const DocNode&, const DocNode&) = default;
};

struct SectionTree {
    std::string root_id;
    std::map<std::string, DocNode> nodes;
    std::string abstract_text;

    [[nodiscard]] const DocNode& node(const std::string& id) const {
        const auto it = nodes.find(id);
        if (it == nodes.end()) throw Error(ErrorCode::UnknownNode, id);
        return it->second;
    }
    [[nodiscard]] bool contains(const std::string& id) const { return nodes.count(id) != 0; }
    [[nodiscard]] const DocNode& root() const { return node(root_id); }
    [[nodiscard]] const std::string& title() const { return root().title.value(); }

    friend bool operator==(const SectionTree&, const SectionTree&) = default;
};

/// Stable node id from kind, display text and sibling-index path.
inline std::string node_id_for(NodeKind kind, std::string_view label, std::string_view path) {
    return sha256_fields({to_string(kind), label, path}).substr(0, 16);
}

/// Nests headings by level (a level-k heading closes every open section of
/// level >= k), attaches content to the innermost open section and drops
/// bibliography entries.
inline SectionTree build_tree(const RawDocument& doc) {
    const bool has_content = std::any_of(doc.blocks.begin(), doc.blocks.end(), [](const Block& b) {
        return b.kind == BlockKind::Paragraph || b.kind == BlockKind::Figure || b.kind == BlockKind::Table;
    });
    if (!has_content) throw Error(ErrorCode::EmptyTree, "no paragraphs, figures or tables");

    struct Draft {
        NodeKind kind;
        std::string label;
        int level = 0;
        std::vector<std::size_t> children;
    };
    std::vector<Draft> drafts;
    drafts.push_back({NodeKind::Section, doc.title.empty() ? std::string("Untitled") : doc.title, 0, {}});
    std::vector<std::size_t> open{0};

    for (const auto& block : doc.blocks) {
        switch (block.kind) {
        case BlockKind::ReferenceEntry: continue;
        case BlockKind::Heading: {
            while (open.size() > 1 && drafts[open.back()].level >= block.level) open.pop_back();
            drafts.push_back({NodeKind::Section, block.text, block.level, {}});
            drafts[open.back()].children.push_back(drafts.size() - 1);
            open.push_back(drafts.size() - 1);
            break;
        }
        case BlockKind::Paragraph:
            drafts.push_back({NodeKind::Paragraph, block.text, 0, {}});
            drafts[open.back()].children.push_back(drafts.size() - 1);
            break;
        case BlockKind::Figure:
        case BlockKind::Table:
            drafts.push_back({block.kind == BlockKind::Figure ? NodeKind::Figure : NodeKind::Table,
                              block.caption.value_or(block.text), 0, {}});
            drafts[open.back()].children.push_back(drafts.size() - 1);
            break;
        }
    }

    SectionTree tree;
    tree.abstract_text = doc.abstract_text;
    std::function<std::string(std::size_t, const std::string&, int)> emit =
        [&](std::size_t index, const std::string& path, int order) -> std::string {
        const Draft& d = drafts[index];
        DocNode node;
        node.kind = d.kind;
        node.level = d.level;
        node.order_index = order;
        switch (d.kind) {
        case NodeKind::Section: node.title = d.label; break;
        case NodeKind::Paragraph: node.text = d.label; break;
        default: node.caption = d.label; break;
        }
        node.id = node_id_for(d.kind, d.label, path);
        for (std::size_t i = 0; i < d.children.size(); ++i) {
            const std::string child_path = path.empty() ? std::to_string(i) : path + "." + std::to_string(i);
            node.children.push_back(emit(d.children[i], child_path, static_cast<int>(i)));
        }
        std::string id = node.id;
        tree.nodes.emplace(id, std::move(node));
        return id;
    };
    tree.root_id = emit(0, "", 0);
    return tree;
}

/// Child id -> parent id.
inline std::map<std::string, std::string> parent_map(const SectionTree& tree) {
    std::map<std::string, std::string> parents;
    for (const auto& [id, node] : tree.nodes) {
        for (const auto& child : node.children) parents.emplace(child, id);
    }
    return parents;
}

/// Ids from the root down to `id`, inclusive.
inline std::vector<std::string> path_from_root(const SectionTree& tree, const std::string& id) {
    (void)tree.node(id);
    const auto parents = parent_map(tree);
    std::vector<std::string> path{id};
    for (auto it = parents.find(id); it != parents.end(); it = parents.find(it->second)) {
        path.push_back(it->second);
        if (path.size() > tree.nodes.size()) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

/// Pre-order (document order) walk of the subtree rooted at `id`.
template <typename Visitor>
void walk_preorder(const SectionTree& tree, const std::string& id, Visitor&& visit) {
    std::vector<std::string> stack{id};
    while (!stack.empty()) {
        const std::string current = std::move(stack.back());
        stack.pop_back();
        const DocNode& node = tree.node(current);
        visit(node);
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
}

/// Post-order walk: every child before its parent.
template <typename Visitor>
void walk_postorder(const SectionTree& tree, const std::string& id, Visitor&& visit) {
    const DocNode& node = tree.node(id);
    for (const auto& child : node.children) walk_postorder(tree, child, visit);
    visit(node);
}

/// Figure nodes in the subtree rooted at `node_id`, in document order. A
/// figure's own subtree is itself.
inline std::vector<std::string> subtree_figures(const SectionTree& tree, const std::string& node_id) {
    std::vector<std::string> out;
    walk_preorder(tree, node_id, [&](const DocNode& n) {
        if (n.kind == NodeKind::Figure) out.push_back(n.id);
    });
    return out;
}

/// Non-root nodes in document order, as blocks. Headings come back with
/// their original level.
inline std::vector<Block> flatten(const SectionTree& tree) {
    std::vector<Block> out;
    walk_preorder(tree, tree.root_id, [&](const DocNode& n) {
        if (n.id == tree.root_id) return;
        Block b;
        switch (n.kind) {
        case NodeKind::Section:
            b.kind = BlockKind::Heading;
            b.level = n.level;
            b.text = n.title.value_or("");
            break;
        case NodeKind::Paragraph:
            b.kind = BlockKind::Paragraph;
            b.text = n.text.value_or("");
            break;
        case NodeKind::Figure:
        case NodeKind::Table:
            b.kind = n.kind == NodeKind::Figure ? BlockKind::Figure : BlockKind::Table;
            b.text = n.caption.value_or("");
            b.caption = n.caption;
            break;
        }
        out.push_back(std::move(b));
    });
    return out;
}

struct Violation {
    std::string node_id;
    std::string rule;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

/// Every broken tree invariant, by node id and rule name. Rules:
/// missing-root, id-mismatch, missing-field, leaf-with-children,
/// dangling-child, parent-count, root-has-parent, unreachable, order-index.
inline std::vector<Violation> validate_tree(const SectionTree& tree) {
    std::vector<Violation> out;
    const bool has_root = tree.contains(tree.root_id);
    if (!has_root) out.push_back({tree.root_id, "missing-root", "root id does not resolve"});

    std::map<std::string, int> parent_count;
    for (const auto& [key, node] : tree.nodes) {
        if (key != node.id) out.push_back({key, "id-mismatch", "map key differs from node id " + node.id});
        const bool field_ok = node.kind == NodeKind::Section     ? node.title.has_value()
                              : node.kind == NodeKind::Paragraph ? node.text.has_value()
                                                                 : node.caption.has_value();
        if (!field_ok) out.push_back({key, "missing-field", std::string(to_string(node.kind)) + " lacks its text field"});
        if (node.is_leaf_kind() && !node.children.empty()) {
            out.push_back({key, "leaf-with-children", std::string(to_string(node.kind)) + " has children"});
        }
        int previous_order = -1;
        bool order_ok = true;
        for (const auto& child : node.children) {
            const auto it = tree.nodes.find(child);
            if (it == tree.nodes.end()) {
                out.push_back({key, "dangling-child", "child " + child + " does not resolve"});
                continue;
            }
            ++parent_count[child];
            if (it->second.order_index <= previous_order) order_ok = false;
            previous_order = it->second.order_index;
        }
        if (!order_ok) out.push_back({key, "order-index", "children order_index not strictly increasing"});
    }
    for (const auto& [key, node] : tree.nodes) {
        const int count = parent_count.count(key) ? parent_count.at(key) : 0;
        if (key == tree.root_id) {
            if (count != 0) out.push_back({key, "root-has-parent", "root appears as a child"});
        } else if (count != 1) {
            out.push_back({key, "parent-count", "expected one parent, found " + std::to_string(count)});
        }
    }
    if (has_root) {
        std::set<std::string> seen;
        std::vector<std::string> stack{tree.root_id};
        while (!stack.empty()) {
            const std::string id = stack.back();
            stack.pop_back();
            if (!seen.insert(id).second) continue;
            for (const auto& child : tree.nodes.at(id).children) {
                if (tree.contains(child)) stack.push_back(child);
            }
        }
        for (const auto& [key, node] : tree.nodes) {
            if (!seen.count(key)) out.push_back({key, "unreachable", "not reachable from the root"});
        }
    }
    return out;
}

} // namespace treereader
