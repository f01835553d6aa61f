#pragma once

// Render-ready projection of a section: one card per child, navigation
// affordances and the contextual pane.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "summary.hpp"
#include "tree.hpp"

namespace treereader {

using SummaryMap = std::map<std::string, NodeSummary>;

struct Card {
    std::string child_id;
    NodeKind kind = NodeKind::Paragraph;
    std::string display_title;
    std::vector<KeyPoint> key_points;
    bool can_descend = false;
    std::optional<SummaryStatus> summary_status; // absent until summarized

    friend bool operator==(const Card&, const Card&) = default;
};

struct SourcePanelEntry {
    std::string child_id;
    std::string title;
    std::vector<std::string> key_points;

    friend bool operator==(const SourcePanelEntry&, const SourcePanelEntry&) = default;
};

/// Right-hand pane. For a section focus `children` lists each child's title
/// and key points; for a leaf focus `original_text` holds its own text.
struct ContextualInfo {
    std::vector<std::string> figures;
    std::optional<std::string> original_text;
    std::vector<SourcePanelEntry> children;

    friend bool operator==(const ContextualInfo&, const ContextualInfo&) = default;
};

struct NodeView {
    std::string node_id;
    std::string title;
    std::vector<std::pair<std::string, std::string>> breadcrumb; // (id, title) from the root
    std::optional<std::string> parent_id;
    std::vector<Card> cards;
    ContextualInfo contextual;

    friend bool operator==(const NodeView&, const NodeView&) = default;
};

inline constexpr std::size_t paragraph_title_words = 12;

inline std::string display_title(const DocNode& node) {
    switch (node.kind) {
    case NodeKind::Section: return node.title.value_or("");
    case NodeKind::Paragraph: return first_words(node.text.value_or(""), paragraph_title_words);
    default: return node.caption.value_or("");
    }
}

inline bool can_descend(const DocNode& node) { return node.kind == NodeKind::Section && !node.children.empty(); }

namespace detail {

inline std::vector<SourcePanelEntry> child_digest_entries(const SectionTree& tree, const DocNode& section,
                                                          const SummaryMap& summaries) {
    std::vector<SourcePanelEntry> out;
    for (const auto& child_id : section.children) {
        const DocNode& child = tree.node(child_id);
        SourcePanelEntry entry{child_id, display_title(child), {}};
        if (auto it = summaries.find(child_id); it != summaries.end()) {
            for (const auto& p : it->second.points) entry.key_points.push_back(p.point_text);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace detail

/// Contextual pane for any focused node. A section shows its own subtree's
/// figures and its children's digest; a paragraph, figure or table shows
/// the figures of its enclosing section and its own text.
inline ContextualInfo focus_context(const SectionTree& tree, const SummaryMap& summaries, const std::string& node_id) {
    const DocNode& node = tree.node(node_id);
    ContextualInfo info;
    if (node.kind == NodeKind::Section) {
        info.figures = subtree_figures(tree, node_id);
        info.children = detail::child_digest_entries(tree, node, summaries);
        return info;
    }
    const auto parents = parent_map(tree);
    const auto parent = parents.find(node_id);
    info.figures = subtree_figures(tree, parent != parents.end() ? parent->second : node_id);
    info.original_text = node.label();
    return info;
}

inline NodeView node_view(const SectionTree& tree, const SummaryMap& summaries, const std::string& node_id) {
    const DocNode& node = tree.node(node_id);
    if (node.kind != NodeKind::Section) throw Error(ErrorCode::NotASection, node_id);

    NodeView view;
    view.node_id = node_id;
    view.title = node.title.value_or("");
    const auto path = path_from_root(tree, node_id);
    for (const auto& id : path) view.breadcrumb.emplace_back(id, display_title(tree.node(id)));
    if (path.size() > 1) view.parent_id = path[path.size() - 2];

    for (const auto& child_id : node.children) {
        const DocNode& child = tree.node(child_id);
        Card card;
        card.child_id = child_id;
        card.kind = child.kind;
        card.display_title = display_title(child);
        card.can_descend = can_descend(child);
        if (auto it = summaries.find(child_id); it != summaries.end()) {
            card.key_points = it->second.points;
            card.summary_status = it->second.status;
        }
        view.cards.push_back(std::move(card));
    }
    view.contextual = focus_context(tree, summaries, node_id);
    return view;
}

} // namespace treereader
