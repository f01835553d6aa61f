#pragma once

// Offline Markdown outline: headings for sections, a label line per
// paragraph, caption lines for figures and tables, and every key point as a
// bullet tagged with its anchor match kind.

#include <algorithm>
#include <string>

#include "summary.hpp"
#include "tree.hpp"
#include "view.hpp"

namespace treereader {

namespace detail {

inline void outline_points(std::string& out, const SummaryMap& summaries, const std::string& id, std::string_view indent) {
    const auto it = summaries.find(id);
    if (it == summaries.end()) return;
    for (const auto& p : it->second.points) {
        const MatchKind kind = p.anchor ? p.anchor->match_kind : MatchKind::Unmatched;
        std::string text = p.point_text;
        std::replace(text.begin(), text.end(), '\n', ' ');
        out.append(indent).append("- ").append(text).append(" [").append(to_string(kind)).append("]\n");
    }
}

inline void outline_node(std::string& out, const SectionTree& tree, const SummaryMap& summaries, const DocNode& node,
                         int depth) {
    switch (node.kind) {
    case NodeKind::Section:
        if (depth > 0) {
            out.append("\n").append(static_cast<std::size_t>(std::min(depth + 1, 6)), '#').append(" ");
            out.append(node.title.value_or("")).append("\n\n");
        }
        outline_points(out, summaries, node.id, "");
        for (const auto& child : node.children) outline_node(out, tree, summaries, tree.node(child), depth + 1);
        break;
    case NodeKind::Paragraph:
        out.append("\n**\xC2\xB6 ").append(display_title(node)).append("**\n\n");
        outline_points(out, summaries, node.id, "  ");
        break;
    case NodeKind::Figure:
    case NodeKind::Table:
        out.append("\n*").append(node.kind == NodeKind::Figure ? "Figure" : "Table").append(": ");
        out.append(node.caption.value_or("")).append("*\n");
        break;
    }
}

} // namespace detail

/// The outline of a summarized tree. Bullet lines ("- " after optional
/// indentation) correspond one-to-one with key points.
inline std::string outline_markdown(const SectionTree& tree, const SummaryMap& summaries) {
    std::string out = "# " + tree.title() + "\n\n";
    if (!tree.abstract_text.empty()) out.append("> ").append(tree.abstract_text).append("\n\n");
    detail::outline_node(out, tree, summaries, tree.root(), 0);
    return out;
}

} // namespace treereader
