#pragma once

// Ingestion: publisher-style HTML and Markdown into an ordered stream of
// normalized blocks with offsets into one normalized source text.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "digest.hpp"
#include "error.hpp"
#include "html_tokenizer.hpp"
#include "text.hpp"

namespace treereader {

enum class BlockKind { Heading, Paragraph, Figure, Table, ReferenceEntry };
enum class SourceFormat { Html, Markdown };

inline constexpr std::string_view to_string(BlockKind k) noexcept {
    switch (k) {
    case BlockKind::Heading: return "heading";
    case BlockKind::Paragraph: return "paragraph";
    case BlockKind::Figure: return "figure";
    case BlockKind::Table: return "table";
    case BlockKind::ReferenceEntry: return "reference";
    }
    return "?";
}

inline constexpr std::string_view to_string(SourceFormat f) noexcept {
    return f == SourceFormat::Html ? "html" : "markdown";
}

inline std::optional<SourceFormat> parse_source_format(std::string_view s) {
    if (s == "html" || s == "htm") return SourceFormat::Html;
    if (s == "markdown" || s == "md") return SourceFormat::Markdown;
    return std::nullopt;
}

struct Block {
    BlockKind kind = BlockKind::Paragraph;
    int level = 0; // heading rank, 1..6; zero for other kinds
    std::string text;
    std::optional<std::string> caption; // Figure and Table only
    Span source_span;                   // into RawDocument::source_text

    friend bool operator==(const Block&, const Block&) = default;
};

struct RawDocument {
    std::string title;
    std::string abstract_text;
    std::vector<Block> blocks;
    std::string source_id;
    SourceFormat format = SourceFormat::Html;
    /// Normalized block texts joined by '\n'. Every block span slices it.
    std::string source_text;

    friend bool operator==(const RawDocument&, const RawDocument&) = default;
};

namespace detail {

struct DraftBlock {
    BlockKind kind = BlockKind::Paragraph;
    int level = 0;
    std::string text;
    std::string caption;
};

inline std::string folded_key(std::string_view s) {
    std::string key = normalized(s, {.casefold = true});
    while (!key.empty() && (key.back() == ':' || key.back() == '.')) key.pop_back();
    // Drop a leading section number such as "7" or "7.1".
    std::size_t i = 0;
    while (i < key.size() && (std::isdigit(static_cast<unsigned char>(key[i])) || key[i] == '.')) ++i;
    if (i > 0 && i < key.size() && key[i] == ' ') key.erase(0, i + 1);
    return key;
}

inline bool is_reference_heading(std::string_view heading) {
    const std::string key = folded_key(heading);
    return key == "references" || key == "bibliography" || key == "literature cited" ||
           key == "works cited" || key == "reference list";
}

inline bool is_abstract_heading(std::string_view heading) { return folded_key(heading) == "abstract"; }

inline RawDocument finalize(std::vector<DraftBlock> drafts, std::string title, SourceFormat format,
                            std::string_view source_bytes, bool drop_title_heading) {
    RawDocument doc;
    doc.format = format;
    doc.source_id = sha256_hex(source_bytes);
    doc.title = normalized(title);

    std::vector<DraftBlock> blocks;
    int figure_count = 0;
    int table_count = 0;
    for (auto& d : drafts) {
        d.text = normalized(d.text);
        d.caption = normalized(d.caption);
        if (d.kind == BlockKind::Figure || d.kind == BlockKind::Table) {
            const bool figure = d.kind == BlockKind::Figure;
            const int n = figure ? ++figure_count : ++table_count;
            if (d.caption.empty()) {
                d.caption = std::string(figure ? "(uncaptioned figure " : "(uncaptioned table ") +
                            std::to_string(n) + ")";
            }
            d.text = d.caption;
        } else if (d.text.empty()) {
            continue;
        }
        if (d.kind == BlockKind::Heading) d.level = std::clamp(d.level, 1, 6);
        blocks.push_back(std::move(d));
    }

    // Everything under a bibliography heading is a reference entry.
    int reference_level = 0; // 0: not inside a bibliography
    for (auto& b : blocks) {
        if (b.kind == BlockKind::Heading) {
            if (reference_level > 0 && b.level <= reference_level) reference_level = 0;
            if (is_reference_heading(b.text)) reference_level = b.level;
        } else if (reference_level > 0 && b.kind == BlockKind::Paragraph) {
            b.kind = BlockKind::ReferenceEntry;
        }
    }

    if (doc.title.empty()) {
        auto first_heading = std::find_if(blocks.begin(), blocks.end(),
                                          [](const DraftBlock& b) { return b.kind == BlockKind::Heading; });
        doc.title = first_heading != blocks.end() ? first_heading->text : "Untitled";
    } else if (drop_title_heading) {
        const std::string key = normalized(doc.title, {.casefold = true});
        auto it = std::find_if(blocks.begin(), blocks.end(), [&](const DraftBlock& b) {
            return b.kind == BlockKind::Heading && b.level == 1 &&
                   normalized(b.text, {.casefold = true}) == key;
        });
        if (it != blocks.end()) blocks.erase(it);
    }

    // Abstract: a section headed "Abstract", else the first paragraph that
    // precedes the first heading (only when the document has headings).
    auto abstract_heading = std::find_if(blocks.begin(), blocks.end(), [](const DraftBlock& b) {
        return b.kind == BlockKind::Heading && is_abstract_heading(b.text);
    });
    if (abstract_heading != blocks.end()) {
        const int level = abstract_heading->level;
        auto end = std::next(abstract_heading);
        std::string abstract;
        while (end != blocks.end() && !(end->kind == BlockKind::Heading && end->level <= level)) {
            if (end->kind == BlockKind::Paragraph) {
                if (!abstract.empty()) abstract.push_back(' ');
                abstract += end->text;
            }
            ++end;
        }
        doc.abstract_text = std::move(abstract);
        blocks.erase(abstract_heading, end);
    } else {
        auto first_heading = std::find_if(blocks.begin(), blocks.end(),
                                          [](const DraftBlock& b) { return b.kind == BlockKind::Heading; });
        if (first_heading != blocks.end()) {
            auto first_para = std::find_if(blocks.begin(), first_heading, [](const DraftBlock& b) {
                return b.kind == BlockKind::Paragraph;
            });
            if (first_para != first_heading) {
                doc.abstract_text = first_para->text;
                blocks.erase(first_para);
            }
        }
    }

    for (auto& d : blocks) {
        if (!doc.source_text.empty()) doc.source_text.push_back('\n');
        Block b;
        b.kind = d.kind;
        b.level = d.kind == BlockKind::Heading ? d.level : 0;
        b.source_span.start = doc.source_text.size();
        doc.source_text += d.text;
        b.source_span.end = doc.source_text.size();
        b.text = std::move(d.text);
        if (d.kind == BlockKind::Figure || d.kind == BlockKind::Table) b.caption = std::move(d.caption);
        doc.blocks.push_back(std::move(b));
    }

    if (doc.blocks.empty() && doc.abstract_text.empty()) {
        throw Error(ErrorCode::EmptyDocument, "no text content");
    }
    return doc;
}

inline void reject_binary(std::string_view input) {
    if (input.find('\0') != std::string_view::npos || !utf8::is_valid(input)) {
        throw Error(ErrorCode::UnsupportedMarkup, "input is not UTF-8 text");
    }
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    const std::string h = html::detail::lower(haystack);
    return h.find(needle) != std::string::npos;
}

class HtmlMapper {
public:
    RawDocument run(std::string_view input) {
        if (input.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos) {
            throw Error(ErrorCode::EmptyDocument, "no text content");
        }
        const auto tokens = html::tokenize(input);
        bool saw_markup = false;
        for (const auto& t : tokens) {
            switch (t.kind) {
            case html::TokenKind::Text: on_text(t.text); break;
            case html::TokenKind::StartTag: saw_markup = true; on_start(t); break;
            case html::TokenKind::EndTag: saw_markup = true; on_end(t.name); break;
            case html::TokenKind::Comment:
            case html::TokenKind::Doctype: saw_markup = true; break;
            }
        }
        if (!saw_markup) throw Error(ErrorCode::UnsupportedMarkup, "no HTML markup found");
        while (!stack_.empty()) pop();
        flush_inline();

        std::string title = meta_title_.empty() ? title_tag_ : meta_title_;
        if (normalized(title).empty()) title.clear();
        return finalize(std::move(drafts_), std::move(title), SourceFormat::Html, input, true);
    }

private:
    struct Open {
        std::string tag;
        bool reference = false;
        bool caption = false;
        bool skip = false;
        bool object = false; // <figure> or a container classed as a figure/table
    };

    // Page furniture that publishers mark by class rather than by element.
    static bool has_chrome_class(std::string_view cls) {
        static constexpr std::string_view chrome[] = {
            "ltx_authors", "ltx_dates", "ltx_page_navbar", "ltx_page_logo", "c-skip-link", "c-article-identifiers",
            "figure-inline-download", "caption_target", "banner", "advertisement"};
        std::size_t pos = 0;
        while (pos < cls.size()) {
            const std::size_t end = std::min(cls.find(' ', pos), cls.size());
            const std::string_view token = cls.substr(pos, end - pos);
            if (std::find(std::begin(chrome), std::end(chrome), token) != std::end(chrome)) return true;
            pos = end + 1;
        }
        return false;
    }

    // Figure or table wrappers declared by class, e.g. <div class="figure">
    // or <div class="table-wrap">.
    static std::optional<BlockKind> declared_object(std::string_view cls) {
        std::size_t pos = 0;
        while (pos < cls.size()) {
            const std::size_t end = std::min(cls.find(' ', pos), cls.size());
            const std::string_view token = cls.substr(pos, end - pos);
            if (token == "figure" || token == "fig" || token == "ltx_figure" || token == "figure-wrap" ||
                token == "fig-wrap") {
                return BlockKind::Figure;
            }
            if (token == "table-wrap" || token == "ltx_table" || token == "table-container") return BlockKind::Table;
            pos = end + 1;
        }
        return std::nullopt;
    }

    static bool is_heading(std::string_view tag) {
        return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
    }

    static bool is_block(std::string_view tag) {
        static constexpr std::string_view blocks[] = {
            "p", "div", "section", "article", "main", "body", "html", "header", "ul", "ol", "li", "dl",
            "dt", "dd", "blockquote", "pre", "address", "details", "summary", "hr", "center", "aside"};
        return std::find(std::begin(blocks), std::end(blocks), tag) != std::end(blocks);
    }

    static bool is_skipped(std::string_view tag) {
        static constexpr std::string_view skipped[] = {"nav", "footer", "aside", "script", "style",
                                                       "noscript", "svg", "button", "form", "template",
                                                       "iframe", "select", "object", "head"};
        return std::find(std::begin(skipped), std::end(skipped), tag) != std::end(skipped);
    }

    bool capturing_object() const { return figure_depth_ > 0 || table_depth_ > 0; }

    void on_text(const std::string& text) {
        if (in_title_) {
            title_tag_ += text;
            return;
        }
        if (skip_depth_ > 0) return;
        if (capturing_object()) {
            if (caption_depth_ > 0) {
                caption_.push_back(' ');
                caption_ += text;
            }
            return;
        }
        if (heading_level_) {
            heading_text_ += text;
            return;
        }
        inline_ += text;
    }

    void on_start(const html::Token& t) {
        const std::string& tag = t.name;
        if (tag == "meta") {
            const std::string name = html::detail::lower(t.attribute("name"));
            if ((name == "citation_title" || name == "dc.title") && meta_title_.empty()) {
                meta_title_ = std::string(t.attribute("content"));
            }
            return;
        }
        if (tag == "title" && skip_depth_ <= 1 && !t.self_closing) {
            // <title> lives inside the skipped <head>; it is the one thing kept.
            in_title_ = true;
            stack_.push_back({tag});
            return;
        }
        if (tag == "br") {
            on_text(" ");
            return;
        }
        if (tag == "img") {
            if (figure_depth_ > 0 && img_alt_.empty()) img_alt_ = std::string(t.attribute("alt"));
            return;
        }
        if (html::is_void_element(tag) || t.self_closing) return;

        // Implicitly closed elements.
        if (!stack_.empty() && stack_.back().tag == "p" && (is_block(tag) || is_heading(tag) ||
                                                             tag == "figure" || tag == "table")) {
            pop();
        }
        if (tag == "li") close_open("li", {"ul", "ol"});
        if (is_heading(tag) && heading_level_) close_open(heading_tag_, {});

        Open open{tag};
        const std::string cls = html::detail::lower(t.attribute("class"));
        if (tag == "math" && skip_depth_ == 0) {
            // MathML children are presentation noise; the alttext reads well.
            on_text(" " + std::string(t.attribute("alttext")) + " ");
        }
        const bool equation_table = tag == "table" && contains_ci(cls, "ltx_equation");
        if (skip_depth_ > 0 || is_skipped(tag) || tag == "math" || equation_table || has_chrome_class(cls)) {
            open.skip = true;
            ++skip_depth_;
            stack_.push_back(std::move(open));
            return;
        }

        const std::string id = html::detail::lower(t.attribute("id"));
        if ((tag == "section" || tag == "div" || tag == "ol" || tag == "ul") &&
            (contains_ci(cls, "reference") || contains_ci(cls, "bibliograph") || contains_ci(id, "reference") ||
             contains_ci(id, "bibliograph") || cls == "ref-list")) {
            open.reference = true;
        }

        const auto declared = declared_object(cls);
        if (tag == "figure" || (declared && (tag == "div" || tag == "section"))) {
            if (!capturing_object()) {
                begin_object(declared.value_or(BlockKind::Figure));
                kind_declared_ = declared.has_value();
            }
            open.object = true;
            ++figure_depth_;
        } else if (tag == "table") {
            if (!capturing_object()) {
                begin_object(BlockKind::Table);
                kind_declared_ = true;
            } else if (!kind_declared_) {
                object_kind_ = BlockKind::Table; // bare <figure> holding a table
            }
            ++table_depth_;
        } else if (capturing_object()) {
            if (tag == "figcaption" || tag == "caption" || contains_ci(cls, "caption") ||
                contains_ci(cls, "description") || contains_ci(cls, "legend")) {
                open.caption = true;
                ++caption_depth_;
            }
        } else if (is_heading(tag)) {
            flush_inline();
            heading_level_ = tag[1] - '0';
            heading_tag_ = tag;
            heading_text_.clear();
        } else if (is_block(tag)) {
            flush_inline();
        }
        if (open.reference) ++reference_depth_;
        stack_.push_back(std::move(open));
    }

    void on_end(const std::string& tag) {
        auto it = std::find_if(stack_.rbegin(), stack_.rend(), [&](const Open& o) { return o.tag == tag; });
        if (it == stack_.rend()) {
            if (tag == "p" || tag == "br") flush_inline(); // stray </p>
            return;
        }
        const auto depth = static_cast<std::size_t>(std::distance(it, stack_.rend()));
        while (stack_.size() >= depth) pop();
    }

    // Pops the nearest open `tag` unless one of `barriers` is more recent.
    void close_open(const std::string& tag, std::initializer_list<std::string_view> barriers) {
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
            if (it->tag == tag) {
                const auto depth = static_cast<std::size_t>(std::distance(it, stack_.rend()));
                while (stack_.size() >= depth) pop();
                return;
            }
            if (std::find(barriers.begin(), barriers.end(), it->tag) != barriers.end()) return;
        }
    }

    void pop() {
        Open o = std::move(stack_.back());
        stack_.pop_back();
        if (o.tag == "title" && in_title_) {
            in_title_ = false;
            return;
        }
        if (o.skip) {
            --skip_depth_;
            return;
        }
        if (o.caption) --caption_depth_;
        if (o.object) {
            if (--figure_depth_ == 0 && table_depth_ == 0) end_object();
        } else if (o.tag == "table") {
            if (--table_depth_ == 0 && figure_depth_ == 0) end_object();
        } else if (!capturing_object()) {
            if (is_heading(o.tag) && heading_level_ && o.tag == heading_tag_) {
                drafts_.push_back({BlockKind::Heading, *heading_level_, heading_text_, {}});
                heading_level_.reset();
                heading_text_.clear();
            } else if (is_block(o.tag)) {
                flush_inline();
            }
        }
        if (o.reference) {
            flush_inline();
            --reference_depth_;
        }
    }

    void begin_object(BlockKind kind) {
        flush_inline();
        object_kind_ = kind;
        caption_.clear();
        img_alt_.clear();
    }

    // "Table 2 ..." captions on a figure wrapper: publishers often render
    // tables as images inside <figure>.
    static bool table_caption(std::string_view caption) {
        const std::string c = normalized(caption, {.casefold = true});
        return c.size() > 6 && c.compare(0, 6, "table ") == 0 && std::isalnum(static_cast<unsigned char>(c[6]));
    }

    void end_object() {
        std::string caption = normalized(caption_).empty() ? img_alt_ : caption_;
        if (object_kind_ == BlockKind::Figure && table_caption(caption)) object_kind_ = BlockKind::Table;
        drafts_.push_back({object_kind_, 0, {}, std::move(caption)});
        caption_.clear();
        img_alt_.clear();
    }

    void flush_inline() {
        if (heading_level_) return;
        if (!normalized(inline_).empty()) {
            drafts_.push_back({reference_depth_ > 0 ? BlockKind::ReferenceEntry : BlockKind::Paragraph, 0,
                               std::move(inline_), {}});
        }
        inline_.clear();
    }

    std::vector<Open> stack_;
    std::vector<DraftBlock> drafts_;
    std::string inline_;
    std::string title_tag_;
    std::string meta_title_;
    bool in_title_ = false;
    int skip_depth_ = 0;
    int reference_depth_ = 0;
    std::optional<int> heading_level_;
    std::string heading_tag_;
    std::string heading_text_;
    int figure_depth_ = 0;
    int table_depth_ = 0;
    int caption_depth_ = 0;
    BlockKind object_kind_ = BlockKind::Figure;
    bool kind_declared_ = false;
    std::string caption_;
    std::string img_alt_;
};

// Strips inline Markdown: images and links keep their text, code spans keep
// their content, emphasis markers disappear.
inline std::string flatten_markdown_inline(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (std::size_t i = 0; i < s.size();) {
        const char c = s[i];
        if ((c == '!' && i + 1 < s.size() && s[i + 1] == '[') || c == '[') {
            const std::size_t open = c == '!' ? i + 1 : i;
            const std::size_t close = s.find(']', open + 1);
            if (close != std::string_view::npos && close + 1 < s.size() &&
                (s[close + 1] == '(' || s[close + 1] == '[')) {
                const char end_char = s[close + 1] == '(' ? ')' : ']';
                const std::size_t end = s.find(end_char, close + 2);
                if (end != std::string_view::npos) {
                    out += flatten_markdown_inline(s.substr(open + 1, close - open - 1));
                    i = end + 1;
                    continue;
                }
            }
            out.push_back(c);
            ++i;
            continue;
        }
        if (c == '`') {
            std::size_t ticks = 0;
            while (i + ticks < s.size() && s[i + ticks] == '`') ++ticks;
            const std::string fence(ticks, '`');
            const std::size_t end = s.find(fence, i + ticks);
            if (end != std::string_view::npos) {
                out.append(s.substr(i + ticks, end - i - ticks));
                i = end + ticks;
                continue;
            }
            out.append(fence);
            i += ticks;
            continue;
        }
        if (c == '*') {
            ++i;
            continue;
        }
        if (c == '_') {
            const bool prev_word = i > 0 && is_word(s[i - 1]);
            const bool next_word = i + 1 < s.size() && is_word(s[i + 1]);
            if (!(prev_word && next_word)) {
                ++i;
                continue;
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

inline std::string_view trim_view(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::optional<std::pair<int, std::string>> atx_heading(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    std::size_t hashes = 0;
    while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
    if (hashes == 0 || hashes > 6) return std::nullopt;
    const std::size_t after = i + hashes;
    if (after < line.size() && line[after] != ' ' && line[after] != '\t') return std::nullopt;
    std::string_view text = trim_view(line.substr(after));
    // Optional closing sequence of '#'.
    std::size_t end = text.size();
    while (end > 0 && text[end - 1] == '#') --end;
    if (end < text.size() && (end == 0 || text[end - 1] == ' ')) text = trim_view(text.substr(0, end));
    return std::pair{static_cast<int>(hashes), std::string(text)};
}

inline std::optional<std::string> image_line(std::string_view line) {
    const std::string_view t = trim_view(line);
    if (t.size() < 5 || t.substr(0, 2) != "![") return std::nullopt;
    const std::size_t close = t.find("](");
    if (close == std::string_view::npos || t.back() != ')') return std::nullopt;
    if (t.find(')', close + 2) != t.size() - 1) return std::nullopt;
    return std::string(t.substr(2, close - 2));
}

inline std::optional<std::string_view> list_item(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    if (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '+')) {
        if (i + 1 < line.size() && line[i + 1] == ' ') return line.substr(i + 2);
        return std::nullopt;
    }
    std::size_t d = i;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d > i && d - i <= 9 && d + 1 < line.size() && (line[d] == '.' || line[d] == ')') && line[d + 1] == ' ') {
        return line.substr(d + 2);
    }
    return std::nullopt;
}

} // namespace detail

/// Parses publisher-style HTML. Inline markup is flattened; headings,
/// paragraphs, figures, tables and bibliography entries become blocks.
inline RawDocument parse_html(std::string_view html_text) {
    detail::reject_binary(html_text);
    return detail::HtmlMapper{}.run(html_text);
}

/// Parses Markdown: ATX headings, blank-line separated paragraphs, list
/// items, fenced code, pipe tables ("Table:" line as caption) and images on
/// their own line (alt text as caption).
inline RawDocument parse_markdown(std::string_view md_text) {
    detail::reject_binary(md_text);
    std::vector<detail::DraftBlock> drafts;
    std::string paragraph;
    std::string title;
    bool in_fence = false;
    std::string fence;
    std::string code;
    bool in_table = false;
    bool table_captioned = false;

    auto flush_paragraph = [&] {
        const std::string flat = detail::flatten_markdown_inline(paragraph);
        if (!normalized(flat).empty()) drafts.push_back({BlockKind::Paragraph, 0, flat, {}});
        paragraph.clear();
    };
    auto end_table = [&] {
        if (!in_table) return;
        drafts.push_back({BlockKind::Table, 0, {}, {}});
        in_table = false;
        table_captioned = false;
    };

    std::size_t pos = 0;
    while (pos <= md_text.size()) {
        std::size_t eol = md_text.find('\n', pos);
        if (eol == std::string_view::npos) eol = md_text.size();
        std::string_view line = md_text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;

        const std::string_view trimmed = detail::trim_view(line);
        if (in_fence) {
            if (trimmed.substr(0, fence.size()) == fence) {
                in_fence = false;
                if (!normalized(code).empty()) drafts.push_back({BlockKind::Paragraph, 0, code, {}});
                code.clear();
            } else {
                code.append(line);
                code.push_back('\n');
            }
            continue;
        }
        if (trimmed.substr(0, 3) == "```" || trimmed.substr(0, 3) == "~~~") {
            flush_paragraph();
            end_table();
            in_fence = true;
            fence = std::string(trimmed.substr(0, 3));
            continue;
        }
        if (in_table && !trimmed.empty() && trimmed.front() == '|') continue;
        if (in_table && trimmed.substr(0, 6) == "Table:" && !table_captioned) {
            drafts.push_back({BlockKind::Table, 0, {}, detail::flatten_markdown_inline(trimmed.substr(6))});
            in_table = false;
            continue;
        }
        end_table();
        if (trimmed.empty()) {
            flush_paragraph();
            continue;
        }
        if (auto heading = detail::atx_heading(line)) {
            flush_paragraph();
            std::string text = detail::flatten_markdown_inline(heading->second);
            if (heading->first == 1 && title.empty()) title = text;
            drafts.push_back({BlockKind::Heading, heading->first, std::move(text), {}});
            continue;
        }
        if (auto alt = detail::image_line(line)) {
            flush_paragraph();
            drafts.push_back({BlockKind::Figure, 0, {}, detail::flatten_markdown_inline(*alt)});
            continue;
        }
        if (trimmed.front() == '|') {
            flush_paragraph();
            in_table = true;
            continue;
        }
        if (auto item = detail::list_item(line)) {
            flush_paragraph();
            paragraph = std::string(*item);
            continue;
        }
        std::string_view content = trimmed;
        while (!content.empty() && content.front() == '>') content = detail::trim_view(content.substr(1));
        if (!paragraph.empty()) paragraph.push_back(' ');
        paragraph.append(content);
    }
    if (in_fence && !normalized(code).empty()) drafts.push_back({BlockKind::Paragraph, 0, code, {}});
    end_table();
    flush_paragraph();
    return detail::finalize(std::move(drafts), std::move(title), SourceFormat::Markdown, md_text, false);
}

inline RawDocument parse_document(std::string_view text, SourceFormat format) {
    return format == SourceFormat::Html ? parse_html(text) : parse_markdown(text);
}

} // namespace treereader
