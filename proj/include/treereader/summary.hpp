#pragma once

// Key-point summaries and the backend output contract: prompt rendering,
// response parsing, and the 2-5 point / 70 word rules.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anchor.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "prompts.hpp"
#include "text.hpp"

namespace treereader {

inline constexpr std::size_t min_points = 2;
inline constexpr std::size_t max_points = 5;
inline constexpr std::size_t word_budget = 70;

struct KeyPoint {
    std::string point_text;
    std::string evidence_text;
    std::optional<Anchor> anchor;

    friend bool operator==(const KeyPoint&, const KeyPoint&) = default;
};

enum class SummaryStatus { Ok, OverBudget, PointCountRepaired, Degraded };

inline constexpr std::string_view to_string(SummaryStatus s) noexcept {
    switch (s) {
    case SummaryStatus::Ok: return "ok";
    case SummaryStatus::OverBudget: return "over_budget";
    case SummaryStatus::PointCountRepaired: return "point_count_repaired";
    case SummaryStatus::Degraded: return "degraded";
    }
    return "?";
}

struct NodeSummary {
    std::string node_id;
    std::vector<KeyPoint> points;
    std::size_t total_word_count = 0;
    std::string backend_id;
    SummaryStatus status = SummaryStatus::Ok;

    friend bool operator==(const NodeSummary&, const NodeSummary&) = default;
};

enum class SummaryRole { Leaf, Section };

inline constexpr std::string_view to_string(SummaryRole r) noexcept {
    return r == SummaryRole::Leaf ? "leaf" : "section";
}

struct SummaryRequest {
    SummaryRole role = SummaryRole::Leaf;
    std::string abstract_text;
    std::string content;
    std::optional<std::string> node_title;
};

inline std::size_t total_words(const std::vector<KeyPoint>& points) {
    std::size_t n = 0;
    for (const auto& p : points) n += word_count(p.point_text);
    return n;
}

// ---------------------------------------------------------------------------
// Prompts

/// A prompt template with an `{abstract}` slot and a content slot spelled
/// `{node.content}` or `{content}`. An optional `{title}` slot is filled
/// with the node title.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

    [[nodiscard]] const std::string& text() const noexcept { return text_; }

    [[nodiscard]] bool has_abstract_slot() const { return text_.find("{abstract}") != std::string::npos; }
    [[nodiscard]] bool has_content_slot() const {
        return text_.find("{node.content}") != std::string::npos || text_.find("{content}") != std::string::npos;
    }

private:
    std::string text_;
};

struct PromptSet {
    PromptTemplate leaf{std::string(prompts::leaf_template)};
    PromptTemplate section{std::string(prompts::section_template)};

    [[nodiscard]] const PromptTemplate& for_role(SummaryRole role) const {
        return role == SummaryRole::Leaf ? leaf : section;
    }

    /// Short digest of both templates; part of every cache key.
    [[nodiscard]] std::string version() const { return sha256_fields({leaf.text(), section.text()}).substr(0, 16); }
};

/// Substitutes slots in a single left-to-right pass, so substituted text is
/// never rescanned for slots.
inline std::string render_prompt(const SummaryRequest& req, const PromptTemplate& tpl) {
    if (!tpl.has_abstract_slot()) throw Error(ErrorCode::MissingSlot, "template has no {abstract} slot");
    if (!tpl.has_content_slot()) throw Error(ErrorCode::MissingSlot, "template has no {node.content} slot");
    const std::string& t = tpl.text();
    std::string out;
    out.reserve(t.size() + req.abstract_text.size() + req.content.size());
    for (std::size_t i = 0; i < t.size();) {
        if (t[i] == '{') {
            const std::string_view rest = std::string_view(t).substr(i);
            auto take = [&](std::string_view slot, std::string_view value) {
                if (rest.substr(0, slot.size()) != slot) return false;
                out.append(value);
                i += slot.size();
                return true;
            };
            if (take("{abstract}", req.abstract_text) || take("{node.content}", req.content) ||
                take("{content}", req.content) || take("{title}", req.node_title.value_or(""))) {
                continue;
            }
        }
        out.push_back(t[i++]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Responses

namespace detail {

// End (exclusive) of the balanced object opening at `open`, skipping braces
// inside JSON strings.
inline std::optional<std::size_t> balanced_object_end(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::nullopt;
}

} // namespace detail

/// Extracts point/evidence pairs from a backend reply. Prose or code fences
/// around the JSON object are ignored: the first balanced, parsable object
/// is used.
inline std::vector<KeyPoint> parse_backend_response(std::string_view raw) {
    std::optional<nlohmann::json> object;
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
        const auto end = detail::balanced_object_end(raw, pos);
        if (!end) continue;
        auto parsed = nlohmann::json::parse(raw.substr(pos, *end - pos), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            object = std::move(parsed);
            break;
        }
    }
    if (!object) throw Error(ErrorCode::MalformedResponse, "no JSON object in response");
    const auto points = object->find("points");
    if (points == object->end() || !points->is_array()) {
        throw Error(ErrorCode::MalformedResponse, "response object has no \"points\" list");
    }
    std::vector<KeyPoint> out;
    out.reserve(points->size());
    for (std::size_t i = 0; i < points->size(); ++i) {
        const auto& item = (*points)[i];
        auto field = [&](const char* key) -> std::string {
            if (!item.is_object()) throw Error(ErrorCode::MissingField, "point " + std::to_string(i) + " is not an object");
            const auto it = item.find(key);
            if (it == item.end() || !it->is_string() || normalized(it->get<std::string>()).empty()) {
                throw Error(ErrorCode::MissingField, "point " + std::to_string(i) + " lacks \"" + key + "\"");
            }
            return it->get<std::string>();
        };
        KeyPoint kp;
        kp.point_text = field("point");
        kp.evidence_text = field("evidence");
        out.push_back(std::move(kp));
    }
    return out;
}

/// Reply in the backend output shape for the given points.
inline std::string serialize_points(const std::vector<KeyPoint>& points) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points) arr.push_back({{"point", p.point_text}, {"evidence", p.evidence_text}});
    return nlohmann::json{{"points", std::move(arr)}}.dump();
}

struct PointValidation {
    std::vector<KeyPoint> points;
    SummaryStatus status = SummaryStatus::Ok;
    bool retry_needed = false; // fewer than two points
    std::size_t word_count = 0;
};

/// More than five points keeps the first five (PointCountRepaired); fewer
/// than two asks for a retry; over 70 words keeps everything (OverBudget).
inline PointValidation validate_points(std::vector<KeyPoint> points) {
    PointValidation v;
    if (points.size() > max_points) {
        points.resize(max_points);
        v.status = SummaryStatus::PointCountRepaired;
    } else if (points.size() < min_points) {
        v.retry_needed = true;
        v.status = SummaryStatus::Degraded;
    } else if (total_words(points) > word_budget) {
        v.status = SummaryStatus::OverBudget;
    }
    v.word_count = total_words(points);
    v.points = std::move(points);
    return v;
}

} // namespace treereader
