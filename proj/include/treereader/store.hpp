#pragma once

// Persistence: one canonical JSON file per paper (tree + summaries +
// anchors) and a content-addressed summary cache. Writes go through a
// temporary file and an atomic rename, so readers never see partial files.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "summary.hpp"
#include "tree.hpp"
#include "view.hpp"

namespace treereader {

using json = nlohmann::json;

inline constexpr int tree_schema_version = 1;

// ---------------------------------------------------------------------------
// JSON mapping. Object keys are sorted by nlohmann::json, which makes the
// dump canonical.

inline json to_json_value(const Anchor& a) {
    return {{"target_node_id", a.target_node_id}, {"char_start", a.char_start}, {"char_end", a.char_end},
            {"match_kind", to_string(a.match_kind)}, {"similarity", a.similarity}};
}

inline json to_json_value(const KeyPoint& p) {
    return {{"point", p.point_text}, {"evidence", p.evidence_text},
            {"anchor", p.anchor ? to_json_value(*p.anchor) : json(nullptr)}};
}

inline json to_json_value(const NodeSummary& s) {
    json points = json::array();
    for (const auto& p : s.points) points.push_back(to_json_value(p));
    return {{"node_id", s.node_id}, {"points", std::move(points)}, {"total_word_count", s.total_word_count},
            {"backend_id", s.backend_id}, {"status", to_string(s.status)}};
}

inline json to_json_value(const DocNode& n) {
    json j = {{"id", n.id}, {"kind", to_string(n.kind)}, {"children", n.children},
              {"order_index", n.order_index}, {"level", n.level}};
    j["title"] = n.title ? json(*n.title) : json(nullptr);
    j["text"] = n.text ? json(*n.text) : json(nullptr);
    j["caption"] = n.caption ? json(*n.caption) : json(nullptr);
    return j;
}

namespace detail {

inline MatchKind parse_match_kind(const std::string& s) {
    for (auto k : {MatchKind::Exact, MatchKind::Normalized, MatchKind::Fuzzy, MatchKind::Unmatched}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::CorruptDocument, "unknown match_kind " + s);
}

inline SummaryStatus parse_status(const std::string& s) {
    for (auto k : {SummaryStatus::Ok, SummaryStatus::OverBudget, SummaryStatus::PointCountRepaired,
                   SummaryStatus::Degraded}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::CorruptDocument, "unknown status " + s);
}

inline std::optional<std::string> optional_string(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<std::string>();
}

} // namespace detail

inline Anchor anchor_from_json(const json& j) {
    Anchor a;
    a.target_node_id = j.at("target_node_id").get<std::string>();
    a.char_start = j.at("char_start").get<std::size_t>();
    a.char_end = j.at("char_end").get<std::size_t>();
    a.match_kind = detail::parse_match_kind(j.at("match_kind").get<std::string>());
    a.similarity = j.at("similarity").get<double>();
    return a;
}

inline KeyPoint key_point_from_json(const json& j) {
    KeyPoint p;
    p.point_text = j.at("point").get<std::string>();
    p.evidence_text = j.at("evidence").get<std::string>();
    if (const auto& a = j.at("anchor"); !a.is_null()) p.anchor = anchor_from_json(a);
    return p;
}

inline NodeSummary summary_from_json(const json& j) {
    NodeSummary s;
    s.node_id = j.at("node_id").get<std::string>();
    for (const auto& p : j.at("points")) s.points.push_back(key_point_from_json(p));
    s.total_word_count = j.at("total_word_count").get<std::size_t>();
    s.backend_id = j.at("backend_id").get<std::string>();
    s.status = detail::parse_status(j.at("status").get<std::string>());
    return s;
}

inline DocNode node_from_json(const json& j) {
    DocNode n;
    n.id = j.at("id").get<std::string>();
    const auto kind = parse_node_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::CorruptDocument, "unknown node kind");
    n.kind = *kind;
    n.title = detail::optional_string(j, "title");
    n.text = detail::optional_string(j, "text");
    n.caption = detail::optional_string(j, "caption");
    n.children = j.at("children").get<std::vector<std::string>>();
    n.order_index = j.at("order_index").get<int>();
    n.level = j.at("level").get<int>();
    return n;
}

/// Canonical text form: sorted keys, two-space indent, trailing newline.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Tree documents

struct TreeDocument {
    int schema_version = tree_schema_version;
    SourceFormat format = SourceFormat::Html;
    std::string content_digest;
    std::string title;
    std::string abstract_text;
    std::string root_id;
    std::vector<DocNode> nodes;         // document order
    std::vector<NodeSummary> summaries; // sorted by node id
    std::string created_at;
    std::string template_version;
    std::string backend_id;

    friend bool operator==(const TreeDocument&, const TreeDocument&) = default;
};

inline TreeDocument make_tree_document(const RawDocument& raw, const SectionTree& tree, const SummaryMap& summaries,
                                       std::string backend_id, std::string template_version, std::string created_at) {
    TreeDocument doc;
    doc.format = raw.format;
    doc.content_digest = raw.source_id;
    doc.title = tree.title();
    doc.abstract_text = tree.abstract_text;
    doc.root_id = tree.root_id;
    walk_preorder(tree, tree.root_id, [&](const DocNode& n) { doc.nodes.push_back(n); });
    for (const auto& [id, s] : summaries) doc.summaries.push_back(s);
    doc.created_at = std::move(created_at);
    doc.template_version = std::move(template_version);
    doc.backend_id = std::move(backend_id);
    return doc;
}

inline SectionTree to_section_tree(const TreeDocument& doc) {
    SectionTree tree;
    tree.root_id = doc.root_id;
    tree.abstract_text = doc.abstract_text;
    for (const auto& n : doc.nodes) tree.nodes.emplace(n.id, n);
    return tree;
}

inline SummaryMap to_summary_map(const TreeDocument& doc) {
    SummaryMap out;
    for (const auto& s : doc.summaries) out.emplace(s.node_id, s);
    return out;
}

inline json to_json_value(const TreeDocument& d) {
    json nodes = json::array();
    for (const auto& n : d.nodes) nodes.push_back(to_json_value(n));
    json summaries = json::array();
    for (const auto& s : d.summaries) summaries.push_back(to_json_value(s));
    return {{"schema_version", d.schema_version},
            {"source", {{"format", to_string(d.format)}, {"content_digest", d.content_digest}}},
            {"title", d.title},
            {"abstract_text", d.abstract_text},
            {"root_id", d.root_id},
            {"nodes", std::move(nodes)},
            {"summaries", std::move(summaries)},
            {"created_at", d.created_at},
            {"template_version", d.template_version},
            {"backend_id", d.backend_id}};
}

/// Invariant problems of a document; empty when it is sound.
inline std::vector<std::string> check_tree_document(const TreeDocument& doc) {
    std::vector<std::string> problems;
    std::map<std::string, int> ids;
    for (const auto& n : doc.nodes) {
        if (++ids[n.id] > 1) problems.push_back("duplicate node id " + n.id);
    }
    const SectionTree tree = to_section_tree(doc);
    for (const auto& v : validate_tree(tree)) problems.push_back("tree " + v.rule + " at " + v.node_id);
    if (!problems.empty()) return problems;
    if (tree.title() != doc.title) problems.push_back("title differs from root title");

    const SummaryMap summaries = to_summary_map(doc);
    if (summaries.size() != doc.summaries.size()) problems.push_back("duplicate summary node id");
    for (const auto& s : doc.summaries) {
        if (!tree.contains(s.node_id)) {
            problems.push_back("summary for unknown node " + s.node_id);
            continue;
        }
        if (s.total_word_count != total_words(s.points)) problems.push_back("word count mismatch at " + s.node_id);
        if ((s.status == SummaryStatus::Ok || s.status == SummaryStatus::OverBudget) &&
            (s.points.size() < min_points || s.points.size() > max_points)) {
            problems.push_back("point count out of range at " + s.node_id);
        }
        const std::string target = evidence_target(tree, summaries, s.node_id);
        for (const auto& p : s.points) {
            if (p.point_text.empty() || p.evidence_text.empty()) problems.push_back("empty key point at " + s.node_id);
            if (!p.anchor) continue;
            const Anchor& a = *p.anchor;
            if (a.char_end < a.char_start || a.char_end > target.size()) {
                problems.push_back("anchor out of range at " + s.node_id);
            } else if (a.match_kind == MatchKind::Exact &&
                       std::string_view(target).substr(a.char_start, a.char_end - a.char_start) != p.evidence_text) {
                problems.push_back("exact anchor does not slice to evidence at " + s.node_id);
            } else if (a.match_kind == MatchKind::Unmatched && (a.char_start != 0 || a.char_end != 0)) {
                problems.push_back("unmatched anchor has a span at " + s.node_id);
            }
        }
    }
    return problems;
}

inline TreeDocument tree_document_from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_version")) {
        throw Error(ErrorCode::CorruptDocument, "missing schema_version");
    }
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != tree_schema_version) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "expected " + std::to_string(tree_schema_version) + ", found " + j.at("schema_version").dump());
    }
    TreeDocument d;
    try {
        const auto format = parse_source_format(j.at("source").at("format").get<std::string>());
        if (!format) throw Error(ErrorCode::CorruptDocument, "unknown source format");
        d.format = *format;
        d.content_digest = j.at("source").at("content_digest").get<std::string>();
        d.title = j.at("title").get<std::string>();
        d.abstract_text = j.at("abstract_text").get<std::string>();
        d.root_id = j.at("root_id").get<std::string>();
        for (const auto& n : j.at("nodes")) d.nodes.push_back(node_from_json(n));
        for (const auto& s : j.at("summaries")) d.summaries.push_back(summary_from_json(s));
        d.created_at = j.at("created_at").get<std::string>();
        d.template_version = j.at("template_version").get<std::string>();
        d.backend_id = j.at("backend_id").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptDocument, e.what());
    }
    if (const auto problems = check_tree_document(d); !problems.empty()) {
        throw Error(ErrorCode::CorruptDocument, problems.front());
    }
    return d;
}

inline std::string serialize_tree_document(const TreeDocument& doc) { return canonical_dump(to_json_value(doc)); }

inline TreeDocument parse_tree_document(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::CorruptDocument, "not valid JSON");
    return tree_document_from_json(j);
}

// ---------------------------------------------------------------------------
// Files

namespace detail {

inline std::string temp_suffix() {
    static std::atomic<unsigned long> counter{0};
    std::ostringstream os;
    os << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
    return os.str();
}

} // namespace detail

/// UTC creation stamp. SOURCE_DATE_EPOCH, when set to an integer, replaces
/// the clock so repeated runs produce byte-identical files.
inline std::string timestamp_utc() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    return os.str();
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const std::filesystem::path tmp = path.string() + detail::temp_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot create " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
    }
}

inline void save_tree(const TreeDocument& doc, const std::filesystem::path& path) {
    if (const auto problems = check_tree_document(doc); !problems.empty()) {
        throw Error(ErrorCode::InvalidDocument, problems.front());
    }
    write_file_atomic(path, serialize_tree_document(doc));
}

inline TreeDocument load_tree(const std::filesystem::path& path) { return parse_tree_document(read_file(path)); }

/// Cache backed by a directory of content-addressed files:
/// <root>/<key[0:2]>/<key>.
class FileCache final : public SummaryCache {
public:
    explicit FileCache(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create cache directory " + root_.string());
    }

    [[nodiscard]] std::filesystem::path path_for(const std::string& key) const {
        return root_ / key.substr(0, 2) / key;
    }

    [[nodiscard]] std::optional<NodeSummary> get(const std::string& key) override {
        const auto path = path_for(key);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        const json j = json::parse(read_file(path), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::IoError, "unreadable cache entry " + path.string());
        try {
            return summary_from_json(j);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::IoError, std::string("bad cache entry: ") + e.what());
        }
    }

    void put(const std::string& key, const NodeSummary& value) override {
        write_file_atomic(path_for(key), canonical_dump(to_json_value(value)));
    }

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

} // namespace treereader
