#pragma once

// Document service: ingestion, background summarization, views, evidence
// and re-summarization over the store, plus its HTTP binding.

#include <algorithm>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "config.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "store.hpp"
#include "tree.hpp"
#include "view.hpp"

namespace treereader {

enum class DocStatus { Ingested, Summarizing, Ready, PartiallyDegraded };

inline constexpr std::string_view to_string(DocStatus s) noexcept {
    switch (s) {
    case DocStatus::Ingested: return "Ingested";
    case DocStatus::Summarizing: return "Summarizing";
    case DocStatus::Ready: return "Ready";
    case DocStatus::PartiallyDegraded: return "PartiallyDegraded";
    }
    return "?";
}

struct DocumentHandle {
    std::string doc_id;
    std::string title;
    std::size_t node_count = 0;
    bool summarized = false;
    DocStatus status = DocStatus::Ingested;
};

struct EvidencePayload {
    std::string node_id;
    std::size_t point_index = 0;
    std::string point_text;
    std::string evidence_text;
    Anchor anchor;
    std::string source_excerpt; // anchored sentence(s) plus one on each side
    Span excerpt_span;          // into the node's evidence target
    std::optional<std::string> child_id; // section points: the child quoted
};

struct ResummarizeTicket {
    std::string doc_id;
    std::string backend_id;
    std::vector<std::string> requeued; // post-order
};

struct ServiceOptions {
    std::filesystem::path data_dir = "treereader-data";
    std::size_t max_source_bytes = 10 * 1024 * 1024;
    EngineOptions engine;
    std::string default_backend = std::string(ExtractiveBackend::backend_id);
};

inline ServiceOptions service_options(const Config& c) {
    ServiceOptions o;
    o.data_dir = c.data_dir;
    o.max_source_bytes = c.max_source_bytes;
    o.engine = engine_options(c);
    o.default_backend = c.default_backend;
    return o;
}

/// Span of `text` covering the sentences that contain [start, end) plus one
/// neighbouring sentence on each side. Empty when `start == end`.
inline Span excerpt_bounds(std::string_view text, std::size_t start, std::size_t end) {
    if (start >= end) return {};
    const auto sentences = split_sentences(text);
    if (sentences.empty()) return {0, text.size()};
    std::size_t first = sentences.size() - 1;
    std::size_t last = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (sentences[i].end > start) {
            first = i;
            break;
        }
    }
    for (std::size_t i = sentences.size(); i-- > 0;) {
        if (sentences[i].start < end) {
            last = i;
            break;
        }
    }
    last = std::max(last, first);
    first = first > 0 ? first - 1 : 0;
    last = std::min(last + 1, sentences.size() - 1);
    return {std::min(sentences[first].start, start), std::max(sentences[last].end, end)};
}

class DocumentService {
public:
    DocumentService(ServiceOptions options, BackendRegistry registry)
        : options_(std::move(options)), registry_(std::move(registry)), cache_(options_.data_dir / "cache") {
        std::filesystem::create_directories(documents_dir());
        restore();
    }

    ~DocumentService() { wait_idle(); }

    DocumentService(const DocumentService&) = delete;
    DocumentService& operator=(const DocumentService&) = delete;

    [[nodiscard]] const ServiceOptions& options() const noexcept { return options_; }
    [[nodiscard]] const BackendRegistry& registry() const noexcept { return registry_; }

    [[nodiscard]] std::filesystem::path document_path(const std::string& doc_id) const {
        return documents_dir() / (doc_id + ".json");
    }

    /// Parses, builds and stores the document and queues its summarization.
    /// `created` is false when identical bytes were ingested before.
    DocumentHandle ingest(std::string_view source, SourceFormat format, bool* created = nullptr) {
        if (source.size() > options_.max_source_bytes) {
            throw Error(ErrorCode::PayloadTooLarge, std::to_string(source.size()) + " bytes exceeds the limit of " +
                                                        std::to_string(options_.max_source_bytes));
        }
        const std::string doc_id = sha256_hex(source);
        std::unique_lock lock(mutex_);
        if (entries_.count(doc_id)) {
            if (created) *created = false;
            lock.unlock();
            return handle(doc_id);
        }
        const RawDocument raw = parse_document(source, format);
        const SectionTree tree = build_tree(raw);
        const TreeDocument doc = make_tree_document(raw, tree, {}, options_.default_backend,
                                                    options_.engine.prompts.version(), timestamp_utc());
        save_tree(doc, document_path(doc_id));
        auto entry = std::make_shared<Entry>();
        entry->status = DocStatus::Ingested;
        entries_.emplace(doc_id, entry);
        if (created) *created = true;
        schedule(doc_id, entry, options_.default_backend, summarizable_nodes(tree));
        lock.unlock();
        return handle(doc_id);
    }

    [[nodiscard]] DocumentHandle handle(const std::string& doc_id) const {
        const auto entry = find(doc_id);
        const TreeDocument doc = load_tree(document_path(doc_id));
        DocumentHandle h;
        h.doc_id = doc_id;
        h.title = doc.title;
        h.node_count = doc.nodes.size();
        h.summarized = !doc.summaries.empty();
        std::lock_guard lock(mutex_);
        h.status = entry->status;
        return h;
    }

    [[nodiscard]] std::vector<DocumentHandle> list() const {
        std::vector<std::string> ids;
        {
            std::lock_guard lock(mutex_);
            for (const auto& [id, e] : entries_) ids.push_back(id);
        }
        std::vector<DocumentHandle> out;
        for (const auto& id : ids) out.push_back(handle(id));
        return out;
    }

    /// View of a section (the root when `node_id` is empty).
    [[nodiscard]] NodeView view(const std::string& doc_id, const std::optional<std::string>& node_id = std::nullopt) const {
        const TreeDocument doc = ready_document(doc_id);
        const SectionTree tree = to_section_tree(doc);
        return node_view(tree, to_summary_map(doc), node_id.value_or(tree.root_id));
    }

    /// Contextual pane for any node, including paragraphs and figures.
    [[nodiscard]] ContextualInfo context(const std::string& doc_id, const std::string& node_id) const {
        const TreeDocument doc = ready_document(doc_id);
        return focus_context(to_section_tree(doc), to_summary_map(doc), node_id);
    }

    [[nodiscard]] EvidencePayload evidence(const std::string& doc_id, const std::string& node_id,
                                           std::size_t point_index) const {
        const TreeDocument doc = ready_document(doc_id);
        const SectionTree tree = to_section_tree(doc);
        const SummaryMap summaries = to_summary_map(doc);
        (void)tree.node(node_id);
        const auto it = summaries.find(node_id);
        if (it == summaries.end()) throw Error(ErrorCode::NoSummary, node_id);
        const auto& points = it->second.points;
        if (point_index >= points.size()) {
            throw Error(ErrorCode::PointIndexOutOfRange,
                        std::to_string(point_index) + " >= " + std::to_string(points.size()));
        }
        const KeyPoint& p = points[point_index];
        EvidencePayload out;
        out.node_id = node_id;
        out.point_index = point_index;
        out.point_text = p.point_text;
        out.evidence_text = p.evidence_text;
        out.anchor = p.anchor.value_or(Anchor{node_id, 0, 0, MatchKind::Unmatched, 0.0});
        if (out.anchor.match_kind != MatchKind::Unmatched) {
            const std::string target = evidence_target(tree, summaries, node_id);
            out.excerpt_span = excerpt_bounds(target, out.anchor.char_start, out.anchor.char_end);
            out.source_excerpt = target.substr(out.excerpt_span.start, out.excerpt_span.size());
            if (tree.node(node_id).kind == NodeKind::Section) {
                out.child_id = resolve_section_anchor(tree, summaries, node_id, out.anchor);
            }
        }
        return out;
    }

    /// Re-queues `node_id` (every summarizable node when absent), its
    /// subtree and its ancestors; other summaries are kept as they are.
    ResummarizeTicket resummarize(const std::string& doc_id, const std::optional<std::string>& node_id,
                                  const std::optional<std::string>& backend_id) {
        const auto entry = find(doc_id);
        const TreeDocument doc = load_tree(document_path(doc_id));
        const SectionTree tree = to_section_tree(doc);
        const std::string backend_name = backend_id.value_or(doc.backend_id.empty() ? options_.default_backend : doc.backend_id);
        const auto backend = registry_.get(backend_name);
        if (!backend->available()) throw Error(ErrorCode::BackendUnavailable, backend_name);
        std::set<std::string> force;
        if (node_id) {
            (void)tree.node(*node_id);
            force = invalidation_set(tree, *node_id);
        } else {
            force = summarizable_nodes(tree);
        }
        ResummarizeTicket ticket{doc_id, backend_name, {}};
        walk_postorder(tree, tree.root_id, [&](const DocNode& n) {
            if (force.count(n.id)) ticket.requeued.push_back(n.id);
        });
        std::lock_guard lock(mutex_);
        schedule(doc_id, entry, backend_name, std::move(force));
        return ticket;
    }

    /// Ids, kinds and display titles of the whole tree, nested.
    [[nodiscard]] nlohmann::json navigation_tree(const std::string& doc_id) const {
        (void)find(doc_id);
        const TreeDocument doc = load_tree(document_path(doc_id));
        const SectionTree tree = to_section_tree(doc);
        std::function<nlohmann::json(const DocNode&)> build = [&](const DocNode& n) {
            nlohmann::json children = nlohmann::json::array();
            for (const auto& c : n.children) children.push_back(build(tree.node(c)));
            return nlohmann::json{{"id", n.id}, {"kind", to_string(n.kind)}, {"title", display_title(n)},
                                  {"children", std::move(children)}};
        };
        return build(tree.root());
    }

    /// Blocks until no summarization job is queued or running.
    void wait_idle() {
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [&] { return active_jobs_ == 0; });
        auto threads = std::move(threads_);
        threads_.clear();
        lock.unlock();
        for (auto& t : threads) t.join();
    }

private:
    struct Entry {
        DocStatus status = DocStatus::Ingested;
        std::size_t pending = 0;
        std::mutex job_mutex; // one running job per document
    };

    [[nodiscard]] std::filesystem::path documents_dir() const { return options_.data_dir / "documents"; }

    [[nodiscard]] std::shared_ptr<Entry> find(const std::string& doc_id) const {
        std::lock_guard lock(mutex_);
        const auto it = entries_.find(doc_id);
        if (it == entries_.end()) throw Error(ErrorCode::UnknownDocument, doc_id);
        return it->second;
    }

    [[nodiscard]] TreeDocument ready_document(const std::string& doc_id) const {
        const auto entry = find(doc_id);
        {
            std::lock_guard lock(mutex_);
            if (entry->status != DocStatus::Ready && entry->status != DocStatus::PartiallyDegraded) {
                throw Error(ErrorCode::NotReady, std::string(to_string(entry->status)));
            }
        }
        return load_tree(document_path(doc_id));
    }

    static DocStatus settled_status(const TreeDocument& doc) {
        const bool degraded = std::any_of(doc.summaries.begin(), doc.summaries.end(),
                                          [](const NodeSummary& s) { return s.status == SummaryStatus::Degraded; });
        return degraded ? DocStatus::PartiallyDegraded : DocStatus::Ready;
    }

    void restore() {
        std::error_code ec;
        for (const auto& f : std::filesystem::directory_iterator(documents_dir(), ec)) {
            if (f.path().extension() != ".json") continue;
            const std::string doc_id = f.path().stem().string();
            try {
                const TreeDocument doc = load_tree(f.path());
                auto entry = std::make_shared<Entry>();
                const SectionTree tree = to_section_tree(doc);
                const auto pending = summarizable_nodes(tree);
                std::lock_guard lock(mutex_);
                entries_.emplace(doc_id, entry);
                if (doc.summaries.empty() && !pending.empty()) {
                    const std::string backend =
                        registry_.contains(doc.backend_id) ? doc.backend_id : options_.default_backend;
                    schedule(doc_id, entry, backend, pending);
                } else {
                    entry->status = settled_status(doc);
                }
            } catch (const Error& e) {
                std::cerr << "treereader: skipping " << f.path().string() << ": " << e.what() << "\n";
            }
        }
    }

    // Caller holds mutex_.
    void schedule(const std::string& doc_id, const std::shared_ptr<Entry>& entry, const std::string& backend_id,
                  std::set<std::string> force) {
        entry->status = DocStatus::Summarizing;
        ++entry->pending;
        ++active_jobs_;
        threads_.emplace_back([this, doc_id, entry, backend_id, force = std::move(force)] {
            run_job(doc_id, *entry, backend_id, force);
        });
    }

    void run_job(const std::string& doc_id, Entry& entry, const std::string& backend_id,
                 const std::set<std::string>& force) {
        std::optional<DocStatus> final_status;
        {
            std::lock_guard job(entry.job_mutex);
            try {
                TreeDocument doc = load_tree(document_path(doc_id));
                const SectionTree tree = to_section_tree(doc);
                const SummaryMap existing = to_summary_map(doc);
                auto backend = registry_.get(backend_id);
                const auto result = summarize_tree(tree, *backend, &cache_, options_.engine, force, &existing);
                doc.summaries.clear();
                for (const auto& [id, s] : result.summaries) doc.summaries.push_back(s);
                doc.backend_id = backend_id;
                doc.template_version = options_.engine.prompts.version();
                save_tree(doc, document_path(doc_id));
                final_status = settled_status(doc);
            } catch (const std::exception& e) {
                std::cerr << "treereader: summarization of " << doc_id << " failed: " << e.what() << "\n";
                final_status = DocStatus::PartiallyDegraded;
            }
        }
        std::lock_guard lock(mutex_);
        if (--entry.pending == 0) entry.status = *final_status;
        --active_jobs_;
        idle_.notify_all();
    }

    ServiceOptions options_;
    BackendRegistry registry_;
    FileCache cache_;
    mutable std::mutex mutex_;
    std::condition_variable idle_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
    std::vector<std::thread> threads_;
    std::size_t active_jobs_ = 0;
};

// ---------------------------------------------------------------------------
// JSON bodies

inline nlohmann::json to_json_value(const DocumentHandle& h) {
    return {{"doc_id", h.doc_id}, {"title", h.title}, {"node_count", h.node_count}, {"summarized", h.summarized},
            {"status", to_string(h.status)}};
}

inline nlohmann::json to_json_value(const Card& c) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : c.key_points) points.push_back(to_json_value(p));
    return {{"child_id", c.child_id},
            {"kind", to_string(c.kind)},
            {"display_title", c.display_title},
            {"key_points", std::move(points)},
            {"can_descend", c.can_descend},
            {"summary_status", c.summary_status ? nlohmann::json(to_string(*c.summary_status)) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json_value(const ContextualInfo& info, const SectionTree* tree = nullptr) {
    nlohmann::json figures = nlohmann::json::array();
    for (const auto& id : info.figures) {
        nlohmann::json f = {{"id", id}};
        if (tree) f["caption"] = tree->node(id).caption.value_or("");
        figures.push_back(std::move(f));
    }
    nlohmann::json children = nlohmann::json::array();
    for (const auto& c : info.children) {
        children.push_back({{"child_id", c.child_id}, {"title", c.title}, {"key_points", c.key_points}});
    }
    return {{"figures", std::move(figures)},
            {"original_text", info.original_text ? nlohmann::json(*info.original_text) : nlohmann::json(nullptr)},
            {"children", std::move(children)}};
}

inline nlohmann::json to_json_value(const NodeView& v, const SectionTree* tree = nullptr) {
    nlohmann::json crumbs = nlohmann::json::array();
    for (const auto& [id, title] : v.breadcrumb) crumbs.push_back({{"id", id}, {"title", title}});
    nlohmann::json cards = nlohmann::json::array();
    for (const auto& c : v.cards) cards.push_back(to_json_value(c));
    return {{"node_id", v.node_id},
            {"title", v.title},
            {"breadcrumb", std::move(crumbs)},
            {"parent_id", v.parent_id ? nlohmann::json(*v.parent_id) : nlohmann::json(nullptr)},
            {"can_go_back", v.parent_id.has_value()},
            {"cards", std::move(cards)},
            {"contextual", to_json_value(v.contextual, tree)}};
}

inline nlohmann::json to_json_value(const EvidencePayload& e) {
    return {{"node_id", e.node_id},
            {"point_index", e.point_index},
            {"point_text", e.point_text},
            {"evidence_text", e.evidence_text},
            {"anchor", to_json_value(e.anchor)},
            {"source_excerpt", e.source_excerpt},
            {"excerpt_span", {{"start", e.excerpt_span.start}, {"end", e.excerpt_span.end}}},
            {"child_id", e.child_id ? nlohmann::json(*e.child_id) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json_value(const ResummarizeTicket& t) {
    return {{"doc_id", t.doc_id}, {"backend_id", t.backend_id}, {"requeued", t.requeued}, {"status", "queued"}};
}

inline int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownDocument:
    case ErrorCode::UnknownNode:
    case ErrorCode::NoSummary: return 404;
    case ErrorCode::NotReady: return 409;
    case ErrorCode::PointIndexOutOfRange: return 416;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::BackendUnavailable: return 503;
    case ErrorCode::EmptyDocument:
    case ErrorCode::UnsupportedMarkup:
    case ErrorCode::EmptyTree:
    case ErrorCode::NotASection:
    case ErrorCode::UnknownBackend:
    case ErrorCode::BadRequest: return 400;
    default: return 500;
    }
}

// ---------------------------------------------------------------------------
// HTTP

class ApiServer {
public:
    explicit ApiServer(DocumentService& service) : service_(service) {
        // JSON escaping can grow a source several-fold; the service enforces
        // the real limit on the decoded text.
        server_.set_payload_max_length(service_.options().max_source_bytes * 6 + 64 * 1024);
        routes();
    }

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port) {
        if (port == 0) return server_.bind_to_any_port(host);
        return server_.bind_to_port(host, port) ? port : -1;
    }

    bool run() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

private:
    using Request = httplib::Request;
    using Response = httplib::Response;

    static void send(Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(canonical_dump(body), "application/json");
    }

    static void fail(Response& res, int status, std::string_view name, const std::string& message) {
        send(res, status, {{"error", name}, {"message", message}});
    }

    template <typename F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const Request& req, Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                fail(res, http_status_for(e.code()), e.name(), e.what());
            } catch (const nlohmann::json::exception& e) {
                fail(res, 400, "BadRequest", e.what());
            } catch (const std::exception& e) {
                fail(res, 500, "InternalError", e.what());
            }
        };
    }

    static nlohmann::json body_object(const Request& req, bool allow_empty) {
        if (allow_empty && req.body.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::BadRequest, "body must be a JSON object");
        return j;
    }

    static std::optional<std::string> optional_field(const nlohmann::json& j, const char* key) {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        if (!j.at(key).is_string()) throw Error(ErrorCode::BadRequest, std::string(key) + " must be a string");
        return j.at(key).get<std::string>();
    }

    void routes() {
        server_.Post("/documents", guarded([this](const Request& req, Response& res) {
            const auto body = body_object(req, false);
            const auto source = optional_field(body, "source");
            if (!source) throw Error(ErrorCode::BadRequest, "missing field: source");
            const auto format_name = optional_field(body, "format").value_or("html");
            const auto format = parse_source_format(format_name);
            if (!format) throw Error(ErrorCode::BadRequest, "format must be html or markdown");
            bool created = false;
            const auto handle = service_.ingest(*source, *format, &created);
            send(res, created ? 201 : 200, to_json_value(handle));
        }));
        server_.Get("/documents", guarded([this](const Request&, Response& res) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& h : service_.list()) out.push_back(to_json_value(h));
            send(res, 200, out);
        }));
        server_.Get(R"(/documents/([0-9a-f]+))", guarded([this](const Request& req, Response& res) {
            send(res, 200, to_json_value(service_.handle(req.matches[1])));
        }));
        server_.Get(R"(/documents/([0-9a-f]+)/view)", guarded([this](const Request& req, Response& res) {
            std::optional<std::string> node;
            if (req.has_param("node") && !req.get_param_value("node").empty()) node = req.get_param_value("node");
            const std::string doc_id = req.matches[1];
            const NodeView v = service_.view(doc_id, node);
            const TreeDocument doc = load_tree(service_.document_path(doc_id));
            const SectionTree tree = to_section_tree(doc);
            send(res, 200, to_json_value(v, &tree));
        }));
        server_.Get(R"(/documents/([0-9a-f]+)/nodes/([^/]+)/context)", guarded([this](const Request& req, Response& res) {
            const std::string doc_id = req.matches[1];
            const ContextualInfo info = service_.context(doc_id, req.matches[2]);
            const SectionTree tree = to_section_tree(load_tree(service_.document_path(doc_id)));
            send(res, 200, to_json_value(info, &tree));
        }));
        server_.Get(R"(/documents/([0-9a-f]+)/nodes/([^/]+)/evidence/([^/]+))",
                    guarded([this](const Request& req, Response& res) {
                        const std::string index = req.matches[3];
                        if (index.empty() || index.size() > 18 ||
                            !std::all_of(index.begin(), index.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                            throw Error(ErrorCode::BadRequest, "point index must be a non-negative integer");
                        }
                        send(res, 200, to_json_value(service_.evidence(req.matches[1], req.matches[2], std::stoull(index))));
                    }));
        server_.Post(R"(/documents/([0-9a-f]+)/resummarize)", guarded([this](const Request& req, Response& res) {
            const auto body = body_object(req, true);
            const auto ticket =
                service_.resummarize(req.matches[1], optional_field(body, "node_id"), optional_field(body, "backend_id"));
            send(res, 202, to_json_value(ticket));
        }));
        server_.Get(R"(/documents/([0-9a-f]+)/tree)", guarded([this](const Request& req, Response& res) {
            send(res, 200, service_.navigation_tree(req.matches[1]));
        }));
        server_.set_error_handler([](const Request&, Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 413) fail(res, 413, "PayloadTooLarge", "request body too large");
            else if (res.status == 404) fail(res, 404, "NotFound", "no such endpoint");
        });
    }

    DocumentService& service_;
    httplib::Server server_;
};

} // namespace treereader
