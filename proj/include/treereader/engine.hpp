#pragma once

// Bottom-up summarization of a section tree. Paragraphs are summarized from
// their text; sections from a digest of their children's key points. Every
// key point is anchored against the text its evidence should quote.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "anchor.hpp"
#include "backend.hpp"
#include "digest.hpp"
#include "summary.hpp"
#include "tree.hpp"
#include "view.hpp"

namespace treereader {

class SummaryCache {
public:
    virtual ~SummaryCache() = default;
    [[nodiscard]] virtual std::optional<NodeSummary> get(const std::string& key) = 0;
    virtual void put(const std::string& key, const NodeSummary& value) = 0;
};

class MemoryCache final : public SummaryCache {
public:
    [[nodiscard]] std::optional<NodeSummary> get(const std::string& key) override {
        std::lock_guard lock(mutex_);
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }
    void put(const std::string& key, const NodeSummary& value) override {
        std::lock_guard lock(mutex_);
        entries_[key] = value;
    }
    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, NodeSummary> entries_;
};

struct EngineOptions {
    PromptSet prompts;
    double fuzzy_threshold = default_fuzzy_threshold;
    std::size_t max_concurrency = 1;
};

/// Digest of what the backend sees besides the template: abstract and content.
inline std::string content_digest(const SummaryRequest& req) {
    return sha256_fields({req.abstract_text, req.content});
}

/// Cache key: hex digest of (template version, backend id, role, content digest).
inline std::string cache_key(std::string_view template_version, std::string_view backend_id, SummaryRole role,
                             std::string_view content_digest_hex) {
    return sha256_fields({template_version, backend_id, to_string(role), content_digest_hex});
}

/// Nodes that get a summary: non-empty paragraphs, and sections with at
/// least one paragraph, figure, table or summarizable subsection. Figures
/// and tables are represented by their captions and are never summarized.
inline std::set<std::string> summarizable_nodes(const SectionTree& tree) {
    std::set<std::string> out;
    walk_postorder(tree, tree.root_id, [&](const DocNode& n) {
        if (n.kind == NodeKind::Paragraph) {
            if (!normalized(n.text.value_or("")).empty()) out.insert(n.id);
            return;
        }
        if (n.kind != NodeKind::Section) return;
        const bool any = std::any_of(n.children.begin(), n.children.end(), [&](const std::string& c) {
            const DocNode& child = tree.node(c);
            return child.kind == NodeKind::Figure || child.kind == NodeKind::Table || out.count(c) != 0;
        });
        if (any) out.insert(n.id);
    });
    return out;
}

/// Section input for the backend: per child in order, its title (or "¶")
/// followed by "- " bullets of its key points; figures and tables add a
/// "Figure: "/"Table: " caption line. Unsummarizable children are skipped.
inline std::string section_digest(const SectionTree& tree, const DocNode& section, const SummaryMap& summaries) {
    const auto summarizable = summarizable_nodes(tree);
    std::string out;
    auto line = [&](std::string_view s) {
        if (!out.empty()) out.push_back('\n');
        out.append(s);
    };
    for (const auto& child_id : section.children) {
        const DocNode& child = tree.node(child_id);
        if (child.kind == NodeKind::Figure || child.kind == NodeKind::Table) {
            line(std::string(child.kind == NodeKind::Figure ? "Figure: " : "Table: ") + child.caption.value_or(""));
            continue;
        }
        if (!summarizable.count(child_id)) continue;
        const auto it = summaries.find(child_id);
        if (it == summaries.end()) throw Error(ErrorCode::MissingChildSummary, child_id);
        line(child.kind == NodeKind::Paragraph ? "\xC2\xB6" : child.title.value_or(""));
        for (const auto& p : it->second.points) line("- " + p.point_text);
    }
    return out;
}

/// Text a section's evidence is matched against: the children's key point
/// texts and captions, in order, joined by single spaces. `segments` receives
/// each contributing child's span.
inline std::string section_evidence_target(const SectionTree& tree, const DocNode& section, const SummaryMap& summaries,
                                           std::vector<std::pair<std::string, Span>>* segments = nullptr) {
    std::string out;
    auto append = [&](const std::string& child_id, std::string_view text) {
        if (!out.empty()) out.push_back(' ');
        const std::size_t start = out.size();
        out.append(text);
        if (segments) segments->push_back({child_id, {start, out.size()}});
    };
    for (const auto& child_id : section.children) {
        const DocNode& child = tree.node(child_id);
        if (child.kind == NodeKind::Figure || child.kind == NodeKind::Table) {
            append(child_id, child.caption.value_or(""));
            continue;
        }
        const auto it = summaries.find(child_id);
        if (it == summaries.end()) continue;
        for (const auto& p : it->second.points) append(child_id, p.point_text);
    }
    return out;
}

/// Evidence target of any summarized node: a paragraph's own text or a
/// section's child point texts.
inline std::string evidence_target(const SectionTree& tree, const SummaryMap& summaries, const std::string& node_id) {
    const DocNode& node = tree.node(node_id);
    if (node.kind == NodeKind::Section) return section_evidence_target(tree, node, summaries);
    return node.label();
}

/// Child whose contribution to a section's evidence target contains the
/// start of `anchor` (drill-down target for a section key point).
inline std::optional<std::string> resolve_section_anchor(const SectionTree& tree, const SummaryMap& summaries,
                                                         const std::string& section_id, const Anchor& anchor) {
    if (anchor.match_kind == MatchKind::Unmatched) return std::nullopt;
    std::vector<std::pair<std::string, Span>> segments;
    section_evidence_target(tree, tree.node(section_id), summaries, &segments);
    for (const auto& [child, span] : segments) {
        if (anchor.char_start >= span.start && anchor.char_start < span.end) return child;
    }
    return std::nullopt;
}

namespace detail {

inline std::string first_sentence(std::string_view text) {
    const auto sentences = split_sentences(text);
    if (sentences.empty()) return normalized(text).empty() ? std::string("(no content)") : normalized(text);
    return std::string(text.substr(sentences.front().start, sentences.front().size()));
}

inline void anchor_points(std::vector<KeyPoint>& points, std::string_view target, const std::string& node_id,
                          double threshold) {
    for (auto& p : points) p.anchor = anchor_evidence(p.evidence_text, target, node_id, threshold);
}

inline NodeSummary finish(const std::string& node_id, const std::string& backend_id, std::vector<KeyPoint> points,
                          SummaryStatus status, std::string_view target, double threshold) {
    NodeSummary s;
    s.node_id = node_id;
    s.backend_id = backend_id;
    s.status = status;
    anchor_points(points, target, node_id, threshold);
    s.total_word_count = total_words(points);
    s.points = std::move(points);
    return s;
}

/// A single-point Degraded summary quoting the first sentence of `target`.
inline NodeSummary degraded_fallback(const std::string& node_id, const std::string& backend_id,
                                     std::string_view target, double threshold) {
    const std::string sentence = first_sentence(target);
    return finish(node_id, backend_id, {KeyPoint{sentence, sentence, std::nullopt}}, SummaryStatus::Degraded, target,
                  threshold);
}

// Render, call, parse, validate, anchor. One re-ask on a malformed reply or
// fewer than two points, unless the backend is deterministic.
inline NodeSummary run_pipeline(const std::string& node_id, const SummaryRequest& request, std::string_view target,
                                SummarizerBackend& backend, const EngineOptions& options) {
    const std::string prompt = render_prompt(request, options.prompts.for_role(request.role));
    const int attempts = backend.deterministic() ? 1 : 2;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const bool last = attempt == attempts;
        const std::string raw = backend.complete(request, prompt);
        std::vector<KeyPoint> parsed;
        try {
            parsed = parse_backend_response(raw);
        } catch (const Error& e) {
            if (last) throw Error(ErrorCode::MalformedResponse, node_id + ": " + e.what());
            continue;
        }
        PointValidation v = validate_points(std::move(parsed));
        if (v.retry_needed) {
            if (!last) continue;
            if (v.points.empty()) return degraded_fallback(node_id, backend.id(), target, options.fuzzy_threshold);
            return finish(node_id, backend.id(), std::move(v.points), SummaryStatus::Degraded, target,
                          options.fuzzy_threshold);
        }
        return finish(node_id, backend.id(), std::move(v.points), v.status, target, options.fuzzy_threshold);
    }
    throw Error(ErrorCode::MalformedResponse, node_id);
}

inline NodeSummary rebind(NodeSummary summary, const std::string& node_id) {
    summary.node_id = node_id;
    for (auto& p : summary.points) {
        if (p.anchor) p.anchor->target_node_id = node_id;
    }
    return summary;
}

} // namespace detail

inline SummaryRequest leaf_request(const DocNode& node, std::string abstract_text) {
    return {SummaryRole::Leaf, std::move(abstract_text), node.text.value_or(""), std::nullopt};
}

inline SummaryRequest section_request(const SectionTree& tree, const DocNode& node, const SummaryMap& summaries,
                                      std::string abstract_text) {
    return {SummaryRole::Section, std::move(abstract_text), section_digest(tree, node, summaries), node.title};
}

inline NodeSummary summarize_leaf(const DocNode& node, const std::string& abstract_text, SummarizerBackend& backend,
                                  const EngineOptions& options = {}) {
    if (node.kind != NodeKind::Paragraph || normalized(node.text.value_or("")).empty()) {
        throw std::invalid_argument("summarize_leaf: node must be a non-empty paragraph");
    }
    return detail::run_pipeline(node.id, leaf_request(node, abstract_text), *node.text, backend, options);
}

inline NodeSummary summarize_section(const SectionTree& tree, const DocNode& node, const SummaryMap& summaries,
                                     const std::string& abstract_text, SummarizerBackend& backend,
                                     const EngineOptions& options = {}) {
    if (node.kind != NodeKind::Section) throw Error(ErrorCode::NotASection, node.id);
    const SummaryRequest request = section_request(tree, node, summaries, abstract_text);
    const std::string target = section_evidence_target(tree, node, summaries);
    return detail::run_pipeline(node.id, request, target, backend, options);
}

struct TreeSummaryResult {
    SummaryMap summaries;
    std::size_t backend_requests = 0; // pipeline runs that reached the backend
    std::size_t cache_hits = 0;
    std::size_t failures = 0; // nodes degraded because of backend errors
    std::size_t reused = 0;   // taken verbatim from `keep`
};

/// Summarizes every summarizable node, children strictly before parents.
/// The cache is consulted before and written after each backend call; nodes
/// in `force` skip the cache lookup. Nodes outside `force` that already have
/// a summary in `keep` reuse it untouched. Backend failures degrade the node
/// instead of aborting, so the result covers the whole tree.
inline TreeSummaryResult summarize_tree(const SectionTree& tree, SummarizerBackend& backend, SummaryCache* cache,
                                        const EngineOptions& options = {},
                                        const std::set<std::string>& force = {}, const SummaryMap* keep = nullptr) {
    if (const auto violations = validate_tree(tree); !violations.empty()) {
        throw Error(ErrorCode::InvalidTree, violations.front().node_id + ": " + violations.front().rule);
    }
    const auto summarizable = summarizable_nodes(tree);
    const std::string template_version = options.prompts.version();
    const auto parents = parent_map(tree);

    std::vector<std::string> order;
    walk_postorder(tree, tree.root_id, [&](const DocNode& n) {
        if (summarizable.count(n.id)) order.push_back(n.id);
    });

    TreeSummaryResult result;
    std::mutex result_mutex;

    auto compute = [&](const std::string& id) {
        if (keep && !force.count(id)) {
            if (const auto kept = keep->find(id); kept != keep->end()) {
                std::lock_guard lock(result_mutex);
                ++result.reused;
                result.summaries[id] = kept->second;
                return;
            }
        }
        const DocNode& node = tree.node(id);
        SummaryRequest request;
        std::string target;
        {
            std::lock_guard lock(result_mutex);
            if (node.kind == NodeKind::Paragraph) {
                request = leaf_request(node, tree.abstract_text);
                target = *node.text;
            } else {
                request = section_request(tree, node, result.summaries, tree.abstract_text);
                target = section_evidence_target(tree, node, result.summaries);
            }
        }
        const std::string key = cache_key(template_version, backend.id(), request.role, content_digest(request));
        std::optional<NodeSummary> summary;
        bool hit = false;
        bool failed = false;
        if (cache && !force.count(id)) {
            if (auto cached = cache->get(key)) {
                summary = detail::rebind(std::move(*cached), id);
                hit = true;
            }
        }
        if (!summary) {
            try {
                summary = detail::run_pipeline(id, request, target, backend, options);
            } catch (const Error&) {
                summary = detail::degraded_fallback(id, backend.id(), target, options.fuzzy_threshold);
                failed = true;
            }
            if (cache && !failed) cache->put(key, *summary);
        }
        std::lock_guard lock(result_mutex);
        if (hit) ++result.cache_hits;
        else ++result.backend_requests;
        if (failed) ++result.failures;
        result.summaries[id] = std::move(*summary);
    };

    if (options.max_concurrency <= 1 || order.size() < 2) {
        for (const auto& id : order) compute(id);
        return result;
    }

    // Ready-queue scheduler: a section becomes ready once all of its
    // summarizable children are done.
    std::map<std::string, std::size_t> pending;
    for (const auto& id : order) {
        const DocNode& n = tree.node(id);
        pending[id] = static_cast<std::size_t>(
            std::count_if(n.children.begin(), n.children.end(), [&](const std::string& c) { return summarizable.count(c) != 0; }));
    }
    std::deque<std::string> ready;
    for (const auto& id : order) {
        if (pending[id] == 0) ready.push_back(id);
    }
    std::mutex queue_mutex;
    std::condition_variable cv;
    std::size_t remaining = order.size();

    auto worker = [&] {
        for (;;) {
            std::string id;
            {
                std::unique_lock lock(queue_mutex);
                cv.wait(lock, [&] { return !ready.empty() || remaining == 0; });
                if (remaining == 0) return;
                id = std::move(ready.front());
                ready.pop_front();
            }
            compute(id);
            {
                std::lock_guard lock(queue_mutex);
                --remaining;
                if (const auto p = parents.find(id); p != parents.end() && summarizable.count(p->second)) {
                    if (--pending[p->second] == 0) ready.push_back(p->second);
                }
            }
            cv.notify_all();
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n = std::min(options.max_concurrency, order.size());
    for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return result;
}

/// Nodes whose summaries depend on `node_id`: its summarizable subtree and
/// every summarizable ancestor.
inline std::set<std::string> invalidation_set(const SectionTree& tree, const std::string& node_id) {
    const auto summarizable = summarizable_nodes(tree);
    std::set<std::string> out;
    walk_preorder(tree, node_id, [&](const DocNode& n) {
        if (summarizable.count(n.id)) out.insert(n.id);
    });
    for (const auto& id : path_from_root(tree, node_id)) {
        if (summarizable.count(id)) out.insert(id);
    }
    return out;
}

} // namespace treereader
