#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "summary.hpp"
#include "text.hpp"

namespace treereader {

/// A summarizer. Implementations must be safe to call concurrently and look
/// stateless to the caller. Transport failures that survive the backend's
/// own retry budget surface as Error(BackendUnavailable).
class SummarizerBackend {
public:
    virtual ~SummarizerBackend() = default;

    [[nodiscard]] virtual std::string id() const = 0;

    /// Raw reply text for `request`; `prompt` is the rendered template.
    virtual std::string complete(const SummaryRequest& request, const std::string& prompt) = 0;

    /// Identical requests always produce identical replies, so re-asking is
    /// pointless.
    [[nodiscard]] virtual bool deterministic() const { return false; }

    /// False when the backend cannot serve requests at all (e.g. missing
    /// credential).
    [[nodiscard]] virtual bool available() const { return true; }
};

/// Sentences the extractive backend chooses from. Leaf content is split
/// whole; section digests contribute only bullet lines ("- ") and caption
/// lines ("Figure: ", "Table: "), never child titles.
inline std::vector<std::string> extractive_candidates(const SummaryRequest& request) {
    std::vector<std::string> out;
    auto add_sentences = [&](std::string_view text) {
        for (const Span& s : split_sentences(text)) out.emplace_back(text.substr(s.start, s.size()));
    };
    if (request.role == SummaryRole::Leaf) {
        add_sentences(request.content);
        return out;
    }
    std::string_view content = request.content;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string_view::npos) eol = content.size();
        const std::string_view line = content.substr(pos, eol - pos);
        if (line.substr(0, 2) == "- ") add_sentences(line.substr(2));
        else if (line.substr(0, 8) == "Figure: ") add_sentences(line.substr(8));
        else if (line.substr(0, 7) == "Table: ") add_sentences(line.substr(7));
        pos = eol + 1;
    }
    return out;
}

/// Score of sentence `index` out of `count`: +1 for the first sentence,
/// +0.5 for the last, plus the fraction of the sentence's distinct content
/// words that occur in the abstract.
inline double extractive_score(std::string_view sentence, std::size_t index, std::size_t count,
                               const std::set<std::string>& abstract_vocabulary) {
    double score = 0.0;
    if (index == 0) score += 1.0;
    if (count > 1 && index + 1 == count) score += 0.5;
    const auto words = content_words(sentence);
    const std::set<std::string> distinct(words.begin(), words.end());
    if (!distinct.empty()) {
        const auto shared = std::count_if(distinct.begin(), distinct.end(),
                                          [&](const std::string& w) { return abstract_vocabulary.count(w) != 0; });
        score += static_cast<double>(shared) / static_cast<double>(distinct.size());
    }
    return score;
}

/// Indices of the selected sentences in document order: the top
/// clamp(count, 2, 5) by score, ties to the earlier sentence.
inline std::vector<std::size_t> extractive_selection(const std::vector<std::string>& sentences,
                                                     std::string_view abstract_text) {
    const auto vocab_words = content_words(abstract_text);
    const std::set<std::string> vocabulary(vocab_words.begin(), vocab_words.end());
    std::vector<double> scores;
    scores.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        scores.push_back(extractive_score(sentences[i], i, sentences.size(), vocabulary));
    }
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const std::size_t k = std::min(sentences.size(), std::clamp<std::size_t>(sentences.size(), min_points, max_points));
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

/// Deterministic offline summarizer: picks verbatim sentences, so every
/// point is its own evidence.
class ExtractiveBackend final : public SummarizerBackend {
public:
    static constexpr std::string_view backend_id = "extractive";

    [[nodiscard]] std::string id() const override { return std::string(backend_id); }
    [[nodiscard]] bool deterministic() const override { return true; }

    std::string complete(const SummaryRequest& request, const std::string& /*prompt*/) override {
        const auto sentences = extractive_candidates(request);
        std::vector<KeyPoint> points;
        if (sentences.empty()) {
            // Too short to split; reply with one degenerate point.
            std::string text = normalized(request.content);
            if (text.empty()) text = "(no content)";
            points.push_back({text, text, std::nullopt});
        } else {
            for (std::size_t i : extractive_selection(sentences, request.abstract_text)) {
                points.push_back({sentences[i], sentences[i], std::nullopt});
            }
        }
        return serialize_points(points);
    }
};

} // namespace treereader
