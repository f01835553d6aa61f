#pragma once

// Shared test helpers: fixture access, scripted backends and random inputs.

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "treereader/backend.hpp"
#include "treereader/ingest.hpp"
#include "treereader/store.hpp"
#include "treereader/summary.hpp"
#include "treereader/tree.hpp"

namespace testing_support {

using namespace treereader;

inline std::filesystem::path source_dir() { return TREEREADER_SOURCE_DIR; }
inline std::filesystem::path fixture_path(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }
inline std::string fixture(const std::string& name) { return read_file(fixture_path(name)); }

inline const std::vector<std::string>& html_fixtures() {
    static const std::vector<std::string> names = {"springer_article.html", "arxiv_latexml.html", "plos_article.html"};
    return names;
}

inline RawDocument parse_fixture(const std::string& name) {
    const bool md = name.size() > 3 && name.compare(name.size() - 3, 3, ".md") == 0;
    return parse_document(fixture(name), md ? SourceFormat::Markdown : SourceFormat::Html);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("treereader-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Backend whose replies come from a callback; records every request.
class ScriptedBackend final : public SummarizerBackend {
public:
    using Reply = std::function<std::string(const SummaryRequest&, const std::string&)>;

    ScriptedBackend(std::string id, Reply reply, bool deterministic = false)
        : id_(std::move(id)), reply_(std::move(reply)), deterministic_(deterministic) {}

    [[nodiscard]] std::string id() const override { return id_; }
    [[nodiscard]] bool deterministic() const override { return deterministic_; }
    [[nodiscard]] bool available() const override { return available_; }
    void set_available(bool a) { available_ = a; }

    std::string complete(const SummaryRequest& request, const std::string& prompt) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
            prompts_.push_back(prompt);
        }
        return reply_(request, prompt);
    }

    [[nodiscard]] std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return requests_.size();
    }
    [[nodiscard]] std::vector<SummaryRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }
    [[nodiscard]] std::vector<std::string> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }

private:
    std::string id_;
    Reply reply_;
    bool deterministic_;
    bool available_ = true;
    mutable std::mutex mutex_;
    std::vector<SummaryRequest> requests_;
    std::vector<std::string> prompts_;
};

inline std::string reply_with(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<KeyPoint> points;
    for (const auto& [p, e] : pairs) points.push_back({p, e, std::nullopt});
    return serialize_points(points);
}

/// Two valid points quoting the first and last word of the content.
inline ScriptedBackend::Reply two_point_reply() {
    return [](const SummaryRequest& r, const std::string&) {
        const auto words = token_spans(r.content);
        const std::string first = words.empty() ? "x" : r.content.substr(words.front().start, words.front().size());
        const std::string last = words.empty() ? "x" : r.content.substr(words.back().start, words.back().size());
        return reply_with({{"The text opens with " + first + ".", first}, {"The text closes with " + last + ".", last}});
    };
}

/// Random block stream: headings nest at most `max_depth` levels below the
/// root; paragraph texts and heading titles are unique.
inline std::vector<Block> random_blocks(std::mt19937& rng, std::size_t max_blocks, int max_depth) {
    std::uniform_int_distribution<int> kind(0, 9);
    std::uniform_int_distribution<std::size_t> count(1, max_blocks);
    const std::size_t n = count(rng);
    std::vector<Block> blocks;
    int level = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = kind(rng);
        Block b;
        if (k < 3) {
            std::uniform_int_distribution<int> lv(1, std::min(max_depth - 1, level + 1));
            b.kind = BlockKind::Heading;
            b.level = std::max(1, lv(rng));
            level = b.level;
            b.text = "Heading " + std::to_string(i);
        } else if (k < 8) {
            b.kind = BlockKind::Paragraph;
            b.text = "Paragraph " + std::to_string(i) + " opens the topic. It then adds detail number " +
                     std::to_string(i) + ". Finally it concludes.";
        } else {
            b.kind = k == 8 ? BlockKind::Figure : BlockKind::Table;
            b.caption = (k == 8 ? "Figure " : "Table ") + std::to_string(i) + " shows item " + std::to_string(i);
            b.text = *b.caption;
        }
        blocks.push_back(std::move(b));
    }
    if (std::none_of(blocks.begin(), blocks.end(), [](const Block& b) { return b.kind != BlockKind::Heading; })) {
        blocks.push_back({BlockKind::Paragraph, 0, "Paragraph tail. It ends here.", std::nullopt, {}});
    }
    return blocks;
}

inline RawDocument raw_from_blocks(std::vector<Block> blocks, std::string title = "Random document",
                                   std::string abstract_text = "An abstract about topics and detail.") {
    RawDocument raw;
    raw.title = std::move(title);
    raw.abstract_text = std::move(abstract_text);
    raw.blocks = std::move(blocks);
    raw.source_id = sha256_hex(raw.title);
    return raw;
}

} // namespace testing_support
