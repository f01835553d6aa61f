#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "support.hpp"
#include "treereader/store.hpp"

using namespace treereader;
using namespace testing_support;

namespace {

/// Runs the CLI through the shell and returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string("SOURCE_DATE_EPOCH=0 '") + TREEREADER_CLI + "' " + args;
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST(Cli, WritesTreeFile) {
    TempDir dir;
    const auto out = dir.path() / "tree.json";
    ASSERT_EQ(run_cli("ingest " + quoted(fixture_path("plos_article.html")) + " --out " + quoted(out)), 0);
    const TreeDocument doc = load_tree(out);
    EXPECT_EQ(doc.title, "Interactive outlines shorten reading time for novice readers of research articles");
    EXPECT_EQ(doc.backend_id, "extractive");
    EXPECT_EQ(doc.created_at, "1970-01-01T00:00:00Z");
    EXPECT_FALSE(doc.summaries.empty());
}

TEST(Cli, OutlineModeFromExtension) {
    TempDir dir;
    const auto out = dir.path() / "outline.md";
    ASSERT_EQ(run_cli("ingest --input " + quoted(fixture_path("reading_trees.md")) + " --out " + quoted(out)), 0);
    const std::string md = read_file(out);
    EXPECT_EQ(md.rfind("# Reading Trees\n", 0), 0u);
    EXPECT_NE(md.find("[exact]"), std::string::npos);
}

TEST(Cli, ExplicitModeAndStdout) {
    TempDir dir;
    const auto out = dir.path() / "stdout.txt";
    ASSERT_EQ(run_cli("ingest " + quoted(fixture_path("arxiv_latexml.html")) + " --mode outline-markdown > " + quoted(out)), 0);
    EXPECT_EQ(read_file(out).rfind("# Sparse Attention for Long Document Retrieval\n", 0), 0u);
}

TEST(Cli, CacheDirectoryIsFilled) {
    TempDir dir;
    const auto cache = dir.path() / "cache";
    ASSERT_EQ(run_cli("ingest " + quoted(fixture_path("reading_trees.md")) + " --cache-dir " + quoted(cache) +
                      " --out " + quoted(dir.path() / "a.json")),
              0);
    EXPECT_FALSE(std::filesystem::is_empty(cache));
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    const auto sink = " > /dev/null 2>&1";
    EXPECT_EQ(run_cli(std::string(sink)), 64);
    EXPECT_EQ(run_cli(std::string("ingest") + sink), 64);
    EXPECT_EQ(run_cli(std::string("ingest x --mode bogus") + sink), 64);
    EXPECT_EQ(run_cli("ingest " + quoted(dir.path() / "missing.html") + sink), 1);
    write_file_atomic(dir.path() / "empty.html", "<html><body></body></html>");
    EXPECT_EQ(run_cli("ingest " + quoted(dir.path() / "empty.html") + sink), 1);
    EXPECT_EQ(run_cli("ingest " + quoted(fixture_path("reading_trees.md")) + " --backend nope" + sink), 1);
    EXPECT_EQ(run_cli("ingest " + quoted(fixture_path("reading_trees.md")) + " --threshold 1.5" + sink), 1);
}

TEST(Cli, BackendFailureStillWritesOutput) {
    TempDir dir;
    const auto config = dir.path() / "config.json";
    write_file_atomic(config, R"({"backends": [{"id": "dead", "endpoint": "http://127.0.0.1:9/v1/chat/completions",
        "model": "m", "api_key_env": "TREEREADER_CLI_TEST_KEY", "max_retries": 0, "timeout_seconds": 1}]})");
    const auto out = dir.path() / "tree.json";
    const int code = run_cli("ingest " + quoted(fixture_path("reading_trees.md")) + " --config " + quoted(config) +
                             " --backend dead --out " + quoted(out) + " 2>/dev/null");
    // Without the key the backend reports itself unavailable on every call.
    EXPECT_EQ(code, 2);
    const TreeDocument doc = load_tree(out);
    for (const auto& s : doc.summaries) EXPECT_EQ(s.status, SummaryStatus::Degraded);
}
