#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "treereader/anchor.hpp"
#include "treereader/backend.hpp"
#include "treereader/engine.hpp"
#include "treereader/outline.hpp"
#include "treereader/summary.hpp"

using namespace treereader;
using namespace testing_support;

// ---------------------------------------------------------------------------
// Anchoring

TEST(Anchor, ExactSubstring) {
    const std::string target = "The cat sat on the mat. The dog slept.";
    const Anchor a = anchor_evidence("the mat", target, "n1");
    EXPECT_EQ(a.match_kind, MatchKind::Exact);
    EXPECT_EQ(target.substr(a.char_start, a.char_end - a.char_start), "the mat");
    EXPECT_EQ(a.target_node_id, "n1");
    EXPECT_DOUBLE_EQ(a.similarity, 1.0);
}

TEST(Anchor, ExactPicksFirstOccurrence) {
    const Anchor a = anchor_evidence("ab", "xx ab ab");
    EXPECT_EQ(a.char_start, 3u);
}

TEST(Anchor, NormalizedMatchMapsToRawOffsets) {
    const std::string target = "Results  were\n\"Strongly   POSITIVE\" overall.";
    const Anchor a = anchor_evidence("“strongly positive”", target);
    EXPECT_EQ(a.match_kind, MatchKind::Normalized);
    EXPECT_EQ(target.substr(a.char_start, a.char_end - a.char_start), "Strongly   POSITIVE");
}

TEST(Anchor, FuzzyMatchAboveThreshold) {
    const std::string target = "we measured reading time across sixty participants in two conditions";
    const Anchor a = anchor_evidence("measured reeding time across sixty participants", target);
    EXPECT_EQ(a.match_kind, MatchKind::Fuzzy);
    EXPECT_GE(a.similarity, 0.85);
    EXPECT_EQ(target.substr(a.char_start, a.char_end - a.char_start), "measured reading time across sixty participants");
}

TEST(Anchor, UnmatchedBelowThreshold) {
    const Anchor a = anchor_evidence("completely different words entirely", "we measured reading time across sixty");
    EXPECT_EQ(a.match_kind, MatchKind::Unmatched);
    EXPECT_LT(a.similarity, 0.85);
}

TEST(Anchor, ThresholdIsConfigurable) {
    const std::string target = "alpha beta gamma delta";
    const Anchor loose = anchor_evidence("alpha betx gamma", target, "", 0.5);
    EXPECT_EQ(loose.match_kind, MatchKind::Fuzzy);
    const Anchor strict = anchor_evidence("alpha betx gamma", target, "", 0.99);
    EXPECT_EQ(strict.match_kind, MatchKind::Unmatched);
}

TEST(Anchor, MultibyteOffsetsAreBytes) {
    const std::string target = "na\xC3\xAFve caf\xC3\xA9 results";
    const Anchor a = anchor_evidence("caf\xC3\xA9", target);
    EXPECT_EQ(a.char_start, 7u);
    EXPECT_EQ(a.char_end, 12u);
}

TEST(Anchor, EmptyEvidenceRejected) { EXPECT_THROW((void)anchor_evidence("", "x"), std::invalid_argument); }

TEST(Anchor, EditDistanceBasics) {
    EXPECT_EQ(edit_distance(U"kitten", U"sitting"), 3u);
    EXPECT_EQ(edit_distance(U"", U"abc"), 3u);
    EXPECT_EQ(oracle::levenshtein(U"kitten", U"sitting"), 3u);
}

TEST(BestWindow, MatchesTokenAlignedBruteForce) {
    std::mt19937 rng(5);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota"};
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::string target;
        for (int i = 0; i < 18; ++i) target += (i ? " " : "") + vocab[word(rng)];
        std::string evidence;
        for (int i = 0; i < 3; ++i) evidence += (i ? " " : "") + vocab[word(rng)];
        const WindowMatch got = best_window(evidence, target);
        const auto want = oracle::all_windows(utf8::to_u32(evidence), utf8::to_u32(target), true);
        ASSERT_EQ(got.span.start, want.start) << evidence << " | " << target;
        ASSERT_EQ(got.span.end, want.end) << evidence << " | " << target;
        ASSERT_NEAR(got.similarity, want.similarity(utf8::to_u32(evidence).size()), 1e-12);
    }
}

TEST(BestWindow, TiesGoToEarliestStart) {
    const WindowMatch m = best_window("abc", "abc xyz abc");
    EXPECT_EQ(m.span.start, 0u);
    EXPECT_DOUBLE_EQ(m.similarity, 1.0);
}

TEST(BestWindow, NoWindowFits) {
    const WindowMatch m = best_window("a much longer evidence string", "tiny");
    EXPECT_DOUBLE_EQ(m.similarity, 0.0);
    EXPECT_TRUE(m.span.empty());
}

// ---------------------------------------------------------------------------
// Prompts

TEST(Prompts, LeafTemplateMatchesGolden) {
    EXPECT_EQ(std::string(prompts::leaf_template), read_file(source_dir() / "tests" / "golden" / "leaf_prompt.golden.txt"));
    EXPECT_EQ(std::string(prompts::leaf_template), read_file(source_dir() / "templates" / "leaf_prompt.txt"));
    EXPECT_EQ(std::string(prompts::section_template), read_file(source_dir() / "templates" / "section_prompt.txt"));
}

TEST(Prompts, LeafTemplateContract) {
    const std::string t(prompts::leaf_template);
    EXPECT_EQ(oracle::count_occurrences(t, "2~5 key points"), 1u);
    EXPECT_EQ(oracle::count_occurrences(t, "not be more than 70 words"), 1u);
    EXPECT_EQ(oracle::count_occurrences(t, "\"point\" (str)"), 1u);
    EXPECT_EQ(oracle::count_occurrences(t, "\"evidence\" (str)"), 1u);
    EXPECT_EQ(oracle::count_occurrences(t, "{abstract}"), 1u);
    EXPECT_EQ(oracle::count_occurrences(t, "{node.content}"), 1u);
}

TEST(Prompts, RenderSubstitutesOnce) {
    const SummaryRequest req{SummaryRole::Leaf, "ABS {node.content}", "BODY {abstract}", std::nullopt};
    const std::string out = render_prompt(req, PromptTemplate("[{abstract}] [{node.content}] [{title}]"));
    EXPECT_EQ(out, "[ABS {node.content}] [BODY {abstract}] []");
}

TEST(Prompts, RenderedLeafPromptEmbedsInputs) {
    const SummaryRequest req{SummaryRole::Leaf, "The abstract.", "The paragraph.", std::nullopt};
    const std::string out = render_prompt(req, PromptSet{}.leaf);
    EXPECT_EQ(oracle::count_occurrences(out, "<Abstract>\nThe abstract.\n</Abstract>"), 1u);
    EXPECT_EQ(oracle::count_occurrences(out, "<Paragraph>\nThe paragraph.\n</Paragraph>"), 1u);
    EXPECT_EQ(oracle::count_occurrences(out, "{abstract}"), 0u);
    EXPECT_EQ(oracle::count_occurrences(out, "{node.content}"), 0u);
}

TEST(Prompts, MissingSlotRejected) {
    const SummaryRequest req{};
    try {
        (void)render_prompt(req, PromptTemplate("no slots {content}"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingSlot);
    }
    EXPECT_THROW((void)render_prompt(req, PromptTemplate("{abstract} only")), Error);
}

TEST(Prompts, VersionTracksTemplates) {
    PromptSet a;
    PromptSet b;
    EXPECT_EQ(a.version(), b.version());
    b.section = PromptTemplate("{abstract} {content} changed");
    EXPECT_NE(a.version(), b.version());
}

// ---------------------------------------------------------------------------
// Parsing replies

TEST(ParseReply, PlainObject) {
    const auto pts = parse_backend_response(R"({"points":[{"point":"A.","evidence":"a"},{"point":"B.","evidence":"b"}]})");
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts[1].point_text, "B.");
    EXPECT_EQ(pts[1].evidence_text, "b");
}

TEST(ParseReply, ToleratesProseAndFences) {
    const auto pts = parse_backend_response("Sure! Here you go:\n```json\n{\"points\": [{\"point\": \"A {x}.\", "
                                            "\"evidence\": \"a}\"}]}\n```\nHope this helps {not json}");
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].point_text, "A {x}.");
    EXPECT_EQ(pts[0].evidence_text, "a}");
}

TEST(ParseReply, Errors) {
    auto code_of = [](std::string_view raw) {
        try {
            (void)parse_backend_response(raw);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    EXPECT_EQ(code_of("no json here"), ErrorCode::MalformedResponse);
    EXPECT_EQ(code_of(R"({"items": []})"), ErrorCode::MalformedResponse);
    EXPECT_EQ(code_of(R"({"points": {}})"), ErrorCode::MalformedResponse);
    EXPECT_EQ(code_of(R"({"points": [{"point": "A"}]})"), ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"points": [{"point": "  ", "evidence": "x"}]})"), ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"points": ["A"]})"), ErrorCode::MissingField);
}

TEST(ParseReply, RoundTripsSerializedPoints) {
    const std::vector<KeyPoint> pts = {{"One \"quoted\".", "x\ny", std::nullopt}, {"Two.", "z", std::nullopt}};
    const auto back = parse_backend_response(serialize_points(pts));
    EXPECT_EQ(back, pts);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::vector<KeyPoint> points_of(std::size_t n, std::size_t words_each) {
    std::vector<KeyPoint> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (std::size_t w = 0; w < words_each; ++w) text += (w ? " w" : "w") + std::to_string(w);
        out.push_back({text, "e", std::nullopt});
    }
    return out;
}

} // namespace

TEST(Validate, RuleTable) {
    struct Row {
        std::size_t n, words;
        SummaryStatus status;
        bool retry;
        std::size_t kept;
    };
    for (const Row& r : {Row{0, 5, SummaryStatus::Degraded, true, 0}, Row{1, 5, SummaryStatus::Degraded, true, 1},
                         Row{2, 5, SummaryStatus::Ok, false, 2}, Row{5, 14, SummaryStatus::Ok, false, 5},
                         Row{5, 15, SummaryStatus::OverBudget, false, 5}, Row{2, 36, SummaryStatus::OverBudget, false, 2},
                         Row{6, 3, SummaryStatus::PointCountRepaired, false, 5},
                         Row{9, 40, SummaryStatus::PointCountRepaired, false, 5}}) {
        const auto v = validate_points(points_of(r.n, r.words));
        SCOPED_TRACE(std::to_string(r.n) + " x " + std::to_string(r.words));
        EXPECT_EQ(v.status, r.status);
        EXPECT_EQ(v.retry_needed, r.retry);
        EXPECT_EQ(v.points.size(), r.kept);
        EXPECT_EQ(v.word_count, r.kept * r.words);
    }
}

TEST(Validate, AgreesWithRuleOracle) {
    std::mt19937 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto pts = points_of(rng() % 9, 1 + rng() % 30);
        const auto got = validate_points(pts);
        const auto want = oracle::validate_rules(pts);
        ASSERT_EQ(got.status, want.status);
        ASSERT_EQ(got.retry_needed, want.retry);
        ASSERT_EQ(got.points.size(), want.kept);
        ASSERT_EQ(got.word_count, want.words);
    }
}

// ---------------------------------------------------------------------------
// Extractive backend

TEST(Extractive, SelectionMatchesBruteForce) {
    std::mt19937 rng(9);
    const std::vector<std::string> words = {"tree", "reader", "summary", "points", "paper", "figure", "novice", "the", "of"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> sentences;
        const std::size_t n = 1 + rng() % 9;
        for (std::size_t i = 0; i < n; ++i) {
            std::string s;
            for (std::size_t w = 0; w < 2 + rng() % 6; ++w) s += (w ? " " : "") + words[rng() % words.size()];
            sentences.push_back(s + ".");
        }
        std::string abstract;
        for (int w = 0; w < 5; ++w) abstract += words[rng() % words.size()] + " ";
        ASSERT_EQ(extractive_selection(sentences, abstract), oracle::extractive_top_k(sentences, abstract));
    }
}

TEST(Extractive, PointsAreVerbatimSentences) {
    ExtractiveBackend backend;
    const SummaryRequest req{SummaryRole::Leaf, "reading trees", "One sentence here. Another about trees. Third one.",
                             std::nullopt};
    const auto pts = parse_backend_response(backend.complete(req, ""));
    ASSERT_EQ(pts.size(), 3u);
    for (const auto& p : pts) {
        EXPECT_EQ(p.point_text, p.evidence_text);
        EXPECT_NE(req.content.find(p.evidence_text), std::string::npos);
    }
}

TEST(Extractive, SectionCandidatesSkipTitles) {
    const SummaryRequest req{SummaryRole::Section, "", "Methods\n- First point.\n\xC2\xB6\n- Second point.\nFigure: A plot.",
                             std::string("S")};
    EXPECT_EQ(extractive_candidates(req), (std::vector<std::string>{"First point.", "Second point.", "A plot."}));
}

TEST(Extractive, SingleSentenceDegrades) {
    ExtractiveBackend backend;
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Only one sentence here.", std::nullopt, {}}}));
    const auto para = tree.root().children[0];
    const NodeSummary s = summarize_leaf(tree.node(para), tree.abstract_text, backend);
    EXPECT_EQ(s.status, SummaryStatus::Degraded);
    ASSERT_EQ(s.points.size(), 1u);
    EXPECT_EQ(s.points[0].anchor->match_kind, MatchKind::Exact);
}

// ---------------------------------------------------------------------------
// Engine

TEST(Engine, LeafRetriesOnceOnMalformedReply) {
    int calls = 0;
    ScriptedBackend backend("s", [&](const SummaryRequest& r, const std::string& p) {
        return ++calls == 1 ? std::string("garbage") : two_point_reply()(r, p);
    });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma delta.", std::nullopt, {}}}));
    const NodeSummary s = summarize_leaf(tree.node(tree.root().children[0]), "abs", backend);
    EXPECT_EQ(calls, 2);
    EXPECT_EQ(s.status, SummaryStatus::Ok);
    EXPECT_EQ(s.points.size(), 2u);
    EXPECT_EQ(s.backend_id, "s");
}

TEST(Engine, TwoMalformedRepliesThrow) {
    ScriptedBackend backend("s", [](const SummaryRequest&, const std::string&) { return std::string("nope"); });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}}}));
    try {
        (void)summarize_leaf(tree.node(tree.root().children[0]), "abs", backend);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedResponse);
    }
    EXPECT_EQ(backend.calls(), 2u);
}

TEST(Engine, SinglePointTwiceIsDegraded) {
    ScriptedBackend backend("s", [](const SummaryRequest&, const std::string&) { return reply_with({{"Only.", "Alpha"}}); });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}}}));
    const NodeSummary s = summarize_leaf(tree.node(tree.root().children[0]), "abs", backend);
    EXPECT_EQ(backend.calls(), 2u);
    EXPECT_EQ(s.status, SummaryStatus::Degraded);
    EXPECT_EQ(s.points.size(), 1u);
}

TEST(Engine, ZeroPointsFallsBackToFirstSentence) {
    ScriptedBackend backend("s", [](const SummaryRequest&, const std::string&) { return std::string(R"({"points":[]})"); });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}}}));
    const NodeSummary s = summarize_leaf(tree.node(tree.root().children[0]), "abs", backend);
    EXPECT_EQ(s.status, SummaryStatus::Degraded);
    ASSERT_EQ(s.points.size(), 1u);
    EXPECT_EQ(s.points[0].point_text, "Alpha beta.");
    EXPECT_EQ(s.points[0].anchor->match_kind, MatchKind::Exact);
}

TEST(Engine, AnchorsPointsAgainstParagraph) {
    ScriptedBackend backend("s", [](const SummaryRequest&, const std::string&) {
        return reply_with({{"P1.", "Alpha beta"}, {"P2.", "unrelated words that never appear"}});
    });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}}}));
    const auto id = tree.root().children[0];
    const NodeSummary s = summarize_leaf(tree.node(id), "abs", backend);
    EXPECT_EQ(s.points[0].anchor->match_kind, MatchKind::Exact);
    EXPECT_EQ(s.points[0].anchor->target_node_id, id);
    EXPECT_EQ(s.points[1].anchor->match_kind, MatchKind::Unmatched);
    EXPECT_EQ(s.total_word_count, 2u);
}

TEST(Engine, SectionDigestAndEvidenceTarget) {
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Heading, 1, "Sec", std::nullopt, {}},
                                                         {BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}},
                                                         {BlockKind::Figure, 0, "A plot", std::string("A plot"), {}},
                                                         {BlockKind::Heading, 2, "Sub", std::nullopt, {}},
                                                         {BlockKind::Paragraph, 0, "Delta eps. Zeta.", std::nullopt, {}}}));
    ExtractiveBackend backend;
    const auto result = summarize_tree(tree, backend, nullptr);
    const DocNode& sec = tree.node(tree.root().children[0]);
    EXPECT_EQ(section_digest(tree, sec, result.summaries),
              "\xC2\xB6\n- Alpha beta.\n- Gamma.\nFigure: A plot\nSub\n- Delta eps.\n- Zeta.");
    std::vector<std::pair<std::string, Span>> segments;
    EXPECT_EQ(section_evidence_target(tree, sec, result.summaries, &segments),
              "Alpha beta. Gamma. A plot Delta eps. Zeta.");
    ASSERT_EQ(segments.size(), 5u);
    EXPECT_EQ(segments[2].first, sec.children[1]);
}

TEST(Engine, SectionPointsResolveToChildren) {
    const SectionTree tree = build_tree(parse_fixture("springer_article.html"));
    ExtractiveBackend backend;
    const auto result = summarize_tree(tree, backend, nullptr);
    for (const auto& [id, s] : result.summaries) {
        if (tree.node(id).kind != NodeKind::Section) continue;
        for (const auto& p : s.points) {
            ASSERT_TRUE(p.anchor);
            EXPECT_EQ(p.anchor->match_kind, MatchKind::Exact);
            const auto child = resolve_section_anchor(tree, result.summaries, id, *p.anchor);
            ASSERT_TRUE(child);
            const auto& kids = tree.node(id).children;
            EXPECT_NE(std::find(kids.begin(), kids.end(), *child), kids.end());
        }
    }
}

TEST(Engine, SummarizableNodes) {
    const SectionTree tree = build_tree(parse_fixture("springer_article.html"));
    const auto nodes = summarizable_nodes(tree);
    std::size_t paragraphs = 0;
    for (const auto& [id, n] : tree.nodes) {
        if (n.kind == NodeKind::Paragraph) {
            ++paragraphs;
            EXPECT_TRUE(nodes.count(id));
        }
        if (n.kind == NodeKind::Figure || n.kind == NodeKind::Table) EXPECT_FALSE(nodes.count(id));
        if (n.kind == NodeKind::Section && n.title == "References") EXPECT_FALSE(nodes.count(id));
    }
    // 12 paragraphs, 8 non-empty sections and the root.
    EXPECT_EQ(paragraphs, 12u);
    EXPECT_EQ(nodes.size(), 12u + 8u + 1u);
}

TEST(Engine, CallOrderIsPostOrder) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const SectionTree tree = build_tree(raw_from_blocks(random_blocks(rng, 80, 5)));
        ScriptedBackend backend("s", two_point_reply());
        const auto result = summarize_tree(tree, backend, nullptr);
        std::map<std::string, std::size_t> position;
        const auto requests = backend.requests();
        std::vector<std::string> expected;
        oracle::post_order(tree, tree.root_id, expected);
        const auto summarizable = summarizable_nodes(tree);
        expected.erase(std::remove_if(expected.begin(), expected.end(), [&](const std::string& id) { return !summarizable.count(id); }),
                       expected.end());
        ASSERT_EQ(requests.size(), expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const DocNode& n = tree.node(expected[i]);
            const SummaryRequest want = n.kind == NodeKind::Paragraph
                                            ? leaf_request(n, tree.abstract_text)
                                            : section_request(tree, n, result.summaries, tree.abstract_text);
            ASSERT_EQ(requests[i].content, want.content);
            ASSERT_EQ(requests[i].role, want.role);
        }
    }
}

TEST(Engine, ConcurrentRunMatchesSequential) {
    const SectionTree tree = build_tree(parse_fixture("plos_article.html"));
    ExtractiveBackend backend;
    EngineOptions parallel;
    parallel.max_concurrency = 4;
    EXPECT_EQ(summarize_tree(tree, backend, nullptr, parallel).summaries, summarize_tree(tree, backend, nullptr).summaries);
}

TEST(Engine, CacheSkipsBackendOnRerun) {
    const SectionTree tree = build_tree(parse_fixture("arxiv_latexml.html"));
    ScriptedBackend backend("s", two_point_reply());
    MemoryCache cache;
    const auto first = summarize_tree(tree, backend, &cache);
    const std::size_t calls = backend.calls();
    EXPECT_EQ(first.cache_hits, 0u);
    const auto second = summarize_tree(tree, backend, &cache);
    EXPECT_EQ(backend.calls(), calls);
    EXPECT_EQ(second.backend_requests, 0u);
    EXPECT_EQ(second.cache_hits, first.summaries.size());
    EXPECT_EQ(second.summaries, first.summaries);
}

TEST(Engine, CacheKeyCoversTemplateBackendAndContent) {
    const SummaryRequest a{SummaryRole::Leaf, "abs", "text", std::nullopt};
    SummaryRequest b = a;
    b.abstract_text = "other";
    const std::string base = cache_key("v1", "x", SummaryRole::Leaf, content_digest(a));
    EXPECT_NE(base, cache_key("v2", "x", SummaryRole::Leaf, content_digest(a)));
    EXPECT_NE(base, cache_key("v1", "y", SummaryRole::Leaf, content_digest(a)));
    EXPECT_NE(base, cache_key("v1", "x", SummaryRole::Section, content_digest(a)));
    EXPECT_NE(base, cache_key("v1", "x", SummaryRole::Leaf, content_digest(b)));
    EXPECT_EQ(base.size(), 64u);
}

TEST(Engine, ForceAndKeep) {
    const SectionTree tree = build_tree(parse_fixture("reading_trees.md"));
    ScriptedBackend backend("s", two_point_reply());
    MemoryCache cache;
    const auto first = summarize_tree(tree, backend, &cache);
    const DocNode& background = tree.node(tree.node(tree.root().children[0]).children[1]);
    ASSERT_EQ(background.title, "Background");
    const std::string leaf = background.children[0];
    const auto force = invalidation_set(tree, leaf);
    const std::size_t before = backend.calls();
    const auto second = summarize_tree(tree, backend, &cache, {}, force, &first.summaries);
    EXPECT_EQ(backend.calls() - before, force.size());
    EXPECT_EQ(second.reused, first.summaries.size() - force.size());
    EXPECT_EQ(second.summaries, first.summaries);
}

TEST(Engine, InvalidationSetIsSubtreeAndAncestors) {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const SectionTree tree = build_tree(raw_from_blocks(random_blocks(rng, 40, 5)));
        const auto keep = summarizable_nodes(tree);
        for (const auto& [id, n] : tree.nodes) ASSERT_EQ(invalidation_set(tree, id), oracle::ancestor_closure(tree, id, keep));
    }
}

TEST(Engine, BackendFailureDegradesNode) {
    ScriptedBackend backend("s", [](const SummaryRequest& r, const std::string& p) -> std::string {
        if (r.content.find("Gamma") != std::string::npos) throw Error(ErrorCode::BackendUnavailable, "down");
        return two_point_reply()(r, p);
    });
    const SectionTree tree = build_tree(raw_from_blocks({{BlockKind::Paragraph, 0, "Alpha beta. Gamma.", std::nullopt, {}},
                                                         {BlockKind::Paragraph, 0, "Other text. More.", std::nullopt, {}}}));
    MemoryCache cache;
    const auto result = summarize_tree(tree, backend, &cache);
    EXPECT_EQ(result.failures, 1u);
    EXPECT_EQ(result.summaries.at(tree.root().children[0]).status, SummaryStatus::Degraded);
    EXPECT_EQ(result.summaries.size(), 3u);
    EXPECT_EQ(cache.size(), 2u);
}

TEST(Engine, InvalidTreeRejected) {
    SectionTree tree = build_tree(parse_fixture("reading_trees.md"));
    tree.nodes[tree.root_id].children.push_back("ghost");
    ExtractiveBackend backend;
    try {
        (void)summarize_tree(tree, backend, nullptr);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidTree);
    }
}

// ---------------------------------------------------------------------------
// Outline

TEST(Outline, OneBulletPerKeyPoint) {
    const SectionTree tree = build_tree(parse_fixture("springer_article.html"));
    ExtractiveBackend backend;
    const auto result = summarize_tree(tree, backend, nullptr);
    const std::string md = outline_markdown(tree, result.summaries);
    std::size_t points = 0;
    for (const auto& [id, s] : result.summaries) points += s.points.size();
    std::size_t bullets = 0;
    std::istringstream in(md);
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(' ');
        if (first != std::string::npos && line.compare(first, 2, "- ") == 0) {
            ++bullets;
            EXPECT_TRUE(line.size() > 8 && line.compare(line.size() - 8, 8, " [exact]") == 0) << line;
        }
    }
    EXPECT_EQ(bullets, points);
    EXPECT_EQ(md.rfind("# Sensor-driven irrigation scheduling in smallholder orchards\n\n> Smallholder", 0), 0u);
    EXPECT_NE(md.find("\n## Introduction\n"), std::string::npos);
    EXPECT_NE(md.find("\n### Study sites\n"), std::string::npos);
    EXPECT_NE(md.find("\n*Table: Table 1 Characteristics of the twelve study orchards*\n"), std::string::npos);
}
