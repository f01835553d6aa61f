// treereader: ingest a paper, summarize it and write a tree file or an
// outline, or serve the HTTP API.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "treereader/config.hpp"
#include "treereader/engine.hpp"
#include "treereader/ingest.hpp"
#include "treereader/outline.hpp"
#include "treereader/service.hpp"
#include "treereader/store.hpp"

namespace fs = std::filesystem;
using namespace treereader;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_backend = 2;
constexpr int exit_usage = 64;

struct Options {
    std::string input;
    std::string format;
    std::string backend;
    std::string out;
    std::string mode;
    std::string config;
    std::optional<double> threshold;
    std::optional<std::size_t> concurrency;
    std::string cache_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir;
    int verbosity = 0;
};

SourceFormat detect_format(const Options& o, std::string_view bytes) {
    if (!o.format.empty()) {
        if (const auto f = parse_source_format(o.format)) return *f;
        throw Error(ErrorCode::ConfigError, "unknown format: " + o.format);
    }
    std::string ext = fs::path(o.input).extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    if (const auto f = parse_source_format(ext)) return *f;
    const auto first = bytes.find_first_not_of(" \t\r\n");
    return first != std::string_view::npos && bytes[first] == '<' ? SourceFormat::Html : SourceFormat::Markdown;
}

std::string resolve_mode(const Options& o) {
    if (!o.mode.empty()) return o.mode;
    const std::string ext = fs::path(o.out).extension().string();
    return ext == ".md" || ext == ".markdown" ? "outline-markdown" : "tree-file";
}

Config load_or_default(const Options& o) {
    Config c = o.config.empty() ? Config{} : load_config(o.config);
    if (o.threshold) {
        if (!(*o.threshold > 0.0 && *o.threshold <= 1.0)) throw Error(ErrorCode::ConfigError, "--threshold must be in (0, 1]");
        c.fuzzy_threshold = *o.threshold;
    }
    if (o.concurrency) c.max_concurrency = std::max<std::size_t>(1, *o.concurrency);
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    return c;
}

void emit(const Options& o, const std::string& content) {
    if (o.out.empty() || o.out == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    write_file_atomic(o.out, content);
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a
// dedicated waiter thread.
int serve(DocumentService& service, const Options& o) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ApiServer api(service);
    const int port = api.bind(o.host, o.port);
    if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + o.host + ":" + std::to_string(o.port));
    std::cerr << "treereader: listening on http://" << o.host << ":" << port << "\n";
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        api.stop();
    });
    api.run();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return exit_ok;
}

int run_ingest(const Options& o) {
    const std::string mode = resolve_mode(o);
    const Config config = load_or_default(o);
    const std::string bytes = read_file(o.input);
    if (bytes.size() > config.max_source_bytes) {
        throw Error(ErrorCode::PayloadTooLarge, o.input + " exceeds " + std::to_string(config.max_source_bytes) + " bytes");
    }
    const SourceFormat format = detect_format(o, bytes);

    if (mode == "serve") {
        ServiceOptions so = service_options(config);
        if (!o.backend.empty()) so.default_backend = o.backend;
        BackendRegistry registry(config);
        (void)registry.get(so.default_backend);
        DocumentService service(so, std::move(registry));
        const auto handle = service.ingest(bytes, format);
        std::cout << handle.doc_id << "\n";
        std::cout.flush();
        return serve(service, o);
    }

    const RawDocument raw = parse_document(bytes, format);
    const SectionTree tree = build_tree(raw);
    const BackendRegistry registry(config);
    const std::string backend_id = o.backend.empty() ? config.default_backend : o.backend;
    const auto backend = registry.get(backend_id);
    const EngineOptions engine = engine_options(config);

    std::unique_ptr<FileCache> cache;
    if (!o.cache_dir.empty()) cache = std::make_unique<FileCache>(o.cache_dir);
    const auto result = summarize_tree(tree, *backend, cache.get(), engine);
    if (o.verbosity > 0) {
        std::cerr << "treereader: " << tree.nodes.size() << " nodes, " << result.summaries.size() << " summaries, "
                  << result.backend_requests << " backend requests, " << result.cache_hits << " cache hits, "
                  << result.failures << " failures\n";
    }

    if (mode == "outline-markdown") {
        emit(o, outline_markdown(tree, result.summaries));
    } else {
        const TreeDocument doc =
            make_tree_document(raw, tree, result.summaries, backend->id(), engine.prompts.version(), timestamp_utc());
        emit(o, serialize_tree_document(doc));
    }
    if (result.failures > 0) {
        std::cerr << "treereader: " << result.failures << " node(s) degraded by backend failures\n";
        return exit_backend;
    }
    return exit_ok;
}

int run_serve(const Options& o) {
    const Config config = load_or_default(o);
    ServiceOptions so = service_options(config);
    if (!o.backend.empty()) so.default_backend = o.backend;
    BackendRegistry registry(config);
    (void)registry.get(so.default_backend);
    DocumentService service(so, std::move(registry));
    return serve(service, o);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Summarize a paper into a navigable tree of key points."};
    app.name("treereader");
    app.require_subcommand(1);

    Options o;
    auto* ingest = app.add_subcommand("ingest", "Ingest one HTML or Markdown paper");
    ingest->add_option("input,--input", o.input, "Source file (HTML or Markdown)");
    ingest->add_option("--format", o.format, "html or markdown (default: from the extension)")
        ->check(CLI::IsMember({"html", "markdown"}));
    ingest->add_option("--backend", o.backend, "Backend id (default: extractive)");
    ingest->add_option("--out", o.out, "Output file (default: stdout)");
    ingest->add_option("--mode", o.mode, "tree-file, outline-markdown or serve (default: from --out)")
        ->check(CLI::IsMember({"tree-file", "outline-markdown", "serve"}));
    ingest->add_option("--config", o.config, "JSON config file");
    ingest->add_option("--threshold", o.threshold, "Fuzzy anchoring threshold in (0, 1]");
    ingest->add_option("--concurrency", o.concurrency, "Concurrent backend requests");
    ingest->add_option("--cache-dir", o.cache_dir, "Summary cache directory");
    ingest->add_option("--host", o.host, "Host for --mode serve");
    ingest->add_option("--port", o.port, "Port for --mode serve");
    ingest->add_option("--data-dir", o.data_dir, "Document store for --mode serve");
    ingest->add_flag("-v,--verbose", o.verbosity, "Report progress on stderr");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--config", o.config, "JSON config file");
    serve_cmd->add_option("--backend", o.backend, "Default backend id");
    serve_cmd->add_option("--host", o.host, "Listen address");
    serve_cmd->add_option("--port", o.port, "Listen port (0 picks a free one)");
    serve_cmd->add_option("--data-dir", o.data_dir, "Document store directory");
    serve_cmd->add_option("--threshold", o.threshold, "Fuzzy anchoring threshold in (0, 1]");
    serve_cmd->add_flag("-v,--verbose", o.verbosity, "Verbose logging");

    try {
        app.parse(argc, argv);
        if (ingest->parsed() && o.input.empty()) throw CLI::RequiredError("input");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "treereader: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    try {
        return ingest->parsed() ? run_ingest(o) : run_serve(o);
    } catch (const Error& e) {
        std::cerr << "treereader: " << e.what() << "\n";
        return e.code() == ErrorCode::BackendUnavailable ? exit_backend : exit_input;
    } catch (const std::exception& e) {
        std::cerr << "treereader: " << e.what() << "\n";
        return exit_input;
    }
}
