#include "involve/cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "involve/bst.h"
#include "involve/dataset.h"
#include "involve/detector/checkpoint.h"
#include "involve/detector/config.h"
#include "involve/detector/trainer.h"
#include "involve/embedder.h"
#include "involve/errors.h"
#include "involve/eval.h"
#include "involve/forge.h"
#include "involve/llm_client.h"
#include "involve/report.h"
#include "involve/rng.h"
#include "involve/similarity.h"
#include "involve/textprep.h"
#include "involve/tokenizer.h"

#ifndef INVOLVE_VERSION
#define INVOLVE_VERSION "0.0.0"
#endif
#ifndef INVOLVE_DATA_DIR
#define INVOLVE_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace involve {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const ModelLoadError*>(&e) || dynamic_cast<const EmbedderError*>(&e) ||
        dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const GenerationFailed*>(&e) ||
        dynamic_cast<const EmptyGeneration*>(&e)) {
        return kExitModel;
    }
    if (dynamic_cast<const Error*>(&e)) return kExitUsage;
    return kExitFailure;
}

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool json = false;
    bool verbose = false;
    std::string manifest_path;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

void write_manifest(const fs::path& path, const std::vector<std::string>& args,
                    const std::string& command, const json& effective, std::uint64_t seed,
                    json versions) {
    versions["involve"] = INVOLVE_VERSION;
    versions["preproc"] = preproc_signature(current_preproc_config());
#ifdef __VERSION__
    versions["compiler"] = __VERSION__;
#endif
    const json manifest = {{"command_line", args},
                           {"command", command},
                           {"config", effective},
                           {"config_hash", fmt::format("{:016x}", fnv1a64(effective.dump()))},
                           {"seed", seed},
                           {"versions", versions}};
    write_text(path, manifest.dump(2) + "\n");
}

fs::path manifest_or(const GlobalOptions& g, const fs::path& fallback) {
    return g.manifest_path.empty() ? fallback : fs::path(g.manifest_path);
}

void configure_logging(bool verbose) {
    auto logger = spdlog::get("involve");
    if (!logger) logger = spdlog::stderr_logger_mt("involve");
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

// ---- score ----------------------------------------------------------------

struct ScoreArgs {
    std::string prompt;
    std::string generated;
    std::string embedder = default_embedder_id();
    std::string normalization;
};

int cmd_score(const ScoreArgs& a, const GlobalOptions& g, std::ostream& out) {
    const auto embedder = make_embedder(a.embedder);
    const NormalizationConstants constants =
        a.normalization.empty() ? NormalizationConstants::fallback() : read_normalization(a.normalization);
    const std::string prompt = read_text(a.prompt);
    const std::string generated = read_text(a.generated);
    const RawScores raw = score_pair(prompt, generated, *embedder);
    const InvolvementScores s = normalize_scores(raw, constants);
    if (g.json) {
        json j = to_json(s);
        j["normalization"] = to_json(constants);
        j["embedder"] = embedder->id();
        out << j.dump(2) << '\n';
    } else {
        out << fmt::format("involvement (recall):     {}  raw {}\n", s.involvement, raw.recall);
        out << fmt::format("utilization (precision):  {}  raw {}\n", s.utilization, raw.precision);
        out << fmt::format("similarity (f1):          {}  raw {}\n", s.similarity, raw.f1);
        out << fmt::format("normalization: [{}, {}] ({})\n", constants.score_min,
                           constants.score_max, constants.provenance);
        out << fmt::format("embedder: {}\n", embedder->id());
    }
    return kExitOk;
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
    std::string abstracts = std::string(INVOLVE_DATA_DIR) + "/abstracts_fixture.jsonl";
    std::string out;
    bool mock = false;
    std::string endpoint;
    std::string model = "gpt-3.5-turbo";
    std::size_t count = 200;
    std::string template_name = "direct";
    bool polarized = false;
    std::optional<double> bst;
    std::size_t concurrency = 4;
    double rps = 0.0;
    std::string z_mode = "uniform";
    std::string embedder = default_embedder_id();
    std::string tokenizer = default_tokenizer_id();
    std::size_t max_len = kDefaultMaxLen;
    double drop_rate = 0.1;
    double failure_rate = 0.0;
};

int cmd_generate(const GenerateArgs& a, const GlobalOptions& g, const std::vector<std::string>& args,
                 std::ostream& out) {
    // Everything is validated before any file is touched.
    if (a.mock == !a.endpoint.empty()) {
        throw ConfigError("exactly one of --mock or --endpoint is required");
    }
    if (a.count == 0) throw ConfigError("--count must be positive");
    if (a.concurrency == 0) throw ConfigError("--concurrency must be positive");
    if (a.bst && a.polarized) throw ConfigError("--bst applies to continuous datasets only");
    if (a.bst) BSTConfig check(*a.bst);
    ForgeOptions fo;
    fo.count = a.count;
    fo.seed = g.seed.value_or(0);
    fo.variant = parse_template(a.template_name);
    fo.concurrency = a.concurrency;
    fo.max_requests_per_second = a.rps;
    if (a.z_mode == "uniform") fo.z_mode = ForgeOptions::ZMode::kUniform;
    else if (a.z_mode == "all") fo.z_mode = ForgeOptions::ZMode::kAll;
    else if (a.z_mode == "one") fo.z_mode = ForgeOptions::ZMode::kOne;
    else throw ConfigError("--z-mode must be uniform, all or one");
    if (!(a.drop_rate >= 0.0 && a.drop_rate <= 1.0) ||
        !(a.failure_rate >= 0.0 && a.failure_rate <= 1.0)) {
        throw ConfigError("--drop-rate and --failure-rate must lie in [0, 1]");
    }
    const auto embedder = make_embedder(a.embedder);
    const auto tokenizer = make_tokenizer(a.tokenizer, a.max_len);
    std::unique_ptr<LLMClient> client;
    if (a.mock) {
        MockOptions mo;
        mo.seed = fo.seed;
        mo.drop_rate = a.drop_rate;
        mo.failure_rate = a.failure_rate;
        client = std::make_unique<MockLLMClient>(mo);
    } else {
        RemoteClientConfig rc;
        rc.endpoint = a.endpoint;
        rc.model = a.model;
        client = std::make_unique<OpenAICompatibleClient>(rc);
    }
    const std::vector<Abstract> abstracts = load_abstracts(a.abstracts);

    Dataset ds = a.polarized ? build_polarized_dataset(abstracts, *client, *embedder, *tokenizer, fo)
                             : build_continuous_dataset(abstracts, *client, *embedder, *tokenizer, fo);
    if (a.bst) ds = polarize_dataset(ds, *a.bst);
    write_dataset(a.out, ds);

    const json effective = {{"abstracts", a.abstracts},   {"count", a.count},
                            {"template", a.template_name}, {"polarized", a.polarized},
                            {"bst", a.bst ? json(*a.bst) : json(nullptr)},
                            {"z_mode", a.z_mode},          {"generator", client->model()},
                            {"llm_params", client->params()}};
    write_manifest(manifest_or(g, a.out + ".manifest.json"), args, "generate", effective, fo.seed,
                   {{"embedder", embedder->id()}, {"tokenizer", tokenizer->id()}});
    if (g.json) {
        out << json{{"records", ds.records.size()}, {"failed", ds.meta.failed}, {"out", a.out},
                    {"kind", ds.meta.kind}}
                   .dump(2)
            << '\n';
    } else {
        out << fmt::format("wrote {} {} records ({} failed) to {}\n", ds.records.size(),
                           ds.meta.kind, ds.meta.failed, a.out);
    }
    return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::optional<std::string> mode;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size;
    std::optional<double> bst;
    std::optional<double> val_fraction;
    std::optional<std::string> encoder;
};

int cmd_train(const TrainArgs& a, const GlobalOptions& g, const std::vector<std::string>& args,
              std::ostream& out) {
    detector::DetectorConfig cfg;
    if (!g.config_path.empty()) cfg = detector::load_config(g.config_path);
    if (a.mode) cfg.mode = detector::parse_mode(*a.mode);
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.lr) cfg.learning_rate = *a.lr;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.bst) cfg.bst = *a.bst;
    if (a.val_fraction) cfg.validation_fraction = *a.val_fraction;
    if (a.encoder) cfg.encoder = *a.encoder;
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();
    detector::require_encoder(cfg.encoder);

    const Dataset ds = read_dataset(a.data);
    detector::TrainOptions opts;
    opts.checkpoint_dir = fs::path(a.out);
    const detector::TrainingResult result = detector::train(ds, cfg, opts);
    write_manifest(manifest_or(g, fs::path(a.out) / "manifest.json"), args, "train",
                   detector::to_json(cfg), cfg.seed,
                   {{"tokenizer", result.detector.tokenizer().id()},
                    {"dataset_format", ds.meta.format}});

    const auto& st = result.state;
    const json summary = {{"checkpoint", a.out},
                          {"mode", std::string(detector::mode_name(cfg.mode))},
                          {"epochs_run", st.epoch},
                          {"best_epoch", st.best_epoch},
                          {"best_metric", st.best_metric},
                          {"train_size", st.train_size},
                          {"val_size", st.val_size},
                          {"final_train_loss", st.running.total}};
    if (g.json) {
        out << summary.dump(2) << '\n';
    } else {
        out << fmt::format("trained {} detector on {} pairs ({} validation)\n",
                           detector::mode_name(cfg.mode), st.train_size, st.val_size);
        out << fmt::format("epochs {}  best epoch {}  selection metric {}\n", st.epoch,
                           st.best_epoch, st.best_metric);
        out << fmt::format("checkpoint: {}\n", a.out);
    }
    return kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string data;
    std::string checkpoint;
    bool oracle = false;
    std::optional<double> constant;
    std::string sweep = "0.1..0.9";
    std::string out;
    std::string scatter;
    std::vector<std::string> cross;
};

int cmd_evaluate(const EvaluateArgs& a, const GlobalOptions& g, const std::vector<std::string>& args,
                 std::ostream& out) {
    const int sources = (a.checkpoint.empty() ? 0 : 1) + (a.oracle ? 1 : 0) + (a.constant ? 1 : 0);
    if (sources != 1) throw ConfigError("give exactly one of --checkpoint, --oracle, --constant");
    const std::vector<double> thresholds = eval::parse_thresholds(a.sweep);
    std::map<std::string, std::string> cross_paths;
    for (const auto& c : a.cross) {
        const auto eq = c.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == c.size()) {
            throw ConfigError("--cross expects NAME=PATH, got '" + c + "'");
        }
        const std::string path = c.substr(eq + 1);
        if (!fs::exists(path)) throw ConfigError("--cross dataset not found: " + path);
        cross_paths[c.substr(0, eq)] = path;
    }

    const Dataset ds = read_dataset(a.data);
    std::optional<detector::Detector> det;
    std::unique_ptr<eval::DetectorAdapter> adapter;
    if (!a.checkpoint.empty()) {
        det.emplace(detector::load_checkpoint(a.checkpoint));
        if (det->config().mode == detector::TrainMode::kBinary) {
            adapter = std::make_unique<eval::ClassifierAdapter>(*det);
        } else {
            adapter = std::make_unique<eval::RegressionAdapter>(*det);
        }
    } else if (a.oracle) {
        adapter = std::make_unique<eval::LabelOracleAdapter>(ds);
    } else {
        adapter = std::make_unique<eval::ConstantAdapter>(*a.constant);
    }
    const eval::EvalReport report =
        det ? eval::evaluate(*det, ds, thresholds) : eval::evaluate(*adapter, ds, thresholds);

    std::vector<eval::GeneratorRow> cross_rows;
    if (!cross_paths.empty()) {
        std::map<std::string, Dataset> sets;
        for (const auto& [name, path] : cross_paths) sets.emplace(name, read_dataset(path));
        cross_rows = eval::cross_model_report(*adapter, sets);
    }

    std::string md = eval::to_markdown(report);
    if (!cross_rows.empty()) md += "\n" + eval::cross_model_markdown(cross_rows);
    json j = eval::to_json(report);
    if (!cross_rows.empty()) {
        json rows = json::array();
        for (const auto& r : cross_rows) {
            rows.push_back({{"generator", r.generator},
                            {"n", r.n},
                            {"mse", r.metrics.mse},
                            {"acc_within_015", r.metrics.acc_within}});
        }
        j["cross_model"] = rows;
    }
    if (!a.out.empty()) {
        write_text(a.out, md);
        write_text(a.out + ".json", j.dump(2) + "\n");
    }
    if (!a.scatter.empty()) eval::write_scatter_csv(a.scatter, report);

    const json effective = {{"data", a.data},
                            {"detector", adapter->name()},
                            {"checkpoint", a.checkpoint},
                            {"sweep", thresholds},
                            {"cross", cross_paths}};
    const fs::path manifest = a.out.empty() ? fs::path(a.data + ".eval.manifest.json")
                                            : fs::path(a.out + ".manifest.json");
    write_manifest(manifest_or(g, manifest), args, "evaluate", effective, g.seed.value_or(0),
                   {{"dataset_format", ds.meta.format}});
    out << (g.json ? j.dump(2) + "\n" : md);
    return kExitOk;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
    std::string document;
    std::string checkpoint;
    double bst = 0.5;
    std::string html;
};

int cmd_analyze(const AnalyzeArgs& a, const GlobalOptions& g, std::ostream& out) {
    const BSTConfig bst(a.bst);
    const detector::Detector det = detector::load_checkpoint(a.checkpoint);
    const std::string document = read_text(a.document);
    const AnalysisResult result = analyze_document(det, document, bst, a.checkpoint);
    const std::string html_path = a.html.empty() ? a.document + ".report.html" : a.html;
    write_text(html_path, render_html(result));
    if (g.json) {
        json j = to_json(result);
        j["report"] = html_path;
        out << j.dump(2) << '\n';
    } else {
        out << fmt::format("involvement: {}\n", result.involvement);
        out << fmt::format("verdict: {} (BST {})\n", verdict_name(result.verdict), result.bst);
        out << fmt::format("highlighted spans: {}\n", result.human_spans.size());
        out << fmt::format("report: {}\n", html_path);
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Estimate human involvement in AI-assisted academic text"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config_path, "Detector config JSON")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for sampling, generation and training");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_flag("-v,--verbose", g.verbose, "Debug logging on stderr");
    app.add_option("--manifest", g.manifest_path, "Override the manifest output path");

    ScoreArgs sa;
    auto* score = app.add_subcommand("score", "Score a prompt/generation pair");
    score->add_option("prompt", sa.prompt, "Prompt text file")->required()->check(CLI::ExistingFile);
    score->add_option("generated", sa.generated, "Generated text file")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_option("--embedder", sa.embedder, "Embedder identifier");
    score->add_option("--normalization", sa.normalization, "Normalization constants JSON")
        ->check(CLI::ExistingFile);

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "Build a labeled dataset");
    generate->add_option("--abstracts", ga.abstracts, "Abstracts (JSONL or text blocks)")
        ->check(CLI::ExistingFile);
    generate->add_option("--out", ga.out, "Output JSONL path")->required();
    generate->add_flag("--mock", ga.mock, "Use the offline mock generator");
    generate->add_option("--endpoint", ga.endpoint, "OpenAI-compatible endpoint");
    generate->add_option("--model", ga.model, "Remote model name");
    generate->add_option("--count", ga.count, "Records (per class when polarized)");
    generate->add_option("--template", ga.template_name, "direct|student|dual|summarization");
    generate->add_flag("--polarized", ga.polarized, "Build a polarized set");
    generate->add_option("--bst", ga.bst, "Binarize the continuous set at this threshold");
    generate->add_option("--concurrency", ga.concurrency, "Parallel generation requests");
    generate->add_option("--rps", ga.rps, "Max requests per second (0 = unlimited)");
    generate->add_option("--z-mode", ga.z_mode, "uniform|all|one");
    generate->add_option("--embedder", ga.embedder, "Embedder identifier");
    generate->add_option("--tokenizer", ga.tokenizer, "Detector tokenizer identifier");
    generate->add_option("--max-len", ga.max_len, "Label vector length");
    generate->add_option("--drop-rate", ga.drop_rate, "Mock: word drop probability");
    generate->add_option("--failure-rate", ga.failure_rate, "Mock: permanent failure fraction");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a detector");
    train->add_option("--data", ta.data, "Training dataset JSONL")->required()->check(CLI::ExistingFile);
    train->add_option("--out", ta.out, "Checkpoint directory")->required();
    train->add_option("--mode", ta.mode, "dual|regression|token|binary");
    train->add_option("--epochs", ta.epochs, "Epochs");
    train->add_option("--lr", ta.lr, "Learning rate");
    train->add_option("--batch-size", ta.batch_size, "Batch size");
    train->add_option("--bst", ta.bst, "Binary mode: partition threshold");
    train->add_option("--val-fraction", ta.val_fraction, "Validation split fraction");
    train->add_option("--encoder", ta.encoder, "Encoder identifier");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a detector on a dataset");
    evaluate->add_option("--data", ea.data, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory");
    evaluate->add_flag("--oracle", ea.oracle, "Use the label-oracle adapter");
    evaluate->add_option("--constant", ea.constant, "Use a constant-score adapter");
    evaluate->add_option("--sweep", ea.sweep, "Thresholds: a..b[:step] or a comma list");
    evaluate->add_option("--out", ea.out, "Write the markdown report here");
    evaluate->add_option("--scatter", ea.scatter, "Write (label, prediction) CSV here");
    evaluate->add_option("--cross", ea.cross, "NAME=PATH dataset for the cross-model table");

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "Analyze a document and write an HTML report");
    analyze->add_option("document", aa.document, "Document text file")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--checkpoint", aa.checkpoint, "Checkpoint directory")->required();
    analyze->add_option("--bst", aa.bst, "Verdict threshold");
    analyze->add_option("--html", aa.html, "Report path (default <document>.report.html)");

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    configure_logging(g.verbose);
    try {
        if (*score) return cmd_score(sa, g, out);
        if (*generate) return cmd_generate(ga, g, args, out);
        if (*train) return cmd_train(ta, g, args, out);
        if (*evaluate) return cmd_evaluate(ea, g, args, out);
        if (*analyze) return cmd_analyze(aa, g, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace involve
