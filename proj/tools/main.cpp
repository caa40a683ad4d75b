#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/pipeline.hpp"

namespace {

using namespace sentinel;

struct GlobalOpts {
    std::string corpus_dir;
    std::string checkpoint;
    int budget = 3;
    std::string embedder = "hashing";
    int dim = 384;
    std::string endpoint;
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out_path;
    std::string format = "json";
    std::vector<std::string> inputs;
};

nlohmann::json load_config(const GlobalOpts& opts) {
    if (opts.config_path.empty()) {
        return nlohmann::json::object();
    }
    return parse_json_file(opts.config_path);
}

EmbedderSpec make_embedder(const GlobalOpts& opts, const nlohmann::json& config) {
    EmbedderSpec spec;
    spec.dim = opts.dim;
    spec.seed = opts.seed;
    spec.timeout_seconds = pipeline::embed_timeout_from_json(config);
    if (opts.embedder == "hashing") {
        spec.kind = EmbedderKind::Hashing;
    } else if (opts.embedder == "remote") {
        spec.kind = EmbedderKind::Remote;
        spec.endpoint = opts.endpoint;
        if (const char* env = std::getenv("SENTINEL_EMBED_ENDPOINT")) {
            spec.endpoint = env;
        }
        if (spec.endpoint.empty()) {
            throw InvalidParamError("remote embedder needs --endpoint or SENTINEL_EMBED_ENDPOINT");
        }
    } else {
        throw InvalidParamError("--embedder must be 'hashing' or 'remote'");
    }
    spec.validate();
    return spec;
}

void emit(const std::string& content, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_file(out_path, content);
    }
}

int cmd_simulate(const GlobalOpts& opts) {
    const nlohmann::json config = load_config(opts);
    pipeline::SimulateConfig cfg = pipeline::simulate_config_from_json(config);
    if (opts.seed != 0) {
        cfg.corpus.seed = opts.seed;
    }
    if (cfg.n_train == 0 && cfg.n_test == 0) {
        cfg.n_train = 32;
        cfg.n_test = 8;
    }
    if (opts.out_path.empty()) {
        throw InvalidParamError("simulate needs --out DIR");
    }
    const auto result = pipeline::run_simulate(cfg, opts.out_path);
    std::cerr << "wrote " << result.n_train << " training and " << result.n_test
              << " attacked test graphs under " << opts.out_path << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& opts) {
    const nlohmann::json config = load_config(opts);
    TrainConfig cfg = pipeline::train_config_from_json(config);
    if (opts.seed != 0) {
        cfg.seed = opts.seed;
    }
    if (opts.corpus_dir.empty()) {
        throw InvalidParamError("train needs --corpus DIR");
    }
    if (opts.out_path.empty()) {
        throw InvalidParamError("train needs --out FILE for the checkpoint");
    }
    const EmbedderSpec spec = make_embedder(opts, config);
    const auto [params, report] = pipeline::train_from_dir(opts.corpus_dir, spec, cfg);
    save_checkpoint(params, cfg, report, opts.out_path);
    std::cerr << "trained " << cfg.epochs << " epochs; final mean loss "
              << (report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back()) << "; wall "
              << report.wall_seconds << " s\n";
    return 0;
}

int cmd_detect(const GlobalOpts& opts) {
    const nlohmann::json config = load_config(opts);
    if (opts.checkpoint.empty()) {
        throw InvalidParamError("detect needs --checkpoint FILE");
    }
    const ModelParams params = load_params(opts.checkpoint);
    GlobalOpts adjusted = opts;
    adjusted.dim = params.dim; // the checkpoint fixes the embedding width
    const EmbedderSpec spec = make_embedder(adjusted, config);

    const std::vector<std::string>& inputs = opts.inputs;
    if (inputs.empty() && opts.corpus_dir.empty()) {
        throw InvalidParamError("detect needs graph files or --corpus DIR");
    }

    std::vector<ScoreReport> reports;
    if (!opts.corpus_dir.empty()) {
        for (const DialogueGraph& g : pipeline::load_corpus_dir(opts.corpus_dir)) {
            reports.push_back(pipeline::detect_graph(g, params, spec, opts.budget));
        }
    }
    for (const std::string& path : inputs) {
        reports.push_back(pipeline::detect_graph(load_graph(path), params, spec, opts.budget));
    }

    if (reports.size() == 1) {
        emit(report_to_json(reports[0]), opts.out_path);
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const ScoreReport& r : reports) {
            arr.push_back(parse_json(report_to_json(r)));
        }
        emit(arr.dump(2) + "\n", opts.out_path);
    }
    return 0;
}

int cmd_explain(const GlobalOpts& opts) {
    if (opts.inputs.size() != 1) {
        throw InvalidParamError("explain needs exactly one score-report JSON file");
    }
    const ScoreReport report = load_report(opts.inputs[0]);
    RenderFormat format;
    if (opts.format == "ansi") {
        format = RenderFormat::Ansi;
    } else if (opts.format == "html") {
        format = RenderFormat::Html;
    } else {
        throw InvalidParamError("explain supports --format ansi|html");
    }
    emit(render_explanation(report, format), opts.out_path);
    return 0;
}

int cmd_eval(const GlobalOpts& opts) {
    const nlohmann::json config = load_config(opts);
    if (opts.checkpoint.empty()) {
        throw InvalidParamError("eval needs --checkpoint FILE");
    }
    if (opts.corpus_dir.empty()) {
        throw InvalidParamError("eval needs --corpus DIR with attacked graphs");
    }
    const ModelParams params = load_params(opts.checkpoint);
    GlobalOpts adjusted = opts;
    adjusted.dim = params.dim;
    const EmbedderSpec spec = make_embedder(adjusted, config);
    const PropagationConfig prop = pipeline::propagation_config_from_json(config);
    const auto summary = pipeline::evaluate(pipeline::load_corpus_dir(opts.corpus_dir), params, spec,
                                            opts.budget, prop, opts.seed);
    emit(pipeline::summary_to_json(summary), opts.out_path);
    return 0;
}

void report_error(const Error& e) {
    nlohmann::json j;
    j["error"] = {{"code", static_cast<int>(e.kind())}, {"kind", e.name()}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sentinel - malicious-agent detection for multi-agent dialogue graphs"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes:\n"
        "  0 success            5 schema violation\n"
        "  1 internal error     6 checkpoint/embedder dim mismatch\n"
        "  2 usage error        7 embedding service failure\n"
        "  3 missing file       8 invalid parameter or input data\n"
        "  4 malformed JSON     9 metric undefined for the input\n"
        "Errors are reported as machine-readable JSON on stderr.\n"
        "SENTINEL_EMBED_ENDPOINT overrides --endpoint.");

    GlobalOpts opts;
    app.add_option("--corpus", opts.corpus_dir, "Directory of graph JSON files");
    app.add_option("--checkpoint", opts.checkpoint, "Model checkpoint JSON");
    app.add_option("--budget", opts.budget, "Number of agents to flag")->capture_default_str();
    app.add_option("--embedder", opts.embedder, "hashing|remote")->capture_default_str();
    app.add_option("--dim", opts.dim, "Embedding dimension")->capture_default_str();
    app.add_option("--endpoint", opts.endpoint, "Remote embedding service URL");
    app.add_option("--seed", opts.seed, "Seed override (0 keeps config value)")->capture_default_str();
    app.add_option("--config", opts.config_path, "JSON config file");
    app.add_option("--out", opts.out_path, "Output path (default stdout)");
    app.add_option("--format", opts.format, "ansi|html|json")->capture_default_str();
    app.add_option("inputs", opts.inputs, "Input files (graphs for detect, report for explain)");

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus and attacked test split");
    auto* train = app.add_subcommand("train", "Train a detector on an unattacked corpus");
    auto* detect = app.add_subcommand("detect", "Score graphs with a trained checkpoint");
    auto* explain = app.add_subcommand("explain", "Render a score report as a token heatmap");
    auto* eval = app.add_subcommand("eval", "AUROC and paired propagation ASR on an attacked corpus");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(opts);
        }
        if (train->parsed()) {
            return cmd_train(opts);
        }
        if (detect->parsed()) {
            return cmd_detect(opts);
        }
        if (explain->parsed()) {
            return cmd_explain(opts);
        }
        if (eval->parsed()) {
            return cmd_eval(opts);
        }
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const Error& e) {
        report_error(e);
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        nlohmann::json j;
        j["error"] = {{"code", 1}, {"kind", "Internal"}, {"message", e.what()}};
        std::cerr << j.dump() << "\n";
        return 1;
    }
}
