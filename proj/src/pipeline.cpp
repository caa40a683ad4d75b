#include "sentinel/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"
#include "sentinel/rng.hpp"

namespace fs = std::filesystem;

namespace sentinel::pipeline {

SimulateResult run_simulate(const SimulateConfig& cfg, const std::string& out_dir) {
    if (cfg.n_train < 0 || cfg.n_test < 0 || cfg.n_train + cfg.n_test == 0) {
        throw InvalidParamError("simulate needs a positive number of graphs");
    }
    if (cfg.n_attackers < 1 || cfg.n_attackers >= cfg.corpus.n_agents) {
        throw InvalidParamError("n_attackers must be in [1, n_agents)");
    }
    fs::create_directories(fs::path(out_dir) / "train");
    fs::create_directories(fs::path(out_dir) / "test");

    if (cfg.n_train > 0) {
        CorpusConfig train_cfg = cfg.corpus;
        train_cfg.n_graphs = cfg.n_train;
        train_cfg.id_prefix = "train_";
        for (const DialogueGraph& g : generate_corpus(train_cfg)) {
            save_graph(g, (fs::path(out_dir) / "train" / (g.graph_id + ".json")).string());
        }
    }

    if (cfg.n_test > 0) {
        CorpusConfig test_cfg = cfg.corpus;
        test_cfg.n_graphs = cfg.n_test;
        test_cfg.id_prefix = "test_";
        test_cfg.seed = mix64(cfg.corpus.seed, 0x7e57u); // disjoint stream from the training split
        const std::vector<DialogueGraph> clean = generate_corpus(test_cfg);
        for (std::size_t g = 0; g < clean.size(); ++g) {
            AttackScenario scenario;
            if (cfg.fixed_scenario) {
                scenario = *cfg.fixed_scenario;
            } else {
                scenario.kind = AttackKind::TriggerPhrase;
                scenario.seed = mix64(test_cfg.seed, static_cast<std::uint64_t>(g) + 1);
                SplitMix64 rng(scenario.seed);
                std::vector<int> ids(static_cast<std::size_t>(cfg.corpus.n_agents));
                for (int i = 0; i < cfg.corpus.n_agents; ++i) {
                    ids[static_cast<std::size_t>(i)] = i;
                }
                shuffle_vec(ids, rng);
                ids.resize(static_cast<std::size_t>(cfg.n_attackers));
                scenario.attacked_ids = std::move(ids);
            }
            const DialogueGraph attacked = inject_attack(clean[g], scenario);
            save_graph(attacked, (fs::path(out_dir) / "test" / (attacked.graph_id + ".json")).string());
        }
    }
    return {cfg.n_train, cfg.n_test};
}

std::vector<DialogueGraph> load_corpus_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw MissingFileError("'" + dir + "' is not a directory");
    }
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
        throw MissingFileError("no .json graphs found in '" + dir + "'");
    }
    std::vector<DialogueGraph> out;
    out.reserve(paths.size());
    for (const std::string& p : paths) {
        out.push_back(load_graph(p));
    }
    return out;
}

std::pair<ModelParams, TrainReport> train_from_dir(const std::string& corpus_dir,
                                                   const EmbedderSpec& spec, const TrainConfig& cfg) {
    return train(load_corpus_dir(corpus_dir), spec, cfg);
}

ScoreReport detect_graph(const DialogueGraph& graph, const ModelParams& params,
                         const EmbedderSpec& spec, int budget) {
    if (spec.dim != params.dim) {
        throw DimMismatchError("embedder dim " + std::to_string(spec.dim) + " != checkpoint dim " +
                               std::to_string(params.dim));
    }
    return detect(attribute_graph(graph, spec), params, budget);
}

EvalSummary evaluate(const std::vector<DialogueGraph>& test_graphs, const ModelParams& params,
                     const EmbedderSpec& spec, int budget, const PropagationConfig& prop,
                     std::uint64_t seed) {
    if (test_graphs.empty()) {
        throw InvalidParamError("evaluate needs at least one test graph");
    }
    prop.validate();
    EvalSummary summary;
    summary.budget = budget;
    summary.rounds = prop.rounds;
    summary.p_infect = prop.p_infect;
    summary.seed = seed;

    {
        nlohmann::json cfg;
        cfg["budget"] = budget;
        cfg["dim"] = spec.dim;
        cfg["embedder"] = spec.kind == EmbedderKind::Hashing ? "hashing" : "remote";
        cfg["embedder_seed"] = spec.seed;
        cfg["p_infect"] = prop.p_infect;
        cfg["rounds"] = prop.rounds;
        cfg["seed"] = seed;
        char buf[19];
        std::snprintf(buf, sizeof buf, "0x%016llx",
                      static_cast<unsigned long long>(fnv1a64(cfg.dump())));
        summary.config_hash = buf;
    }

    std::vector<double> pooled_scores;
    std::vector<bool> pooled_labels;
    std::vector<double> asr_none(static_cast<std::size_t>(prop.rounds) + 1, 0.0);
    std::vector<double> asr_def(static_cast<std::size_t>(prop.rounds) + 1, 0.0);

    for (std::size_t g = 0; g < test_graphs.size(); ++g) {
        const DialogueGraph& graph = test_graphs[g];
        if (!graph.labels) {
            throw InvalidParamError("test graph '" + graph.graph_id + "' has no labels");
        }
        const ScoreReport report = detect_graph(graph, params, spec, budget);

        EvalSummary::PerGraph pg;
        pg.graph_id = graph.graph_id;
        pg.flagged = report.flagged;
        try {
            pg.auroc = auroc(report.fused, *graph.labels);
        } catch (const UndefinedMetricError&) {
            pg.auroc = std::nullopt;
        }
        summary.per_graph.push_back(std::move(pg));

        pooled_scores.insert(pooled_scores.end(), report.fused.begin(), report.fused.end());
        pooled_labels.insert(pooled_labels.end(), graph.labels->begin(), graph.labels->end());

        PropagationConfig run = prop;
        run.seed = mix64(seed, static_cast<std::uint64_t>(g));
        const std::set<int> no_defense;
        const std::set<int> defense(report.flagged.begin(), report.flagged.end());
        const auto rounds_none = propagate(graph, *graph.labels, no_defense, run);
        const auto rounds_def = propagate(graph, *graph.labels, defense, run);
        for (int r = 0; r <= prop.rounds; ++r) {
            asr_none[static_cast<std::size_t>(r)] += asr_at(rounds_none, r, graph.agent_count());
            asr_def[static_cast<std::size_t>(r)] += asr_at(rounds_def, r, graph.agent_count());
        }
    }

    const double denom = static_cast<double>(test_graphs.size());
    for (int r = 0; r <= prop.rounds; ++r) {
        summary.asr_no_defense[r] = asr_none[static_cast<std::size_t>(r)] / denom;
        summary.asr_defense[r] = asr_def[static_cast<std::size_t>(r)] / denom;
    }

    try {
        summary.auroc = auroc(pooled_scores, pooled_labels);
    } catch (const UndefinedMetricError& e) {
        summary.auroc = std::nullopt;
        summary.auroc_reason = e.what();
    }
    return summary;
}

std::string summary_to_json(const EvalSummary& summary) {
    nlohmann::json j;
    if (summary.auroc) {
        j["auroc"] = *summary.auroc;
    } else {
        j["auroc"] = nullptr;
        j["auroc_reason"] = summary.auroc_reason;
    }
    auto asr_obj = [](const std::map<int, double>& m) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [round, value] : m) {
            o[std::to_string(round)] = value;
        }
        return o;
    };
    j["asr_by_round"] = {{"no_defense", asr_obj(summary.asr_no_defense)},
                         {"defense", asr_obj(summary.asr_defense)}};
    nlohmann::json per_graph = nlohmann::json::array();
    for (const auto& pg : summary.per_graph) {
        nlohmann::json e;
        e["graph_id"] = pg.graph_id;
        e["auroc"] = pg.auroc ? nlohmann::json(*pg.auroc) : nlohmann::json(nullptr);
        e["flagged"] = pg.flagged;
        per_graph.push_back(std::move(e));
    }
    j["per_graph"] = std::move(per_graph);
    j["budget"] = summary.budget;
    j["rounds"] = summary.rounds;
    j["p_infect"] = summary.p_infect;
    j["seed"] = summary.seed;
    j["config_hash"] = summary.config_hash;
    return j.dump(2) + "\n";
}

namespace {

const nlohmann::json* section(const nlohmann::json& root, const char* name) {
    if (!root.is_object()) {
        throw SchemaError(name, "config root must be an object");
    }
    auto it = root.find(name);
    if (it == root.end() || it->is_null()) {
        return nullptr;
    }
    if (!it->is_object()) {
        throw SchemaError(name, "expected an object");
    }
    return &*it;
}

template <typename T>
void read_into(const nlohmann::json& obj, const char* field, T& out) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        return;
    }
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(field, "has the wrong type");
    }
}

} // namespace

TrainConfig train_config_from_json(const nlohmann::json& root) {
    TrainConfig cfg;
    const nlohmann::json* s = section(root, "train");
    if (!s) {
        return cfg;
    }
    read_into(*s, "epochs", cfg.epochs);
    read_into(*s, "batch_size", cfg.batch_size);
    read_into(*s, "lr", cfg.lr);
    read_into(*s, "weight_decay", cfg.weight_decay);
    read_into(*s, "alpha", cfg.alpha);
    read_into(*s, "seed", cfg.seed);
    if (s->contains("optimizer")) {
        const std::string name = require_string(*s, "optimizer");
        if (name == "adam") {
            cfg.optimizer = OptimizerKind::Adam;
        } else if (name == "sgd") {
            cfg.optimizer = OptimizerKind::Sgd;
        } else {
            throw SchemaError("optimizer", "expected 'adam' or 'sgd'");
        }
    }
    cfg.validate();
    return cfg;
}

CorpusConfig corpus_config_from_json(const nlohmann::json& root) {
    CorpusConfig cfg;
    const nlohmann::json* s = section(root, "corpus");
    if (!s) {
        return cfg;
    }
    read_into(*s, "n_agents", cfg.n_agents);
    read_into(*s, "random_p", cfg.random_p);
    read_into(*s, "seed", cfg.seed);
    if (s->contains("topology")) {
        const std::string name = require_string(*s, "topology");
        if (name == "chain") {
            cfg.topology = CorpusTopology::Chain;
        } else if (name == "tree") {
            cfg.topology = CorpusTopology::Tree;
        } else if (name == "star") {
            cfg.topology = CorpusTopology::Star;
        } else if (name == "random") {
            cfg.topology = CorpusTopology::Random;
        } else if (name == "mixed") {
            cfg.topology = CorpusTopology::Mixed;
        } else {
            throw SchemaError("topology", "expected chain|tree|star|random|mixed");
        }
    }
    if (s->contains("tokens_per_response")) {
        const auto& range = s->at("tokens_per_response");
        if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
            !range[1].is_number_integer()) {
            throw SchemaError("tokens_per_response", "expected [min, max]");
        }
        cfg.tokens_min = range[0].get<int>();
        cfg.tokens_max = range[1].get<int>();
    }
    if (s->contains("themes") && !s->at("themes").is_null()) {
        const auto& themes = s->at("themes");
        if (!themes.is_array()) {
            throw SchemaError("themes", "expected an array of token arrays");
        }
        for (const auto& pool : themes) {
            if (!pool.is_array()) {
                throw SchemaError("themes", "expected an array of token arrays");
            }
            std::vector<std::string> tokens;
            for (const auto& t : pool) {
                if (!t.is_string()) {
                    throw SchemaError("themes", "tokens must be strings");
                }
                tokens.push_back(t.get<std::string>());
            }
            cfg.theme_bank.push_back(std::move(tokens));
        }
    }
    return cfg;
}

PropagationConfig propagation_config_from_json(const nlohmann::json& root) {
    PropagationConfig cfg;
    const nlohmann::json* s = section(root, "propagation");
    if (!s) {
        return cfg;
    }
    read_into(*s, "rounds", cfg.rounds);
    read_into(*s, "p_infect", cfg.p_infect);
    read_into(*s, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

SimulateConfig simulate_config_from_json(const nlohmann::json& root) {
    SimulateConfig cfg;
    cfg.corpus = corpus_config_from_json(root);
    const nlohmann::json* s = section(root, "simulate");
    if (s) {
        read_into(*s, "n_train", cfg.n_train);
        read_into(*s, "n_test", cfg.n_test);
        read_into(*s, "n_attackers", cfg.n_attackers);
    }
    return cfg;
}

double embed_timeout_from_json(const nlohmann::json& root) {
    double timeout = 30.0;
    const nlohmann::json* s = section(root, "embed");
    if (s) {
        read_into(*s, "timeout_s", timeout);
        if (!(timeout > 0.0)) {
            throw SchemaError("timeout_s", "must be positive");
        }
    }
    return timeout;
}

} // namespace sentinel::pipeline
