#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/detector.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/simulator.hpp"
#include "sentinel/trainer.hpp"

namespace sentinel::pipeline {

// `simulate` writes <out>/train (unattacked) and <out>/test (attacked, with
// labels). EmbeddingShift scenarios live in attribute space and cannot be
// serialized through the graph schema, so the test split uses trigger
// phrases.
struct SimulateConfig {
    CorpusConfig corpus;                           // shape of both splits
    int n_train = 0;                               // graphs in the training split
    int n_test = 0;                                // attacked graphs in the test split
    int n_attackers = 2;
    std::optional<AttackScenario> fixed_scenario;  // applied verbatim to every test graph
};

struct SimulateResult {
    int n_train = 0;
    int n_test = 0;
};

SimulateResult run_simulate(const SimulateConfig& cfg, const std::string& out_dir);

// All *.json files in the directory, sorted by filename.
std::vector<DialogueGraph> load_corpus_dir(const std::string& dir);

std::pair<ModelParams, TrainReport> train_from_dir(const std::string& corpus_dir,
                                                   const EmbedderSpec& spec, const TrainConfig& cfg);

ScoreReport detect_graph(const DialogueGraph& graph, const ModelParams& params,
                         const EmbedderSpec& spec, int budget);

struct EvalSummary {
    std::optional<double> auroc;                 // pooled over agents of all graphs
    std::string auroc_reason;                    // filled when auroc is absent
    std::map<int, double> asr_no_defense;        // round -> mean ASR over graphs
    std::map<int, double> asr_defense;
    struct PerGraph {
        std::string graph_id;
        std::optional<double> auroc;
        std::vector<int> flagged;
    };
    std::vector<PerGraph> per_graph;             // sorted by graph filename order
    int budget = 0;
    int rounds = 0;
    double p_infect = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Scores every labeled test graph, then runs the paired propagation arms
// (no defense vs budget-limited pruning) under shared randomness.
EvalSummary evaluate(const std::vector<DialogueGraph>& test_graphs, const ModelParams& params,
                     const EmbedderSpec& spec, int budget, const PropagationConfig& prop,
                     std::uint64_t seed);

std::string summary_to_json(const EvalSummary& summary);

// Sections of the --config file; absent sections keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& root);
CorpusConfig corpus_config_from_json(const nlohmann::json& root);
PropagationConfig propagation_config_from_json(const nlohmann::json& root);
SimulateConfig simulate_config_from_json(const nlohmann::json& root);
double embed_timeout_from_json(const nlohmann::json& root); // seconds

} // namespace sentinel::pipeline
