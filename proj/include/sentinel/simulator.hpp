#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sentinel/embed.hpp"
#include "sentinel/graph.hpp"

namespace sentinel {

// Topology selection for corpora; Mixed cycles through the four basic
// shapes by graph index.
enum class CorpusTopology { Chain, Tree, Star, Random, Mixed };

struct CorpusConfig {
    int n_graphs = 1;
    int n_agents = 10;
    CorpusTopology topology = CorpusTopology::Mixed;
    double random_p = 0.3;                       // Random/Mixed edge probability
    std::vector<std::vector<std::string>> theme_bank; // empty = built-in themes
    int tokens_min = 8;
    int tokens_max = 16;
    std::uint64_t seed = 0;
    std::string id_prefix = "g";

    void validate() const;
};

struct PropagationConfig {
    int rounds = 3;
    double p_infect = 0.5; // per compromised in-neighbor per round
    std::uint64_t seed = 0;

    void validate() const;
};

// Five disjoint pools of discussion vocabulary.
const std::vector<std::vector<std::string>>& builtin_themes();

// Versioned bank of injected manipulation/exfiltration phrases.
const std::vector<std::string>& trigger_phrase_bank();
extern const int kTriggerBankVersion;

// One theme per graph; every response samples `tokens_min..tokens_max`
// tokens from that theme pool with replacement. Labels stay absent.
std::vector<DialogueGraph> generate_corpus(const CorpusConfig& cfg);

// TriggerPhrase: appends a bank phrase to each attacked agent's response and
// sets labels. Throws for EmbeddingShift scenarios, which need attributes.
DialogueGraph inject_attack(const DialogueGraph& graph, const AttackScenario& scenario);

// EmbeddingShift: adds one seeded random direction of length
// scenario.magnitude to the attacked agents' sentence and token attributes.
// TriggerPhrase scenarios are routed through the text overload.
AttributedGraph inject_attack(const AttributedGraph& attr, const AttackScenario& scenario,
                              const EmbedderSpec& spec);

// Stochastic misinformation spread. Round 0 is the attacked set; each later
// round infects agent i with probability 1-(1-p)^c where c counts its
// compromised in-neighbors in the defense-pruned graph. The uniform draw for
// (agent, round) depends only on (seed, agent, round), so defense arms can
// be compared under shared randomness.
std::vector<std::set<int>> propagate(const DialogueGraph& graph, const std::vector<bool>& labels,
                                     const std::set<int>& defense_flagged, const PropagationConfig& prop);

// |compromised after round r| / N
double asr_at(const std::vector<std::set<int>>& rounds, int r, int n_agents);

AttackScenario load_scenario(const std::string& path);
void save_scenario(const AttackScenario& scenario, const std::string& path);
std::string scenario_to_json(const AttackScenario& scenario);
AttackScenario scenario_from_json(const std::string& text);

} // namespace sentinel
