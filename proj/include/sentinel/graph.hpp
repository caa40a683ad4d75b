#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/types.hpp"

namespace sentinel {

// One participant in a multi-agent dialogue. `metadata` carries opaque
// role/state/memory/plugin annotations; the detector never reads it.
struct Agent {
    int id = 0;
    std::string role;
    std::string response;
    std::map<std::string, std::string> metadata;

    bool operator==(const Agent&) const = default;
};

// A directed communication graph over agents. adjacency(i, j) == 1 means
// agent j sends its output to agent i.
struct DialogueGraph {
    std::string graph_id;
    std::optional<std::string> query;
    std::vector<Agent> agents;
    AdjMat adjacency;
    std::optional<std::vector<bool>> labels; // true = attacked
    bool synthetic_vector_mode = false;      // attributes supplied externally; responses may be empty

    int agent_count() const { return static_cast<int>(agents.size()); }

    std::vector<int> in_neighbors(int i) const;

    bool operator==(const DialogueGraph& other) const;
};

enum class TopologyKind { Chain, Tree, Star, Random };

enum class AttackKind { TriggerPhrase, EmbeddingShift };

struct AttackScenario {
    AttackKind kind = AttackKind::TriggerPhrase;
    std::vector<int> attacked_ids;             // kept sorted ascending
    std::vector<int> phrase_ids;               // TriggerPhrase: indices into the phrase bank; empty = seeded draw
    double magnitude = 0.0;                    // EmbeddingShift: length of the injected direction
    std::uint64_t seed = 0;
};

// Builds the adjacency matrix for one of the four supported shapes.
// Random draws each ordered pair independently with probability p and
// repairs connectivity with a chain backbone after 100 failed attempts.
AdjMat generate_topology(TopologyKind kind, int n, double p, std::uint64_t seed);

// Zeroes row i and column i for every flagged agent; agents stay present
// but isolated so ids and labels remain stable.
DialogueGraph prune_agents(const DialogueGraph& graph, const std::set<int>& flagged);

// Checks structural invariants (square 0/1 adjacency, zero diagonal, dense
// ids, label length); throws InvalidGraph/SchemaError on violation.
void validate_graph(const DialogueGraph& graph);

DialogueGraph load_graph(const std::string& path);
void save_graph(const DialogueGraph& graph, const std::string& path);

std::string graph_to_json(const DialogueGraph& graph);
DialogueGraph graph_from_json(const std::string& text);

} // namespace sentinel
