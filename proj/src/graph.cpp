#include "sentinel/graph.hpp"

#include <algorithm>

#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"
#include "sentinel/rng.hpp"

namespace sentinel {

std::vector<int> DialogueGraph::in_neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < adjacency.cols(); ++j) {
        if (adjacency(i, j) != 0) {
            out.push_back(j);
        }
    }
    return out;
}

bool DialogueGraph::operator==(const DialogueGraph& other) const {
    return graph_id == other.graph_id && query == other.query && agents == other.agents &&
           adjacency.rows() == other.adjacency.rows() && adjacency.cols() == other.adjacency.cols() &&
           adjacency.cwiseEqual(other.adjacency).all() && labels == other.labels;
}

AdjMat generate_topology(TopologyKind kind, int n, double p, std::uint64_t seed) {
    if (n < 2) {
        throw InvalidSizeError("topology needs at least 2 agents, got " + std::to_string(n));
    }
    AdjMat a = AdjMat::Zero(n, n);
    switch (kind) {
    case TopologyKind::Chain:
        for (int i = 0; i + 1 < n; ++i) {
            a(i + 1, i) = 1;
        }
        break;
    case TopologyKind::Tree:
        // Balanced binary tree, parent -> child messages only.
        for (int child = 1; child < n; ++child) {
            a(child, (child - 1) / 2) = 1;
        }
        break;
    case TopologyKind::Star:
        for (int i = 1; i < n; ++i) {
            a(i, 0) = 1;
            a(0, i) = 1;
        }
        break;
    case TopologyKind::Random: {
        if (!(p > 0.0 && p <= 1.0)) {
            throw InvalidParamError("random topology needs p in (0,1], got " + std::to_string(p));
        }
        SplitMix64 rng(seed);
        const int max_attempts = 100;
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            a.setZero();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    if (i != j && rng.next_double() < p) {
                        a(i, j) = 1;
                    }
                }
            }
            bool all_reached = true;
            for (int i = 0; i < n; ++i) {
                if (a.row(i).sum() == 0) {
                    all_reached = false;
                    break;
                }
            }
            if (all_reached) {
                return a;
            }
        }
        // Connectivity repair: keep the last sample and lay a chain under it.
        for (int i = 0; i + 1 < n; ++i) {
            a(i + 1, i) = 1;
        }
        break;
    }
    }
    return a;
}

DialogueGraph prune_agents(const DialogueGraph& graph, const std::set<int>& flagged) {
    const int n = graph.agent_count();
    for (int id : flagged) {
        if (id < 0 || id >= n) {
            throw UnknownAgentError("agent id " + std::to_string(id) + " not in graph of size " +
                                    std::to_string(n));
        }
    }
    DialogueGraph out = graph;
    for (int id : flagged) {
        out.adjacency.row(id).setZero();
        out.adjacency.col(id).setZero();
    }
    return out;
}

void validate_graph(const DialogueGraph& graph) {
    const int n = graph.agent_count();
    if (n == 0) {
        throw InvalidGraphError("graph '" + graph.graph_id + "' has no agents");
    }
    if (graph.adjacency.rows() != n || graph.adjacency.cols() != n) {
        throw InvalidGraphError("adjacency shape does not match agent count");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const Agent& agent : graph.agents) {
        if (agent.id < 0 || agent.id >= n || seen[static_cast<std::size_t>(agent.id)]) {
            throw InvalidGraphError("agent ids must be dense and unique in [0, N)");
        }
        seen[static_cast<std::size_t>(agent.id)] = true;
        if (agent.response.empty() && !graph.synthetic_vector_mode) {
            throw InvalidGraphError("agent " + std::to_string(agent.id) +
                                    " has an empty response outside synthetic-vector mode");
        }
    }
    for (int i = 0; i < n; ++i) {
        if (graph.adjacency(i, i) != 0) {
            throw InvalidGraphError("adjacency diagonal must be zero");
        }
        for (int j = 0; j < n; ++j) {
            const int v = graph.adjacency(i, j);
            if (v != 0 && v != 1) {
                throw InvalidGraphError("adjacency entries must be 0 or 1");
            }
        }
    }
    if (graph.labels && static_cast<int>(graph.labels->size()) != n) {
        throw InvalidGraphError("labels length must equal agent count");
    }
}

namespace {

nlohmann::json graph_to_json_value(const DialogueGraph& graph) {
    nlohmann::json j;
    j["graph_id"] = graph.graph_id;
    j["query"] = graph.query ? nlohmann::json(*graph.query) : nlohmann::json(nullptr);
    nlohmann::json agents = nlohmann::json::array();
    std::vector<const Agent*> ordered;
    ordered.reserve(graph.agents.size());
    for (const Agent& a : graph.agents) {
        ordered.push_back(&a);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Agent* x, const Agent* y) { return x->id < y->id; });
    for (const Agent* a : ordered) {
        nlohmann::json ja;
        ja["id"] = a->id;
        ja["role"] = a->role;
        ja["response"] = a->response;
        ja["metadata"] = a->metadata;
        agents.push_back(std::move(ja));
    }
    j["agents"] = std::move(agents);
    nlohmann::json edges = nlohmann::json::array();
    for (int i = 0; i < graph.adjacency.rows(); ++i) {
        for (int jj = 0; jj < graph.adjacency.cols(); ++jj) {
            if (graph.adjacency(i, jj) != 0) {
                edges.push_back(nlohmann::json::array({i, jj}));
            }
        }
    }
    j["edges"] = std::move(edges);
    if (graph.labels) {
        j["labels"] = *graph.labels;
    } else {
        j["labels"] = nullptr;
    }
    return j;
}

DialogueGraph graph_from_json_value(const nlohmann::json& j) {
    DialogueGraph g;
    g.graph_id = require_string(j, "graph_id");
    const auto& query = require_field(j, "query");
    if (query.is_string()) {
        g.query = query.get<std::string>();
    } else if (!query.is_null()) {
        throw SchemaError("query", "expected a string or null");
    }
    const auto& agents = require_field(j, "agents");
    if (!agents.is_array() || agents.empty()) {
        throw SchemaError("agents", "expected a non-empty array");
    }
    const int n = static_cast<int>(agents.size());
    g.agents.resize(static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& ja : agents) {
        Agent a;
        const std::int64_t id = require_int(ja, "id");
        if (id < 0 || id >= n) {
            throw SchemaError("agents.id", "id " + std::to_string(id) + " outside [0, " +
                                               std::to_string(n) + ")");
        }
        if (seen[static_cast<std::size_t>(id)]) {
            throw SchemaError("agents.id", "duplicate id " + std::to_string(id));
        }
        seen[static_cast<std::size_t>(id)] = true;
        a.id = static_cast<int>(id);
        a.role = require_string(ja, "role");
        a.response = require_string(ja, "response");
        if (ja.contains("metadata")) {
            const auto& meta = ja.at("metadata");
            if (!meta.is_object()) {
                throw SchemaError("agents.metadata", "expected an object");
            }
            for (const auto& [k, v] : meta.items()) {
                if (!v.is_string()) {
                    throw SchemaError("agents.metadata", "values must be strings");
                }
                a.metadata[k] = v.get<std::string>();
            }
        }
        g.agents[static_cast<std::size_t>(id)] = std::move(a);
    }
    g.adjacency = AdjMat::Zero(n, n);
    const auto& edges = require_field(j, "edges");
    if (!edges.is_array()) {
        throw SchemaError("edges", "expected an array");
    }
    for (const auto& e : edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            throw SchemaError("edges", "each edge must be an [receiver, sender] integer pair");
        }
        const std::int64_t recv = e[0].get<std::int64_t>();
        const std::int64_t send = e[1].get<std::int64_t>();
        if (recv < 0 || recv >= n || send < 0 || send >= n) {
            throw SchemaError("edges", "edge endpoint outside [0, " + std::to_string(n) + ")");
        }
        if (recv == send) {
            throw SchemaError("edges", "self-edges are not allowed");
        }
        g.adjacency(static_cast<int>(recv), static_cast<int>(send)) = 1;
    }
    if (j.contains("labels") && !j.at("labels").is_null()) {
        const auto& labels = j.at("labels");
        if (!labels.is_array() || static_cast<int>(labels.size()) != n) {
            throw SchemaError("labels", "expected an array of length " + std::to_string(n));
        }
        std::vector<bool> lv;
        lv.reserve(labels.size());
        for (const auto& v : labels) {
            if (!v.is_boolean()) {
                throw SchemaError("labels", "entries must be booleans");
            }
            lv.push_back(v.get<bool>());
        }
        g.labels = std::move(lv);
    }
    validate_graph(g);
    return g;
}

} // namespace

std::string graph_to_json(const DialogueGraph& graph) {
    return graph_to_json_value(graph).dump(2) + "\n";
}

DialogueGraph graph_from_json(const std::string& text) {
    return graph_from_json_value(parse_json(text));
}

DialogueGraph load_graph(const std::string& path) {
    return graph_from_json(read_file(path));
}

void save_graph(const DialogueGraph& graph, const std::string& path) {
    write_file(path, graph_to_json(graph));
}

} // namespace sentinel
