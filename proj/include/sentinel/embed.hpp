#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/graph.hpp"
#include "sentinel/types.hpp"

namespace sentinel {

enum class EmbedderKind { Hashing, Remote };

struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::Hashing;
    int dim = 384;
    std::uint64_t seed = 0;     // Hashing
    std::string endpoint;       // Remote, e.g. http://127.0.0.1:8080
    int batch_size = 32;        // Remote token batching
    double timeout_seconds = 30.0;

    void validate() const;
};

// A dialogue graph with per-agent sentence vectors and per-token vectors.
struct AttributedGraph {
    DialogueGraph graph;
    Mat sentence_attrs;                          // N x d
    std::vector<Mat> token_attrs;                // per agent, T_i x d
    std::vector<std::vector<std::string>> tokens; // per agent, length T_i

    int agent_count() const { return graph.agent_count(); }
    int dim() const { return static_cast<int>(sentence_attrs.cols()); }
    int token_count(int i) const { return static_cast<int>(token_attrs[static_cast<std::size_t>(i)].rows()); }

    void validate() const;

    // Synthetic-vector mode: attach externally produced attributes. Token
    // names default to "tok_<j>" when not supplied.
    static AttributedGraph from_vectors(DialogueGraph graph, Mat sentence_attrs,
                                        std::vector<Mat> token_attrs,
                                        std::vector<std::vector<std::string>> tokens = {});
};

// Whitespace split, then leading/trailing ASCII punctuation peeled into
// separate tokens. Case is preserved. Empty input yields {"<empty>"}.
std::vector<std::string> tokenize(const std::string& text);

inline constexpr const char* kEmptyToken = "<empty>";

// Deterministic unit vector for a token: splitmix64 seeded with
// fnv1a64(token) XOR spec.seed, d normal draws, L2-normalized.
Vec embed_token(const std::string& token, const EmbedderSpec& spec);

// Hashing: L2-normalized mean of the token vectors. Remote: one service call.
Vec embed_sentence(const std::string& text, const EmbedderSpec& spec);

// Fills sentence and token attributes for every agent. Remote token lookups
// are batched in chunks of spec.batch_size.
AttributedGraph attribute_graph(const DialogueGraph& graph, const EmbedderSpec& spec);

// POST {endpoint}/embed with {"texts": [...]}; expects {"vectors": [[...]]}.
// Throws EmbedServiceError on any transport, status, or shape failure.
class RemoteEmbedClient {
public:
    explicit RemoteEmbedClient(const EmbedderSpec& spec);
    Mat embed(const std::vector<std::string>& texts) const; // rows follow input order

private:
    std::string host_;
    int port_ = 0;
    std::string path_prefix_;
    int dim_;
    double timeout_seconds_;
};

} // namespace sentinel
