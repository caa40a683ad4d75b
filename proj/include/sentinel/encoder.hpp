#pragma once

#include <string>
#include <vector>

#include "sentinel/embed.hpp"
#include "sentinel/types.hpp"

namespace sentinel {

// Learned weights of the two message-passing streams.
struct ModelParams {
    int dim = 0;
    Mat W_s; // d x d
    Vec b_s; // d
    Mat W_t; // d x d
    Vec b_t; // d

    static ModelParams zeros(int dim);
    void validate() const;
};

ModelParams load_params(const std::string& path);
void save_params(const ModelParams& params, const std::string& path);
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

// Topology-aware representations of one graph.
struct EncodedGraph {
    std::string graph_id;
    Mat H_s;                 // N x d sentence representations
    std::vector<Mat> H_t;    // per agent, T_i x d token representations
    Mat pooled_t;            // N x d mean of augmented token attrs
    std::vector<Mat> aug_t;  // per agent, T_i x d augmented token attrs
};

// Intermediates kept for backpropagation.
struct EncodeCache {
    Mat agg_s; // N x d mean of in-neighbor sentence attrs
    Mat Z_s;   // N x d pre-activations, sentence stream
    Mat agg_t; // N x d mean of in-neighbor pooled token attrs
    Mat Z_t;   // N x d pre-activations, token stream
};

// One round of mean in-neighbor aggregation, linear transform, ReLU.
// Agents without in-neighbors aggregate the zero vector.
Mat message_pass(const Mat& X, const AdjMat& A, const Mat& W, const Vec& b);

// H_s = message_pass(X_s) + X_s
Mat encode_sentence(const AttributedGraph& attr, const ModelParams& params);

// aug_t[i][j] = token_attrs[i][j] + sentence_attrs[i]
std::vector<Mat> augment_tokens(const AttributedGraph& attr);

// pooled_t[i] = mean_j aug_t[i][j]; H_t[i][j] = message_pass(pooled_t)[i] + aug_t[i][j]
std::pair<Mat, std::vector<Mat>> encode_tokens(const AttributedGraph& attr, const ModelParams& params);

EncodedGraph encode(const AttributedGraph& attr, const ModelParams& params);
EncodedGraph encode_with_cache(const AttributedGraph& attr, const ModelParams& params, EncodeCache& cache);

} // namespace sentinel
