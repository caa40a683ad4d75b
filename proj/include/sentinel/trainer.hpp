#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/detector.hpp"
#include "sentinel/embed.hpp"
#include "sentinel/encoder.hpp"

namespace sentinel {

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    int epochs = 20;
    int batch_size = 8;
    double lr = 1e-4;
    double weight_decay = 2e-4; // L2 on weight matrices only
    double alpha = 1e-4;        // negative-pair trade-off
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;

    void validate() const;
};

struct TrainReport {
    std::vector<double> epoch_losses; // mean per-graph loss per epoch
    double wall_seconds = 0.0;
    // Populated when the corpus is small enough for the harness
    // (dim <= 32, first two graphs with N <= 12, T_i <= 40).
    std::optional<double> grad_check_max_rel_err;
};

struct ParamGrads {
    Mat W_s;
    Vec b_s;
    Mat W_t;
    Vec b_t;

    static ParamGrads zeros(int dim);
};

// Per-agent mean of the two level similarities against the graph's own
// prototypes. Values in (0, 1).
std::vector<double> positive_scores(const AttributedGraph& attr, const ModelParams& params);

// Same formula against foreign prototypes. Throws InvalidNegative when the
// prototypes came from the same graph.
std::vector<double> negative_scores(const AttributedGraph& attr, const Prototypes& foreign,
                                    const ModelParams& params);

// -mean_i[ log(pos_i) + alpha*log(1 - neg_i) ], inputs clamped to
// [1e-7, 1-1e-7] before the logs.
double contrastive_loss(const std::vector<double>& pos, const std::vector<double>& neg, double alpha);

// Batch loss (sum of per-graph losses); when `grads` is non-null the
// analytic gradients are accumulated into it, including the paths through
// both graphs' prototypes. negatives[k] gives the in-batch index used as
// graph k's negative.
double batch_loss_and_grads(const std::vector<const AttributedGraph*>& batch,
                            const std::vector<int>& negatives, const ModelParams& params, double alpha,
                            ParamGrads* grads);

// Contrastive training over attributed graphs; deterministic for a fixed
// config.
std::pair<ModelParams, TrainReport> train_on_attributed(const std::vector<AttributedGraph>& graphs,
                                                        int dim, const TrainConfig& cfg);

// Attributes the corpus with `spec`, then trains.
std::pair<ModelParams, TrainReport> train(const std::vector<DialogueGraph>& graphs,
                                          const EmbedderSpec& spec, const TrainConfig& cfg);

// Central finite differences over every parameter entry of the two-graph
// batch loss (each graph is the other's negative). The evaluation point is
// jittered until every pre-activation clears the ReLU kink by 1e-4; returns
// max |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
double gradient_check(const AttributedGraph& a, const AttributedGraph& b, const ModelParams& params,
                      double alpha, double epsilon = 1e-5);

// Checkpoint sidecar: {"train_config": {...}, "epoch_losses": [...]}.
std::string sidecar_to_json(const TrainConfig& cfg, const TrainReport& report);
void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const TrainReport& report,
                     const std::string& path); // writes path and path + ".meta.json"

} // namespace sentinel
