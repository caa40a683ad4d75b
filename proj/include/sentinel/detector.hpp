#pragma once

#include <string>
#include <vector>

#include "sentinel/encoder.hpp"

namespace sentinel {

// Per-graph theme anchors; always recomputed, never cached across graphs.
struct Prototypes {
    Vec p_s;
    Vec p_t;
    std::string source_graph_id;
};

struct ScoreReport {
    std::string graph_id;
    std::vector<double> raw_s;
    std::vector<double> raw_t;
    std::vector<double> norm_s;
    std::vector<double> norm_t;
    double cov_weight = 0.0;
    std::vector<double> fused;
    std::vector<std::vector<double>> token_expl;
    std::vector<std::vector<std::string>> tokens;
    std::vector<int> flagged;    // descending fused score, ties by lower id
    bool truncated = false;      // budget exceeded agent count
};

// p_s = mean of H_s rows; p_t = mean over agents of per-agent token means,
// weighting agents equally regardless of token count.
Prototypes theme_prototypes(const EncodedGraph& enc);

// logistic(<h, p>), overflow-safe.
double pair_similarity(const Vec& h, const Vec& p);

// Anomaly direction: 1 - similarity. Token scores average per-token terms.
std::pair<std::vector<double>, std::vector<double>> level_scores(const EncodedGraph& enc,
                                                                 const Prototypes& protos);

// Population z-score per graph; all zeros when variance degenerates or N == 1.
std::vector<double> normalize_scores(const std::vector<double>& raw);

// cov_weight = population covariance of the standardized levels;
// fused = norm_s + cov_weight * norm_t.
std::pair<double, std::vector<double>> fuse_scores(const std::vector<double>& norm_s,
                                                   const std::vector<double>& norm_t);

// s_exp[i][j] = cov_weight * (1 - similarity(H_t[i][j], p_t))
std::vector<std::vector<double>> token_explanations(const EncodedGraph& enc, const Prototypes& protos,
                                                    double cov_weight);

// ids of the `budget` highest fused scores, descending, ties by lower id.
std::vector<int> flag_top(const std::vector<double>& fused, int budget);

// Full scoring pipeline: encode, prototypes, level scores, normalize, fuse,
// explain, flag.
ScoreReport detect(const AttributedGraph& attr, const ModelParams& params, int budget);

std::string report_to_json(const ScoreReport& report);
ScoreReport report_from_json(const std::string& text);
ScoreReport load_report(const std::string& path);
void save_report(const ScoreReport& report, const std::string& path);

} // namespace sentinel
