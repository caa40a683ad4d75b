#include "sentinel/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"

namespace sentinel {

Prototypes theme_prototypes(const EncodedGraph& enc) {
    const Eigen::Index n = enc.H_s.rows();
    if (n < 1) {
        throw InvalidGraphError("cannot build prototypes for an empty graph");
    }
    Prototypes p;
    p.source_graph_id = enc.graph_id;
    p.p_s = enc.H_s.colwise().mean().transpose();
    Vec acc = Vec::Zero(enc.H_s.cols());
    for (const Mat& ht : enc.H_t) {
        acc += ht.colwise().mean().transpose();
    }
    p.p_t = acc / static_cast<double>(n);
    return p;
}

double pair_similarity(const Vec& h, const Vec& p) {
    const double z = h.dot(p);
    // Evaluate the logistic through exp of a non-positive argument only.
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::pair<std::vector<double>, std::vector<double>> level_scores(const EncodedGraph& enc,
                                                                 const Prototypes& protos) {
    const Eigen::Index n = enc.H_s.rows();
    std::vector<double> raw_s(static_cast<std::size_t>(n));
    std::vector<double> raw_t(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        raw_s[static_cast<std::size_t>(i)] = 1.0 - pair_similarity(enc.H_s.row(i).transpose(), protos.p_s);
        const Mat& ht = enc.H_t[static_cast<std::size_t>(i)];
        double acc = 0.0;
        for (Eigen::Index j = 0; j < ht.rows(); ++j) {
            acc += 1.0 - pair_similarity(ht.row(j).transpose(), protos.p_t);
        }
        raw_t[static_cast<std::size_t>(i)] = acc / static_cast<double>(ht.rows());
    }
    return {raw_s, raw_t};
}

std::vector<double> normalize_scores(const std::vector<double>& raw) {
    const std::size_t n = raw.size();
    if (n == 0) {
        return {};
    }
    if (n == 1) {
        return {0.0};
    }
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : raw) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(n);
    const double sigma = std::sqrt(var);
    if (sigma < 1e-12) {
        return std::vector<double>(n, 0.0);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (raw[i] - mean) / sigma;
    }
    return out;
}

std::pair<double, std::vector<double>> fuse_scores(const std::vector<double>& norm_s,
                                                   const std::vector<double>& norm_t) {
    if (norm_s.size() != norm_t.size()) {
        throw ShapeError("fuse_scores needs equal-length inputs");
    }
    const std::size_t n = norm_s.size();
    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += norm_s[i] * norm_t[i];
    }
    cov = n > 0 ? cov / static_cast<double>(n) : 0.0;
    std::vector<double> fused(n);
    for (std::size_t i = 0; i < n; ++i) {
        fused[i] = norm_s[i] + cov * norm_t[i];
    }
    return {cov, fused};
}

std::vector<std::vector<double>> token_explanations(const EncodedGraph& enc, const Prototypes& protos,
                                                    double cov_weight) {
    std::vector<std::vector<double>> expl;
    expl.reserve(enc.H_t.size());
    for (const Mat& ht : enc.H_t) {
        std::vector<double> row(static_cast<std::size_t>(ht.rows()));
        for (Eigen::Index j = 0; j < ht.rows(); ++j) {
            row[static_cast<std::size_t>(j)] =
                cov_weight * (1.0 - pair_similarity(ht.row(j).transpose(), protos.p_t));
        }
        expl.push_back(std::move(row));
    }
    return expl;
}

std::vector<int> flag_top(const std::vector<double>& fused, int budget) {
    if (budget < 0) {
        throw InvalidParamError("budget must be >= 0");
    }
    std::vector<int> order(fused.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (fused[static_cast<std::size_t>(a)] != fused[static_cast<std::size_t>(b)]) {
            return fused[static_cast<std::size_t>(a)] > fused[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(budget), order.size());
    order.resize(take);
    return order;
}

ScoreReport detect(const AttributedGraph& attr, const ModelParams& params, int budget) {
    if (budget < 0) {
        throw InvalidParamError("budget must be >= 0");
    }
    const EncodedGraph enc = encode(attr, params);
    const Prototypes protos = theme_prototypes(enc);
    ScoreReport report;
    report.graph_id = attr.graph.graph_id;
    report.tokens = attr.tokens;
    std::tie(report.raw_s, report.raw_t) = level_scores(enc, protos);
    report.norm_s = normalize_scores(report.raw_s);
    report.norm_t = normalize_scores(report.raw_t);
    std::tie(report.cov_weight, report.fused) = fuse_scores(report.norm_s, report.norm_t);
    report.token_expl = token_explanations(enc, protos, report.cov_weight);
    report.truncated = budget > attr.agent_count();
    report.flagged = flag_top(report.fused, std::min(budget, attr.agent_count()));
    return report;
}

std::string report_to_json(const ScoreReport& report) {
    nlohmann::json j;
    j["graph_id"] = report.graph_id;
    j["fused"] = report.fused;
    j["norm_s"] = report.norm_s;
    j["norm_t"] = report.norm_t;
    j["cov_weight"] = report.cov_weight;
    j["flagged"] = report.flagged;
    j["tokens"] = report.tokens;
    j["token_expl"] = report.token_expl;
    if (report.truncated) {
        j["truncated"] = true;
    }
    return j.dump(2) + "\n";
}

ScoreReport report_from_json(const std::string& text) {
    const nlohmann::json j = parse_json(text);
    ScoreReport r;
    r.graph_id = require_string(j, "graph_id");
    auto load_doubles = [&](const char* field) {
        const auto& arr = require_field(j, field);
        if (!arr.is_array()) {
            throw SchemaError(field, "expected an array");
        }
        std::vector<double> out;
        out.reserve(arr.size());
        for (const auto& v : arr) {
            if (!v.is_number()) {
                throw SchemaError(field, "non-numeric entry");
            }
            out.push_back(v.get<double>());
        }
        return out;
    };
    r.fused = load_doubles("fused");
    r.norm_s = load_doubles("norm_s");
    r.norm_t = load_doubles("norm_t");
    r.cov_weight = require_double(j, "cov_weight");
    const auto& flagged = require_field(j, "flagged");
    if (!flagged.is_array()) {
        throw SchemaError("flagged", "expected an array");
    }
    for (const auto& v : flagged) {
        if (!v.is_number_integer()) {
            throw SchemaError("flagged", "non-integer entry");
        }
        r.flagged.push_back(v.get<int>());
    }
    const auto& tokens = require_field(j, "tokens");
    if (!tokens.is_array()) {
        throw SchemaError("tokens", "expected an array of arrays");
    }
    for (const auto& row : tokens) {
        if (!row.is_array()) {
            throw SchemaError("tokens", "expected an array of arrays");
        }
        std::vector<std::string> toks;
        for (const auto& t : row) {
            if (!t.is_string()) {
                throw SchemaError("tokens", "non-string token");
            }
            toks.push_back(t.get<std::string>());
        }
        r.tokens.push_back(std::move(toks));
    }
    const auto& expl = require_field(j, "token_expl");
    if (!expl.is_array() || expl.size() != r.tokens.size()) {
        throw SchemaError("token_expl", "expected one row per agent");
    }
    for (std::size_t i = 0; i < expl.size(); ++i) {
        const auto& row = expl[i];
        if (!row.is_array() || row.size() != r.tokens[i].size()) {
            throw SchemaError("token_expl", "row " + std::to_string(i) + " length mismatch");
        }
        std::vector<double> vals;
        for (const auto& v : row) {
            if (!v.is_number()) {
                throw SchemaError("token_expl", "non-numeric entry");
            }
            vals.push_back(v.get<double>());
        }
        r.token_expl.push_back(std::move(vals));
    }
    if (j.contains("truncated")) {
        const auto& t = j.at("truncated");
        if (!t.is_boolean()) {
            throw SchemaError("truncated", "expected a boolean");
        }
        r.truncated = t.get<bool>();
    }
    return r;
}

ScoreReport load_report(const std::string& path) {
    return report_from_json(read_file(path));
}

void save_report(const ScoreReport& report, const std::string& path) {
    write_file(path, report_to_json(report));
}

} // namespace sentinel
