#include "sentinel/encoder.hpp"

#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"

namespace sentinel {

ModelParams ModelParams::zeros(int dim) {
    ModelParams p;
    p.dim = dim;
    p.W_s = Mat::Zero(dim, dim);
    p.b_s = Vec::Zero(dim);
    p.W_t = Mat::Zero(dim, dim);
    p.b_t = Vec::Zero(dim);
    return p;
}

void ModelParams::validate() const {
    if (dim < 1) {
        throw ShapeError("params dim must be positive");
    }
    if (W_s.rows() != dim || W_s.cols() != dim || W_t.rows() != dim || W_t.cols() != dim ||
        b_s.size() != dim || b_t.size() != dim) {
        throw ShapeError("params shapes must be d x d and d");
    }
    if (!W_s.allFinite() || !W_t.allFinite() || !b_s.allFinite() || !b_t.allFinite()) {
        throw ShapeError("params must be finite");
    }
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json vector_to_json(const Vec& v) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        row.push_back(v(i));
    }
    return row;
}

Mat matrix_from_json(const nlohmann::json& j, const std::string& field, int rows, int cols) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows) {
        throw SchemaError(field, "expected " + std::to_string(rows) + " rows");
    }
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw SchemaError(field, "row " + std::to_string(r) + " must have " + std::to_string(cols) +
                                         " entries");
        }
        for (int c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                throw SchemaError(field, "non-numeric entry");
            }
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

Vec vector_from_json(const nlohmann::json& j, const std::string& field, int size) {
    if (!j.is_array() || static_cast<int>(j.size()) != size) {
        throw SchemaError(field, "expected " + std::to_string(size) + " entries");
    }
    Vec v(size);
    for (int i = 0; i < size; ++i) {
        const auto& e = j[static_cast<std::size_t>(i)];
        if (!e.is_number()) {
            throw SchemaError(field, "non-numeric entry");
        }
        v(i) = e.get<double>();
    }
    return v;
}

} // namespace

std::string params_to_json(const ModelParams& params) {
    params.validate();
    nlohmann::json j;
    j["version"] = 1;
    j["dim"] = params.dim;
    j["W_s"] = matrix_to_json(params.W_s);
    j["b_s"] = vector_to_json(params.b_s);
    j["W_t"] = matrix_to_json(params.W_t);
    j["b_t"] = vector_to_json(params.b_t);
    return j.dump(2) + "\n";
}

ModelParams params_from_json(const std::string& text) {
    const nlohmann::json j = parse_json(text);
    const std::int64_t version = require_int(j, "version");
    if (version != 1) {
        throw SchemaError("version", "unsupported version " + std::to_string(version));
    }
    ModelParams p;
    p.dim = static_cast<int>(require_int(j, "dim"));
    if (p.dim < 1) {
        throw SchemaError("dim", "must be positive");
    }
    p.W_s = matrix_from_json(require_field(j, "W_s"), "W_s", p.dim, p.dim);
    p.b_s = vector_from_json(require_field(j, "b_s"), "b_s", p.dim);
    p.W_t = matrix_from_json(require_field(j, "W_t"), "W_t", p.dim, p.dim);
    p.b_t = vector_from_json(require_field(j, "b_t"), "b_t", p.dim);
    p.validate();
    return p;
}

ModelParams load_params(const std::string& path) {
    return params_from_json(read_file(path));
}

void save_params(const ModelParams& params, const std::string& path) {
    write_file(path, params_to_json(params));
}

namespace {

// Mean over in-neighbors, zero vector for sources.
Mat neighbor_mean(const Mat& X, const AdjMat& A) {
    const Eigen::Index n = X.rows();
    Mat agg = Mat::Zero(n, X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        int indegree = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (A(i, j) != 0) {
                agg.row(i) += X.row(j);
                ++indegree;
            }
        }
        if (indegree > 0) {
            agg.row(i) /= static_cast<double>(indegree);
        }
    }
    return agg;
}

// Row-wise W*x + b, one GEMV per agent so every caller evaluates the
// transform identically.
Mat linear_rows(const Mat& agg, const Mat& W, const Vec& b) {
    Mat z(agg.rows(), agg.cols());
    for (Eigen::Index i = 0; i < agg.rows(); ++i) {
        z.row(i) = (W * agg.row(i).transpose() + b).transpose();
    }
    return z;
}

void check_dims(const AttributedGraph& attr, const ModelParams& params) {
    params.validate();
    if (attr.dim() != params.dim) {
        throw ShapeError("attribute dim " + std::to_string(attr.dim()) + " != params dim " +
                         std::to_string(params.dim));
    }
}

} // namespace

Mat message_pass(const Mat& X, const AdjMat& A, const Mat& W, const Vec& b) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (A.rows() != n || A.cols() != n) {
        throw ShapeError("adjacency must be N x N matching X rows");
    }
    if (W.rows() != d || W.cols() != d || b.size() != d) {
        throw ShapeError("W must be d x d and b length d");
    }
    return linear_rows(neighbor_mean(X, A), W, b).cwiseMax(0.0);
}

Mat encode_sentence(const AttributedGraph& attr, const ModelParams& params) {
    check_dims(attr, params);
    return message_pass(attr.sentence_attrs, attr.graph.adjacency, params.W_s, params.b_s) +
           attr.sentence_attrs;
}

std::vector<Mat> augment_tokens(const AttributedGraph& attr) {
    std::vector<Mat> aug;
    aug.reserve(attr.token_attrs.size());
    for (std::size_t i = 0; i < attr.token_attrs.size(); ++i) {
        Mat m = attr.token_attrs[i];
        m.rowwise() += attr.sentence_attrs.row(static_cast<Eigen::Index>(i));
        aug.push_back(std::move(m));
    }
    return aug;
}

std::pair<Mat, std::vector<Mat>> encode_tokens(const AttributedGraph& attr, const ModelParams& params) {
    check_dims(attr, params);
    const std::vector<Mat> aug = augment_tokens(attr);
    const int n = attr.agent_count();
    Mat pooled(n, attr.dim());
    for (int i = 0; i < n; ++i) {
        pooled.row(i) = aug[static_cast<std::size_t>(i)].colwise().mean();
    }
    const Mat M = message_pass(pooled, attr.graph.adjacency, params.W_t, params.b_t);
    std::vector<Mat> H_t;
    H_t.reserve(aug.size());
    for (int i = 0; i < n; ++i) {
        Mat h = aug[static_cast<std::size_t>(i)];
        h.rowwise() += M.row(i); // per-node message broadcast across the node's tokens
        H_t.push_back(std::move(h));
    }
    return {pooled, H_t};
}

EncodedGraph encode_with_cache(const AttributedGraph& attr, const ModelParams& params, EncodeCache& cache) {
    check_dims(attr, params);
    attr.validate();
    const int n = attr.agent_count();
    const int d = attr.dim();
    EncodedGraph enc;
    enc.graph_id = attr.graph.graph_id;

    cache.agg_s = neighbor_mean(attr.sentence_attrs, attr.graph.adjacency);
    cache.Z_s = linear_rows(cache.agg_s, params.W_s, params.b_s);
    enc.H_s = cache.Z_s.cwiseMax(0.0) + attr.sentence_attrs;

    enc.aug_t = augment_tokens(attr);
    enc.pooled_t = Mat(n, d);
    for (int i = 0; i < n; ++i) {
        enc.pooled_t.row(i) = enc.aug_t[static_cast<std::size_t>(i)].colwise().mean();
    }
    cache.agg_t = neighbor_mean(enc.pooled_t, attr.graph.adjacency);
    cache.Z_t = linear_rows(cache.agg_t, params.W_t, params.b_t);
    const Mat M = cache.Z_t.cwiseMax(0.0);
    enc.H_t.reserve(enc.aug_t.size());
    for (int i = 0; i < n; ++i) {
        Mat h = enc.aug_t[static_cast<std::size_t>(i)];
        h.rowwise() += M.row(i);
        enc.H_t.push_back(std::move(h));
    }
    return enc;
}

EncodedGraph encode(const AttributedGraph& attr, const ModelParams& params) {
    EncodeCache cache;
    return encode_with_cache(attr, params, cache);
}

} // namespace sentinel
