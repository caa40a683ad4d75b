#include "sentinel/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"
#include "sentinel/rng.hpp"

namespace sentinel {

namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

double logistic(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct GraphForward {
    EncodedGraph enc;
    EncodeCache cache;
    Prototypes protos;
};

GraphForward forward_graph(const AttributedGraph& attr, const ModelParams& params) {
    GraphForward f;
    f.enc = encode_with_cache(attr, params, f.cache);
    f.protos = theme_prototypes(f.enc);
    return f;
}

// Mean of the two level similarities for every agent of `enc` against the
// given prototypes.
std::vector<double> level_mean_similarities(const EncodedGraph& enc, const Prototypes& protos) {
    const Eigen::Index n = enc.H_s.rows();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sim_s = logistic(enc.H_s.row(i).dot(protos.p_s));
        const Mat& ht = enc.H_t[static_cast<std::size_t>(i)];
        double acc = 0.0;
        for (Eigen::Index j = 0; j < ht.rows(); ++j) {
            acc += logistic(ht.row(j).dot(protos.p_t));
        }
        out[static_cast<std::size_t>(i)] = 0.5 * (sim_s + acc / static_cast<double>(ht.rows()));
    }
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw InvalidParamError("epochs must be >= 1");
    }
    if (batch_size < 2) {
        throw InvalidParamError("batch_size must be >= 2 (negative sampling needs a second graph)");
    }
    if (!(lr >= 0.0)) {
        throw InvalidParamError("lr must be non-negative");
    }
    if (!(alpha > 0.0)) {
        throw InvalidParamError("alpha must be > 0");
    }
    if (!(weight_decay >= 0.0)) {
        throw InvalidParamError("weight_decay must be non-negative");
    }
}

ParamGrads ParamGrads::zeros(int dim) {
    ParamGrads g;
    g.W_s = Mat::Zero(dim, dim);
    g.b_s = Vec::Zero(dim);
    g.W_t = Mat::Zero(dim, dim);
    g.b_t = Vec::Zero(dim);
    return g;
}

std::vector<double> positive_scores(const AttributedGraph& attr, const ModelParams& params) {
    const GraphForward f = forward_graph(attr, params);
    return level_mean_similarities(f.enc, f.protos);
}

std::vector<double> negative_scores(const AttributedGraph& attr, const Prototypes& foreign,
                                    const ModelParams& params) {
    if (foreign.source_graph_id == attr.graph.graph_id) {
        throw InvalidNegativeError("negative prototypes must come from a different graph ('" +
                                   attr.graph.graph_id + "')");
    }
    const GraphForward f = forward_graph(attr, params);
    return level_mean_similarities(f.enc, foreign);
}

double contrastive_loss(const std::vector<double>& pos, const std::vector<double>& neg, double alpha) {
    if (pos.size() != neg.size() || pos.empty()) {
        throw ShapeError("contrastive_loss needs equal non-empty score vectors");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const double p = std::clamp(pos[i], kClampLo, kClampHi);
        const double q = std::clamp(neg[i], kClampLo, kClampHi);
        acc += std::log(p) + alpha * std::log(1.0 - q);
    }
    return -acc / static_cast<double>(pos.size());
}

double batch_loss_and_grads(const std::vector<const AttributedGraph*>& batch,
                            const std::vector<int>& negatives, const ModelParams& params, double alpha,
                            ParamGrads* grads) {
    const std::size_t bsz = batch.size();
    if (bsz < 2 || negatives.size() != bsz) {
        throw InvalidParamError("batch needs >= 2 graphs and one negative index per graph");
    }
    for (std::size_t k = 0; k < bsz; ++k) {
        if (negatives[k] < 0 || static_cast<std::size_t>(negatives[k]) >= bsz ||
            negatives[k] == static_cast<int>(k)) {
            throw InvalidNegativeError("negative index of graph " + std::to_string(k) +
                                       " must name a different in-batch graph");
        }
    }

    const int d = params.dim;
    std::vector<GraphForward> fwd;
    fwd.reserve(bsz);
    for (const AttributedGraph* attr : batch) {
        fwd.push_back(forward_graph(*attr, params));
    }

    // Gradient accumulators per graph: d/dH and d/dprototype.
    std::vector<Mat> g_Hs;
    std::vector<std::vector<Mat>> g_Ht;
    std::vector<Vec> g_ps(bsz, Vec::Zero(d));
    std::vector<Vec> g_pt(bsz, Vec::Zero(d));
    if (grads) {
        g_Hs.reserve(bsz);
        g_Ht.reserve(bsz);
        for (const GraphForward& f : fwd) {
            g_Hs.push_back(Mat::Zero(f.enc.H_s.rows(), d));
            std::vector<Mat> per_agent;
            per_agent.reserve(f.enc.H_t.size());
            for (const Mat& ht : f.enc.H_t) {
                per_agent.push_back(Mat::Zero(ht.rows(), d));
            }
            g_Ht.push_back(std::move(per_agent));
        }
    }

    double total_loss = 0.0;
    for (std::size_t k = 0; k < bsz; ++k) {
        const GraphForward& fk = fwd[k];
        const std::size_t l = static_cast<std::size_t>(negatives[k]);
        const Prototypes& own = fk.protos;
        const Prototypes& foreign = fwd[l].protos;
        const Eigen::Index n = fk.enc.H_s.rows();
        const double inv_n = 1.0 / static_cast<double>(n);

        for (Eigen::Index i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const Mat& ht = fk.enc.H_t[idx];
            const double inv_t = 1.0 / static_cast<double>(ht.rows());

            const double pos_sim_s = logistic(fk.enc.H_s.row(i).dot(own.p_s));
            double pos_tok_acc = 0.0;
            for (Eigen::Index j = 0; j < ht.rows(); ++j) {
                pos_tok_acc += logistic(ht.row(j).dot(own.p_t));
            }
            const double pos = 0.5 * (pos_sim_s + pos_tok_acc * inv_t);

            const double neg_sim_s = logistic(fk.enc.H_s.row(i).dot(foreign.p_s));
            double neg_tok_acc = 0.0;
            for (Eigen::Index j = 0; j < ht.rows(); ++j) {
                neg_tok_acc += logistic(ht.row(j).dot(foreign.p_t));
            }
            const double neg = 0.5 * (neg_sim_s + neg_tok_acc * inv_t);

            const double pos_c = std::clamp(pos, kClampLo, kClampHi);
            const double neg_c = std::clamp(neg, kClampLo, kClampHi);
            total_loss -= inv_n * (std::log(pos_c) + alpha * std::log(1.0 - neg_c));

            if (!grads) {
                continue;
            }
            // Clamped scores sit on a flat segment of the loss.
            const double d_pos = (pos > kClampLo && pos < kClampHi) ? -inv_n / pos_c : 0.0;
            const double d_neg = (neg > kClampLo && neg < kClampHi) ? alpha * inv_n / (1.0 - neg_c) : 0.0;

            {
                const double w = d_pos * 0.5 * pos_sim_s * (1.0 - pos_sim_s);
                g_Hs[k].row(i) += w * own.p_s.transpose();
                g_ps[k] += w * fk.enc.H_s.row(i).transpose();
            }
            for (Eigen::Index j = 0; j < ht.rows(); ++j) {
                const double s = logistic(ht.row(j).dot(own.p_t));
                const double w = d_pos * 0.5 * inv_t * s * (1.0 - s);
                g_Ht[k][idx].row(j) += w * own.p_t.transpose();
                g_pt[k] += w * ht.row(j).transpose();
            }
            {
                const double w = d_neg * 0.5 * neg_sim_s * (1.0 - neg_sim_s);
                g_Hs[k].row(i) += w * foreign.p_s.transpose();
                g_ps[l] += w * fk.enc.H_s.row(i).transpose();
            }
            for (Eigen::Index j = 0; j < ht.rows(); ++j) {
                const double s = logistic(ht.row(j).dot(foreign.p_t));
                const double w = d_neg * 0.5 * inv_t * s * (1.0 - s);
                g_Ht[k][idx].row(j) += w * foreign.p_t.transpose();
                g_pt[l] += w * ht.row(j).transpose();
            }
        }
    }

    if (!grads) {
        return total_loss;
    }

    // Prototypes are means of the representations; spread their gradients
    // back onto the rows.
    for (std::size_t g = 0; g < bsz; ++g) {
        const Eigen::Index n = fwd[g].enc.H_s.rows();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            g_Hs[g].row(i) += inv_n * g_ps[g].transpose();
            Mat& ght = g_Ht[g][static_cast<std::size_t>(i)];
            const double scale = inv_n / static_cast<double>(ght.rows());
            for (Eigen::Index j = 0; j < ght.rows(); ++j) {
                ght.row(j) += scale * g_pt[g].transpose();
            }
        }
    }

    // Through the encoder: H = relu(Z) + skip, Z = W*agg + b; the skip and
    // pooling paths carry no parameters.
    for (std::size_t g = 0; g < bsz; ++g) {
        const GraphForward& f = fwd[g];
        const Eigen::Index n = f.enc.H_s.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            Vec dZs = g_Hs[g].row(i).transpose();
            for (int c = 0; c < dZs.size(); ++c) {
                if (f.cache.Z_s(i, c) <= 0.0) {
                    dZs(c) = 0.0;
                }
            }
            grads->W_s += dZs * f.cache.agg_s.row(i);
            grads->b_s += dZs;

            Vec dZt = g_Ht[g][idx].colwise().sum().transpose();
            for (int c = 0; c < dZt.size(); ++c) {
                if (f.cache.Z_t(i, c) <= 0.0) {
                    dZt(c) = 0.0;
                }
            }
            grads->W_t += dZt * f.cache.agg_t.row(i);
            grads->b_t += dZt;
        }
    }
    return total_loss;
}

namespace {

struct AdamState {
    Mat mW_s, vW_s, mW_t, vW_t;
    Vec mb_s, vb_s, mb_t, vb_t;
    long step = 0;

    explicit AdamState(int d)
        : mW_s(Mat::Zero(d, d)), vW_s(Mat::Zero(d, d)), mW_t(Mat::Zero(d, d)), vW_t(Mat::Zero(d, d)),
          mb_s(Vec::Zero(d)), vb_s(Vec::Zero(d)), mb_t(Vec::Zero(d)), vb_t(Vec::Zero(d)) {}
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename T>
void adam_update(T& theta, const T& grad, T& m, T& v, double lr, double bc1, double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

void optimizer_step(ModelParams& params, const ParamGrads& grads, const TrainConfig& cfg,
                    AdamState& adam) {
    if (cfg.optimizer == OptimizerKind::Sgd) {
        params.W_s -= cfg.lr * grads.W_s;
        params.b_s -= cfg.lr * grads.b_s;
        params.W_t -= cfg.lr * grads.W_t;
        params.b_t -= cfg.lr * grads.b_t;
        return;
    }
    ++adam.step;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
    adam_update(params.W_s, grads.W_s, adam.mW_s, adam.vW_s, cfg.lr, bc1, bc2);
    adam_update(params.b_s, grads.b_s, adam.mb_s, adam.vb_s, cfg.lr, bc1, bc2);
    adam_update(params.W_t, grads.W_t, adam.mW_t, adam.vW_t, cfg.lr, bc1, bc2);
    adam_update(params.b_t, grads.b_t, adam.mb_t, adam.vb_t, cfg.lr, bc1, bc2);
}

ModelParams init_params(int dim, SplitMix64& rng) {
    ModelParams p = ModelParams::zeros(dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            p.W_s(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            p.W_t(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
    return p;
}

} // namespace

std::pair<ModelParams, TrainReport> train_on_attributed(const std::vector<AttributedGraph>& graphs,
                                                        int dim, const TrainConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(graphs.size()) < cfg.batch_size) {
        throw InsufficientDataError("need at least " + std::to_string(cfg.batch_size) + " graphs, got " +
                                    std::to_string(graphs.size()));
    }
    for (const AttributedGraph& g : graphs) {
        if (g.dim() != dim) {
            throw ShapeError("graph '" + g.graph.graph_id + "' has dim " + std::to_string(g.dim()) +
                             ", expected " + std::to_string(dim));
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(cfg.seed);
    ModelParams params = init_params(dim, rng);
    AdamState adam(dim);
    TrainReport report;

    if (dim <= 32 && graphs.size() >= 2) {
        const AttributedGraph& a = graphs[0];
        const AttributedGraph& b = graphs[1];
        const auto small = [](const AttributedGraph& g) {
            if (g.agent_count() > 12) {
                return false;
            }
            for (int i = 0; i < g.agent_count(); ++i) {
                if (g.token_count(i) > 40) {
                    return false;
                }
            }
            return true;
        };
        if (small(a) && small(b)) {
            report.grad_check_max_rel_err = gradient_check(a, b, params, cfg.alpha);
        }
    }

    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_vec(order, rng);
        double loss_sum = 0.0;
        std::size_t processed = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bsz = end - start;
            if (bsz < 2) {
                break; // a trailing singleton has no in-batch negative
            }
            std::vector<const AttributedGraph*> batch(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                batch[k] = &graphs[order[start + k]];
            }
            std::vector<int> negatives(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                const std::uint64_t r = rng.next_below(bsz - 1);
                negatives[k] = static_cast<int>(r >= k ? r + 1 : r);
            }
            ParamGrads grads = ParamGrads::zeros(dim);
            loss_sum += batch_loss_and_grads(batch, negatives, params, cfg.alpha, &grads);
            grads.W_s += cfg.weight_decay * params.W_s;
            grads.W_t += cfg.weight_decay * params.W_t;
            optimizer_step(params, grads, cfg, adam);
            processed += bsz;
        }
        report.epoch_losses.push_back(processed > 0 ? loss_sum / static_cast<double>(processed) : 0.0);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {params, report};
}

std::pair<ModelParams, TrainReport> train(const std::vector<DialogueGraph>& graphs,
                                          const EmbedderSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<AttributedGraph> attrs;
    attrs.reserve(graphs.size());
    for (const DialogueGraph& g : graphs) {
        attrs.push_back(attribute_graph(g, spec));
    }
    return train_on_attributed(attrs, spec.dim, cfg);
}

namespace {

double min_preactivation_margin(const AttributedGraph& attr, const ModelParams& params) {
    EncodeCache cache;
    encode_with_cache(attr, params, cache);
    return std::min(cache.Z_s.cwiseAbs().minCoeff(), cache.Z_t.cwiseAbs().minCoeff());
}

void jitter_attrs(AttributedGraph& attr, SplitMix64& rng, double scale) {
    for (Eigen::Index i = 0; i < attr.sentence_attrs.rows(); ++i) {
        for (Eigen::Index c = 0; c < attr.sentence_attrs.cols(); ++c) {
            attr.sentence_attrs(i, c) += (2.0 * rng.next_double() - 1.0) * scale;
        }
    }
    for (Mat& tm : attr.token_attrs) {
        for (Eigen::Index r = 0; r < tm.rows(); ++r) {
            for (Eigen::Index c = 0; c < tm.cols(); ++c) {
                tm(r, c) += (2.0 * rng.next_double() - 1.0) * scale;
            }
        }
    }
}

void jitter_params(ModelParams& params, SplitMix64& rng, double scale) {
    auto jm = [&](Mat& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) += (2.0 * rng.next_double() - 1.0) * scale;
            }
        }
    };
    auto jv = [&](Vec& v) {
        for (Eigen::Index r = 0; r < v.size(); ++r) {
            v(r) += (2.0 * rng.next_double() - 1.0) * scale;
        }
    };
    jm(params.W_s);
    jv(params.b_s);
    jm(params.W_t);
    jv(params.b_t);
}

} // namespace

double gradient_check(const AttributedGraph& a, const AttributedGraph& b, const ModelParams& params,
                      double alpha, double epsilon) {
    constexpr double kKinkMargin = 1e-4;
    AttributedGraph ja = a;
    AttributedGraph jb = b;
    ModelParams jp = params;

    // The loss is piecewise smooth; move the evaluation point away from
    // ReLU kinks before differencing. Inputs are jittered first; parameter
    // jitter is the fallback for degenerate (e.g. all-zero) weights where
    // input jitter cannot move the pre-activations.
    SplitMix64 rng(0x9E3779B9u);
    for (int round = 0; round < 60; ++round) {
        const double margin = std::min(min_preactivation_margin(ja, jp), min_preactivation_margin(jb, jp));
        if (margin > kKinkMargin) {
            break;
        }
        jitter_attrs(ja, rng, 1e-3);
        jitter_attrs(jb, rng, 1e-3);
        if (round >= 5) {
            jitter_params(jp, rng, 1e-2);
        }
    }

    const std::vector<const AttributedGraph*> batch{&ja, &jb};
    const std::vector<int> negatives{1, 0};

    ParamGrads analytic = ParamGrads::zeros(jp.dim);
    batch_loss_and_grads(batch, negatives, jp, alpha, &analytic);

    auto loss_at = [&](const ModelParams& p) {
        return batch_loss_and_grads(batch, negatives, p, alpha, nullptr);
    };

    double max_rel = 0.0;
    auto check_entry = [&](double& theta, double g_analytic) {
        const double saved = theta;
        theta = saved + epsilon;
        const double up = loss_at(jp);
        theta = saved - epsilon;
        const double down = loss_at(jp);
        theta = saved;
        const double g_fd = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(g_analytic - g_fd) / std::max(1e-8, std::abs(g_analytic) + std::abs(g_fd));
        max_rel = std::max(max_rel, rel);
    };

    for (Eigen::Index r = 0; r < jp.W_s.rows(); ++r) {
        for (Eigen::Index c = 0; c < jp.W_s.cols(); ++c) {
            check_entry(jp.W_s(r, c), analytic.W_s(r, c));
        }
    }
    for (Eigen::Index r = 0; r < jp.b_s.size(); ++r) {
        check_entry(jp.b_s(r), analytic.b_s(r));
    }
    for (Eigen::Index r = 0; r < jp.W_t.rows(); ++r) {
        for (Eigen::Index c = 0; c < jp.W_t.cols(); ++c) {
            check_entry(jp.W_t(r, c), analytic.W_t(r, c));
        }
    }
    for (Eigen::Index r = 0; r < jp.b_t.size(); ++r) {
        check_entry(jp.b_t(r), analytic.b_t(r));
    }
    return max_rel;
}

std::string sidecar_to_json(const TrainConfig& cfg, const TrainReport& report) {
    nlohmann::json j;
    nlohmann::json tc;
    tc["epochs"] = cfg.epochs;
    tc["batch_size"] = cfg.batch_size;
    tc["lr"] = cfg.lr;
    tc["weight_decay"] = cfg.weight_decay;
    tc["alpha"] = cfg.alpha;
    tc["seed"] = cfg.seed;
    tc["optimizer"] = cfg.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    j["train_config"] = std::move(tc);
    j["epoch_losses"] = report.epoch_losses;
    return j.dump(2) + "\n";
}

void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const TrainReport& report,
                     const std::string& path) {
    save_params(params, path);
    write_file(path + ".meta.json", sidecar_to_json(cfg, report));
}

} // namespace sentinel
