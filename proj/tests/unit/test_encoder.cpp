#include <doctest.h>

#include <vector>

#include "sentinel/embed.hpp"
#include "sentinel/encoder.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/rng.hpp"

using namespace sentinel;

namespace {

Mat random_mat(int r, int c, SplitMix64& rng, double scale = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            m(i, j) = (2.0 * rng.next_double() - 1.0) * scale;
        }
    }
    return m;
}

AttributedGraph random_attr_graph(int n, int d, SplitMix64& rng, double edge_p = 0.5) {
    DialogueGraph g;
    g.graph_id = "enc";
    g.synthetic_vector_mode = true;
    g.adjacency = AdjMat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && rng.next_double() < edge_p) {
                g.adjacency(i, j) = 1;
            }
        }
    }
    g.agents.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g.agents[static_cast<std::size_t>(i)].id = i;
        g.agents[static_cast<std::size_t>(i)].role = "w";
    }
    std::vector<Mat> toks;
    for (int i = 0; i < n; ++i) {
        const int t = 1 + static_cast<int>(rng.next_below(4));
        toks.push_back(random_mat(t, d, rng));
    }
    return AttributedGraph::from_vectors(std::move(g), random_mat(n, d, rng), std::move(toks));
}

ModelParams random_params(int d, SplitMix64& rng, double scale = 0.5) {
    ModelParams p = ModelParams::zeros(d);
    p.W_s = random_mat(d, d, rng, scale);
    p.b_s = random_mat(d, 1, rng, scale).col(0);
    p.W_t = random_mat(d, d, rng, scale);
    p.b_t = random_mat(d, 1, rng, scale).col(0);
    return p;
}

// Straight-line per-node aggregation, kept independent of the library path.
Mat naive_message_pass(const Mat& X, const AdjMat& A, const Mat& W, const Vec& b) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    Mat out = Mat::Zero(n, d);
    for (int i = 0; i < n; ++i) {
        std::vector<double> agg(static_cast<std::size_t>(d), 0.0);
        int indeg = 0;
        for (int j = 0; j < n; ++j) {
            if (A(i, j) == 1) {
                ++indeg;
                for (int c = 0; c < d; ++c) {
                    agg[static_cast<std::size_t>(c)] += X(j, c);
                }
            }
        }
        if (indeg > 0) {
            for (int c = 0; c < d; ++c) {
                agg[static_cast<std::size_t>(c)] /= indeg;
            }
        }
        for (int r = 0; r < d; ++r) {
            double z = b(r);
            for (int c = 0; c < d; ++c) {
                z += W(r, c) * agg[static_cast<std::size_t>(c)];
            }
            out(i, r) = z > 0.0 ? z : 0.0;
        }
    }
    return out;
}

} // namespace

TEST_CASE("message_pass with no edges is relu(b) everywhere") {
    SplitMix64 rng(1);
    const int n = 4, d = 6;
    const Mat X = random_mat(n, d, rng);
    const AdjMat A = AdjMat::Zero(n, n);
    ModelParams p = random_params(d, rng);
    const Mat out = message_pass(X, A, p.W_s, p.b_s);
    const Vec expect = p.b_s.cwiseMax(0.0);
    for (int i = 0; i < n; ++i) {
        CHECK((out.row(i).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("message_pass identity transform copies the sender") {
    const int d = 5;
    AdjMat A = AdjMat::Zero(2, 2);
    A(1, 0) = 1; // 0 sends to 1
    Mat X = Mat::Zero(2, d);
    X(0, 0) = 1.0;
    X(0, 3) = 0.25;
    const Mat out = message_pass(X, A, Mat::Identity(d, d), Vec::Zero(d));
    CHECK((out.row(1) - X.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("message_pass matches the naive loop oracle") {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4, d = 8;
        const AttributedGraph attr = random_attr_graph(n, d, rng);
        const ModelParams p = random_params(d, rng);
        const Mat fast = message_pass(attr.sentence_attrs, attr.graph.adjacency, p.W_s, p.b_s);
        const Mat slow = naive_message_pass(attr.sentence_attrs, attr.graph.adjacency, p.W_s, p.b_s);
        CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("message_pass rejects bad shapes") {
    SplitMix64 rng(3);
    const Mat X = random_mat(3, 4, rng);
    const AdjMat A = AdjMat::Zero(2, 2);
    CHECK_THROWS_AS(message_pass(X, A, Mat::Zero(4, 4), Vec::Zero(4)), ShapeError);
    const AdjMat A3 = AdjMat::Zero(3, 3);
    CHECK_THROWS_AS(message_pass(X, A3, Mat::Zero(3, 3), Vec::Zero(4)), ShapeError);
}

TEST_CASE("zero params make the encoder an identity (skip connections)") {
    SplitMix64 rng(9);
    const AttributedGraph attr = random_attr_graph(5, 7, rng);
    const ModelParams zeros = ModelParams::zeros(7);
    const Mat H_s = encode_sentence(attr, zeros);
    CHECK((H_s - attr.sentence_attrs).cwiseAbs().maxCoeff() == 0.0);
    const auto [pooled, H_t] = encode_tokens(attr, zeros);
    const std::vector<Mat> aug = augment_tokens(attr);
    for (std::size_t i = 0; i < aug.size(); ++i) {
        CHECK((H_t[i] - aug[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("edgeless graph with zero bias keeps sentence attrs") {
    SplitMix64 rng(10);
    AttributedGraph attr = random_attr_graph(4, 6, rng, 0.0);
    ModelParams p = random_params(6, rng);
    p.b_s = Vec::Zero(6);
    CHECK((encode_sentence(attr, p) - attr.sentence_attrs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("augment_tokens adds the sentence vector row-wise") {
    SplitMix64 rng(11);
    const AttributedGraph attr = random_attr_graph(3, 5, rng);
    const std::vector<Mat> aug = augment_tokens(attr);
    for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        for (int j = 0; j < attr.token_attrs[idx].rows(); ++j) {
            const Vec expect =
                attr.token_attrs[idx].row(j).transpose() + attr.sentence_attrs.row(i).transpose();
            CHECK((aug[idx].row(j).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("encode_tokens matches a token-by-token oracle") {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(3));
        const int d = 6;
        const AttributedGraph attr = random_attr_graph(n, d, rng);
        const ModelParams p = random_params(d, rng);
        const auto [pooled, H_t] = encode_tokens(attr, p);

        // Oracle: explicit pooling then naive propagation.
        Mat pooled_oracle(n, d);
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            Vec acc = Vec::Zero(d);
            const Mat aug = attr.token_attrs[idx].rowwise() + attr.sentence_attrs.row(i);
            for (int j = 0; j < aug.rows(); ++j) {
                acc += aug.row(j).transpose();
            }
            pooled_oracle.row(i) = (acc / aug.rows()).transpose();
        }
        CHECK((pooled - pooled_oracle).cwiseAbs().maxCoeff() < 1e-9);
        const Mat M = naive_message_pass(pooled_oracle, attr.graph.adjacency, p.W_t, p.b_t);
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const Mat aug = attr.token_attrs[idx].rowwise() + attr.sentence_attrs.row(i);
            for (int j = 0; j < aug.rows(); ++j) {
                const Vec expect = M.row(i).transpose() + aug.row(j).transpose();
                CHECK((H_t[idx].row(j).transpose() - expect).cwiseAbs().maxCoeff() < 1e-9);
            }
        }
    }
}

TEST_CASE("broadcast property: token residual is constant per agent") {
    SplitMix64 rng(13);
    const AttributedGraph attr = random_attr_graph(4, 6, rng);
    const ModelParams p = random_params(6, rng);
    const auto [pooled, H_t] = encode_tokens(attr, p);
    const std::vector<Mat> aug = augment_tokens(attr);
    for (std::size_t i = 0; i < aug.size(); ++i) {
        const Mat diff = H_t[i] - aug[i];
        for (int j = 1; j < diff.rows(); ++j) {
            CHECK((diff.row(j) - diff.row(0)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("agent permutation equivariance") {
    SplitMix64 rng(14);
    const int n = 5, d = 6;
    const AttributedGraph attr = random_attr_graph(n, d, rng);
    const ModelParams p = random_params(d, rng);
    const EncodedGraph enc = encode(attr, p);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) {
        perm[static_cast<std::size_t>(i)] = i;
    }
    shuffle_vec(perm, rng); // perm[new] = old

    DialogueGraph pg;
    pg.graph_id = attr.graph.graph_id;
    pg.synthetic_vector_mode = true;
    pg.adjacency = AdjMat::Zero(n, n);
    pg.agents.resize(static_cast<std::size_t>(n));
    Mat psent(n, d);
    std::vector<Mat> ptoks(static_cast<std::size_t>(n));
    std::vector<std::vector<std::string>> ptok_names(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        const int old_a = perm[static_cast<std::size_t>(a)];
        pg.agents[static_cast<std::size_t>(a)] = {a, "w", "", {}};
        psent.row(a) = attr.sentence_attrs.row(old_a);
        ptoks[static_cast<std::size_t>(a)] = attr.token_attrs[static_cast<std::size_t>(old_a)];
        ptok_names[static_cast<std::size_t>(a)] = attr.tokens[static_cast<std::size_t>(old_a)];
        for (int b = 0; b < n; ++b) {
            pg.adjacency(a, b) = attr.graph.adjacency(perm[static_cast<std::size_t>(a)],
                                                      perm[static_cast<std::size_t>(b)]);
        }
    }
    const AttributedGraph pattr = AttributedGraph::from_vectors(pg, psent, ptoks, ptok_names);
    const EncodedGraph penc = encode(pattr, p);
    for (int a = 0; a < n; ++a) {
        const int old_a = perm[static_cast<std::size_t>(a)];
        CHECK((penc.H_s.row(a) - enc.H_s.row(old_a)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((penc.H_t[static_cast<std::size_t>(a)] - enc.H_t[static_cast<std::size_t>(old_a)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
}

TEST_CASE("params json round trip is bit exact") {
    SplitMix64 rng(15);
    const ModelParams p = random_params(9, rng);
    const ModelParams q = params_from_json(params_to_json(p));
    CHECK(q.dim == 9);
    CHECK((p.W_s - q.W_s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.b_s - q.b_s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.W_t - q.W_t).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.b_t - q.b_t).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("params loader rejects mismatched shapes") {
    CHECK_THROWS_AS(params_from_json(R"({"version": 1, "dim": 2, "W_s": [[0, 0]],
        "b_s": [0, 0], "W_t": [[0, 0], [0, 0]], "b_t": [0, 0]})"),
                    SchemaError);
    CHECK_THROWS_AS(params_from_json(R"({"version": 7, "dim": 1, "W_s": [[0]],
        "b_s": [0], "W_t": [[0]], "b_t": [0]})"),
                    SchemaError);
}

TEST_CASE("encoder rejects dim mismatch with the attributes") {
    SplitMix64 rng(16);
    const AttributedGraph attr = random_attr_graph(3, 5, rng);
    const ModelParams p = ModelParams::zeros(6);
    CHECK_THROWS_AS(encode_sentence(attr, p), ShapeError);
}
