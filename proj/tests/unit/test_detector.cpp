#include <doctest.h>

#include <cmath>
#include <vector>

#include "reference_detector.hpp"
#include "sentinel/detector.hpp"
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
    g.graph_id = "det";
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
        g.agents[static_cast<std::size_t>(i)] = {i, "w", "", {}};
    }
    std::vector<Mat> toks;
    for (int i = 0; i < n; ++i) {
        toks.push_back(random_mat(1 + static_cast<int>(rng.next_below(4)), d, rng));
    }
    return AttributedGraph::from_vectors(std::move(g), random_mat(n, d, rng), std::move(toks));
}

ModelParams random_params(int d, SplitMix64& rng, double scale = 0.4) {
    ModelParams p = ModelParams::zeros(d);
    p.W_s = random_mat(d, d, rng, scale);
    p.b_s = random_mat(d, 1, rng, scale).col(0);
    p.W_t = random_mat(d, d, rng, scale);
    p.b_t = random_mat(d, 1, rng, scale).col(0);
    return p;
}

reference::Input to_reference(const AttributedGraph& attr, const ModelParams& params) {
    reference::Input in;
    in.n = attr.agent_count();
    in.d = attr.dim();
    in.adj.assign(static_cast<std::size_t>(in.n), std::vector<int>(static_cast<std::size_t>(in.n), 0));
    in.sent.assign(static_cast<std::size_t>(in.n), std::vector<double>(static_cast<std::size_t>(in.d)));
    for (int i = 0; i < in.n; ++i) {
        for (int j = 0; j < in.n; ++j) {
            in.adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                attr.graph.adjacency(i, j);
        }
        for (int c = 0; c < in.d; ++c) {
            in.sent[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
                attr.sentence_attrs(i, c);
        }
    }
    in.toks.resize(static_cast<std::size_t>(in.n));
    for (int i = 0; i < in.n; ++i) {
        const Mat& tm = attr.token_attrs[static_cast<std::size_t>(i)];
        in.toks[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(tm.rows()),
                                                    std::vector<double>(static_cast<std::size_t>(in.d)));
        for (int j = 0; j < tm.rows(); ++j) {
            for (int c = 0; c < in.d; ++c) {
                in.toks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                       [static_cast<std::size_t>(c)] = tm(j, c);
            }
        }
    }
    auto mat_rows = [&](const Mat& m) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()),
                                              std::vector<double>(static_cast<std::size_t>(m.cols())));
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) {
                rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
            }
        }
        return rows;
    };
    in.W_s = mat_rows(params.W_s);
    in.W_t = mat_rows(params.W_t);
    in.b_s.assign(params.b_s.data(), params.b_s.data() + params.b_s.size());
    in.b_t.assign(params.b_t.data(), params.b_t.data() + params.b_t.size());
    return in;
}

} // namespace

TEST_CASE("pair_similarity analytic values") {
    Vec h(2), p(2);
    h << 0.0, 0.0;
    p << 1.0, 1.0;
    CHECK(pair_similarity(h, p) == doctest::Approx(0.5));
    h << std::log(3.0), 0.0;
    p << 1.0, 0.0;
    CHECK(pair_similarity(h, p) == doctest::Approx(0.75).epsilon(1e-12));
    // Saturation without overflow.
    h << 1e6, 0.0;
    CHECK(pair_similarity(h, p) == doctest::Approx(1.0));
    h << -1e6, 0.0;
    CHECK(pair_similarity(h, p) == doctest::Approx(0.0));
}

TEST_CASE("theme prototypes are double means") {
    EncodedGraph enc;
    enc.graph_id = "p";
    enc.H_s = Mat(2, 2);
    enc.H_s << 1.0, 0.0, 0.0, 1.0;
    Mat t0(1, 2), t1(3, 2);
    t0 << 4.0, 0.0;
    t1 << 0.0, 1.0, 0.0, 1.0, 0.0, 1.0;
    enc.H_t = {t0, t1};
    const Prototypes protos = theme_prototypes(enc);
    CHECK(protos.p_s(0) == doctest::Approx(0.5));
    CHECK(protos.p_s(1) == doctest::Approx(0.5));
    // p_t weights agents equally: ((4,0) + (0,1)) / 2.
    CHECK(protos.p_t(0) == doctest::Approx(2.0));
    CHECK(protos.p_t(1) == doctest::Approx(0.5));
}

TEST_CASE("constant representations give constant scores") {
    EncodedGraph enc;
    enc.graph_id = "c";
    enc.H_s = Mat(3, 2);
    enc.H_s << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;
    Mat tok(2, 2);
    tok << 1.0, 2.0, 1.0, 2.0;
    enc.H_t = {tok, tok, tok};
    const Prototypes protos = theme_prototypes(enc);
    CHECK((protos.p_s - enc.H_s.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-15);
    const auto [raw_s, raw_t] = level_scores(enc, protos);
    CHECK(raw_s[0] == doctest::Approx(raw_s[1]));
    CHECK(raw_s[1] == doctest::Approx(raw_s[2]));
    CHECK(raw_t[0] == doctest::Approx(raw_t[2]));
}

TEST_CASE("level scores at hand-set dot products") {
    // Dots with p_s fixed at (2, 0, -2); token rows orthogonal to p_t.
    EncodedGraph enc;
    enc.graph_id = "h";
    enc.H_s = Mat(3, 2);
    enc.H_s << 2.0, 0.0, 0.0, 5.0, -2.0, 0.0;
    Mat tok = Mat::Zero(1, 2);
    enc.H_t = {tok, tok, tok};
    Prototypes protos;
    protos.source_graph_id = "h";
    protos.p_s = Vec(2);
    protos.p_s << 1.0, 0.0;
    protos.p_t = Vec(2);
    protos.p_t << 0.0, 1.0;
    const auto [raw_s, raw_t] = level_scores(enc, protos);
    CHECK(raw_s[0] == doctest::Approx(0.1192).epsilon(1e-3));
    CHECK(raw_s[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(raw_s[2] == doctest::Approx(0.8808).epsilon(1e-3));
    for (double v : raw_t) {
        CHECK(v == doctest::Approx(0.5));
    }
}

TEST_CASE("normalize_scores examples") {
    const auto a = normalize_scores({1.0, -1.0});
    CHECK(a[0] == doctest::Approx(1.0));
    CHECK(a[1] == doctest::Approx(-1.0));

    const auto b = normalize_scores({0.7, 0.7, 0.7});
    for (double v : b) {
        CHECK(v == 0.0);
    }

    const auto c = normalize_scores({0.0, 1.0, 2.0, 3.0});
    CHECK(c[0] == doctest::Approx(-1.3416407864998738).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(-0.4472135954999579).epsilon(1e-12));
    CHECK(c[2] == doctest::Approx(0.4472135954999579).epsilon(1e-12));
    CHECK(c[3] == doctest::Approx(1.3416407864998738).epsilon(1e-12));

    CHECK(normalize_scores({5.0}) == std::vector<double>{0.0});
}

TEST_CASE("fuse_scores agreement and sign correction") {
    const std::vector<double> x{1.0, -1.0};
    {
        const auto [cov, fused] = fuse_scores(x, x);
        CHECK(cov == doctest::Approx(1.0));
        CHECK(fused[0] == doctest::Approx(2.0));
        CHECK(fused[1] == doctest::Approx(-2.0));
    }
    {
        const auto [cov, fused] = fuse_scores(x, {-1.0, 1.0});
        CHECK(cov == doctest::Approx(-1.0));
        CHECK(fused[0] == doctest::Approx(2.0));
        CHECK(fused[1] == doctest::Approx(-2.0));
    }
}

TEST_CASE("fuse_scores pinned arithmetic") {
    const double c = std::sqrt(1.5);
    const std::vector<double> s{c, 0.0, -c};
    const std::vector<double> t{0.0, c, -c};
    const auto [cov, fused] = fuse_scores(s, t);
    CHECK(cov == doctest::Approx(0.5).epsilon(1e-12));
    // fused = s + 0.5 t, evaluated by hand.
    CHECK(fused[0] == doctest::Approx(c).epsilon(1e-12));
    CHECK(fused[1] == doctest::Approx(0.5 * c).epsilon(1e-12));
    CHECK(fused[2] == doctest::Approx(-1.5 * c).epsilon(1e-12));
}

TEST_CASE("fuse_scores degenerate inputs") {
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    const std::vector<double> x{1.0, 0.0, -1.0};
    {
        const auto [cov, fused] = fuse_scores(x, zeros);
        CHECK(cov == 0.0);
        CHECK(fused == x);
    }
    {
        const auto [cov, fused] = fuse_scores(zeros, x);
        CHECK(cov == 0.0);
        CHECK(fused == zeros);
    }
    CHECK_THROWS_AS(fuse_scores({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("token explanations scale with the covariance weight") {
    SplitMix64 rng(21);
    const AttributedGraph attr = random_attr_graph(3, 4, rng);
    const ModelParams p = random_params(4, rng);
    const EncodedGraph enc = encode(attr, p);
    const Prototypes protos = theme_prototypes(enc);

    const auto zero = token_explanations(enc, protos, 0.0);
    for (const auto& row : zero) {
        for (double v : row) {
            CHECK(v == 0.0);
        }
    }
    const auto unit = token_explanations(enc, protos, 1.0);
    const auto [raw_s, raw_t] = level_scores(enc, protos);
    for (std::size_t i = 0; i < unit.size(); ++i) {
        double mean = 0.0;
        for (double v : unit[i]) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            mean += v;
        }
        mean /= static_cast<double>(unit[i].size());
        // With cov=1 the explanation row means recover the raw token score.
        CHECK(mean == doctest::Approx(raw_t[i]).epsilon(1e-12));
    }
    // Explanation sign follows the covariance sign.
    const auto neg = token_explanations(enc, protos, -0.7);
    for (const auto& row : neg) {
        for (double v : row) {
            CHECK(v < 0.0);
        }
    }
}

TEST_CASE("detect with budget zero reports scores but flags nothing") {
    SplitMix64 rng(22);
    const AttributedGraph attr = random_attr_graph(4, 6, rng);
    const ModelParams p = random_params(6, rng);
    const ScoreReport report = detect(attr, p, 0);
    CHECK(report.flagged.empty());
    CHECK(report.fused.size() == 4);
    CHECK_FALSE(report.truncated);
}

TEST_CASE("detect flags a far outlier with budget one") {
    // Inner-product similarity scores norm-inflated vectors as conformist
    // (the self-term dominates the prototype dot), so "far" means
    // directionally deviating: normals cluster around a theme direction and
    // the outlier points the other way at twice the typical norm.
    SplitMix64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6, d = 8;
        Vec theme(d);
        for (int c = 0; c < d; ++c) {
            theme(c) = rng.next_normal();
        }
        theme.normalize();
        const int outlier = static_cast<int>(rng.next_below(n));

        DialogueGraph g;
        g.graph_id = "outlier";
        g.synthetic_vector_mode = true;
        g.adjacency = generate_topology(TopologyKind::Random, n, 0.4, rng.next());
        g.agents.resize(n);
        for (int i = 0; i < n; ++i) {
            g.agents[static_cast<std::size_t>(i)] = {i, "w", "", {}};
        }
        Mat sent(n, d);
        std::vector<Mat> toks;
        for (int i = 0; i < n; ++i) {
            const double scale = i == outlier ? -2.0 : 1.0;
            sent.row(i) = scale * theme.transpose() + 0.05 * random_mat(1, d, rng).row(0);
            Mat tm(2, d);
            for (int j = 0; j < 2; ++j) {
                tm.row(j) = scale * theme.transpose() + 0.05 * random_mat(1, d, rng).row(0);
            }
            toks.push_back(std::move(tm));
        }
        const AttributedGraph attr = AttributedGraph::from_vectors(g, sent, toks);
        const ModelParams p = random_params(d, rng, 0.3);
        const ScoreReport report = detect(attr, p, 1);
        REQUIRE(report.flagged.size() == 1);
        CHECK(report.flagged[0] == outlier);
    }
}

TEST_CASE("detect truncates budgets beyond the agent count") {
    SplitMix64 rng(24);
    const AttributedGraph attr = random_attr_graph(3, 4, rng);
    const ModelParams p = random_params(4, rng);
    const ScoreReport report = detect(attr, p, 10);
    CHECK(report.truncated);
    CHECK(report.flagged.size() == 3);
}

TEST_CASE("detect is deterministic") {
    SplitMix64 rng(25);
    const AttributedGraph attr = random_attr_graph(5, 6, rng);
    const ModelParams p = random_params(6, rng);
    const ScoreReport a = detect(attr, p, 3);
    const ScoreReport b = detect(attr, p, 3);
    CHECK(a.fused == b.fused);
    CHECK(a.flagged == b.flagged);
    CHECK(a.cov_weight == b.cov_weight);
}

TEST_CASE("affine invariance of the fusion stage") {
    SplitMix64 rng(26);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> raw_s(6), raw_t(6);
        for (int i = 0; i < 6; ++i) {
            raw_s[static_cast<std::size_t>(i)] = rng.next_double();
            raw_t[static_cast<std::size_t>(i)] = rng.next_double();
        }
        const double a = 0.1 + 5.0 * rng.next_double();
        const double b = 2.0 * rng.next_double() - 1.0;
        std::vector<double> scaled_s(6), scaled_t(6);
        for (int i = 0; i < 6; ++i) {
            scaled_s[static_cast<std::size_t>(i)] = a * raw_s[static_cast<std::size_t>(i)] + b;
            scaled_t[static_cast<std::size_t>(i)] = a * raw_t[static_cast<std::size_t>(i)] + b;
        }
        const auto n1 = normalize_scores(raw_s);
        const auto n2 = normalize_scores(scaled_s);
        for (int i = 0; i < 6; ++i) {
            CHECK(n1[static_cast<std::size_t>(i)] ==
                  doctest::Approx(n2[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
        const auto [cov1, fused1] = fuse_scores(normalize_scores(raw_s), normalize_scores(raw_t));
        const auto [cov2, fused2] = fuse_scores(normalize_scores(scaled_s), normalize_scores(scaled_t));
        CHECK(cov1 == doctest::Approx(cov2).epsilon(1e-12));
        for (int i = 0; i < 6; ++i) {
            CHECK(fused1[static_cast<std::size_t>(i)] ==
                  doctest::Approx(fused2[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("flagging is argmax consistent under monotone transforms") {
    SplitMix64 rng(27);
    std::vector<double> fused(8);
    for (auto& v : fused) {
        v = 4.0 * rng.next_double() - 2.0;
    }
    const auto base = flag_top(fused, 8);
    for (std::size_t i = 1; i < base.size(); ++i) {
        CHECK(fused[static_cast<std::size_t>(base[i - 1])] >=
              fused[static_cast<std::size_t>(base[i])]);
    }
    std::vector<double> warped(8);
    for (int i = 0; i < 8; ++i) {
        warped[static_cast<std::size_t>(i)] = std::tanh(fused[static_cast<std::size_t>(i)]) * 3.0 + 1.0;
    }
    CHECK(flag_top(warped, 8) == base);
    CHECK(flag_top(fused, 3) == std::vector<int>(base.begin(), base.begin() + 3));
}

TEST_CASE("flagging breaks ties by lower agent id") {
    const std::vector<double> fused{1.0, 3.0, 3.0, 0.0};
    CHECK(flag_top(fused, 3) == std::vector<int>{1, 2, 0});
}

TEST_CASE("detect matches the straight-line reference on random instances") {
    SplitMix64 rng(28);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(5));
        const int d = 3 + static_cast<int>(rng.next_below(6));
        const AttributedGraph attr = random_attr_graph(n, d, rng);
        const ModelParams p = random_params(d, rng);
        const int budget = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n) + 1));
        const ScoreReport got = detect(attr, p, budget);
        const reference::Output want = reference::run(to_reference(attr, p), budget);
        for (int i = 0; i < n; ++i) {
            CHECK(got.fused[static_cast<std::size_t>(i)] ==
                  doctest::Approx(want.fused[static_cast<std::size_t>(i)]).epsilon(1e-9));
            for (std::size_t j = 0; j < got.token_expl[static_cast<std::size_t>(i)].size(); ++j) {
                CHECK(got.token_expl[static_cast<std::size_t>(i)][j] ==
                      doctest::Approx(want.expl[static_cast<std::size_t>(i)][j]).epsilon(1e-9));
            }
        }
        CHECK(got.cov_weight == doctest::Approx(want.cov).epsilon(1e-9));
        CHECK(got.flagged == want.flagged);
    }
}

TEST_CASE("report json round trip") {
    SplitMix64 rng(29);
    const AttributedGraph attr = random_attr_graph(3, 4, rng);
    const ModelParams p = random_params(4, rng);
    const ScoreReport r = detect(attr, p, 2);
    const ScoreReport back = report_from_json(report_to_json(r));
    CHECK(back.graph_id == r.graph_id);
    CHECK(back.fused == r.fused);
    CHECK(back.norm_s == r.norm_s);
    CHECK(back.norm_t == r.norm_t);
    CHECK(back.cov_weight == r.cov_weight);
    CHECK(back.flagged == r.flagged);
    CHECK(back.tokens == r.tokens);
    CHECK(back.token_expl == r.token_expl);
}
