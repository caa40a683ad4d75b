#include "sentinel/embed.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include <httplib.h>
#include <json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/json_util.hpp"
#include "sentinel/rng.hpp"

namespace sentinel {

void EmbedderSpec::validate() const {
    if (dim < 2) {
        throw InvalidParamError("embedder dim must be >= 2, got " + std::to_string(dim));
    }
    if (kind == EmbedderKind::Remote && endpoint.empty()) {
        throw InvalidParamError("remote embedder needs a non-empty endpoint");
    }
    if (kind == EmbedderKind::Remote && batch_size < 1) {
        throw InvalidParamError("remote batch_size must be >= 1");
    }
}

void AttributedGraph::validate() const {
    const int n = agent_count();
    if (sentence_attrs.rows() != n) {
        throw ShapeError("sentence_attrs rows != agent count");
    }
    if (static_cast<int>(token_attrs.size()) != n || static_cast<int>(tokens.size()) != n) {
        throw ShapeError("token attribute lists must have one entry per agent");
    }
    const int d = dim();
    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (token_attrs[idx].rows() < 1) {
            throw ShapeError("agent " + std::to_string(i) + " has no token attributes");
        }
        if (token_attrs[idx].cols() != d) {
            throw ShapeError("token attribute dim mismatch for agent " + std::to_string(i));
        }
        if (token_attrs[idx].rows() != static_cast<Eigen::Index>(tokens[idx].size())) {
            throw ShapeError("token count mismatch for agent " + std::to_string(i));
        }
        if (!token_attrs[idx].allFinite()) {
            throw ShapeError("non-finite token attribute for agent " + std::to_string(i));
        }
    }
    if (!sentence_attrs.allFinite()) {
        throw ShapeError("non-finite sentence attribute");
    }
}

AttributedGraph AttributedGraph::from_vectors(DialogueGraph graph, Mat sentence_attrs,
                                              std::vector<Mat> token_attrs,
                                              std::vector<std::vector<std::string>> tokens) {
    AttributedGraph out;
    out.graph = std::move(graph);
    out.graph.synthetic_vector_mode = true;
    out.sentence_attrs = std::move(sentence_attrs);
    out.token_attrs = std::move(token_attrs);
    if (tokens.empty()) {
        tokens.resize(out.token_attrs.size());
        for (std::size_t i = 0; i < out.token_attrs.size(); ++i) {
            const auto t = static_cast<std::size_t>(out.token_attrs[i].rows());
            tokens[i].reserve(t);
            for (std::size_t j = 0; j < t; ++j) {
                tokens[i].push_back("tok_" + std::to_string(j));
            }
        }
    }
    out.tokens = std::move(tokens);
    out.validate();
    return out;
}

namespace {

bool is_ascii_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0;
}

// Unicode whitespace code points (the usual Zs/Cc space set).
bool is_unicode_space(char32_t cp) {
    switch (cp) {
    case 0x0009: case 0x000A: case 0x000B: case 0x000C: case 0x000D:
    case 0x0020: case 0x0085: case 0x00A0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Minimal UTF-8 decode; invalid bytes are treated as one-code-point opaque
// characters so tokenization stays total.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if ((b0 & 0x80) == 0x00) {
        len = 1;
        cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

void emit_word(const std::string& word, std::vector<std::string>& out) {
    std::size_t begin = 0;
    std::size_t end = word.size();
    std::vector<std::string> leading;
    while (begin < end && is_ascii_punct(static_cast<unsigned char>(word[begin]))) {
        leading.emplace_back(1, word[begin]);
        ++begin;
    }
    std::vector<std::string> trailing;
    while (end > begin && is_ascii_punct(static_cast<unsigned char>(word[end - 1]))) {
        trailing.emplace_back(1, word[end - 1]);
        --end;
    }
    for (auto& t : leading) {
        out.push_back(std::move(t));
    }
    if (end > begin) {
        out.push_back(word.substr(begin, end - begin));
    }
    // Peeled right-to-left; restore original order.
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) {
        out.push_back(std::move(*it));
    }
}

} // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        const char32_t cp = decode_utf8(text, i);
        if (is_unicode_space(cp)) {
            if (!word.empty()) {
                emit_word(word, out);
                word.clear();
            }
        } else {
            word.append(text, start, i - start);
        }
    }
    if (!word.empty()) {
        emit_word(word, out);
    }
    if (out.empty()) {
        out.emplace_back(kEmptyToken);
    }
    return out;
}

Vec embed_token(const std::string& token, const EmbedderSpec& spec) {
    spec.validate();
    if (spec.kind != EmbedderKind::Hashing) {
        throw InvalidParamError("embed_token is defined for the hashing embedder only");
    }
    SplitMix64 rng(fnv1a64(token) ^ spec.seed);
    Vec v(spec.dim);
    for (int k = 0; k < spec.dim; ++k) {
        v(k) = rng.next_normal();
    }
    const double norm = v.norm();
    if (norm > 0.0) {
        v /= norm;
    }
    return v;
}

Vec embed_sentence(const std::string& text, const EmbedderSpec& spec) {
    spec.validate();
    if (spec.kind == EmbedderKind::Remote) {
        RemoteEmbedClient client(spec);
        Mat m = client.embed({text});
        return m.row(0).transpose();
    }
    const std::vector<std::string> toks = tokenize(text);
    // Accumulate in sorted token order so the mean is bitwise invariant
    // under token permutations.
    std::map<std::string, int> counts;
    for (const std::string& t : toks) {
        ++counts[t];
    }
    Vec mean = Vec::Zero(spec.dim);
    for (const auto& [token, count] : counts) {
        mean += static_cast<double>(count) * embed_token(token, spec);
    }
    mean /= static_cast<double>(toks.size());
    const double norm = mean.norm();
    if (norm > 1e-12) {
        mean /= norm;
    }
    return mean;
}

AttributedGraph attribute_graph(const DialogueGraph& graph, const EmbedderSpec& spec) {
    spec.validate();
    validate_graph(graph);
    const int n = graph.agent_count();
    if (n == 0) {
        throw InvalidGraphError("cannot attribute an empty graph");
    }

    AttributedGraph out;
    out.graph = graph;
    out.sentence_attrs = Mat::Zero(n, spec.dim);
    out.token_attrs.resize(static_cast<std::size_t>(n));
    out.tokens.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.tokens[static_cast<std::size_t>(i)] = tokenize(graph.agents[static_cast<std::size_t>(i)].response);
    }

    if (spec.kind == EmbedderKind::Hashing) {
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            out.sentence_attrs.row(i) = embed_sentence(graph.agents[idx].response, spec).transpose();
            const auto& toks = out.tokens[idx];
            Mat tm(static_cast<Eigen::Index>(toks.size()), spec.dim);
            for (std::size_t j = 0; j < toks.size(); ++j) {
                tm.row(static_cast<Eigen::Index>(j)) = embed_token(toks[j], spec).transpose();
            }
            out.token_attrs[idx] = std::move(tm);
        }
    } else {
        RemoteEmbedClient client(spec);
        for (int i = 0; i < n; ++i) {
            Mat m = client.embed({graph.agents[static_cast<std::size_t>(i)].response});
            out.sentence_attrs.row(i) = m.row(0);
        }
        // Flatten all tokens, fetch in batches, then reassemble per agent.
        std::vector<std::string> flat;
        for (int i = 0; i < n; ++i) {
            const auto& toks = out.tokens[static_cast<std::size_t>(i)];
            flat.insert(flat.end(), toks.begin(), toks.end());
        }
        Mat all(static_cast<Eigen::Index>(flat.size()), spec.dim);
        Eigen::Index row = 0;
        for (std::size_t off = 0; off < flat.size(); off += static_cast<std::size_t>(spec.batch_size)) {
            const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(spec.batch_size),
                                                            flat.size() - off);
            std::vector<std::string> chunk(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                           flat.begin() + static_cast<std::ptrdiff_t>(off + count));
            Mat part = client.embed(chunk);
            all.middleRows(row, part.rows()) = part;
            row += part.rows();
        }
        row = 0;
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto t = static_cast<Eigen::Index>(out.tokens[idx].size());
            out.token_attrs[idx] = all.middleRows(row, t);
            row += t;
        }
    }
    out.validate();
    return out;
}

namespace {

// Splits "http://host:port[/prefix]" into client parameters.
void parse_endpoint(const std::string& endpoint, std::string& host, int& port, std::string& prefix) {
    std::string rest = endpoint;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) {
        rest = rest.substr(scheme.size());
    } else if (rest.rfind("https://", 0) == 0) {
        throw EmbedServiceError("https endpoints are not supported; use http");
    }
    const std::size_t slash = rest.find('/');
    std::string hostport = rest.substr(0, slash);
    prefix = slash == std::string::npos ? "" : rest.substr(slash);
    if (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    const std::size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        host = hostport;
        port = 80;
    } else {
        host = hostport.substr(0, colon);
        try {
            port = std::stoi(hostport.substr(colon + 1));
        } catch (const std::exception&) {
            throw EmbedServiceError("invalid port in endpoint '" + endpoint + "'");
        }
    }
    if (host.empty()) {
        throw EmbedServiceError("invalid endpoint '" + endpoint + "'");
    }
}

} // namespace

RemoteEmbedClient::RemoteEmbedClient(const EmbedderSpec& spec)
    : dim_(spec.dim), timeout_seconds_(spec.timeout_seconds) {
    spec.validate();
    if (spec.kind != EmbedderKind::Remote) {
        throw InvalidParamError("RemoteEmbedClient needs a remote embedder spec");
    }
    parse_endpoint(spec.endpoint, host_, port_, path_prefix_);
}

Mat RemoteEmbedClient::embed(const std::vector<std::string>& texts) const {
    httplib::Client client(host_, port_);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    nlohmann::json body;
    body["texts"] = texts;
    auto res = client.Post((path_prefix_ + "/embed").c_str(), body.dump(), "application/json");
    if (!res) {
        throw EmbedServiceError("no response from " + host_ + ":" + std::to_string(port_));
    }
    if (res->status != 200) {
        throw EmbedServiceError("service returned status " + std::to_string(res->status));
    }
    nlohmann::json reply = parse_json(res->body);
    const auto& vectors = require_field(reply, "vectors");
    if (!vectors.is_array() || vectors.size() != texts.size()) {
        throw EmbedServiceError("expected " + std::to_string(texts.size()) + " vectors, got " +
                                std::to_string(vectors.is_array() ? vectors.size() : 0));
    }
    Mat out(static_cast<Eigen::Index>(texts.size()), dim_);
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        const auto& v = vectors[r];
        if (!v.is_array() || static_cast<int>(v.size()) != dim_) {
            throw EmbedServiceError("vector " + std::to_string(r) + " has dim " +
                                    std::to_string(v.is_array() ? v.size() : 0) + ", expected " +
                                    std::to_string(dim_));
        }
        for (int c = 0; c < dim_; ++c) {
            if (!v[static_cast<std::size_t>(c)].is_number()) {
                throw EmbedServiceError("vector " + std::to_string(r) + " has a non-numeric entry");
            }
            out(static_cast<Eigen::Index>(r), c) = v[static_cast<std::size_t>(c)].get<double>();
        }
    }
    if (!out.allFinite()) {
        throw EmbedServiceError("service returned non-finite values");
    }
    return out;
}

} // namespace sentinel
