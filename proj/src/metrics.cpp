#include "sentinel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {

double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("auroc needs one label per score");
    }
    std::size_t positives = 0;
    for (bool b : labels) {
        positives += b ? 1 : 0;
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw UndefinedMetricError("auroc needs at least one anomalous and one normal agent");
    }
    double credit = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            continue;
        }
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) {
                continue;
            }
            if (scores[i] > scores[j]) {
                credit += 1.0;
            } else if (scores[i] == scores[j]) {
                credit += 0.5;
            }
        }
    }
    return credit / (static_cast<double>(positives) * static_cast<double>(negatives));
}

namespace {

std::string html_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        case '\'':
            out += "&#39;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

// Per-agent rescale of the positive part of the explanation scores.
std::vector<double> intensities(const std::vector<double>& expl) {
    std::vector<double> out(expl.size(), 0.0);
    double max_pos = 0.0;
    for (double v : expl) {
        max_pos = std::max(max_pos, v);
    }
    if (max_pos <= 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < expl.size(); ++i) {
        out[i] = std::max(0.0, expl[i]) / max_pos;
    }
    return out;
}

// White-to-red ramp.
void heat_rgb(double intensity, int& r, int& g, int& b) {
    r = 255;
    g = static_cast<int>(std::lround(255.0 - 195.0 * intensity));
    b = g;
}

} // namespace

std::string render_explanation(const ScoreReport& report, RenderFormat format) {
    std::ostringstream out;
    if (format == RenderFormat::Html) {
        out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
            << "<title>Anomaly explanation " << html_escape(report.graph_id) << "</title>\n"
            << "</head>\n<body>\n"
            << "<h1>Graph " << html_escape(report.graph_id) << "</h1>\n";
        if (report.flagged.empty()) {
            out << "<p>No agents flagged.</p>\n";
        }
        for (int id : report.flagged) {
            const auto idx = static_cast<std::size_t>(id);
            out << "<div class=\"agent\">\n<h2>agent " << id << " (fused score "
                << report.fused[idx] << ")</h2>\n<p>\n";
            const std::vector<double> heat = intensities(report.token_expl[idx]);
            for (std::size_t j = 0; j < report.tokens[idx].size(); ++j) {
                int r, g, b;
                heat_rgb(heat[j], r, g, b);
                out << "<span style=\"background-color: rgb(" << r << "," << g << "," << b
                    << ");\">" << html_escape(report.tokens[idx][j]) << "</span> ";
            }
            out << "\n</p>\n</div>\n";
        }
        out << "</body>\n</html>\n";
        return out.str();
    }

    if (report.flagged.empty()) {
        out << "graph " << report.graph_id << ": no agents flagged\n";
        return out.str();
    }
    out << "graph " << report.graph_id << "\n";
    for (int id : report.flagged) {
        const auto idx = static_cast<std::size_t>(id);
        out << "agent " << id << " (fused score " << report.fused[idx] << ")\n  ";
        const std::vector<double> heat = intensities(report.token_expl[idx]);
        for (std::size_t j = 0; j < report.tokens[idx].size(); ++j) {
            int r, g, b;
            heat_rgb(heat[j], r, g, b);
            out << "\x1b[48;2;" << r << ';' << g << ';' << b << "m\x1b[38;2;0;0;0m"
                << report.tokens[idx][j] << "\x1b[0m";
            if (j + 1 < report.tokens[idx].size()) {
                out << ' ';
            }
        }
        out << "\n";
    }
    return out.str();
}

} // namespace sentinel
