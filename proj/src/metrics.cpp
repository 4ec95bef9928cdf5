#include "oodkit/metrics.hpp"

#include "oodkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

namespace oodkit {

namespace {

void check_nonempty(const std::vector<double>& scores_in, const std::vector<double>& scores_out,
                    const char* where) {
    if (scores_in.empty() || scores_out.empty()) {
        throw ContractError(std::string(where) + ": both score vectors must be nonempty");
    }
    for (double s : scores_in) {
        if (!std::isfinite(s)) throw ContractError(std::string(where) + ": non-finite in-score");
    }
    for (double s : scores_out) {
        if (!std::isfinite(s)) throw ContractError(std::string(where) + ": non-finite out-score");
    }
}

// (score, is_out) pairs sorted by descending score.
std::vector<std::pair<double, bool>> merged_descending(const std::vector<double>& scores_in,
                                                       const std::vector<double>& scores_out) {
    std::vector<std::pair<double, bool>> all;
    all.reserve(scores_in.size() + scores_out.size());
    for (double s : scores_in) all.emplace_back(s, false);
    for (double s : scores_out) all.emplace_back(s, true);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return all;
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out) {
    check_nonempty(scores_in, scores_out, "auroc");
    const auto all = merged_descending(scores_in, scores_out);

    // Walk distinct thresholds from high to low; each tie block of g_in
    // in-scores against the cumulative out-count contributes the trapezoid
    // g_in * (out_before + g_out/2). Integer accumulation keeps the result
    // equal to the pairwise count with half-weight ties.
    double area2 = 0.0;  // twice the unnormalized area, an exact integer
    long long out_seen = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        long long g_in = 0;
        long long g_out = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            (all[j].second ? g_out : g_in) += 1;
            ++j;
        }
        area2 += static_cast<double>(g_in) * static_cast<double>(2 * out_seen + g_out);
        out_seen += g_out;
        i = j;
    }
    return area2 /
           (2.0 * static_cast<double>(scores_in.size()) * static_cast<double>(scores_out.size()));
}

double fpr_at_tpr(const std::vector<double>& scores_in, const std::vector<double>& scores_out,
                  double tpr_target) {
    check_nonempty(scores_in, scores_out, "fpr_at_tpr");
    if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
        throw ContractError("fpr_at_tpr: target must lie in (0,1]");
    }
    // TPR >= target needs at least ceil(target * n_out) OOD scores at or
    // above the threshold; the tightest such threshold is that order
    // statistic, and FPR is minimal there.
    const auto n_out = static_cast<long long>(scores_out.size());
    const auto need =
        static_cast<std::size_t>(std::ceil(tpr_target * static_cast<double>(n_out)) - 1.0);
    std::vector<double> out_sorted = scores_out;
    std::sort(out_sorted.begin(), out_sorted.end(), std::greater<>());
    const double threshold = out_sorted[std::min(need, out_sorted.size() - 1)];

    long long false_pos = 0;
    for (double s : scores_in) {
        if (s >= threshold) ++false_pos;
    }
    return static_cast<double>(false_pos) / static_cast<double>(scores_in.size());
}

double detection_error(const std::vector<double>& scores_in,
                       const std::vector<double>& scores_out) {
    check_nonempty(scores_in, scores_out, "detection_error");
    std::vector<double> thresholds;
    thresholds.reserve(2 * (scores_in.size() + scores_out.size()));
    for (double s : scores_in) thresholds.push_back(s);
    for (double s : scores_out) thresholds.push_back(s);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const std::size_t n_distinct = thresholds.size();
    for (std::size_t i = 0; i + 1 < n_distinct; ++i) {
        thresholds.push_back(0.5 * (thresholds[i] + thresholds[i + 1]));
    }

    double best = 0.5;  // threshold beyond either extreme classifies one-sidedly
    for (double t : thresholds) {
        long long fp = 0;
        for (double s : scores_in) {
            if (s >= t) ++fp;
        }
        long long fn = 0;
        for (double s : scores_out) {
            if (s < t) ++fn;
        }
        const double err = 0.5 * (static_cast<double>(fp) / static_cast<double>(scores_in.size()) +
                                  static_cast<double>(fn) / static_cast<double>(scores_out.size()));
        best = std::min(best, err);
    }
    return best;
}

double aupr(const std::vector<double>& scores_in, const std::vector<double>& scores_out,
            PrPositive positive) {
    check_nonempty(scores_in, scores_out, "aupr");
    // positive = in ranks by "most in-distribution", i.e. negated scores.
    std::vector<double> pos;
    std::vector<double> neg;
    if (positive == PrPositive::out) {
        pos = scores_out;
        neg = scores_in;
    } else {
        pos.reserve(scores_in.size());
        neg.reserve(scores_out.size());
        for (double s : scores_in) pos.push_back(-s);
        for (double s : scores_out) neg.push_back(-s);
    }

    const auto all = merged_descending(neg, pos);  // "out" flag marks positives here
    const auto n_pos = static_cast<double>(pos.size());
    double ap = 0.0;
    long long tp = 0;
    long long seen = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        long long g_pos = 0;
        long long g_all = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            if (all[j].second) ++g_pos;
            ++g_all;
            ++j;
        }
        tp += g_pos;
        seen += g_all;
        if (g_pos > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            ap += (static_cast<double>(g_pos) / n_pos) * precision;
        }
        i = j;
    }
    return ap;
}

MetricsReport compute_metrics(const std::vector<double>& scores_in,
                              const std::vector<double>& scores_out, const std::string& rule,
                              const std::string& in_name, const std::string& ood_name) {
    MetricsReport r;
    r.rule = rule;
    r.in_name = in_name;
    r.ood_name = ood_name;
    r.n_in = static_cast<int>(scores_in.size());
    r.n_out = static_cast<int>(scores_out.size());
    r.fpr_at_95_tpr = fpr_at_tpr(scores_in, scores_out, 0.95);
    r.detection_error = detection_error(scores_in, scores_out);
    r.auroc = auroc(scores_in, scores_out);
    r.aupr_in = aupr(scores_in, scores_out, PrPositive::in);
    r.aupr_out = aupr(scores_in, scores_out, PrPositive::out);
    return r;
}

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
    std::string out =
        "in_dataset,ood_dataset,rule,n_in,n_out,fpr_at_95_tpr,detection_error,auroc,aupr_in,"
        "aupr_out\n";
    for (const auto& r : reports) {
        out += r.in_name + ',' + r.ood_name + ',' + r.rule + ',' + std::to_string(r.n_in) + ',' +
               std::to_string(r.n_out) + ',' + format_full(r.fpr_at_95_tpr) + ',' +
               format_full(r.detection_error) + ',' + format_full(r.auroc) + ',' +
               format_full(r.aupr_in) + ',' + format_full(r.aupr_out) + '\n';
    }
    return out;
}

void write_metrics_csv(const std::vector<MetricsReport>& reports,
                       const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);  // binary: byte-stable newlines
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << metrics_csv(reports);
    if (!os) throw FormatError("short write to " + path.string());
}

std::string metrics_json(const std::vector<MetricsReport>& reports) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) {
        doc.push_back({{"in_dataset", r.in_name},
                       {"ood_dataset", r.ood_name},
                       {"rule", r.rule},
                       {"n_in", r.n_in},
                       {"n_out", r.n_out},
                       {"fpr_at_95_tpr", r.fpr_at_95_tpr},
                       {"detection_error", r.detection_error},
                       {"auroc", r.auroc},
                       {"aupr_in", r.aupr_in},
                       {"aupr_out", r.aupr_out}});
    }
    return doc.dump(2) + "\n";
}

void write_metrics_json(const std::vector<MetricsReport>& reports,
                        const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << metrics_json(reports);
    if (!os) throw FormatError("short write to " + path.string());
}

std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) ||
        line !=
            "in_dataset,ood_dataset,rule,n_in,n_out,fpr_at_95_tpr,detection_error,auroc,aupr_in,"
            "aupr_out") {
        throw FormatError(path.string() + ": bad header row '" + line + "'");
    }
    std::vector<MetricsReport> out;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 10) {
            throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, want 10");
        }
        MetricsReport r;
        r.in_name = fields[0];
        r.ood_name = fields[1];
        r.rule = fields[2];
        try {
            r.n_in = std::stoi(fields[3]);
            r.n_out = std::stoi(fields[4]);
            r.fpr_at_95_tpr = std::stod(fields[5]);
            r.detection_error = std::stod(fields[6]);
            r.auroc = std::stod(fields[7]);
            r.aupr_in = std::stod(fields[8]);
            r.aupr_out = std::stod(fields[9]);
        } catch (const std::invalid_argument&) {
            throw FormatError(path.string() + ": unparsable number in row " + std::to_string(row));
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string metrics_table(const std::vector<MetricsReport>& reports) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-24s %-24s %-18s %8s %8s %8s %8s %8s\n", "in", "ood",
                  "rule", "FPR95%", "DetErr%", "AUROC%", "AUPRin%", "AUPRout%");
    out += line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-24s %-24s %-18s %8.1f %8.1f %8.1f %8.1f %8.1f\n",
                      r.in_name.c_str(), r.ood_name.c_str(), r.rule.c_str(),
                      100.0 * r.fpr_at_95_tpr, 100.0 * r.detection_error, 100.0 * r.auroc,
                      100.0 * r.aupr_in, 100.0 * r.aupr_out);
        out += line;
    }
    return out;
}

}  // namespace oodkit
