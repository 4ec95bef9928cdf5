#include "oodkit/metrics.hpp"

#include "oodkit/error.hpp"
#include "oodkit/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <vector>

using namespace oodkit;

namespace {

// Brute-force references, written against the same conventions (larger =
// more OOD, OOD positive, detect when score >= t) but structured as direct
// counting rather than sweeps, so they fail independently.

double ref_auroc(const std::vector<double>& in, const std::vector<double>& out) {
    long long wins2 = 0;  // 2*wins + ties
    for (double o : out) {
        for (double i : in) {
            if (o > i) {
                wins2 += 2;
            } else if (o == i) {
                wins2 += 1;
            }
        }
    }
    return static_cast<double>(wins2) /
           (2.0 * static_cast<double>(in.size()) * static_cast<double>(out.size()));
}

double ref_fpr_at_tpr(const std::vector<double>& in, const std::vector<double>& out,
                      double target) {
    std::vector<double> cands;
    cands.insert(cands.end(), in.begin(), in.end());
    cands.insert(cands.end(), out.begin(), out.end());
    std::sort(cands.begin(), cands.end(), std::greater<>());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (double t : cands) {  // largest threshold first = tightest valid one
        long long tp = 0;
        for (double o : out) {
            if (o >= t) ++tp;
        }
        if (static_cast<double>(tp) / static_cast<double>(out.size()) >= target) {
            long long fp = 0;
            for (double i : in) {
                if (i >= t) ++fp;
            }
            return static_cast<double>(fp) / static_cast<double>(in.size());
        }
    }
    return 1.0;  // unreachable: the smallest score always reaches TPR 1
}

double ref_detection_error(const std::vector<double>& in, const std::vector<double>& out) {
    std::vector<double> cands;
    cands.insert(cands.end(), in.begin(), in.end());
    cands.insert(cands.end(), out.begin(), out.end());
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    std::vector<double> all = cands;
    for (std::size_t i = 0; i + 1 < cands.size(); ++i) {
        all.push_back(0.5 * (cands[i] + cands[i + 1]));
    }
    all.push_back(cands.front() - 1.0);
    all.push_back(cands.back() + 1.0);

    double best = std::numeric_limits<double>::infinity();
    for (double t : all) {
        long long fp = 0, fn = 0;
        for (double i : in) {
            if (i >= t) ++fp;
        }
        for (double o : out) {
            if (o < t) ++fn;
        }
        best = std::min(best, 0.5 * (static_cast<double>(fp) / static_cast<double>(in.size()) +
                                     static_cast<double>(fn) / static_cast<double>(out.size())));
    }
    return best;
}

double ref_aupr(const std::vector<double>& in, const std::vector<double>& out,
                PrPositive positive) {
    // Group by score in a descending map; average precision over tie blocks.
    std::map<double, std::pair<long long, long long>, std::greater<>> blocks;  // pos, total
    auto add = [&](double s, bool is_pos) {
        auto& b = blocks[s];
        if (is_pos) ++b.first;
        ++b.second;
    };
    if (positive == PrPositive::out) {
        for (double s : out) add(s, true);
        for (double s : in) add(s, false);
    } else {
        for (double s : in) add(-s, true);
        for (double s : out) add(-s, false);
    }
    const double n_pos = static_cast<double>(positive == PrPositive::out ? out.size() : in.size());
    double ap = 0.0;
    long long tp = 0, seen = 0;
    for (const auto& [score, counts] : blocks) {
        tp += counts.first;
        seen += counts.second;
        if (counts.first > 0) {
            ap += (static_cast<double>(counts.first) / n_pos) *
                  (static_cast<double>(tp) / static_cast<double>(seen));
        }
    }
    return ap;
}

std::vector<double> random_scores(Rng& rng, int n, bool quantized) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& s : v) {
        s = unit(rng);
        if (quantized) s = std::round(s * 8.0) / 8.0;  // force heavy ties
    }
    return v;
}

}  // namespace

TEST_CASE("auroc hand values") {
    CHECK(auroc({0.1, 0.4}, {0.3, 0.9}) == 0.75);
    CHECK(auroc({0.1, 0.2}, {0.5, 0.9}) == 1.0);
    CHECK(auroc({0.5, 0.9}, {0.1, 0.2}) == 0.0);
    CHECK(auroc({0.3, 0.3}, {0.3, 0.3}) == 0.5);
    CHECK(auroc({1.0}, {1.0}) == 0.5);
}

TEST_CASE("fpr_at_tpr hand values") {
    // perfect separation: threshold sits above every in-score
    CHECK(fpr_at_tpr({0.1, 0.2, 0.3}, {0.8, 0.9, 1.0}) == 0.0);

    // identical 100-point sets: the 95th-largest OOD score forces 95% FPR
    std::vector<double> ramp(100);
    for (int i = 0; i < 100; ++i) ramp[static_cast<std::size_t>(i)] = i + 1.0;
    CHECK(fpr_at_tpr(ramp, ramp) == doctest::Approx(0.95).epsilon(1e-15));

    // a single in-score below the OOD threshold
    CHECK(fpr_at_tpr({0.5}, ramp) == 0.0);

    CHECK_THROWS_AS(fpr_at_tpr({0.1}, {0.2}, 0.0), ContractError);
    CHECK_THROWS_AS(fpr_at_tpr({0.1}, {0.2}, 1.1), ContractError);
}

TEST_CASE("detection_error hand values") {
    CHECK(detection_error({0.0, 1.0}, {0.5, 2.0}) == 0.25);
    CHECK(detection_error({0.1, 0.2}, {0.8, 0.9}) == 0.0);
    // inseparable: the best any threshold can do is a coin flip
    CHECK(detection_error({0.5}, {0.5}) == 0.5);
}

TEST_CASE("aupr hand values") {
    CHECK(aupr({0.1, 0.8}, {0.9}, PrPositive::out) == 1.0);
    CHECK(aupr({0.1, 0.8}, {0.9}, PrPositive::in) == 1.0);
    CHECK(aupr({0.5}, {0.5}, PrPositive::out) == 0.5);
}

TEST_CASE("metrics match brute force on random score sets") {
    Rng rng(2024);
    std::uniform_int_distribution<int> size_dist(1, 300);
    for (int trial = 0; trial < 60; ++trial) {
        const bool quantized = trial % 2 == 1;
        const auto in = random_scores(rng, size_dist(rng), quantized);
        const auto out = random_scores(rng, size_dist(rng), quantized);

        CHECK(auroc(in, out) == ref_auroc(in, out));  // bitwise: same integer counts
        CHECK(std::abs(fpr_at_tpr(in, out) - ref_fpr_at_tpr(in, out, 0.95)) < 1e-12);
        CHECK(std::abs(fpr_at_tpr(in, out, 0.8) - ref_fpr_at_tpr(in, out, 0.8)) < 1e-12);
        CHECK(std::abs(detection_error(in, out) - ref_detection_error(in, out)) < 1e-12);
        CHECK(std::abs(aupr(in, out, PrPositive::out) - ref_aupr(in, out, PrPositive::out)) <
              1e-12);
        CHECK(std::abs(aupr(in, out, PrPositive::in) - ref_aupr(in, out, PrPositive::in)) < 1e-12);
    }
}

TEST_CASE("metrics reject empty or non-finite scores") {
    CHECK_THROWS_AS(auroc({}, {0.5}), ContractError);
    CHECK_THROWS_AS(auroc({0.5}, {}), ContractError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(auroc({nan}, {0.5}), ContractError);
    CHECK_THROWS_AS(fpr_at_tpr({0.5}, {nan}), ContractError);
    CHECK_THROWS_AS(detection_error({std::numeric_limits<double>::infinity()}, {0.5}),
                    ContractError);
    CHECK_THROWS_AS(aupr({}, {0.5}, PrPositive::out), ContractError);
}

TEST_CASE("compute_metrics fills every field") {
    MetricsReport r =
        compute_metrics({0.1, 0.2}, {0.8, 0.9, 1.0}, "ood_class_prob", "digits.test", "noise");
    CHECK(r.rule == "ood_class_prob");
    CHECK(r.in_name == "digits.test");
    CHECK(r.ood_name == "noise");
    CHECK(r.n_in == 2);
    CHECK(r.n_out == 3);
    CHECK(r.auroc == 1.0);
    CHECK(r.fpr_at_95_tpr == 0.0);
    CHECK(r.detection_error == 0.0);
    CHECK(r.aupr_in == 1.0);
    CHECK(r.aupr_out == 1.0);
}

TEST_CASE("csv output is exact and round-trips") {
    MetricsReport r;
    r.rule = "rule";
    r.in_name = "a";
    r.ood_name = "b";
    r.n_in = 2;
    r.n_out = 4;
    r.fpr_at_95_tpr = 0.25;
    r.detection_error = 0.125;
    r.auroc = 0.75;
    r.aupr_in = 0.5;
    r.aupr_out = 1.0;
    const std::string csv = metrics_csv({r});
    CHECK(csv ==
          "in_dataset,ood_dataset,rule,n_in,n_out,fpr_at_95_tpr,detection_error,auroc,aupr_in,"
          "aupr_out\n"
          "a,b,rule,2,4,0.25,0.125,0.75,0.5,1\n");

    // full-precision round trip through the file
    MetricsReport ugly = r;
    ugly.auroc = 1.0 / 3.0;
    ugly.aupr_out = 0.1 + 0.2;
    ugly.fpr_at_95_tpr = 1e-17;
    testsup::TempDir dir("mcsv");
    write_metrics_csv({ugly}, dir.file("m.csv"));
    auto back = read_metrics_csv(dir.file("m.csv"));
    REQUIRE(back.size() == 1);
    CHECK(back[0].auroc == ugly.auroc);
    CHECK(back[0].aupr_out == ugly.aupr_out);
    CHECK(back[0].fpr_at_95_tpr == ugly.fpr_at_95_tpr);
    CHECK(back[0].n_out == 4);
    CHECK(back[0].rule == "rule");

    // writing twice produces identical bytes
    write_metrics_csv({ugly}, dir.file("m2.csv"));
    std::ifstream f1(dir.file("m.csv"), std::ios::binary);
    std::ifstream f2(dir.file("m2.csv"), std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("csv reader rejects malformed files") {
    testsup::TempDir dir("mbad");
    {
        std::ofstream os(dir.file("h.csv"));
        os << "wrong,header\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(dir.file("h.csv")), FormatError);
    {
        std::ofstream os(dir.file("f.csv"));
        os << "in_dataset,ood_dataset,rule,n_in,n_out,fpr_at_95_tpr,detection_error,auroc,aupr_in,"
              "aupr_out\n";
        os << "a,b,rule,1\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(dir.file("f.csv")), FormatError);
    {
        std::ofstream os(dir.file("n.csv"));
        os << "in_dataset,ood_dataset,rule,n_in,n_out,fpr_at_95_tpr,detection_error,auroc,aupr_in,"
              "aupr_out\n";
        os << "a,b,rule,x,4,0.1,0.1,0.1,0.1,0.1\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(dir.file("n.csv")), FormatError);
    CHECK_THROWS_AS(read_metrics_csv(dir.file("missing.csv")), FormatError);
}

TEST_CASE("json output carries the same numbers") {
    MetricsReport r = compute_metrics({0.1, 0.4}, {0.3, 0.9}, "rule", "a", "b");
    const auto doc = nlohmann::json::parse(metrics_json({r}));
    REQUIRE(doc.is_array());
    REQUIRE(doc.size() == 1);
    CHECK(doc[0]["auroc"].get<double>() == 0.75);
    CHECK(doc[0]["in_dataset"].get<std::string>() == "a");
    CHECK(doc[0]["n_out"].get<int>() == 2);
}

TEST_CASE("table renders percentages") {
    MetricsReport r = compute_metrics({0.1, 0.4}, {0.3, 0.9}, "rule", "a", "b");
    const std::string table = metrics_table({r});
    CHECK(table.find("75.0") != std::string::npos);  // AUROC as a percentage
    CHECK(table.find("rule") != std::string::npos);
    CHECK(table.find("AUROC%") != std::string::npos);
}
