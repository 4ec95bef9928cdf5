#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace oodkit {

/// Score convention everywhere: larger score = more out-of-distribution,
/// OOD is the positive class, a sample is flagged OOD when score >= t.

/// P(score_out > score_in) + 0.5 * P(tie); trapezoidal integration over the
/// ROC curve at every distinct threshold (exactly the pairwise count).
double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out);

/// False-positive rate on in-distribution data at the tightest threshold
/// whose true-positive rate on OOD data reaches tpr_target.
double fpr_at_tpr(const std::vector<double>& scores_in, const std::vector<double>& scores_out,
                  double tpr_target = 0.95);

/// min over thresholds of 0.5 * (FPR + FNR), evaluated at every distinct
/// score and midpoint (equal-prior misclassification probability).
double detection_error(const std::vector<double>& scores_in,
                       const std::vector<double>& scores_out);

enum class PrPositive { in, out };

/// Average precision: descending-score sweep with tied scores handled as
/// atomic blocks; positive = in evaluates the negated scores.
double aupr(const std::vector<double>& scores_in, const std::vector<double>& scores_out,
            PrPositive positive);

struct MetricsReport {
    std::string rule;      // scoring rule tag, e.g. "ood_class_prob"
    std::string in_name;   // in-distribution evaluation set
    std::string ood_name;  // OOD evaluation set
    int n_in = 0;
    int n_out = 0;
    double fpr_at_95_tpr = 0.0;
    double detection_error = 0.0;
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
};

MetricsReport compute_metrics(const std::vector<double>& scores_in,
                              const std::vector<double>& scores_out, const std::string& rule,
                              const std::string& in_name, const std::string& ood_name);

/// CSV with a fixed header; values at full double precision so reruns can be
/// compared byte for byte.
std::string metrics_csv(const std::vector<MetricsReport>& reports);
void write_metrics_csv(const std::vector<MetricsReport>& reports,
                       const std::filesystem::path& path);

/// JSON document: one object per report with the same fields as the CSV.
std::string metrics_json(const std::vector<MetricsReport>& reports);
void write_metrics_json(const std::vector<MetricsReport>& reports,
                        const std::filesystem::path& path);

/// Parse a CSV produced by write_metrics_csv.
std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path);

/// Human-readable table, metrics as percentages with one decimal.
std::string metrics_table(const std::vector<MetricsReport>& reports);

}  // namespace oodkit
