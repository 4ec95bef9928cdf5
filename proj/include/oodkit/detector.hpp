#pragma once

#include "oodkit/data_io.hpp"
#include "oodkit/dense_net.hpp"
#include "oodkit/ood_batch.hpp"
#include "oodkit/optimizer.hpp"
#include "oodkit/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace oodkit {

enum class DetectorVariant { nplus1, plain_n };

std::string to_string(DetectorVariant v);
DetectorVariant detector_variant_from_string(const std::string& s);

/// Softmax classifier over the n inlier classes plus, for the nplus1
/// variant, one extra class that absorbs generated OOD samples.
struct DetectorModel {
    DenseNet net;
    int n_inlier_classes = 0;
    double ood_class_weight = 0.1;
    DetectorVariant variant = DetectorVariant::nplus1;

    void validate() const;
};

struct DetectorTrainConfig {
    double ood_class_weight = 0.1;
    int epochs = 200;  // hard cap
    int batch_size = 64;
    OptimizerConfig opt{};  // adadelta, lr 0.1
    bool early_stop = true;
    double rel_tol = 1e-3;
    int patience = 10;
    bool verbose = false;
};

/// Cross-entropy training of `net` on inliers plus the OOD batch as class n,
/// with per-class loss weights [1, ..., 1, ood_class_weight]. An empty OOD
/// batch degrades to plain n-class training (noted in *warnings); when that
/// happens to an (n+1)-wide net its OOD output row is dropped.
DetectorModel train_detector(DenseNet net, const LabeledDataset& inliers, const OodBatch& ood,
                             const DetectorTrainConfig& config, Rng& rng,
                             std::vector<std::string>* warnings = nullptr,
                             std::vector<double>* loss_log = nullptr);

/// Convenience net factory: input -> hidden (ReLU) -> softmax over
/// n_outputs.
DenseNet make_classifier_net(int input_dim, const std::vector<int>& hidden, int n_outputs,
                             Rng& rng);

/// Fraction of samples whose argmax class equals the label (over every
/// output, so an inlier routed to the OOD class counts as an error).
double inlier_accuracy(const DetectorModel& model, const LabeledDataset& data);

/// Scoring rules. All return one score per row of x; larger = more OOD.
/// p_n, the OOD class probability (nplus1 variant only).
std::vector<double> score_ood_class_prob(const DetectorModel& model, const Matrix& x);
/// -max over the first n (inlier) softmax outputs.
std::vector<double> score_max_inlier_prob(const DetectorModel& model, const Matrix& x);
/// -max softmax of a plain n-class model.
std::vector<double> score_max_softmax(const DetectorModel& model, const Matrix& x);
/// ODIN: perturb x against the input gradient of the cross-entropy at the
/// predicted label, then -max softmax of temperature-scaled logits.
std::vector<double> score_odin(const DetectorModel& model, const Matrix& x, double temperature,
                               double perturb_eps);

struct ScoreVector {
    std::vector<int> ids;  // row index into the scored dataset
    std::vector<double> scores;
    std::string rule;
};

ScoreVector make_score_vector(const std::vector<double>& scores, const std::string& rule);
void save_scores_csv(const ScoreVector& scores, const std::filesystem::path& path);

void save_detector(const DetectorModel& model, const std::filesystem::path& prefix);
DetectorModel load_detector(const std::filesystem::path& prefix);

}  // namespace oodkit
