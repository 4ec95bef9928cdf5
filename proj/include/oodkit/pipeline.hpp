#pragma once

#include "oodkit/cvae.hpp"
#include "oodkit/data_io.hpp"
#include "oodkit/detector.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/ood_batch.hpp"
#include "oodkit/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oodkit {

/// A pipeline stage failed; the message names the stage. Artifacts written
/// by completed stages stay on disk.
class StageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Flat experiment description; serialized as diffable key=value text.
struct ExperimentConfig {
    std::string in_dataset = "synth_digits";  // synth_digits | toy3d | idx
    std::string in_images;                    // idx mode: image/label files
    std::string in_labels;
    int n_samples = 3000;        // generated dataset size (ignored in idx mode)
    double train_fraction = 0.8;
    int n_classes = 10;          // synth_digits classes; toy3d is fixed at 2

    int latent_dim = 8;
    std::vector<int> cvae_hidden = {256, 128};  // encoder; decoder mirrors it
    std::vector<int> classifier_hidden = {128};
    int cvae_epochs = 40;
    int classifier_epochs = 60;
    int batch_size = 64;
    double cvae_beta_kl = 1.0;
    OptimizerKind optimizer = OptimizerKind::adadelta;
    double learning_rate = 1.0;

    double beta_min = 0.1;
    double beta_max = 1.0;
    int type1_count = 1000;  // training samples to perturb (capped at the split size)
    int type1_per_sample = 1;
    int type2_per_class = 100;
    bool type2_pooled = false;  // single aggregate-posterior Gaussian instead of per-class
    double ood_class_weight = 0.1;

    std::vector<std::string> ood_roster = {"gaussian_noise", "uniform_noise"};
    int ood_eval_count = 1000;
    double odin_temperature = 1000.0;
    double odin_eps = 0.0014;

    std::uint64_t seed = 1;
    std::string out_dir = "runs";

    void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
/// Apply one "key=value" override in place.
void apply_override(ExperimentConfig& config, const std::string& key_value);
/// Fixed-order key=value rendering; the hash input and manifest body.
std::string canonical_text(const ExperimentConfig& config);
/// FNV-1a hash of the canonical text (excluding seed and out_dir, so one
/// config hash covers a seed sweep), as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
/// "<out_dir>/<stage>-<hash>-s<seed>" — every artifact is named this way.
std::string artifact_stem(const ExperimentConfig& config, const std::string& stage);

/// Deterministic dataset materialization from the config (stream "data").
LabeledDataset make_in_dataset(const ExperimentConfig& config);
/// Stratified train/test split (stream "split").
std::pair<LabeledDataset, LabeledDataset> pipeline_split(const ExperimentConfig& config,
                                                         const LabeledDataset& data);
/// Named OOD evaluation set; dim/radius follow the in-distribution data.
LabeledDataset make_ood_eval_dataset(const ExperimentConfig& config, const std::string& name,
                                     int dim, double sphere_radius);

/// Stages. Each reuses its on-disk artifact when one exists for this
/// config hash + seed, and writes it otherwise.
CvaeModel stage_cvae(const ExperimentConfig& config, const LabeledDataset& train);
std::pair<OodBatch, OodBatch> stage_oodgen(const ExperimentConfig& config, const CvaeModel& model,
                                           const LabeledDataset& train);
DetectorModel stage_detector(const ExperimentConfig& config, const LabeledDataset& train,
                             const OodBatch& ood);
/// Plain n-class model for the baselines (stage "plain").
DetectorModel stage_plain(const ExperimentConfig& config, const LabeledDataset& train);

/// Full run: cvae -> oodgen -> detector -> evaluation. Writes models, OOD
/// batches, per-rule score CSVs, metrics-<hash>-s<seed>.{csv,json} and
/// manifest-<hash>-s<seed>.txt; returns the metric rows (rules
/// ood_class_prob and neg_max_inlier_prob).
std::vector<MetricsReport> run_pipeline(const ExperimentConfig& config);

/// Baseline run on the same splits: max-softmax and ODIN on a plain
/// n-class model; writes baselines-<hash>-s<seed>.{csv,json}.
std::vector<MetricsReport> run_baselines(const ExperimentConfig& config);

/// Point clouds for the 3-D toy: toyplot-<hash>-s<seed>.csv (x,y,z,tag with
/// tag in {class0, class1, type1, type2}) and toyplot2d-... (u,v,tag), the
/// projection onto the plane orthogonal to (1,1,1)/sqrt(3). Needs the toy
/// run's OOD batches on disk.
void emit_toy_plotdata(const ExperimentConfig& config);

}  // namespace oodkit
