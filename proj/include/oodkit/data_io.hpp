#pragma once

#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oodkit {

enum class ValueRange { unit, unbounded };

struct LabeledDataset {
    Matrix samples;           // N x dim, row per sample
    std::vector<int> labels;  // N entries; -1 marks unlabeled (pure OOD) data
    ValueRange range = ValueRange::unit;
    std::string name;

    int n() const { return static_cast<int>(samples.rows()); }
    int dim() const { return static_cast<int>(samples.cols()); }
    int n_classes() const;  // 1 + max label, 0 when unlabeled

    void validate() const;
};

/// Read IDX images (magic 0x00000803) and, when given, IDX labels
/// (0x00000801). Pixels are scaled from [0,255] to [0,1]; images flatten to
/// rows*cols features. Malformed headers or short payloads raise FormatError
/// with the failing byte offset.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path = {});

/// Write IDX files, quantizing pixels to 8-bit (values clamped to [0,1]).
/// Labels are written only when labels_path is nonempty.
void save_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path = {});

/// i.i.d. N(0.5, 1) pixels, clamped to [0,1] unless clamp=false.
LabeledDataset gen_gaussian_noise(int n, int dim, Rng& rng, bool clamp = true);

/// i.i.d. U[0,1] pixels.
LabeledDataset gen_uniform_noise(int n, int dim, Rng& rng);

/// Uniform points on the radius-r hypersphere centered at the origin.
/// Marked unbounded; the caller picks radius (e.g. max norm of the
/// in-distribution data).
LabeledDataset gen_sphere_ood(int n, int dim, double radius, Rng& rng);

/// Two-class 3-D toy: unit-sphere points from the all-positive octant
/// (class 0) and the diagonally opposite all-negative octant (class 1).
LabeledDataset gen_toy3d(int n_per_class, Rng& rng);

/// Unit-sphere points from the six octants NOT covered by gen_toy3d; the
/// toy's natural OOD test set.
LabeledDataset gen_toy3d_offoctant(int n, Rng& rng);

/// Deterministic 28x28 synthetic digit images: ten glyph classes rendered
/// through random affine jitter (shift/rotation/scale), intensity variation,
/// and pixel noise. A desk-scale stand-in with MNIST's dimensions.
LabeledDataset gen_synth_digits(int n, Rng& rng, int n_classes = 10);

/// Stratified disjoint partition; per-class counts are preserved within one
/// sample. Classes with fewer than 2 samples append a note to `warnings`.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double train_fraction,
                                                Rng& rng,
                                                std::vector<std::string>* warnings = nullptr);

/// Keep only samples whose label is in `keep`; optionally remap the kept
/// labels to 0..k-1 in ascending order.
LabeledDataset class_filter(const LabeledDataset& data, const std::set<int>& keep, bool relabel);

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

double max_row_norm(const LabeledDataset& data);

Matrix one_hot(const std::vector<int>& labels, int n_classes);

}  // namespace oodkit
