#pragma once

#include "oodkit/data_io.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace oodkit {

enum class OodType { type1, type2 };

std::string to_string(OodType t);
OodType ood_type_from_string(const std::string& s);

/// Generated OOD samples with their provenance. `beta` stores the
/// perturbation norm for Type I samples and the latent ellipsoid radius for
/// Type II samples; `source_index` points into the originating dataset for
/// Type I and is -1 for Type II.
struct OodBatch {
    Matrix samples;  // N x dim
    std::vector<OodType> types;
    std::vector<int> source_class;
    std::vector<double> beta;
    std::vector<int> source_index;
    std::vector<std::string> warnings;

    int n() const { return static_cast<int>(samples.rows()); }
    int dim() const { return static_cast<int>(samples.cols()); }
    void validate() const;
    /// Samples as an unlabeled dataset (labels all -1).
    LabeledDataset as_dataset(const std::string& name) const;
};

OodBatch concat(const OodBatch& a, const OodBatch& b);

/// Writes three artifacts under the prefix: <prefix>.f64 (exact
/// little-endian doubles, the round-trip source of truth), <prefix>.idx
/// (8-bit IDX interchange image file, values clamped to [0,1]) and
/// <prefix>.manifest.csv with columns index,type,beta,source_class.
void save_ood_batch(const OodBatch& batch, const std::filesystem::path& prefix);

/// Reads <prefix>.f64 + <prefix>.manifest.csv written by save_ood_batch;
/// the reload is bit-exact.
OodBatch load_ood_batch(const std::filesystem::path& prefix);

}  // namespace oodkit
