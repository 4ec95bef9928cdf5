#pragma once

#include "oodkit/cvae.hpp"
#include "oodkit/data_io.hpp"
#include "oodkit/ood_batch.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <cstdint>
#include <vector>

namespace oodkit {

/// Per-class Gaussian fit to the encoder's mean codes, plus the Mahalanobis
/// radius that covers 95% of that class's training codes.
struct LatentClassStats {
    int label = 0;  // -1 for the pooled all-classes fit
    Vector mu_hat;
    Matrix sigma_hat;  // regularized: sample covariance + eps_reg * I
    Matrix chol;       // lower triangular, chol * chol^T = sigma_hat
    double radius_r = 0.0;
    double eps_reg = 0.0;

    int latent_dim() const { return static_cast<int>(mu_hat.size()); }
};

/// Fit stats on the encoder mean codes of the samples with the given label;
/// label -1 pools every sample (single-Gaussian mode). The covariance is the
/// population covariance plus eps_reg * I with
/// eps_reg = 1e-6 * trace/latent_dim (floored at 1e-12 for degenerate
/// clusters); radius_r is the ceil(0.95*N)-th smallest Mahalanobis distance
/// of the class's own codes.
LatentClassStats fit_latent_gaussian(const CvaeModel& model, const LabeledDataset& data,
                                     int label);

/// sqrt((z-mu)^T sigma^-1 (z-mu)) via triangular solve against chol.
double mahalanobis(const Vector& z, const LatentClassStats& stats);

/// Latents z = mu + r * L * (u/|u|), u ~ N(0,I): uniform on the unit sphere
/// in the whitened pre-image, exactly on the radius-r Mahalanobis surface.
/// radius_r = 0 degenerates to `count` copies of mu (noted in *warnings).
std::vector<Vector> sample_ellipsoid_surface(const LatentClassStats& stats, int count, Rng& rng,
                                             std::vector<std::string>* warnings = nullptr);

/// Type II OOD batch: decode ellipsoid-surface latents per class. Expects
/// one stats entry per decoder class, or a single pooled entry (label -1)
/// whose decodes cycle through the class conditionings. Per-class RNG
/// streams are derived from master_seed, so output is order-independent.
OodBatch generate_type2(const CvaeModel& model, const std::vector<LatentClassStats>& stats,
                        int count_per_class, std::uint64_t master_seed);

}  // namespace oodkit
