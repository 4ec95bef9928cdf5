#pragma once

#include "oodkit/tensor.hpp"

#include <vector>

namespace oodkit {

/// Mean over the batch of w[y_i] * (-log p_i[y_i]).
///
/// `probs` are post-softmax outputs (one row per sample, strictly positive);
/// `class_weights` has one entry per class. Log arguments are floored at
/// 1e-12.
Tensor weighted_cross_entropy(const Tensor& probs, const std::vector<int>& labels,
                              const std::vector<double>& class_weights);

/// Plain cross-entropy at the given labels (unit class weights).
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

/// Per-pixel mean binary cross-entropy of x_hat against targets in [0,1].
Tensor bce_mean(const Tensor& x_hat, const Matrix& target);

/// Per-pixel mean of 0.5 * (x_hat - target)^2; a unit-variance Gaussian
/// reconstruction term for data that is not confined to [0,1].
Tensor mse_mean(const Tensor& x_hat, const Matrix& target);

/// Mean over the batch of -1/2 * sum_j (1 + logvar_j - mu_j^2 - exp(logvar_j)).
Tensor kl_gaussian_mean(const Tensor& mu, const Tensor& logvar);

/// Reconstruction likelihood family: Bernoulli (BCE, sigmoid outputs) for
/// unit-range data, Gaussian (MSE, linear outputs) otherwise.
enum class ReconLoss { bernoulli, gaussian };

/// Reconstruction term (per-pixel mean) + beta_kl * Gaussian KL term.
Tensor vae_loss(const Matrix& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar,
                double beta_kl, ReconLoss recon = ReconLoss::bernoulli);

}  // namespace oodkit
