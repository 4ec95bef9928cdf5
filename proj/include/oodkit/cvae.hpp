#pragma once

#include "oodkit/data_io.hpp"
#include "oodkit/dense_net.hpp"
#include "oodkit/optimizer.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace oodkit {

/// Conditional VAE: encoder (input ++ one-hot label) -> mean ++ logvar,
/// decoder (latent ++ one-hot label) -> reconstruction. The decoder's final
/// activation encodes the reconstruction likelihood: sigmoid for unit-range
/// data (Bernoulli / BCE), linear for unbounded data (Gaussian / MSE).
struct CvaeModel {
    DenseNet encoder;
    DenseNet decoder;
    int input_dim = 0;
    int latent_dim = 0;
    int n_classes = 0;

    void validate() const;
};

/// Fresh model with ReLU hidden layers; encoder ends linear (mean/logvar).
/// The decoder ends in a sigmoid for unit-range data and in a linear layer
/// otherwise.
CvaeModel make_cvae(int input_dim, int latent_dim, int n_classes,
                    const std::vector<int>& encoder_hidden, const std::vector<int>& decoder_hidden,
                    Rng& rng, ValueRange output_range = ValueRange::unit);

/// Batch encode: returns (mu, logvar), each batch x latent_dim.
std::pair<Matrix, Matrix> encode(const CvaeModel& model, const Matrix& x,
                                 const std::vector<int>& labels);
std::pair<Vector, Vector> encode(const CvaeModel& model, const Vector& x, int label);

/// z = mu + exp(logvar/2) .* eps, eps ~ N(0, I).
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng);

Matrix decode(const CvaeModel& model, const Matrix& z, const std::vector<int>& labels);
Vector decode(const CvaeModel& model, const Vector& z, int label);

struct CvaeTrainConfig {
    int epochs = 200;  // hard cap
    int batch_size = 64;
    double beta_kl = 1.0;
    OptimizerConfig opt{};  // adadelta, lr 0.1
    // Stop early once the epoch-mean loss improves by less than rel_tol
    // (relative) for `patience` consecutive epochs.
    bool early_stop = true;
    double rel_tol = 1e-3;
    int patience = 10;
    bool verbose = false;
};

/// Minibatch training; returns the per-epoch mean loss. epochs = 0 is a
/// no-op with an empty log.
std::vector<double> train_cvae(CvaeModel& model, const LabeledDataset& data,
                               const CvaeTrainConfig& config, Rng& rng);

/// Writes <prefix>.encoder.dnet, <prefix>.decoder.dnet and a plain-text
/// <prefix>.meta holding input_dim/latent_dim/n_classes.
void save_cvae(const CvaeModel& model, const std::filesystem::path& prefix);
CvaeModel load_cvae(const std::filesystem::path& prefix);

}  // namespace oodkit
