#include "oodkit/onmanifold.hpp"

#include "oodkit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace oodkit {

LatentClassStats fit_latent_gaussian(const CvaeModel& model, const LabeledDataset& data,
                                     int label) {
    model.validate();
    data.validate();
    if (label < -1 || label >= model.n_classes) {
        throw ContractError("fit_latent_gaussian: label " + std::to_string(label) +
                            " outside [-1," + std::to_string(model.n_classes) + ")");
    }

    std::vector<int> idx;
    for (int i = 0; i < data.n(); ++i) {
        if (label == -1 || data.labels[static_cast<std::size_t>(i)] == label) idx.push_back(i);
    }
    const auto n = static_cast<int>(idx.size());
    if (n < model.latent_dim + 1) {
        throw ContractError("fit_latent_gaussian: class " + std::to_string(label) + " has " +
                            std::to_string(n) + " samples, need at least latent_dim+1 = " +
                            std::to_string(model.latent_dim + 1));
    }

    Matrix x(n, data.dim());
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        x.row(k) = data.samples.row(idx[static_cast<std::size_t>(k)]);
        const int y = data.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        if (y < 0) {
            throw ContractError("fit_latent_gaussian: sample " +
                                std::to_string(idx[static_cast<std::size_t>(k)]) +
                                " is unlabeled");
        }
        labels[static_cast<std::size_t>(k)] = y;
    }
    const Matrix codes = encode(model, x, labels).first;  // n x latent_dim mean codes

    LatentClassStats stats;
    stats.label = label;
    stats.mu_hat = codes.colwise().mean().transpose();
    const Matrix centered = codes.rowwise() - stats.mu_hat.transpose();
    stats.sigma_hat = (centered.transpose() * centered) / static_cast<double>(n);
    stats.eps_reg =
        std::max(1e-6 * stats.sigma_hat.trace() / static_cast<double>(model.latent_dim), 1e-12);
    stats.sigma_hat += stats.eps_reg * Matrix::Identity(model.latent_dim, model.latent_dim);

    Eigen::LLT<Matrix> llt(stats.sigma_hat);
    if (llt.info() != Eigen::Success) {
        throw NumericError("fit_latent_gaussian: covariance not positive definite after "
                           "regularization (class " +
                           std::to_string(label) + ")");
    }
    stats.chol = llt.matrixL();

    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        dist[static_cast<std::size_t>(k)] = mahalanobis(codes.row(k).transpose(), stats);
    }
    std::sort(dist.begin(), dist.end());
    const auto order = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(n)));  // 1-based order statistic
    stats.radius_r = dist[order - 1];
    return stats;
}

double mahalanobis(const Vector& z, const LatentClassStats& stats) {
    if (z.size() != stats.mu_hat.size()) {
        throw DimensionError("mahalanobis: z has " + std::to_string(z.size()) +
                             " entries, stats expect " + std::to_string(stats.mu_hat.size()));
    }
    const Vector w = stats.chol.triangularView<Eigen::Lower>().solve(z - stats.mu_hat);
    return w.norm();
}

std::vector<Vector> sample_ellipsoid_surface(const LatentClassStats& stats, int count, Rng& rng,
                                             std::vector<std::string>* warnings) {
    if (count < 0) throw ContractError("sample_ellipsoid_surface: count must be nonnegative");
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(count));
    if (stats.radius_r == 0.0) {
        if (warnings != nullptr && count > 0) {
            warnings->push_back("class " + std::to_string(stats.label) +
                                ": zero Mahalanobis radius, emitting copies of the mean");
        }
        for (int i = 0; i < count; ++i) out.push_back(stats.mu_hat);
        return out;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = stats.latent_dim();
    for (int i = 0; i < count; ++i) {
        Vector u(d);
        double norm = 0.0;
        do {
            for (int j = 0; j < d; ++j) u(j) = normal(rng);
            norm = u.norm();
        } while (norm < 1e-12);
        out.push_back(stats.mu_hat + stats.radius_r * (stats.chol * (u / norm)));
    }
    return out;
}

OodBatch generate_type2(const CvaeModel& model, const std::vector<LatentClassStats>& stats,
                        int count_per_class, std::uint64_t master_seed) {
    model.validate();
    if (count_per_class < 0) {
        throw ContractError("generate_type2: count_per_class must be nonnegative");
    }
    const bool pooled = stats.size() == 1 && stats.front().label == -1;
    if (!pooled) {
        // Require exactly one stats entry for each decoder class.
        std::vector<bool> seen(static_cast<std::size_t>(model.n_classes), false);
        for (const auto& s : stats) {
            if (s.label < 0 || s.label >= model.n_classes) {
                throw ContractError("generate_type2: stats for unknown class " +
                                    std::to_string(s.label));
            }
            seen[static_cast<std::size_t>(s.label)] = true;
        }
        for (int c = 0; c < model.n_classes; ++c) {
            if (!seen[static_cast<std::size_t>(c)]) {
                throw ContractError("generate_type2: missing stats for class " +
                                    std::to_string(c));
            }
        }
    }
    for (const auto& s : stats) {
        if (s.latent_dim() != model.latent_dim) {
            throw DimensionError("generate_type2: stats for class " + std::to_string(s.label) +
                                 " have latent dim " + std::to_string(s.latent_dim()) +
                                 ", model wants " + std::to_string(model.latent_dim));
        }
    }

    OodBatch batch;
    const int total = count_per_class * static_cast<int>(pooled ? 1 : stats.size());
    batch.samples.resize(total, model.input_dim);
    batch.types.assign(static_cast<std::size_t>(total), OodType::type2);
    batch.source_class.resize(static_cast<std::size_t>(total));
    batch.beta.resize(static_cast<std::size_t>(total));
    batch.source_index.assign(static_cast<std::size_t>(total), -1);

    const std::uint64_t stage_seed = derive_seed(master_seed, "type2");
    int row = 0;
    for (const auto& s : stats) {
        Rng rng = derive_rng(stage_seed, static_cast<std::uint64_t>(s.label + 1));
        const auto latents = sample_ellipsoid_surface(s, count_per_class, rng, &batch.warnings);
        for (std::size_t i = 0; i < latents.size(); ++i) {
            // Pooled stats have no class of their own; cycle the decoder
            // conditioning across classes.
            const int decode_label =
                pooled ? static_cast<int>(i) % model.n_classes : s.label;
            batch.samples.row(row) = decode(model, latents[i], decode_label).transpose();
            batch.source_class[static_cast<std::size_t>(row)] = decode_label;
            batch.beta[static_cast<std::size_t>(row)] = s.radius_r;
            ++row;
        }
    }
    return batch;
}

}  // namespace oodkit
