#include "oodkit/losses.hpp"

#include "oodkit/error.hpp"

#include <cmath>

namespace oodkit {

namespace {
constexpr double kLogFloor = 1e-12;
}

Tensor weighted_cross_entropy(const Tensor& probs, const std::vector<int>& labels,
                              const std::vector<double>& class_weights) {
    const Eigen::Index batch = probs.rows();
    const Eigen::Index n_classes = probs.cols();
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw ContractError("weighted_cross_entropy: one label per row required");
    }
    if (static_cast<Eigen::Index>(class_weights.size()) != n_classes) {
        throw ContractError("weighted_cross_entropy: weights length must equal class count");
    }
    for (int y : labels) {
        if (y < 0 || y >= n_classes) {
            throw ContractError("weighted_cross_entropy: label " + std::to_string(y) +
                                " out of range [0," + std::to_string(n_classes) + ")");
        }
    }
    if ((probs.value().array() <= 0.0).any()) {
        throw ContractError("weighted_cross_entropy: probabilities must be strictly positive");
    }

    double total = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const double p = std::max(probs.value()(i, labels[i]), kLogFloor);
        total += class_weights[labels[i]] * (-std::log(p));
    }
    Matrix out(1, 1);
    out(0, 0) = total / static_cast<double>(batch);

    return make_op(std::move(out), {probs},
                   [labels, class_weights, batch](detail::Node& self) {
                       auto& pp = *self.parents[0];
                       Matrix g = Matrix::Zero(pp.value.rows(), pp.value.cols());
                       const double upstream = self.grad(0, 0);
                       for (Eigen::Index i = 0; i < batch; ++i) {
                           const double p = pp.value(i, labels[i]);
                           if (p > kLogFloor) {
                               g(i, labels[i]) =
                                   -class_weights[labels[i]] / (p * static_cast<double>(batch));
                           }
                       }
                       pp.accumulate(g * upstream);
                   });
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    return weighted_cross_entropy(probs, labels,
                                  std::vector<double>(static_cast<std::size_t>(probs.cols()), 1.0));
}

Tensor bce_mean(const Tensor& x_hat, const Matrix& target) {
    if (x_hat.rows() != target.rows() || x_hat.cols() != target.cols()) {
        throw DimensionError("bce_mean: prediction/target shape mismatch");
    }
    if ((target.array() < 0.0).any() || (target.array() > 1.0).any()) {
        throw ContractError("bce_mean: target pixel values must lie in [0,1]");
    }
    const double n = static_cast<double>(target.rows() * target.cols());
    const auto xh = x_hat.value().array().max(kLogFloor).min(1.0 - kLogFloor);
    const double total =
        -(target.array() * xh.log() + (1.0 - target.array()) * (1.0 - xh).log()).sum();
    Matrix out(1, 1);
    out(0, 0) = total / n;

    return make_op(std::move(out), {x_hat}, [target, n](detail::Node& self) {
        auto& xp = *self.parents[0];
        const double upstream = self.grad(0, 0) / n;
        const auto xh = xp.value.array().max(kLogFloor).min(1.0 - kLogFloor);
        Matrix g = ((-target.array() / xh + (1.0 - target.array()) / (1.0 - xh)) * upstream).matrix();
        xp.accumulate(g);
    });
}

Tensor mse_mean(const Tensor& x_hat, const Matrix& target) {
    if (x_hat.rows() != target.rows() || x_hat.cols() != target.cols()) {
        throw DimensionError("mse_mean: prediction/target shape mismatch");
    }
    const double n = static_cast<double>(target.rows() * target.cols());
    Matrix out(1, 1);
    out(0, 0) = 0.5 * (x_hat.value() - target).array().square().sum() / n;

    return make_op(std::move(out), {x_hat}, [target, n](detail::Node& self) {
        auto& xp = *self.parents[0];
        const double upstream = self.grad(0, 0) / n;
        xp.accumulate((xp.value - target) * upstream);
    });
}

Tensor kl_gaussian_mean(const Tensor& mu, const Tensor& logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
        throw DimensionError("kl_gaussian_mean: mu/logvar shape mismatch");
    }
    const double batch = static_cast<double>(mu.rows());
    const double total = -0.5 * (1.0 + logvar.value().array() - mu.value().array().square() -
                                 logvar.value().array().exp())
                                    .sum();
    Matrix out(1, 1);
    out(0, 0) = total / batch;

    return make_op(std::move(out), {mu, logvar}, [batch](detail::Node& self) {
        auto& mup = *self.parents[0];
        auto& lvp = *self.parents[1];
        const double upstream = self.grad(0, 0) / batch;
        if (mup.requires_grad) mup.accumulate((mup.value.array() * upstream).matrix());
        if (lvp.requires_grad) {
            lvp.accumulate((0.5 * (lvp.value.array().exp() - 1.0) * upstream).matrix());
        }
    });
}

Tensor vae_loss(const Matrix& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar,
                double beta_kl, ReconLoss recon) {
    Tensor rec = recon == ReconLoss::bernoulli ? bce_mean(x_hat, x) : mse_mean(x_hat, x);
    Tensor kl = kl_gaussian_mean(mu, logvar);
    return add(rec, scale(kl, beta_kl));
}

}  // namespace oodkit
