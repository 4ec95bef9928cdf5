#include "oodkit/optimizer.hpp"

#include "oodkit/error.hpp"

#include <cmath>

namespace oodkit {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "adadelta") return OptimizerKind::adadelta;
    throw ContractError("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adadelta: return "adadelta";
    }
    return "unknown";
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<Tensor> params)
    : cfg_(cfg), params_(std::move(params)) {
    if (cfg_.learning_rate <= 0.0) throw ContractError("Optimizer: learning_rate must be > 0");
    slots_.reserve(params_.size());
    for (const auto& p : params_) {
        Slot s;
        if (cfg_.kind != OptimizerKind::sgd) {
            s.acc_grad = Matrix::Zero(p.rows(), p.cols());
            s.acc_update = Matrix::Zero(p.rows(), p.cols());
        }
        slots_.push_back(std::move(s));
    }
}

void Optimizer::step() {
    for (const auto& p : params_) {
        if (!p.has_grad()) {
            throw ContractError("Optimizer::step: parameter node " + std::to_string(p.node_id()) +
                                " has no gradient; run backward() first");
        }
    }
    ++step_count_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Matrix& w = params_[k].mutable_value();
        const Matrix& g = params_[k].grad();
        Slot& s = slots_[k];
        switch (cfg_.kind) {
            case OptimizerKind::sgd:
                w -= cfg_.learning_rate * g;
                break;
            case OptimizerKind::adadelta: {
                s.acc_grad = cfg_.rho * s.acc_grad + (1.0 - cfg_.rho) * g.cwiseProduct(g);
                Matrix delta = (-(s.acc_update.array() + cfg_.epsilon).sqrt() /
                                (s.acc_grad.array() + cfg_.epsilon).sqrt() * g.array())
                                   .matrix();
                s.acc_update = cfg_.rho * s.acc_update + (1.0 - cfg_.rho) * delta.cwiseProduct(delta);
                w += cfg_.learning_rate * delta;
                break;
            }
            case OptimizerKind::adam: {
                s.acc_grad = cfg_.beta1 * s.acc_grad + (1.0 - cfg_.beta1) * g;
                s.acc_update = cfg_.beta2 * s.acc_update + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
                const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
                const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
                Matrix mhat = s.acc_grad / bc1;
                Matrix vhat = s.acc_update / bc2;
                w -= (cfg_.learning_rate * mhat.array() / (vhat.array().sqrt() + cfg_.epsilon))
                         .matrix();
                break;
            }
        }
        params_[k].zero_grad();
    }
}

}  // namespace oodkit
