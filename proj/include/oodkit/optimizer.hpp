#pragma once

#include "oodkit/tensor.hpp"

#include <string>
#include <vector>

namespace oodkit {

enum class OptimizerKind { sgd, adam, adadelta };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adadelta;
    // Global multiplier on each update; adadelta's own recurrence already
    // scales steps, so 1.0 is the canonical choice there.
    double learning_rate = 1.0;
    double rho = 0.95;       // adadelta accumulator decay
    double epsilon = 1e-6;   // adadelta/adam stabilizer
    double beta1 = 0.9;      // adam
    double beta2 = 0.999;    // adam
};

/// Owns per-parameter accumulator state matching each parameter's shape.
/// step() applies one update from the gradients populated by backward() and
/// then zeroes them; it throws if any parameter is missing its gradient.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::vector<Tensor> params);

    void step();
    const OptimizerConfig& config() const { return cfg_; }

private:
    struct Slot {
        Matrix acc_grad;    // adadelta E[g^2], adam m
        Matrix acc_update;  // adadelta E[dx^2], adam v
    };
    OptimizerConfig cfg_;
    std::vector<Tensor> params_;
    std::vector<Slot> slots_;
    long step_count_ = 0;
};

}  // namespace oodkit
