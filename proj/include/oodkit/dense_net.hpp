#pragma once

#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace oodkit {

enum class Activation { linear = 0, relu = 1, sigmoid = 2, softmax = 3 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
    Tensor weights;  // (out, in), gradient-tracked leaf
    Tensor bias;     // (1, out)
    Activation act = Activation::linear;

    Eigen::Index fan_in() const { return weights.cols(); }
    Eigen::Index fan_out() const { return weights.rows(); }
};

/// Fully connected feed-forward network.
///
/// Construction checks that consecutive layer widths are compatible and that
/// softmax appears only as the final activation. Weights initialize uniformly
/// in +-sqrt(6/(fan_in+fan_out)); biases start at zero.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng);
    static DenseNet from_layers(std::vector<Layer> layers);

    int input_dim() const;
    int output_dim() const;
    std::size_t layer_count() const { return layers_.size(); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    /// Graph-recording forward pass; x is (B, input_dim).
    Tensor forward(const Tensor& x) const;

    /// Value-only forward pass (no graph).
    Matrix infer(const Matrix& x) const;

    /// Value-only pass that skips a final softmax, returning raw logits.
    Matrix logits(const Matrix& x) const;

    /// Exact directional derivative: output value and d(output)/d(input) in
    /// the direction `tangent`, both evaluated at the single input row `x`.
    std::pair<Vector, Vector> jvp(const Vector& x, const Vector& tangent) const;

    std::vector<Tensor> parameters() const;
    bool finite() const;

    void save(const std::filesystem::path& path) const;
    static DenseNet load(const std::filesystem::path& path);

private:
    void validate() const;
    std::vector<Layer> layers_;
};

}  // namespace oodkit
