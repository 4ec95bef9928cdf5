#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace oodkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

struct Node {
    std::uint64_t id = 0;
    Matrix value;
    Matrix grad;            // allocated on first accumulation
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backprop;

    void accumulate(const Matrix& g);
};

}  // namespace detail

/// Handle to a node of the reverse-mode differentiation graph.
///
/// A Tensor holds a 2-D real array (rows = batch samples). Operations on
/// Tensors record the computation so that backward() on a scalar result fills
/// the grad of every reachable node that requires gradients. Gradients
/// accumulate additively across uses; leaves keep their grads until
/// zero_grad() (the optimizer calls it after each step).
class Tensor {
public:
    Tensor() = default;

    /// Leaf that does not participate in differentiation.
    static Tensor constant(Matrix v);
    /// Leaf with gradient tracking (network parameters, perturbable inputs).
    static Tensor leaf(Matrix v);

    bool valid() const { return static_cast<bool>(node_); }
    const Matrix& value() const;
    Matrix& mutable_value();  // in-place parameter updates; leaves only
    const Matrix& grad() const;
    bool has_grad() const;
    bool requires_grad() const;
    std::uint64_t node_id() const;

    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    std::vector<Eigen::Index> shape() const { return {rows(), cols()}; }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }
    double scalar() const;

    void zero_grad();

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op(Matrix value, std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backprop);
};

/// Internal: build a recorded operation node.
Tensor make_op(Matrix value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop);

// ---- primitive operations -------------------------------------------------

/// x:(B,in) * w:(out,in)^T + b:(1,out) broadcast over rows -> (B,out)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Row-wise softmax; rows sum to 1 and entries are strictly positive.
Tensor softmax_rows(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double k);
Tensor exp_op(const Tensor& a);
/// log(max(a, floor)); the clamp keeps saturated probabilities finite.
Tensor log_clamped(const Tensor& a, double floor = 1e-12);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count);
Tensor sum_all(const Tensor& a);   // -> 1x1
Tensor mean_all(const Tensor& a);  // -> 1x1

/// Reverse-mode sweep from a scalar loss. After it returns, loss.grad == 1
/// exactly and every requires-grad node reachable from loss holds its
/// accumulated gradient.
void backward(const Tensor& loss);

// value-level helpers shared across modules
Matrix softmax_rows_value(const Matrix& logits);
Matrix sigmoid_value(const Matrix& x);

}  // namespace oodkit
