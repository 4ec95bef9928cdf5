#include "oodkit/tensor.hpp"

#include "oodkit/error.hpp"

#include <atomic>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace oodkit {

namespace detail {

namespace {
std::atomic<std::uint64_t> g_next_node_id{1};
}

void Node::accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (!has_grad) {
        grad = g;
        has_grad = true;
    } else {
        grad += g;
    }
}

}  // namespace detail

namespace {

std::shared_ptr<detail::Node> new_node(Matrix v, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->id = detail::g_next_node_id.fetch_add(1, std::memory_order_relaxed);
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    }
}

}  // namespace

Tensor Tensor::constant(Matrix v) {
    return Tensor(new_node(std::move(v), false));
}

Tensor Tensor::leaf(Matrix v) {
    return Tensor(new_node(std::move(v), true));
}

const Matrix& Tensor::value() const {
    if (!node_) throw ContractError("Tensor: empty handle");
    return node_->value;
}

Matrix& Tensor::mutable_value() {
    if (!node_) throw ContractError("Tensor: empty handle");
    return node_->value;
}

const Matrix& Tensor::grad() const {
    if (!node_ || !node_->has_grad) throw ContractError("Tensor: gradient not populated");
    return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->has_grad; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::uint64_t Tensor::node_id() const { return node_ ? node_->id : 0; }

double Tensor::scalar() const {
    if (!is_scalar()) throw ContractError("Tensor: scalar() on non-scalar");
    return value()(0, 0);
}

void Tensor::zero_grad() {
    if (node_) {
        node_->has_grad = false;
        node_->grad.resize(0, 0);
    }
}

Tensor make_op(Matrix value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop) {
    bool req = false;
    for (const auto& p : parents) req = req || p.requires_grad();
    auto n = new_node(std::move(value), req);
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    if (req) n->backprop = std::move(backprop);
    return Tensor(n);
}

// ---- ops --------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.cols() != w.cols()) {
        throw DimensionError("linear: input width " + std::to_string(x.cols()) +
                             " does not match weight fan-in " + std::to_string(w.cols()));
    }
    if (b.rows() != 1 || b.cols() != w.rows()) {
        throw DimensionError("linear: bias must be 1x" + std::to_string(w.rows()));
    }
    Matrix out = x.value() * w.value().transpose();
    out.rowwise() += b.value().row(0);
    return make_op(std::move(out), {x, w, b}, [](detail::Node& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        if (xp.requires_grad) xp.accumulate(self.grad * wp.value);
        if (wp.requires_grad) wp.accumulate(self.grad.transpose() * xp.value);
        if (bp.requires_grad) bp.accumulate(self.grad.colwise().sum());
    });
}

Tensor relu(const Tensor& x) {
    Matrix out = x.value().cwiseMax(0.0);
    return make_op(std::move(out), {x}, [](detail::Node& self) {
        auto& xp = *self.parents[0];
        xp.accumulate((xp.value.array() > 0.0).select(self.grad.array(), 0.0).matrix());
    });
}

Tensor sigmoid(const Tensor& x) {
    Matrix out = sigmoid_value(x.value());
    return make_op(std::move(out), {x}, [](detail::Node& self) {
        auto& xp = *self.parents[0];
        Matrix d = (self.value.array() * (1.0 - self.value.array()) * self.grad.array()).matrix();
        xp.accumulate(d);
    });
}

Tensor softmax_rows(const Tensor& x) {
    Matrix out = softmax_rows_value(x.value());
    return make_op(std::move(out), {x}, [](detail::Node& self) {
        auto& xp = *self.parents[0];
        // dL/dz = p .* (dL/dp - rowsum(dL/dp .* p))
        Matrix gp = self.grad.cwiseProduct(self.value);
        Vector rowdot = gp.rowwise().sum();
        Matrix d = gp - (self.value.array().colwise() * rowdot.array()).matrix();
        xp.accumulate(d);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    return make_op(a.value() + b.value(), {a, b}, [](detail::Node& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    return make_op(a.value() - b.value(), {a, b}, [](detail::Node& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(-self.grad);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& self) {
        self.parents[0]->accumulate(self.grad.cwiseProduct(self.parents[1]->value));
        self.parents[1]->accumulate(self.grad.cwiseProduct(self.parents[0]->value));
    });
}

Tensor scale(const Tensor& a, double k) {
    return make_op(a.value() * k, {a}, [k](detail::Node& self) {
        self.parents[0]->accumulate(self.grad * k);
    });
}

Tensor exp_op(const Tensor& a) {
    Matrix out = a.value().array().exp().matrix();
    return make_op(std::move(out), {a}, [](detail::Node& self) {
        self.parents[0]->accumulate(self.grad.cwiseProduct(self.value));
    });
}

Tensor log_clamped(const Tensor& a, double floor) {
    Matrix out = a.value().array().max(floor).log().matrix();
    return make_op(std::move(out), {a}, [floor](detail::Node& self) {
        auto& ap = *self.parents[0];
        // zero gradient inside the clamped region
        Matrix d = (ap.value.array() > floor)
                       .select(self.grad.array() / ap.value.array(), 0.0)
                       .matrix();
        ap.accumulate(d);
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw DimensionError("concat_cols: row count mismatch");
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const Eigen::Index ac = a.cols();
    return make_op(std::move(out), {a, b}, [ac](detail::Node& self) {
        self.parents[0]->accumulate(self.grad.leftCols(ac));
        self.parents[1]->accumulate(self.grad.rightCols(self.grad.cols() - ac));
    });
}

Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count < 0 || begin + count > a.cols()) {
        throw DimensionError("slice_cols: range out of bounds");
    }
    Matrix out = a.value().middleCols(begin, count);
    return make_op(std::move(out), {a}, [begin, count](detail::Node& self) {
        auto& ap = *self.parents[0];
        Matrix g = Matrix::Zero(ap.value.rows(), ap.value.cols());
        g.middleCols(begin, count) = self.grad;
        ap.accumulate(g);
    });
}

Tensor sum_all(const Tensor& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_op(std::move(out), {a}, [](detail::Node& self) {
        auto& ap = *self.parents[0];
        ap.accumulate(Matrix::Constant(ap.value.rows(), ap.value.cols(), self.grad(0, 0)));
    });
}

Tensor mean_all(const Tensor& a) {
    const double n = static_cast<double>(a.rows() * a.cols());
    Matrix out(1, 1);
    out(0, 0) = a.value().sum() / n;
    return make_op(std::move(out), {a}, [n](detail::Node& self) {
        auto& ap = *self.parents[0];
        ap.accumulate(Matrix::Constant(ap.value.rows(), ap.value.cols(), self.grad(0, 0) / n));
    });
}

void backward(const Tensor& loss) {
    if (!loss.valid()) throw ContractError("backward: empty tensor");
    if (!loss.is_scalar()) {
        throw ContractError("backward: loss must be a 1x1 scalar, got " +
                            std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
    }

    // iterative post-order DFS over parent edges
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::Node* parent = node->parents[idx++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad = Matrix::Constant(1, 1, 1.0);
    loss.node()->has_grad = true;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backprop && n->has_grad) n->backprop(*n);
    }
}

Matrix softmax_rows_value(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    return out;
}

Matrix sigmoid_value(const Matrix& x) {
    return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace oodkit
