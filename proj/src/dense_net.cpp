#include "oodkit/dense_net.hpp"

#include "oodkit/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>

namespace oodkit {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::linear;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softmax") return Activation::softmax;
    throw ContractError("unknown activation: " + s);
}

DenseNet::DenseNet(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng) {
    if (widths.size() < 2) throw ContractError("DenseNet: need at least input and output widths");
    if (acts.size() != widths.size() - 1) {
        throw ContractError("DenseNet: activation count must equal layer count");
    }
    layers_.reserve(acts.size());
    for (std::size_t k = 0; k < acts.size(); ++k) {
        const int in = widths[k];
        const int out = widths[k + 1];
        if (in <= 0 || out <= 0) throw ContractError("DenseNet: widths must be positive");
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix w(out, in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
        Layer layer;
        layer.weights = Tensor::leaf(std::move(w));
        layer.bias = Tensor::leaf(Matrix::Zero(1, out));
        layer.act = acts[k];
        layers_.push_back(std::move(layer));
    }
    validate();
}

DenseNet DenseNet::from_layers(std::vector<Layer> layers) {
    DenseNet net;
    net.layers_ = std::move(layers);
    net.validate();
    return net;
}

void DenseNet::validate() const {
    if (layers_.empty()) throw ContractError("DenseNet: no layers");
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
        if (layers_[k].fan_out() != layers_[k + 1].fan_in()) {
            throw DimensionError("DenseNet: layer " + std::to_string(k) + " output width " +
                                 std::to_string(layers_[k].fan_out()) + " != layer " +
                                 std::to_string(k + 1) + " input width " +
                                 std::to_string(layers_[k + 1].fan_in()));
        }
        if (layers_[k].act == Activation::softmax) {
            throw ContractError("DenseNet: softmax allowed only as the final activation (layer " +
                                std::to_string(k) + ")");
        }
    }
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        if (layers_[k].bias.cols() != layers_[k].fan_out() || layers_[k].bias.rows() != 1) {
            throw DimensionError("DenseNet: bias shape mismatch at layer " + std::to_string(k));
        }
    }
}

int DenseNet::input_dim() const {
    if (layers_.empty()) throw ContractError("DenseNet: empty");
    return static_cast<int>(layers_.front().fan_in());
}

int DenseNet::output_dim() const {
    if (layers_.empty()) throw ContractError("DenseNet: empty");
    return static_cast<int>(layers_.back().fan_out());
}

Tensor DenseNet::forward(const Tensor& x) const {
    if (x.cols() != input_dim()) {
        throw DimensionError("DenseNet::forward: input width " + std::to_string(x.cols()) +
                             " != layer 0 input width " + std::to_string(input_dim()));
    }
    Tensor h = x;
    for (const auto& layer : layers_) {
        h = linear(h, layer.weights, layer.bias);
        switch (layer.act) {
            case Activation::linear: break;
            case Activation::relu: h = relu(h); break;
            case Activation::sigmoid: h = sigmoid(h); break;
            case Activation::softmax: h = softmax_rows(h); break;
        }
    }
    return h;
}

Matrix DenseNet::infer(const Matrix& x) const {
    if (x.cols() != input_dim()) {
        throw DimensionError("DenseNet::infer: input width " + std::to_string(x.cols()) +
                             " != layer 0 input width " + std::to_string(input_dim()));
    }
    Matrix h = x;
    for (const auto& layer : layers_) {
        Matrix pre = h * layer.weights.value().transpose();
        pre.rowwise() += layer.bias.value().row(0);
        switch (layer.act) {
            case Activation::linear: h = std::move(pre); break;
            case Activation::relu: h = pre.cwiseMax(0.0); break;
            case Activation::sigmoid: h = sigmoid_value(pre); break;
            case Activation::softmax: h = softmax_rows_value(pre); break;
        }
    }
    return h;
}

Matrix DenseNet::logits(const Matrix& x) const {
    if (x.cols() != input_dim()) {
        throw DimensionError("DenseNet::logits: input width mismatch");
    }
    Matrix h = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& layer = layers_[k];
        Matrix pre = h * layer.weights.value().transpose();
        pre.rowwise() += layer.bias.value().row(0);
        const bool last = (k + 1 == layers_.size());
        Activation act = (last && layer.act == Activation::softmax) ? Activation::linear : layer.act;
        switch (act) {
            case Activation::linear: h = std::move(pre); break;
            case Activation::relu: h = pre.cwiseMax(0.0); break;
            case Activation::sigmoid: h = sigmoid_value(pre); break;
            case Activation::softmax: h = softmax_rows_value(pre); break;
        }
    }
    return h;
}

std::pair<Vector, Vector> DenseNet::jvp(const Vector& x, const Vector& tangent) const {
    if (x.size() != input_dim() || tangent.size() != input_dim()) {
        throw DimensionError("DenseNet::jvp: input width mismatch");
    }
    Vector a = x;
    Vector t = tangent;
    for (const auto& layer : layers_) {
        Vector pre = layer.weights.value() * a + layer.bias.value().row(0).transpose();
        Vector tpre = layer.weights.value() * t;
        switch (layer.act) {
            case Activation::linear:
                a = pre;
                t = tpre;
                break;
            case Activation::relu:
                a = pre.cwiseMax(0.0);
                t = (pre.array() > 0.0).select(tpre.array(), 0.0);
                break;
            case Activation::sigmoid: {
                a = sigmoid_value(pre.transpose()).transpose();
                t = (a.array() * (1.0 - a.array()) * tpre.array()).matrix();
                break;
            }
            case Activation::softmax: {
                a = softmax_rows_value(pre.transpose()).transpose();
                const double dot = (a.array() * tpre.array()).sum();
                t = (a.array() * (tpre.array() - dot)).matrix();
                break;
            }
        }
    }
    return {a, t};
}

std::vector<Tensor> DenseNet::parameters() const {
    std::vector<Tensor> out;
    out.reserve(2 * layers_.size());
    for (const auto& layer : layers_) {
        out.push_back(layer.weights);
        out.push_back(layer.bias);
    }
    return out;
}

bool DenseNet::finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weights.value().allFinite() || !layer.bias.value().allFinite()) return false;
    }
    return true;
}

// ---- binary weight format ----------------------------------------------
//
//   magic   "DNET"            4 bytes
//   version u32 LE            currently 1
//   layers  u32 LE
//   per layer:
//     rows  u32 LE            (fan_out)
//     cols  u32 LE            (fan_in)
//     act   u32 LE            0 linear, 1 relu, 2 sigmoid, 3 softmax
//     weights rows*cols f64 LE, row-major
//     bias    rows      f64 LE

namespace {

constexpr char kMagic[4] = {'D', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 4);
}

void write_f64(std::ostream& os, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

std::uint32_t read_u32(std::istream& is, const std::filesystem::path& path) {
    char buf[4];
    if (!is.read(buf, 4)) {
        throw FormatError(path.string() + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(is.tellg())));
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

double read_f64(std::istream& is, const std::filesystem::path& path) {
    char buf[8];
    if (!is.read(buf, 8)) {
        throw FormatError(path.string() + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(is.tellg())));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void DenseNet::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path.string());
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(layers_.size()));
    for (const auto& layer : layers_) {
        const Matrix& w = layer.weights.value();
        write_u32(os, static_cast<std::uint32_t>(w.rows()));
        write_u32(os, static_cast<std::uint32_t>(w.cols()));
        write_u32(os, static_cast<std::uint32_t>(layer.act));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) write_f64(os, w(i, j));
        for (Eigen::Index i = 0; i < w.rows(); ++i) write_f64(os, layer.bias.value()(0, i));
    }
    if (!os) throw FormatError("write failed: " + path.string());
}

DenseNet DenseNet::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic at byte offset 0");
    }
    const std::uint32_t version = read_u32(is, path);
    if (version != kVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    }
    const std::uint32_t n_layers = read_u32(is, path);
    if (n_layers == 0 || n_layers > 1024) {
        throw FormatError(path.string() + ": implausible layer count " + std::to_string(n_layers));
    }
    std::vector<Layer> layers;
    layers.reserve(n_layers);
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const std::uint32_t rows = read_u32(is, path);
        const std::uint32_t cols = read_u32(is, path);
        const std::uint32_t act = read_u32(is, path);
        if (rows == 0 || cols == 0 || act > 3) {
            throw FormatError(path.string() + ": bad layer header at byte offset " +
                              std::to_string(static_cast<long long>(is.tellg()) - 12));
        }
        Matrix w(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) w(i, j) = read_f64(is, path);
        Matrix b(1, rows);
        for (std::uint32_t i = 0; i < rows; ++i) b(0, i) = read_f64(is, path);
        Layer layer;
        layer.weights = Tensor::leaf(std::move(w));
        layer.bias = Tensor::leaf(std::move(b));
        layer.act = static_cast<Activation>(act);
        layers.push_back(std::move(layer));
    }
    return DenseNet::from_layers(std::move(layers));
}

}  // namespace oodkit
