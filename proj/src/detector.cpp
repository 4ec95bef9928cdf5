#include "oodkit/detector.hpp"

#include "oodkit/error.hpp"
#include "oodkit/losses.hpp"
#include "oodkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

namespace oodkit {

namespace {

Matrix softmax_outputs(const DetectorModel& model, const Matrix& x) {
    model.validate();
    if (x.cols() != model.net.input_dim()) {
        throw DimensionError("scoring: input dim " + std::to_string(x.cols()) + " != net input " +
                             std::to_string(model.net.input_dim()));
    }
    return model.net.infer(x);
}

}  // namespace

std::string to_string(DetectorVariant v) {
    return v == DetectorVariant::nplus1 ? "nplus1" : "plain_n";
}

DetectorVariant detector_variant_from_string(const std::string& s) {
    if (s == "nplus1") return DetectorVariant::nplus1;
    if (s == "plain_n") return DetectorVariant::plain_n;
    throw FormatError("unknown detector variant '" + s + "'");
}

void DetectorModel::validate() const {
    if (n_inlier_classes <= 0) throw ContractError("detector needs n_inlier_classes > 0");
    const int want =
        variant == DetectorVariant::nplus1 ? n_inlier_classes + 1 : n_inlier_classes;
    if (net.output_dim() != want) {
        throw DimensionError("detector net emits " + std::to_string(net.output_dim()) +
                             " classes, variant " + to_string(variant) + " wants " +
                             std::to_string(want));
    }
    if (net.layers().back().act != Activation::softmax) {
        throw ContractError("detector net must end in a softmax layer");
    }
}

DenseNet make_classifier_net(int input_dim, const std::vector<int>& hidden, int n_outputs,
                             Rng& rng) {
    std::vector<int> widths{input_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(n_outputs);
    std::vector<Activation> acts(hidden.size(), Activation::relu);
    acts.push_back(Activation::softmax);
    return DenseNet(widths, acts, rng);
}

DetectorModel train_detector(DenseNet net, const LabeledDataset& inliers, const OodBatch& ood,
                             const DetectorTrainConfig& config, Rng& rng,
                             std::vector<std::string>* warnings,
                             std::vector<double>* loss_log) {
    inliers.validate();
    ood.validate();
    if (inliers.n() == 0) throw ContractError("train_detector: empty inlier dataset");
    const int n = inliers.n_classes();
    if (n < 1) throw ContractError("train_detector: inlier dataset is unlabeled");
    for (std::size_t i = 0; i < inliers.labels.size(); ++i) {
        if (inliers.labels[i] < 0) {
            throw ContractError("train_detector: inlier sample " + std::to_string(i) +
                                " is unlabeled");
        }
    }
    if (config.epochs < 0 || config.batch_size <= 0) {
        throw ContractError("train_detector: epochs must be >= 0 and batch_size > 0");
    }
    if (config.ood_class_weight < 0.0) {
        throw ContractError("train_detector: ood_class_weight must be nonnegative");
    }

    DetectorModel model{std::move(net), n, config.ood_class_weight, DetectorVariant::nplus1};
    if (ood.n() == 0) {
        model.variant = DetectorVariant::plain_n;
        if (warnings != nullptr) {
            warnings->push_back("empty OOD batch: training a plain " + std::to_string(n) +
                                "-class classifier");
        }
        if (model.net.output_dim() == n + 1) {
            // Drop the OOD output row so the net is a genuine n-class model.
            std::vector<Layer> layers = model.net.layers();
            Layer& last = layers.back();
            const Matrix w = last.weights.value().topRows(n);
            const Matrix b = last.bias.value().leftCols(n);
            last.weights = Tensor::leaf(w);
            last.bias = Tensor::leaf(b);
            model.net = DenseNet::from_layers(std::move(layers));
        }
    } else if (ood.dim() != inliers.dim()) {
        throw DimensionError("train_detector: ood dim " + std::to_string(ood.dim()) +
                             " != inlier dim " + std::to_string(inliers.dim()));
    }
    model.validate();

    const int n_outputs = model.net.output_dim();
    std::vector<double> class_weights(static_cast<std::size_t>(n_outputs), 1.0);
    if (model.variant == DetectorVariant::nplus1) {
        class_weights.back() = config.ood_class_weight;
    }

    // Stack inliers and OOD-as-class-n into one training set.
    const int total = inliers.n() + ood.n();
    Matrix x(total, inliers.dim());
    x.topRows(inliers.n()) = inliers.samples;
    std::vector<int> y = inliers.labels;
    if (ood.n() > 0) {
        x.bottomRows(ood.n()) = ood.samples;
        y.insert(y.end(), static_cast<std::size_t>(ood.n()), n);
    }

    Optimizer opt(config.opt, model.net.parameters());
    std::vector<int> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    int stall = 0;
    double prev_loss = 0.0;
    bool have_prev = false;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int start = 0; start < total; start += config.batch_size) {
            const int bs = std::min(config.batch_size, total - start);
            Matrix xb(bs, x.cols());
            std::vector<int> yb(static_cast<std::size_t>(bs));
            for (int k = 0; k < bs; ++k) {
                const int src = order[static_cast<std::size_t>(start + k)];
                xb.row(k) = x.row(src);
                yb[static_cast<std::size_t>(k)] = y[static_cast<std::size_t>(src)];
            }
            Tensor probs = model.net.forward(Tensor::constant(xb));
            Tensor loss = weighted_cross_entropy(probs, yb, class_weights);
            backward(loss);
            opt.step();
            epoch_loss += loss.scalar() * bs;
        }
        epoch_loss /= total;
        if (loss_log != nullptr) loss_log->push_back(epoch_loss);
        if (config.verbose) {
            std::fprintf(stderr, "detector epoch %d/%d loss %.6f\n", epoch + 1, config.epochs,
                         epoch_loss);
        }
        if (config.early_stop && have_prev) {
            const double rel = (prev_loss - epoch_loss) / std::max(std::abs(prev_loss), 1e-12);
            stall = rel < config.rel_tol ? stall + 1 : 0;
            if (stall >= config.patience) break;
        }
        prev_loss = epoch_loss;
        have_prev = true;
    }
    return model;
}

double inlier_accuracy(const DetectorModel& model, const LabeledDataset& data) {
    data.validate();
    if (data.n() == 0) throw ContractError("inlier_accuracy: empty dataset");
    const Matrix p = softmax_outputs(model, data.samples);
    int correct = 0;
    for (int i = 0; i < data.n(); ++i) {
        Eigen::Index argmax = 0;
        p.row(i).maxCoeff(&argmax);
        if (static_cast<int>(argmax) == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.n());
}

std::vector<double> score_ood_class_prob(const DetectorModel& model, const Matrix& x) {
    if (model.variant != DetectorVariant::nplus1) {
        throw ContractError("score_ood_class_prob needs the nplus1 variant, got " +
                            to_string(model.variant));
    }
    const Matrix p = softmax_outputs(model, x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = p(i, model.n_inlier_classes);
    }
    return out;
}

std::vector<double> score_max_inlier_prob(const DetectorModel& model, const Matrix& x) {
    const Matrix p = softmax_outputs(model, x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = -p.row(i).head(model.n_inlier_classes).maxCoeff();
    }
    return out;
}

std::vector<double> score_max_softmax(const DetectorModel& model, const Matrix& x) {
    if (model.variant != DetectorVariant::plain_n) {
        throw ContractError("score_max_softmax is a plain n-class baseline, got variant " +
                            to_string(model.variant));
    }
    const Matrix p = softmax_outputs(model, x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = -p.row(i).maxCoeff();
    }
    return out;
}

std::vector<double> score_odin(const DetectorModel& model, const Matrix& x, double temperature,
                               double perturb_eps) {
    if (model.variant != DetectorVariant::plain_n) {
        throw ContractError("score_odin is a plain n-class baseline, got variant " +
                            to_string(model.variant));
    }
    if (!(temperature > 0.0)) throw ContractError("score_odin: temperature must be positive");
    model.validate();

    Matrix x_adv = x;
    if (perturb_eps != 0.0) {
        // Input gradient of the cross-entropy at the predicted label.
        Tensor x_leaf = Tensor::leaf(x);
        Tensor probs = model.net.forward(x_leaf);
        std::vector<int> predicted(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            Eigen::Index argmax = 0;
            probs.value().row(i).maxCoeff(&argmax);
            predicted[static_cast<std::size_t>(i)] = static_cast<int>(argmax);
        }
        Tensor loss = cross_entropy(probs, predicted);
        backward(loss);
        x_adv -= perturb_eps * x_leaf.grad().array().sign().matrix();
    }

    const Matrix logits = model.net.logits(x_adv);
    const Matrix p = softmax_rows_value(logits / temperature);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = -p.row(i).maxCoeff();
    }
    return out;
}

ScoreVector make_score_vector(const std::vector<double>& scores, const std::string& rule) {
    ScoreVector sv;
    sv.ids.resize(scores.size());
    std::iota(sv.ids.begin(), sv.ids.end(), 0);
    sv.scores = scores;
    sv.rule = rule;
    return sv;
}

void save_scores_csv(const ScoreVector& scores, const std::filesystem::path& path) {
    if (scores.ids.size() != scores.scores.size()) {
        throw DimensionError("score vector has " + std::to_string(scores.ids.size()) +
                             " ids but " + std::to_string(scores.scores.size()) + " scores");
    }
    for (double s : scores.scores) {
        if (!std::isfinite(s)) throw ContractError("score vector holds a non-finite score");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << "id,score,rule\n";
    for (std::size_t i = 0; i < scores.ids.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", scores.scores[i]);
        os << scores.ids[i] << ',' << buf << ',' << scores.rule << '\n';
    }
    if (!os) throw FormatError("short write to " + path.string());
}

void save_detector(const DetectorModel& model, const std::filesystem::path& prefix) {
    model.validate();
    const std::string base = prefix.string();
    model.net.save(base + ".dnet");
    std::ofstream meta(base + ".meta");
    if (!meta) throw FormatError("cannot open " + base + ".meta for writing");
    char weight_buf[40];
    std::snprintf(weight_buf, sizeof weight_buf, "%.17g", model.ood_class_weight);
    meta << "detector-meta v1\n"
         << "n_inlier_classes " << model.n_inlier_classes << "\n"
         << "ood_class_weight " << weight_buf << "\n"
         << "variant " << to_string(model.variant) << "\n";
    if (!meta) throw FormatError("short write to " + base + ".meta");
}

DetectorModel load_detector(const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    std::ifstream meta(base + ".meta");
    if (!meta) throw FormatError("cannot open " + base + ".meta");
    std::string tag, version;
    meta >> tag >> version;
    if (tag != "detector-meta" || version != "v1") {
        throw FormatError(base + ".meta: unrecognized header '" + tag + " " + version + "'");
    }
    DetectorModel model;
    std::string key;
    while (meta >> key) {
        if (key == "n_inlier_classes") meta >> model.n_inlier_classes;
        else if (key == "ood_class_weight") meta >> model.ood_class_weight;
        else if (key == "variant") {
            std::string v;
            meta >> v;
            model.variant = detector_variant_from_string(v);
        } else {
            throw FormatError(base + ".meta: unknown key '" + key + "'");
        }
        if (!meta) throw FormatError(base + ".meta: missing value for '" + key + "'");
    }
    model.net = DenseNet::load(base + ".dnet");
    model.validate();
    return model;
}

}  // namespace oodkit
