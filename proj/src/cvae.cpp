#include "oodkit/cvae.hpp"

#include "oodkit/error.hpp"
#include "oodkit/losses.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

namespace oodkit {

namespace {

void check_labels(const std::vector<int>& labels, int n_classes, const char* where) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ContractError(std::string(where) + ": label " + std::to_string(labels[i]) +
                                " at index " + std::to_string(i) + " outside [0," +
                                std::to_string(n_classes) + ")");
        }
    }
}

Matrix with_one_hot(const Matrix& x, const std::vector<int>& labels, int n_classes) {
    Matrix joined(x.rows(), x.cols() + n_classes);
    joined.leftCols(x.cols()) = x;
    joined.rightCols(n_classes) = one_hot(labels, n_classes);
    return joined;
}

}  // namespace

void CvaeModel::validate() const {
    if (input_dim <= 0 || latent_dim <= 0 || n_classes <= 0) {
        throw ContractError("cvae dimensions must be positive");
    }
    if (encoder.input_dim() != input_dim + n_classes) {
        throw DimensionError("cvae encoder expects input " + std::to_string(encoder.input_dim()) +
                             " but input_dim+n_classes = " +
                             std::to_string(input_dim + n_classes));
    }
    if (encoder.output_dim() != 2 * latent_dim) {
        throw DimensionError("cvae encoder emits " + std::to_string(encoder.output_dim()) +
                             " values, want 2*latent_dim = " + std::to_string(2 * latent_dim));
    }
    if (decoder.input_dim() != latent_dim + n_classes) {
        throw DimensionError("cvae decoder expects input " + std::to_string(decoder.input_dim()) +
                             " but latent_dim+n_classes = " +
                             std::to_string(latent_dim + n_classes));
    }
    if (decoder.output_dim() != input_dim) {
        throw DimensionError("cvae decoder emits " + std::to_string(decoder.output_dim()) +
                             " values, want input_dim = " + std::to_string(input_dim));
    }
    const Activation out_act = decoder.layers().back().act;
    if (out_act != Activation::sigmoid && out_act != Activation::linear) {
        throw ContractError("cvae decoder must end in a sigmoid or linear layer");
    }
}

CvaeModel make_cvae(int input_dim, int latent_dim, int n_classes,
                    const std::vector<int>& encoder_hidden, const std::vector<int>& decoder_hidden,
                    Rng& rng, ValueRange output_range) {
    if (input_dim <= 0 || latent_dim <= 0 || n_classes <= 0) {
        throw ContractError("make_cvae dimensions must be positive");
    }
    std::vector<int> enc_widths{input_dim + n_classes};
    enc_widths.insert(enc_widths.end(), encoder_hidden.begin(), encoder_hidden.end());
    enc_widths.push_back(2 * latent_dim);
    std::vector<Activation> enc_acts(encoder_hidden.size(), Activation::relu);
    enc_acts.push_back(Activation::linear);

    std::vector<int> dec_widths{latent_dim + n_classes};
    dec_widths.insert(dec_widths.end(), decoder_hidden.begin(), decoder_hidden.end());
    dec_widths.push_back(input_dim);
    std::vector<Activation> dec_acts(decoder_hidden.size(), Activation::relu);
    dec_acts.push_back(output_range == ValueRange::unit ? Activation::sigmoid
                                                        : Activation::linear);

    CvaeModel model{DenseNet(enc_widths, enc_acts, rng), DenseNet(dec_widths, dec_acts, rng),
                    input_dim, latent_dim, n_classes};
    model.validate();
    return model;
}

std::pair<Matrix, Matrix> encode(const CvaeModel& model, const Matrix& x,
                                 const std::vector<int>& labels) {
    model.validate();
    if (x.cols() != model.input_dim) {
        throw DimensionError("encode: sample dim " + std::to_string(x.cols()) + " != input_dim " +
                             std::to_string(model.input_dim));
    }
    if (static_cast<std::int64_t>(labels.size()) != x.rows()) {
        throw DimensionError("encode: " + std::to_string(x.rows()) + " samples vs " +
                             std::to_string(labels.size()) + " labels");
    }
    check_labels(labels, model.n_classes, "encode");
    const Matrix out = model.encoder.infer(with_one_hot(x, labels, model.n_classes));
    return {out.leftCols(model.latent_dim), out.rightCols(model.latent_dim)};
}

std::pair<Vector, Vector> encode(const CvaeModel& model, const Vector& x, int label) {
    auto [mu, logvar] = encode(model, Matrix(x.transpose()), std::vector<int>{label});
    return {mu.row(0).transpose(), logvar.row(0).transpose()};
}

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
        throw DimensionError("reparameterize: mu and logvar shapes differ");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(mu.rows(), mu.cols());
    for (std::int64_t i = 0; i < mu.rows(); ++i) {
        for (std::int64_t j = 0; j < mu.cols(); ++j) {
            z(i, j) = mu(i, j) + std::exp(0.5 * logvar(i, j)) * normal(rng);
        }
    }
    return z;
}

Matrix decode(const CvaeModel& model, const Matrix& z, const std::vector<int>& labels) {
    model.validate();
    if (z.cols() != model.latent_dim) {
        throw DimensionError("decode: latent dim " + std::to_string(z.cols()) +
                             " != latent_dim " + std::to_string(model.latent_dim));
    }
    if (static_cast<std::int64_t>(labels.size()) != z.rows()) {
        throw DimensionError("decode: " + std::to_string(z.rows()) + " latents vs " +
                             std::to_string(labels.size()) + " labels");
    }
    check_labels(labels, model.n_classes, "decode");
    return model.decoder.infer(with_one_hot(z, labels, model.n_classes));
}

Vector decode(const CvaeModel& model, const Vector& z, int label) {
    return decode(model, Matrix(z.transpose()), std::vector<int>{label}).row(0).transpose();
}

std::vector<double> train_cvae(CvaeModel& model, const LabeledDataset& data,
                               const CvaeTrainConfig& config, Rng& rng) {
    model.validate();
    data.validate();
    if (data.n() == 0) throw ContractError("train_cvae: empty dataset");
    if (data.dim() != model.input_dim) {
        throw DimensionError("train_cvae: data dim " + std::to_string(data.dim()) +
                             " != input_dim " + std::to_string(model.input_dim));
    }
    check_labels(data.labels, model.n_classes, "train_cvae");
    if (config.epochs < 0 || config.batch_size <= 0) {
        throw ContractError("train_cvae: epochs must be >= 0 and batch_size > 0");
    }
    const ReconLoss recon = model.decoder.layers().back().act == Activation::sigmoid
                                ? ReconLoss::bernoulli
                                : ReconLoss::gaussian;
    if (recon == ReconLoss::bernoulli && data.range != ValueRange::unit) {
        throw ContractError(
            "train_cvae: sigmoid decoder (Bernoulli reconstruction) needs unit-range data; "
            "build the model with ValueRange::unbounded for dataset '" +
            data.name + "'");
    }

    std::vector<Tensor> params = model.encoder.parameters();
    {
        auto dec = model.decoder.parameters();
        params.insert(params.end(), dec.begin(), dec.end());
    }
    Optimizer opt(config.opt, params);

    std::vector<double> log;
    log.reserve(static_cast<std::size_t>(config.epochs));
    std::vector<int> order(static_cast<std::size_t>(data.n()));
    std::iota(order.begin(), order.end(), 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    int stall = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int start = 0; start < data.n(); start += config.batch_size) {
            const int bs = std::min(config.batch_size, data.n() - start);
            Matrix xb(bs, data.dim());
            std::vector<int> yb(static_cast<std::size_t>(bs));
            for (int k = 0; k < bs; ++k) {
                xb.row(k) = data.samples.row(order[static_cast<std::size_t>(start + k)]);
                yb[static_cast<std::size_t>(k)] =
                    data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + k)])];
            }
            Matrix eps(bs, model.latent_dim);
            for (std::int64_t i = 0; i < eps.rows(); ++i)
                for (std::int64_t j = 0; j < eps.cols(); ++j) eps(i, j) = normal(rng);

            Tensor enc_in = Tensor::constant(with_one_hot(xb, yb, model.n_classes));
            Tensor enc_out = model.encoder.forward(enc_in);
            Tensor mu = slice_cols(enc_out, 0, model.latent_dim);
            Tensor logvar = slice_cols(enc_out, model.latent_dim, model.latent_dim);
            Tensor z = add(mu, mul(exp_op(scale(logvar, 0.5)), Tensor::constant(eps)));
            Tensor dec_in = concat_cols(z, Tensor::constant(one_hot(yb, model.n_classes)));
            Tensor x_hat = model.decoder.forward(dec_in);
            Tensor loss = vae_loss(xb, x_hat, mu, logvar, config.beta_kl, recon);
            backward(loss);
            opt.step();
            epoch_loss += loss.scalar() * bs;
        }
        epoch_loss /= data.n();
        log.push_back(epoch_loss);
        if (config.verbose) {
            std::fprintf(stderr, "cvae epoch %d/%d loss %.6f\n", epoch + 1, config.epochs,
                         epoch_loss);
        }
        if (config.early_stop && log.size() >= 2) {
            const double prev = log[log.size() - 2];
            const double rel = (prev - epoch_loss) / std::max(std::abs(prev), 1e-12);
            stall = rel < config.rel_tol ? stall + 1 : 0;
            if (stall >= config.patience) break;
        }
    }
    return log;
}

void save_cvae(const CvaeModel& model, const std::filesystem::path& prefix) {
    model.validate();
    const std::string base = prefix.string();
    model.encoder.save(base + ".encoder.dnet");
    model.decoder.save(base + ".decoder.dnet");
    std::ofstream meta(base + ".meta");
    if (!meta) throw FormatError("cannot open " + base + ".meta for writing");
    meta << "cvae-meta v1\n"
         << "input_dim " << model.input_dim << "\n"
         << "latent_dim " << model.latent_dim << "\n"
         << "n_classes " << model.n_classes << "\n";
    if (!meta) throw FormatError("short write to " + base + ".meta");
}

CvaeModel load_cvae(const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    std::ifstream meta(base + ".meta");
    if (!meta) throw FormatError("cannot open " + base + ".meta");
    std::string tag, version;
    meta >> tag >> version;
    if (tag != "cvae-meta" || version != "v1") {
        throw FormatError(base + ".meta: unrecognized header '" + tag + " " + version + "'");
    }
    int input_dim = 0, latent_dim = 0, n_classes = 0;
    std::string key;
    while (meta >> key) {
        if (key == "input_dim") meta >> input_dim;
        else if (key == "latent_dim") meta >> latent_dim;
        else if (key == "n_classes") meta >> n_classes;
        else throw FormatError(base + ".meta: unknown key '" + key + "'");
        if (!meta) throw FormatError(base + ".meta: missing value for '" + key + "'");
    }
    CvaeModel model{DenseNet::load(base + ".encoder.dnet"), DenseNet::load(base + ".decoder.dnet"),
                    input_dim, latent_dim, n_classes};
    model.validate();
    return model;
}

}  // namespace oodkit
