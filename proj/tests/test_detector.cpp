#include "oodkit/detector.hpp"

#include "oodkit/data_io.hpp"
#include "oodkit/error.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

using namespace oodkit;

namespace {

// Constant classifier: zero weights, bias = ln(target distribution). The
// softmax then emits exactly that distribution for every input.
DetectorModel constant_model(const std::vector<double>& probs, int n_inlier,
                             DetectorVariant variant, int input_dim) {
    const int n_out = static_cast<int>(probs.size());
    Layer layer;
    layer.weights = Tensor::leaf(Matrix::Zero(n_out, input_dim));
    Matrix bias(1, n_out);
    for (int i = 0; i < n_out; ++i) bias(0, i) = std::log(probs[static_cast<std::size_t>(i)]);
    layer.bias = Tensor::leaf(bias);
    layer.act = Activation::softmax;

    DetectorModel model;
    model.net = DenseNet::from_layers({layer});
    model.n_inlier_classes = n_inlier;
    model.variant = variant;
    model.validate();
    return model;
}

OodBatch batch_from(const LabeledDataset& data) {
    OodBatch batch;
    batch.samples = data.samples;
    batch.types.assign(static_cast<std::size_t>(data.n()), OodType::type2);
    batch.source_class.assign(static_cast<std::size_t>(data.n()), 0);
    batch.beta.assign(static_cast<std::size_t>(data.n()), 0.0);
    batch.source_index.assign(static_cast<std::size_t>(data.n()), -1);
    return batch;
}

}  // namespace

TEST_CASE("variant names round-trip") {
    CHECK(to_string(DetectorVariant::nplus1) == "nplus1");
    CHECK(to_string(DetectorVariant::plain_n) == "plain_n");
    CHECK(detector_variant_from_string("nplus1") == DetectorVariant::nplus1);
    CHECK(detector_variant_from_string("plain_n") == DetectorVariant::plain_n);
    CHECK_THROWS_AS(detector_variant_from_string("other"), FormatError);
}

TEST_CASE("make_classifier_net produces relu hidden layers under a softmax head") {
    Rng rng(1);
    DenseNet net = make_classifier_net(4, {8, 6}, 3, rng);
    CHECK(net.input_dim() == 4);
    CHECK(net.output_dim() == 3);
    REQUIRE(net.layer_count() == 3);
    CHECK(net.layers()[0].act == Activation::relu);
    CHECK(net.layers()[1].act == Activation::relu);
    CHECK(net.layers()[2].act == Activation::softmax);
}

TEST_CASE("validate enforces width and softmax head") {
    Rng rng(2);
    DetectorModel model;
    model.net = make_classifier_net(4, {8}, 5, rng);
    model.n_inlier_classes = 4;
    model.variant = DetectorVariant::nplus1;
    CHECK_NOTHROW(model.validate());

    model.variant = DetectorVariant::plain_n;  // now wants width 4, net has 5
    CHECK_THROWS_AS(model.validate(), DimensionError);

    model.variant = DetectorVariant::nplus1;
    model.net.layers().back().act = Activation::sigmoid;
    CHECK_THROWS_AS(model.validate(), ContractError);
}

TEST_CASE("scoring rules on a constant net match closed forms") {
    // 4 inlier classes + OOD class, fixed output distribution
    DetectorModel uniform = constant_model({0.2, 0.2, 0.2, 0.2, 0.2}, 4,
                                           DetectorVariant::nplus1, 3);
    Matrix x = Matrix::Random(6, 3);
    for (double s : score_ood_class_prob(uniform, x)) {
        CHECK(s == doctest::Approx(0.2).epsilon(1e-12));
    }
    for (double s : score_max_inlier_prob(uniform, x)) {
        CHECK(s == doctest::Approx(-0.2).epsilon(1e-12));
    }

    DetectorModel plain = constant_model({0.7, 0.2, 0.1}, 3, DetectorVariant::plain_n, 3);
    for (double s : score_max_softmax(plain, x)) {
        CHECK(s == doctest::Approx(-0.7).epsilon(1e-12));
    }
}

TEST_CASE("scoring rules are tied to their variant") {
    DetectorModel nplus1 = constant_model({0.25, 0.25, 0.25, 0.25}, 3,
                                          DetectorVariant::nplus1, 2);
    DetectorModel plain = constant_model({0.5, 0.3, 0.2}, 3, DetectorVariant::plain_n, 2);
    Matrix x = Matrix::Random(2, 2);
    CHECK_THROWS_AS(score_ood_class_prob(plain, x), ContractError);
    CHECK_THROWS_AS(score_max_softmax(nplus1, x), ContractError);
    CHECK_THROWS_AS(score_odin(nplus1, x, 1000.0, 0.0), ContractError);
    CHECK_THROWS_AS(score_odin(plain, x, 0.0, 0.0), ContractError);  // temperature
    CHECK_THROWS_AS(score_max_softmax(plain, Matrix::Random(2, 5)), DimensionError);
}

TEST_CASE("inlier accuracy counts OOD routing as an error") {
    // always predicts class 0
    DetectorModel biased = constant_model({0.9, 0.05, 0.05}, 2, DetectorVariant::nplus1, 2);
    LabeledDataset data;
    data.samples = Matrix::Random(3, 2);
    data.labels = {0, 0, 1};
    data.range = ValueRange::unbounded;
    data.name = "acc";
    CHECK(inlier_accuracy(biased, data) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // always predicts the OOD class: every inlier is wrong
    DetectorModel ood_happy = constant_model({0.05, 0.05, 0.9}, 2, DetectorVariant::nplus1, 2);
    CHECK(inlier_accuracy(ood_happy, data) == 0.0);
}

TEST_CASE("odin with unit temperature and no perturbation equals max-softmax") {
    Rng rng(3);
    DetectorModel model;
    model.net = make_classifier_net(3, {8}, 2, rng);
    model.n_inlier_classes = 2;
    model.variant = DetectorVariant::plain_n;

    Matrix x = Matrix::Random(5, 3);
    const auto base = score_max_softmax(model, x);
    const auto odin = score_odin(model, x, 1.0, 0.0);
    REQUIRE(base.size() == odin.size());
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(odin[i] == base[i]);
}

TEST_CASE("high temperature flattens odin scores toward the uniform floor") {
    Rng rng(4);
    DetectorModel model;
    model.net = make_classifier_net(3, {8}, 4, rng);
    model.n_inlier_classes = 4;
    model.variant = DetectorVariant::plain_n;

    Matrix x = Matrix::Random(5, 3);
    const auto t1 = score_odin(model, x, 1.0, 0.0);
    const auto t1000 = score_odin(model, x, 1000.0, 0.0);
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(std::abs(t1000[i] + 0.25) <= std::abs(t1[i] + 0.25) + 1e-15);
    }
}

TEST_CASE("odin perturbation matches the closed form on an identity-logit net") {
    // single softmax layer, weights I: logits(x) = x
    Layer layer;
    layer.weights = Tensor::leaf(Matrix::Identity(2, 2));
    layer.bias = Tensor::leaf(Matrix::Zero(1, 2));
    layer.act = Activation::softmax;
    DetectorModel model;
    model.net = DenseNet::from_layers({layer});
    model.n_inlier_classes = 2;
    model.variant = DetectorVariant::plain_n;

    Matrix x(1, 2);
    x << 0.6, 0.4;
    const double eps = 0.01;
    const double temperature = 2.5;
    // predicted class 0; input gradient of CE = (p0 - 1, p1), signs (-1, +1),
    // so x_adv = (0.6 + eps, 0.4 - eps) and the logit gap grows by 2*eps
    const double gap = (0.2 + 2.0 * eps) / temperature;
    const double want = -1.0 / (1.0 + std::exp(-gap));
    const auto got = score_odin(model, x, temperature, eps);
    REQUIRE(got.size() == 1);
    CHECK(got[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("training separates toy octants and flags held-out OOD") {
    Rng data_rng(5);
    LabeledDataset toy = gen_toy3d(150, data_rng);
    auto [train, test] = split(toy, 0.8, data_rng);
    OodBatch ood = batch_from(gen_toy3d_offoctant(240, data_rng));

    Rng rng(6);
    DenseNet net = make_classifier_net(3, {16}, 3, rng);  // 2 classes + OOD
    DetectorTrainConfig cfg;
    cfg.epochs = 80;
    cfg.batch_size = 32;
    cfg.opt.kind = OptimizerKind::adam;
    cfg.opt.learning_rate = 0.01;
    std::vector<double> loss_log;
    DetectorModel model = train_detector(net, train, ood, cfg, rng, nullptr, &loss_log);

    CHECK(model.variant == DetectorVariant::nplus1);
    CHECK(model.n_inlier_classes == 2);
    REQUIRE_FALSE(loss_log.empty());
    CHECK(loss_log.back() < loss_log.front());

    CHECK(inlier_accuracy(model, test) >= 0.9);

    Rng eval_rng(7);
    LabeledDataset ood_eval = gen_toy3d_offoctant(200, eval_rng);
    const auto s_in = score_ood_class_prob(model, test.samples);
    const auto s_out = score_ood_class_prob(model, ood_eval.samples);
    CHECK(auroc(s_in, s_out) >= 0.9);
}

TEST_CASE("empty OOD batch falls back to a plain classifier with a warning") {
    Rng data_rng(8);
    LabeledDataset toy = gen_toy3d(40, data_rng);
    OodBatch empty;
    empty.samples = Matrix(0, 3);

    Rng rng(9);
    DenseNet net = make_classifier_net(3, {8}, 3, rng);  // (n+1)-wide on purpose
    DetectorTrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    std::vector<std::string> warnings;
    DetectorModel model = train_detector(net, toy, empty, cfg, rng, &warnings);

    CHECK(model.variant == DetectorVariant::plain_n);
    CHECK(model.net.output_dim() == 2);  // OOD row dropped
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings.front().find("plain") != std::string::npos);
    CHECK_NOTHROW(score_max_softmax(model, toy.samples));
}

TEST_CASE("zero OOD class weight is legal and keeps the nplus1 shape") {
    Rng data_rng(10);
    LabeledDataset toy = gen_toy3d(30, data_rng);
    OodBatch ood = batch_from(gen_toy3d_offoctant(20, data_rng));
    Rng rng(11);
    DenseNet net = make_classifier_net(3, {8}, 3, rng);
    DetectorTrainConfig cfg;
    cfg.epochs = 2;
    cfg.ood_class_weight = 0.0;
    DetectorModel model = train_detector(net, toy, ood, cfg, rng);
    CHECK(model.variant == DetectorVariant::nplus1);
    CHECK(model.ood_class_weight == 0.0);
}

TEST_CASE("training contract violations throw") {
    Rng rng(12);
    DenseNet net = make_classifier_net(3, {8}, 3, rng);
    DetectorTrainConfig cfg;
    cfg.epochs = 1;

    LabeledDataset unlabeled;
    unlabeled.samples = Matrix::Random(4, 3);
    unlabeled.labels = {0, 1, -1, 0};
    unlabeled.name = "u";
    OodBatch none;
    none.samples = Matrix(0, 3);
    CHECK_THROWS_AS(train_detector(net, unlabeled, none, cfg, rng), ContractError);

    Rng data_rng(13);
    LabeledDataset toy = gen_toy3d(20, data_rng);
    OodBatch wrong_dim = batch_from(gen_uniform_noise(5, 4, data_rng));
    CHECK_THROWS_AS(train_detector(net, toy, wrong_dim, cfg, rng), DimensionError);

    DetectorTrainConfig bad = cfg;
    bad.ood_class_weight = -0.1;
    OodBatch ood = batch_from(gen_toy3d_offoctant(10, data_rng));
    CHECK_THROWS_AS(train_detector(net, toy, ood, bad, rng), ContractError);

    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_detector(net, toy, ood, bad, rng), ContractError);
}

TEST_CASE("training is reproducible from its seed") {
    Rng data_rng(14);
    LabeledDataset toy = gen_toy3d(30, data_rng);
    OodBatch ood = batch_from(gen_toy3d_offoctant(30, data_rng));
    auto run = [&]() {
        Rng rng(55);
        DenseNet net = make_classifier_net(3, {8}, 3, rng);
        DetectorTrainConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 16;
        return train_detector(net, toy, ood, cfg, rng);
    };
    DetectorModel a = run();
    DetectorModel b = run();
    const auto pa = a.net.parameters();
    const auto pb = b.net.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK((pa[i].value() - pb[i].value()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("score vectors serialize with ids and full precision") {
    ScoreVector sv = make_score_vector({0.25, 1.0 / 3.0}, "rule_x");
    CHECK(sv.ids == std::vector<int>{0, 1});
    testsup::TempDir dir("scores");
    save_scores_csv(sv, dir.file("s.csv"));

    std::ifstream in(dir.file("s.csv"));
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "id,score,rule");
    REQUIRE(std::getline(in, line));
    CHECK(line == "0,0.25,rule_x");
    REQUIRE(std::getline(in, line));
    CHECK(line == "1,0.33333333333333331,rule_x");

    ScoreVector bad = make_score_vector({std::nan("")}, "r");
    CHECK_THROWS_AS(save_scores_csv(bad, dir.file("bad.csv")), ContractError);
}

TEST_CASE("detector save/load round-trips model and metadata") {
    Rng rng(15);
    DetectorModel model;
    model.net = make_classifier_net(4, {6}, 3, rng);
    model.n_inlier_classes = 2;
    model.ood_class_weight = 0.125;
    model.variant = DetectorVariant::nplus1;

    testsup::TempDir dir("det");
    save_detector(model, dir.file("d"));
    DetectorModel back = load_detector(dir.file("d"));
    CHECK(back.n_inlier_classes == 2);
    CHECK(back.ood_class_weight == 0.125);
    CHECK(back.variant == DetectorVariant::nplus1);

    Matrix x = Matrix::Random(3, 4);
    const Matrix pa = model.net.infer(x);
    const Matrix pb = back.net.infer(x);
    CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(load_detector(dir.file("missing")), FormatError);
    {
        std::ofstream meta(dir.file("d.meta"));
        meta << "other-meta v9\n";
    }
    CHECK_THROWS_AS(load_detector(dir.file("d")), FormatError);
}
