#include "oodkit/pipeline.hpp"

#include "oodkit/error.hpp"
#include "oodkit/offmanifold.hpp"
#include "oodkit/onmanifold.hpp"
#include "oodkit/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

namespace oodkit {

namespace {

const std::set<std::string> kInDatasets{"synth_digits", "toy3d", "idx"};
const std::set<std::string> kOodNames{"gaussian_noise", "uniform_noise", "sphere", "offoctant"};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += v[i];
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': cannot parse integer from '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': cannot parse number from '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ContractError("config key '" + key + "': cannot parse bool from '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : split_csv(value)) {
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
}

void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "in_dataset") c.in_dataset = value;
    else if (key == "in_images") c.in_images = value;
    else if (key == "in_labels") c.in_labels = value;
    else if (key == "n_samples") c.n_samples = static_cast<int>(parse_int(key, value));
    else if (key == "train_fraction") c.train_fraction = parse_double(key, value);
    else if (key == "n_classes") c.n_classes = static_cast<int>(parse_int(key, value));
    else if (key == "latent_dim") c.latent_dim = static_cast<int>(parse_int(key, value));
    else if (key == "cvae_hidden") c.cvae_hidden = parse_int_list(key, value);
    else if (key == "classifier_hidden") c.classifier_hidden = parse_int_list(key, value);
    else if (key == "cvae_epochs") c.cvae_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "classifier_epochs") c.classifier_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "cvae_beta_kl") c.cvae_beta_kl = parse_double(key, value);
    else if (key == "optimizer") c.optimizer = optimizer_kind_from_string(value);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
    else if (key == "beta_min") c.beta_min = parse_double(key, value);
    else if (key == "beta_max") c.beta_max = parse_double(key, value);
    else if (key == "type1_count") c.type1_count = static_cast<int>(parse_int(key, value));
    else if (key == "type1_per_sample") c.type1_per_sample = static_cast<int>(parse_int(key, value));
    else if (key == "type2_per_class") c.type2_per_class = static_cast<int>(parse_int(key, value));
    else if (key == "type2_pooled") c.type2_pooled = parse_bool(key, value);
    else if (key == "ood_class_weight") c.ood_class_weight = parse_double(key, value);
    else if (key == "ood_roster") c.ood_roster = split_csv(value);
    else if (key == "ood_eval_count") c.ood_eval_count = static_cast<int>(parse_int(key, value));
    else if (key == "odin_temperature") c.odin_temperature = parse_double(key, value);
    else if (key == "odin_eps") c.odin_eps = parse_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "out_dir") c.out_dir = value;
    else throw ContractError("unknown config key '" + key + "'");
}

// Canonical rendering minus seed/out_dir: the hash input, shared across a
// seed sweep writing into any directory.
std::string hashed_text(const ExperimentConfig& c) {
    std::string out;
    const auto line = [&out](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    line("in_dataset", c.in_dataset);
    line("in_images", c.in_images);
    line("in_labels", c.in_labels);
    line("n_samples", std::to_string(c.n_samples));
    line("train_fraction", format_double(c.train_fraction));
    line("n_classes", std::to_string(c.n_classes));
    line("latent_dim", std::to_string(c.latent_dim));
    line("cvae_hidden", join_ints(c.cvae_hidden));
    line("classifier_hidden", join_ints(c.classifier_hidden));
    line("cvae_epochs", std::to_string(c.cvae_epochs));
    line("classifier_epochs", std::to_string(c.classifier_epochs));
    line("batch_size", std::to_string(c.batch_size));
    line("cvae_beta_kl", format_double(c.cvae_beta_kl));
    line("optimizer", to_string(c.optimizer));
    line("learning_rate", format_double(c.learning_rate));
    line("beta_min", format_double(c.beta_min));
    line("beta_max", format_double(c.beta_max));
    line("type1_count", std::to_string(c.type1_count));
    line("type1_per_sample", std::to_string(c.type1_per_sample));
    line("type2_per_class", std::to_string(c.type2_per_class));
    line("type2_pooled", c.type2_pooled ? "true" : "false");
    line("ood_class_weight", format_double(c.ood_class_weight));
    line("ood_roster", join_strings(c.ood_roster));
    line("ood_eval_count", std::to_string(c.ood_eval_count));
    line("odin_temperature", format_double(c.odin_temperature));
    line("odin_eps", format_double(c.odin_eps));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << content;
    if (!os) throw FormatError("short write to " + path.string());
}

OptimizerConfig optimizer_config(const ExperimentConfig& c) {
    OptimizerConfig opt;
    opt.kind = c.optimizer;
    opt.learning_rate = c.learning_rate;
    return opt;
}

void print_warnings(const std::vector<std::string>& warnings, const char* stage) {
    for (const auto& w : warnings) std::fprintf(stderr, "[%s] warning: %s\n", stage, w.c_str());
}

template <typename F>
auto run_stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;  // already tagged by an inner stage
    } catch (const std::exception& e) {
        throw StageError(std::string("stage ") + name + " failed: " + e.what());
    }
}

struct EvalContext {
    LabeledDataset test;
    double sphere_radius = 0.0;
    std::string in_name;
};

// Scores the held-out inliers and each roster OOD set under the given
// rules, writing one score CSV per (rule, dataset).
std::vector<MetricsReport> evaluate_rules(
    const ExperimentConfig& config, const EvalContext& ctx,
    const std::vector<std::pair<std::string, std::function<std::vector<double>(const Matrix&)>>>&
        rules,
    const std::string& stage_tag) {
    std::vector<MetricsReport> reports;
    std::vector<std::pair<std::string, LabeledDataset>> ood_sets;
    for (const auto& name : config.ood_roster) {
        ood_sets.emplace_back(
            name, make_ood_eval_dataset(config, name, ctx.test.dim(), ctx.sphere_radius));
    }
    for (const auto& [rule, score_fn] : rules) {
        const std::vector<double> in_scores = score_fn(ctx.test.samples);
        save_scores_csv(make_score_vector(in_scores, rule),
                        artifact_stem(config, stage_tag + "scores-" + rule + "-in") + ".csv");
        for (const auto& [ood_name, ood_data] : ood_sets) {
            const std::vector<double> out_scores = score_fn(ood_data.samples);
            save_scores_csv(
                make_score_vector(out_scores, rule),
                artifact_stem(config, stage_tag + "scores-" + rule + "-" + ood_name) + ".csv");
            reports.push_back(
                compute_metrics(in_scores, out_scores, rule, ctx.in_name, ood_name));
        }
    }
    return reports;
}

void write_run_manifest(const ExperimentConfig& config, const std::string& stage) {
    std::string text = "run-manifest v1\n";
    text += "config_hash " + config_hash(config) + "\n";
    text += "seed " + std::to_string(config.seed) + "\n";
    text += "artifact_formats dnet=1 oodb=1 cvae-meta=1 detector-meta=1\n";
    text += "eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
            std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) + "\n";
    text += "--- config ---\n";
    text += canonical_text(config);
    write_text(artifact_stem(config, stage) + ".txt", text);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!kInDatasets.contains(in_dataset)) {
        throw ContractError("in_dataset '" + in_dataset + "' is not one of synth_digits|toy3d|idx");
    }
    if (in_dataset == "idx") {
        if (in_images.empty() || in_labels.empty()) {
            throw ContractError("idx mode needs in_images and in_labels paths");
        }
        if (!std::filesystem::exists(in_images)) {
            throw ContractError("in_images path does not exist: " + in_images);
        }
        if (!std::filesystem::exists(in_labels)) {
            throw ContractError("in_labels path does not exist: " + in_labels);
        }
    } else if (n_samples <= 0) {
        throw ContractError("n_samples must be positive");
    }
    if (in_dataset == "toy3d" && n_classes != 2) {
        throw ContractError("toy3d has exactly 2 classes; set n_classes = 2");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ContractError("train_fraction must lie in (0,1)");
    }
    if (n_classes < 1) throw ContractError("n_classes must be positive");
    if (latent_dim < 1) throw ContractError("latent_dim must be positive");
    for (int w : cvae_hidden) {
        if (w < 1) throw ContractError("cvae_hidden widths must be positive");
    }
    for (int w : classifier_hidden) {
        if (w < 1) throw ContractError("classifier_hidden widths must be positive");
    }
    if (cvae_epochs < 0 || classifier_epochs < 0) throw ContractError("epochs must be >= 0");
    if (batch_size < 1) throw ContractError("batch_size must be positive");
    if (cvae_beta_kl < 0.0) throw ContractError("cvae_beta_kl must be nonnegative");
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
    if (beta_min < 0.0 || !(beta_min <= beta_max)) {
        throw ContractError("need 0 <= beta_min <= beta_max");
    }
    if (type1_count < 0 || type1_per_sample < 1 || type2_per_class < 0) {
        throw ContractError("type1_count/type2_per_class must be >= 0, type1_per_sample >= 1");
    }
    if (ood_class_weight < 0.0) throw ContractError("ood_class_weight must be nonnegative");
    for (const auto& name : ood_roster) {
        if (!kOodNames.contains(name)) {
            throw ContractError("ood_roster entry '" + name +
                                "' is not one of gaussian_noise|uniform_noise|sphere|offoctant");
        }
    }
    if (ood_eval_count < 1) throw ContractError("ood_eval_count must be positive");
    if (!(odin_temperature > 0.0)) throw ContractError("odin_temperature must be positive");
    if (out_dir.empty()) throw ContractError("out_dir must not be empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config " + path.string());
    ExperimentConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        }
        set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

void apply_override(ExperimentConfig& config, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos) {
        throw ContractError("override '" + key_value + "' is not key=value");
    }
    set_key(config, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)));
}

std::string canonical_text(const ExperimentConfig& config) {
    return hashed_text(config) + "seed = " + std::to_string(config.seed) + "\n" +
           "out_dir = " + config.out_dir + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = hashed_text(config);
    const std::uint64_t h = fnv1a64(text);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string artifact_stem(const ExperimentConfig& config, const std::string& stage) {
    return (std::filesystem::path(config.out_dir) /
            (stage + "-" + config_hash(config) + "-s" + std::to_string(config.seed)))
        .string();
}

LabeledDataset make_in_dataset(const ExperimentConfig& config) {
    config.validate();
    Rng rng = derive_rng(config.seed, "data");
    if (config.in_dataset == "synth_digits") {
        return gen_synth_digits(config.n_samples, rng, config.n_classes);
    }
    if (config.in_dataset == "toy3d") {
        return gen_toy3d(std::max(1, config.n_samples / 2), rng);
    }
    LabeledDataset data = load_idx(config.in_images, config.in_labels);
    data.name = "idx";
    if (data.n_classes() > config.n_classes) {
        throw ContractError("idx labels span " + std::to_string(data.n_classes()) +
                            " classes but n_classes = " + std::to_string(config.n_classes));
    }
    return data;
}

std::pair<LabeledDataset, LabeledDataset> pipeline_split(const ExperimentConfig& config,
                                                         const LabeledDataset& data) {
    Rng rng = derive_rng(config.seed, "split");
    std::vector<std::string> warnings;
    auto parts = split(data, config.train_fraction, rng, &warnings);
    print_warnings(warnings, "split");
    return parts;
}

LabeledDataset make_ood_eval_dataset(const ExperimentConfig& config, const std::string& name,
                                     int dim, double sphere_radius) {
    Rng rng = derive_rng(config.seed, "eval:" + name);
    if (name == "gaussian_noise") return gen_gaussian_noise(config.ood_eval_count, dim, rng);
    if (name == "uniform_noise") return gen_uniform_noise(config.ood_eval_count, dim, rng);
    if (name == "sphere") return gen_sphere_ood(config.ood_eval_count, dim, sphere_radius, rng);
    if (name == "offoctant") {
        if (dim != 3) {
            throw ContractError("offoctant OOD needs 3-dimensional data, got dim " +
                                std::to_string(dim));
        }
        return gen_toy3d_offoctant(config.ood_eval_count, rng);
    }
    throw ContractError("unknown OOD eval dataset '" + name + "'");
}

CvaeModel stage_cvae(const ExperimentConfig& config, const LabeledDataset& train) {
    return run_stage("cvae", [&] {
        std::filesystem::create_directories(config.out_dir);
        const std::string stem = artifact_stem(config, "cvae");
        if (std::filesystem::exists(stem + ".meta") &&
            std::filesystem::exists(stem + ".encoder.dnet") &&
            std::filesystem::exists(stem + ".decoder.dnet")) {
            return load_cvae(stem);
        }
        Rng init_rng = derive_rng(config.seed, "cvae-init");
        std::vector<int> decoder_hidden(config.cvae_hidden.rbegin(), config.cvae_hidden.rend());
        CvaeModel model = make_cvae(train.dim(), config.latent_dim, config.n_classes,
                                    config.cvae_hidden, decoder_hidden, init_rng, train.range);
        CvaeTrainConfig tc;
        tc.epochs = config.cvae_epochs;
        tc.batch_size = config.batch_size;
        tc.beta_kl = config.cvae_beta_kl;
        tc.opt = optimizer_config(config);
        Rng train_rng = derive_rng(config.seed, "cvae-train");
        const auto log = train_cvae(model, train, tc, train_rng);
        if (!log.empty() && log.back() >= log.front()) {
            std::fprintf(stderr, "[cvae] warning: loss did not improve (%.6f -> %.6f)\n",
                         log.front(), log.back());
        }
        save_cvae(model, stem);
        return model;
    });
}

std::pair<OodBatch, OodBatch> stage_oodgen(const ExperimentConfig& config, const CvaeModel& model,
                                           const LabeledDataset& train) {
    return run_stage("oodgen", [&] {
        std::filesystem::create_directories(config.out_dir);
        const std::string stem1 = artifact_stem(config, "type1");
        const std::string stem2 = artifact_stem(config, "type2");
        OodBatch type1;
        if (std::filesystem::exists(stem1 + ".f64") &&
            std::filesystem::exists(stem1 + ".manifest.csv")) {
            type1 = load_ood_batch(stem1);
        } else {
            // Perturb a deterministic subset of the training split.
            std::vector<int> order(static_cast<std::size_t>(train.n()));
            std::iota(order.begin(), order.end(), 0);
            Rng subset_rng = derive_rng(config.seed, "type1-subset");
            std::shuffle(order.begin(), order.end(), subset_rng);
            const int count = std::min(config.type1_count, train.n());
            std::vector<int> chosen(order.begin(), order.begin() + count);
            std::sort(chosen.begin(), chosen.end());

            LabeledDataset subset;
            subset.samples.resize(count, train.dim());
            subset.labels.resize(static_cast<std::size_t>(count));
            for (int k = 0; k < count; ++k) {
                subset.samples.row(k) = train.samples.row(chosen[static_cast<std::size_t>(k)]);
                subset.labels[static_cast<std::size_t>(k)] =
                    train.labels[static_cast<std::size_t>(chosen[static_cast<std::size_t>(k)])];
            }
            subset.range = train.range;
            subset.name = train.name + ".type1src";

            Type1Config t1;
            t1.beta_min = config.beta_min;
            t1.beta_max = config.beta_max;
            t1.per_sample = config.type1_per_sample;
            type1 = generate_type1(model, subset, t1, config.seed);
            // Repoint source indices at the original training rows.
            for (auto& idx : type1.source_index) {
                idx = chosen[static_cast<std::size_t>(idx / config.type1_per_sample)];
            }
            print_warnings(type1.warnings, "type1");
            save_ood_batch(type1, stem1);
        }

        OodBatch type2;
        if (std::filesystem::exists(stem2 + ".f64") &&
            std::filesystem::exists(stem2 + ".manifest.csv")) {
            type2 = load_ood_batch(stem2);
        } else {
            std::vector<LatentClassStats> stats;
            if (config.type2_pooled) {
                stats.push_back(fit_latent_gaussian(model, train, -1));
            } else {
                for (int c = 0; c < config.n_classes; ++c) {
                    stats.push_back(fit_latent_gaussian(model, train, c));
                }
            }
            type2 = generate_type2(model, stats, config.type2_per_class, config.seed);
            print_warnings(type2.warnings, "type2");
            save_ood_batch(type2, stem2);
        }
        return std::make_pair(std::move(type1), std::move(type2));
    });
}

DetectorModel stage_detector(const ExperimentConfig& config, const LabeledDataset& train,
                             const OodBatch& ood) {
    return run_stage("detector", [&] {
        std::filesystem::create_directories(config.out_dir);
        const std::string stem = artifact_stem(config, "detector");
        if (std::filesystem::exists(stem + ".dnet") && std::filesystem::exists(stem + ".meta")) {
            return load_detector(stem);
        }
        Rng init_rng = derive_rng(config.seed, "detector-init");
        DenseNet net = make_classifier_net(train.dim(), config.classifier_hidden,
                                           config.n_classes + 1, init_rng);
        DetectorTrainConfig tc;
        tc.ood_class_weight = config.ood_class_weight;
        tc.epochs = config.classifier_epochs;
        tc.batch_size = config.batch_size;
        tc.opt = optimizer_config(config);
        Rng train_rng = derive_rng(config.seed, "detector-train");
        std::vector<std::string> warnings;
        DetectorModel model = train_detector(std::move(net), train, ood, tc, train_rng, &warnings);
        print_warnings(warnings, "detector");
        save_detector(model, stem);
        return model;
    });
}

DetectorModel stage_plain(const ExperimentConfig& config, const LabeledDataset& train) {
    return run_stage("plain", [&] {
        std::filesystem::create_directories(config.out_dir);
        const std::string stem = artifact_stem(config, "plain");
        if (std::filesystem::exists(stem + ".dnet") && std::filesystem::exists(stem + ".meta")) {
            return load_detector(stem);
        }
        Rng init_rng = derive_rng(config.seed, "plain-init");
        DenseNet net =
            make_classifier_net(train.dim(), config.classifier_hidden, config.n_classes, init_rng);
        DetectorTrainConfig tc;
        tc.ood_class_weight = config.ood_class_weight;
        tc.epochs = config.classifier_epochs;
        tc.batch_size = config.batch_size;
        tc.opt = optimizer_config(config);
        Rng train_rng = derive_rng(config.seed, "plain-train");
        DetectorModel model = train_detector(std::move(net), train, OodBatch{}, tc, train_rng);
        save_detector(model, stem);
        return model;
    });
}

std::vector<MetricsReport> run_pipeline(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    const LabeledDataset data = run_stage("data", [&] { return make_in_dataset(config); });
    const auto [train, test] = run_stage("split", [&] { return pipeline_split(config, data); });
    const CvaeModel cvae = stage_cvae(config, train);
    const auto [type1, type2] = stage_oodgen(config, cvae, train);
    const DetectorModel detector = stage_detector(config, train, concat(type1, type2));

    return run_stage("evaluate", [&] {
        EvalContext ctx{test, max_row_norm(train), data.name + ".test"};
        const std::vector<
            std::pair<std::string, std::function<std::vector<double>(const Matrix&)>>>
            rules{{"ood_class_prob",
                   [&](const Matrix& x) { return score_ood_class_prob(detector, x); }},
                  {"neg_max_inlier_prob",
                   [&](const Matrix& x) { return score_max_inlier_prob(detector, x); }}};
        auto reports = evaluate_rules(config, ctx, rules, "");
        write_metrics_csv(reports, artifact_stem(config, "metrics") + ".csv");
        write_metrics_json(reports, artifact_stem(config, "metrics") + ".json");
        write_run_manifest(config, "manifest");
        return reports;
    });
}

std::vector<MetricsReport> run_baselines(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    const LabeledDataset data = run_stage("data", [&] { return make_in_dataset(config); });
    const auto [train, test] = run_stage("split", [&] { return pipeline_split(config, data); });
    const DetectorModel plain = stage_plain(config, train);

    return run_stage("baselines", [&] {
        EvalContext ctx{test, max_row_norm(train), data.name + ".test"};
        const std::vector<
            std::pair<std::string, std::function<std::vector<double>(const Matrix&)>>>
            rules{{"neg_max_softmax",
                   [&](const Matrix& x) { return score_max_softmax(plain, x); }},
                  {"neg_odin",
                   [&](const Matrix& x) {
                       return score_odin(plain, x, config.odin_temperature, config.odin_eps);
                   }}};
        auto reports = evaluate_rules(config, ctx, rules, "baseline-");
        write_metrics_csv(reports, artifact_stem(config, "baselines") + ".csv");
        write_metrics_json(reports, artifact_stem(config, "baselines") + ".json");
        write_run_manifest(config, "baselines-manifest");
        return reports;
    });
}

void emit_toy_plotdata(const ExperimentConfig& config) {
    config.validate();
    if (config.in_dataset != "toy3d") {
        throw ContractError("emit_toy_plotdata needs a toy3d config, got in_dataset = " +
                            config.in_dataset);
    }
    const std::string stem1 = artifact_stem(config, "type1");
    const std::string stem2 = artifact_stem(config, "type2");
    if (!std::filesystem::exists(stem1 + ".f64") || !std::filesystem::exists(stem2 + ".f64")) {
        throw ContractError("emit_toy_plotdata: OOD batches not found under " + config.out_dir +
                            "; run the pipeline first");
    }
    const OodBatch type1 = load_ood_batch(stem1);
    const OodBatch type2 = load_ood_batch(stem2);
    const LabeledDataset data = make_in_dataset(config);

    // Orthonormal basis of the plane orthogonal to (1,1,1)/sqrt(3).
    Vector p(3), q(3);
    p << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0;
    q << 1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0);

    std::string cloud = "x,y,z,tag\n";
    std::string plane = "u,v,tag\n";
    const auto emit = [&](const Vector& v, const std::string& tag) {
        cloud += format_double(v(0)) + "," + format_double(v(1)) + "," + format_double(v(2)) +
                 "," + tag + "\n";
        plane += format_double(p.dot(v)) + "," + format_double(q.dot(v)) + "," + tag + "\n";
    };
    for (int i = 0; i < data.n(); ++i) {
        emit(data.samples.row(i).transpose(),
             data.labels[static_cast<std::size_t>(i)] == 0 ? "class0" : "class1");
    }
    for (int i = 0; i < type1.n(); ++i) emit(type1.samples.row(i).transpose(), "type1");
    for (int i = 0; i < type2.n(); ++i) emit(type2.samples.row(i).transpose(), "type2");

    write_text(artifact_stem(config, "toyplot") + ".csv", cloud);
    write_text(artifact_stem(config, "toyplot2d") + ".csv", plane);
}

}  // namespace oodkit
