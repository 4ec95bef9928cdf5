// Command-line driver for the OOD generation + detection pipelines.

#include "oodkit/data_io.hpp"
#include "oodkit/detector.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--override", args.overrides, "config override key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
}

oodkit::ExperimentConfig resolve_config(const CommonArgs& args,
                                        const oodkit::ExperimentConfig& defaults) {
    oodkit::ExperimentConfig config =
        args.config_path.empty() ? defaults : oodkit::load_config(args.config_path);
    for (const auto& kv : args.overrides) oodkit::apply_override(config, kv);
    if (!args.seed.empty()) oodkit::apply_override(config, "seed=" + args.seed);
    if (!args.out_dir.empty()) oodkit::apply_override(config, "out_dir=" + args.out_dir);
    config.validate();
    return config;
}

oodkit::ExperimentConfig toy_defaults() {
    oodkit::ExperimentConfig config;
    config.in_dataset = "toy3d";
    config.n_classes = 2;
    config.n_samples = 2000;
    config.latent_dim = 2;
    config.cvae_hidden = {32, 32};
    config.classifier_hidden = {32};
    config.cvae_epochs = 150;
    config.classifier_epochs = 150;
    config.cvae_beta_kl = 0.05;
    config.type1_count = 600;
    config.type2_per_class = 300;
    config.ood_roster = {"offoctant", "sphere"};
    config.ood_eval_count = 500;
    return config;
}

void print_reports(const std::vector<oodkit::MetricsReport>& reports) {
    std::printf("%s", oodkit::metrics_table(reports).c_str());
    // Tag the strongest rule per (in, ood) pairing by AUROC.
    std::map<std::pair<std::string, std::string>, const oodkit::MetricsReport*> best;
    for (const auto& r : reports) {
        auto& slot = best[{r.in_name, r.ood_name}];
        if (slot == nullptr || r.auroc > slot->auroc) slot = &r;
    }
    for (const auto& [key, r] : best) {
        std::printf("best rule for %s vs %s: %s (auroc %.4f)\n", key.first.c_str(),
                    key.second.c_str(), r->rule.c_str(), r->auroc);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-pronged OOD sample generation and n+1 detection pipelines"};
    app.require_subcommand(1);

    CommonArgs train_cvae_args, gen_ood_args, train_det_args, evaluate_args, baselines_args,
        toy_args;

    CLI::App* cmd_train_cvae =
        app.add_subcommand("train-cvae", "Train the conditional VAE and save it");
    add_common(cmd_train_cvae, train_cvae_args);

    CLI::App* cmd_gen_ood =
        app.add_subcommand("gen-ood", "Generate Type I and Type II OOD batches");
    add_common(cmd_gen_ood, gen_ood_args);

    CLI::App* cmd_train_det =
        app.add_subcommand("train-detector", "Train the n+1-class detector");
    add_common(cmd_train_det, train_det_args);

    CLI::App* cmd_evaluate =
        app.add_subcommand("evaluate", "Full pipeline: train, generate, detect, score");
    add_common(cmd_evaluate, evaluate_args);

    CLI::App* cmd_baselines =
        app.add_subcommand("baselines", "Max-softmax and ODIN baselines on the same splits");
    add_common(cmd_baselines, baselines_args);

    CLI::App* cmd_toy = app.add_subcommand(
        "toy3d", "Sphere-octant toy: pipeline + baselines + plot data");
    add_common(cmd_toy, toy_args);

    std::vector<std::string> report_paths;
    CLI::App* cmd_report = app.add_subcommand("report", "Render metrics CSVs as a table");
    cmd_report->add_option("paths", report_paths, "metrics CSV files")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train_cvae->parsed()) {
            const auto config = resolve_config(train_cvae_args, {});
            const auto data = oodkit::make_in_dataset(config);
            const auto [train, test] = oodkit::pipeline_split(config, data);
            oodkit::stage_cvae(config, train);
            std::printf("cvae saved under %s\n", oodkit::artifact_stem(config, "cvae").c_str());
        } else if (cmd_gen_ood->parsed()) {
            const auto config = resolve_config(gen_ood_args, {});
            const auto data = oodkit::make_in_dataset(config);
            const auto [train, test] = oodkit::pipeline_split(config, data);
            const auto model = oodkit::stage_cvae(config, train);
            const auto [type1, type2] = oodkit::stage_oodgen(config, model, train);
            std::printf("type1: %d samples, type2: %d samples under %s\n", type1.n(), type2.n(),
                        config.out_dir.c_str());
        } else if (cmd_train_det->parsed()) {
            const auto config = resolve_config(train_det_args, {});
            const auto data = oodkit::make_in_dataset(config);
            const auto [train, test] = oodkit::pipeline_split(config, data);
            const auto model = oodkit::stage_cvae(config, train);
            const auto [type1, type2] = oodkit::stage_oodgen(config, model, train);
            const auto detector =
                oodkit::stage_detector(config, train, oodkit::concat(type1, type2));
            std::printf("held-out inlier accuracy: %.4f\n",
                        oodkit::inlier_accuracy(detector, test));
        } else if (cmd_evaluate->parsed()) {
            const auto config = resolve_config(evaluate_args, {});
            print_reports(oodkit::run_pipeline(config));
            std::printf("metrics written to %s.csv\n",
                        oodkit::artifact_stem(config, "metrics").c_str());
        } else if (cmd_baselines->parsed()) {
            const auto config = resolve_config(baselines_args, {});
            print_reports(oodkit::run_baselines(config));
            std::printf("metrics written to %s.csv\n",
                        oodkit::artifact_stem(config, "baselines").c_str());
        } else if (cmd_toy->parsed()) {
            const auto config = resolve_config(toy_args, toy_defaults());
            auto reports = oodkit::run_pipeline(config);
            const auto baseline_reports = oodkit::run_baselines(config);
            reports.insert(reports.end(), baseline_reports.begin(), baseline_reports.end());
            oodkit::emit_toy_plotdata(config);
            print_reports(reports);
            std::printf("plot data written to %s.csv\n",
                        oodkit::artifact_stem(config, "toyplot").c_str());
        } else if (cmd_report->parsed()) {
            std::vector<oodkit::MetricsReport> reports;
            for (const auto& path : report_paths) {
                const auto part = oodkit::read_metrics_csv(path);
                reports.insert(reports.end(), part.begin(), part.end());
            }
            print_reports(reports);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
