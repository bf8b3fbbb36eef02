// Experiment runner: synthesize datasets, train/evaluate models 1-8, and
// collate run reports.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bfd/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenerateArgs {
    std::size_t n_per_class = 200;
    std::size_t len = 10000;
    std::uint64_t seed = 0;
    double noise = 0.1;
    double amp_developing = 0.5;
    double amp_faulty = 2.0;
    std::string out;
    std::string format = "f32";
};

int cmd_generate(const GenerateArgs& a, bool quiet) {
    const auto signals = bfd::generate_synthetic_dataset(
        a.n_per_class, a.len, a.seed, a.noise, {0.0, a.amp_developing, a.amp_faulty});
    fs::create_directories(a.out);
    std::ofstream manifest(fs::path(a.out) / "manifest.csv");
    if (!manifest) throw bfd::IoError("cannot write manifest.csv in " + a.out);
    manifest << "path,label\n";
    for (std::size_t i = 0; i < signals.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "signal_%04zu.%s", i,
                      a.format == "csv" ? "csv" : "f32");
        const auto path = fs::path(a.out) / name;
        if (a.format == "csv") {
            std::ofstream out(path);
            out.precision(17);
            for (double v : signals[i].samples) out << v << '\n';
        } else {
            bfd::write_f32le_signal(path.string(), signals[i].samples);
        }
        manifest << name << ',' << bfd::to_string(signals[i].label) << '\n';
    }
    if (!quiet) {
        std::cout << "generated " << signals.size() << " signals of length " << a.len << " in "
                  << a.out << "\n";
    }
    return 0;
}

bfd::ConfigMap flags_to_map(const CLI::App* cmd) {
    // Only flags the user actually passed enter the overlay, so file values
    // survive unless overridden.
    bfd::ConfigMap m;
    auto put = [&](const std::string& flag, const std::string& key) {
        const auto* opt = cmd->get_option_no_throw(flag);
        if (opt != nullptr && opt->count() > 0) m[key] = opt->results().front();
    };
    put("--model", "model_id");
    put("--data", "data");
    put("--seed", "seed");
    put("--out", "out_dir");
    put("--epochs", "epochs");
    put("--timesteps", "timesteps");
    put("--batch-size", "batch_size");
    put("--learning-rate", "learning_rate");
    put("--epsilon-min", "epsilon_min");
    put("--window-len", "window_len");
    put("--overlap", "overlap");
    put("--segment-len", "segment_len");
    put("--buffer-capacity", "buffer_capacity");
    put("--target-sync-interval", "target_sync_interval");
    put("--reward-matrix", "reward_matrix");
    put("--train-fraction", "train_fraction");
    return m;
}

void add_train_flags(CLI::App* cmd) {
    cmd->add_option("--model", "model id, 1-8");
    cmd->add_option("--data", "dataset manifest.csv");
    cmd->add_option("--seed", "random seed");
    cmd->add_option("--out", "output directory");
    cmd->add_option("--epochs", "training epochs");
    cmd->add_option("--timesteps", "environment steps for timestep models (4, 8)");
    cmd->add_option("--batch-size", "minibatch size");
    cmd->add_option("--learning-rate", "Adam learning rate");
    cmd->add_option("--epsilon-min", "epsilon-greedy floor");
    cmd->add_option("--window-len", "window length for models 1-4");
    cmd->add_option("--overlap", "window overlap fraction");
    cmd->add_option("--segment-len", "segment length for models 5-8");
    cmd->add_option("--buffer-capacity", "replay buffer capacity");
    cmd->add_option("--target-sync-interval", "gradient steps between target-net syncs, 0=off");
    cmd->add_option("--reward-matrix", "default | table6 | path to 3-line CSV");
    cmd->add_option("--train-fraction", "training split fraction");
}

bfd::ExperimentConfig resolve_train_config(const CLI::App* cmd, const std::string& config_path) {
    bfd::ConfigMap merged;
    if (!config_path.empty()) merged = bfd::parse_config_file(config_path);
    merged = bfd::merge_configs(merged, flags_to_map(cmd));
    auto cfg = bfd::config_from_map(merged);
    if (cfg.data_path.empty()) throw bfd::InvalidParam("--data (or config key 'data') is required");
    cfg.data_path = fs::weakly_canonical(cfg.data_path).string();
    return cfg;
}

int cmd_train(const CLI::App* cmd, const std::string& config_path, bool quiet) {
    auto cfg = resolve_train_config(cmd, config_path);
    if (cfg.out_dir.empty()) throw bfd::InvalidParam("--out (or config key 'out_dir') is required");
    const auto signals = bfd::load_dataset(bfd::load_manifest(cfg.data_path));
    const auto data = bfd::prepare_data(cfg, signals);
    const auto outcome = bfd::run_experiment(cfg, data);
    bfd::write_run_artifacts(cfg, data, outcome);
    if (!quiet) {
        std::printf("model %d  accuracy %.4f  macro_f1 %.4f  wall %.1fs\n", cfg.model_id,
                    outcome.report.accuracy, outcome.report.macro.f1, outcome.wall_time_s);
    }
    return 0;
}

int cmd_evaluate(const CLI::App* cmd, const std::string& run_dir, const std::string& checkpoint,
                 const std::string& config_path, const std::string& report_out, bool quiet) {
    bfd::ExperimentConfig cfg;
    std::string ckpt_path;
    std::optional<bfd::Normalizer> stored_norm;
    if (!run_dir.empty()) {
        cfg = bfd::config_from_map(bfd::parse_config_file((fs::path(run_dir) / "config.resolved").string()));
        ckpt_path = (fs::path(run_dir) / "checkpoint.bin").string();
        const auto norm_path = fs::path(run_dir) / "normalizer.csv";
        if (fs::exists(norm_path)) stored_norm = bfd::read_normalizer(norm_path.string());
    } else {
        if (checkpoint.empty()) {
            throw bfd::InvalidParam("evaluate needs --run <dir> or --checkpoint <file>");
        }
        cfg = resolve_train_config(cmd, config_path);
        ckpt_path = checkpoint;
    }
    const auto net = bfd::load_checkpoint(ckpt_path);
    const auto signals = bfd::load_dataset(bfd::load_manifest(cfg.data_path));
    auto data = bfd::prepare_data(cfg, signals);
    if (stored_norm) {
        // Re-apply the training-time normalizer so evaluation matches the run.
        data.normalizer = *stored_norm;
    }
    if (data.test.empty()) throw bfd::InvalidParam("test set is empty");
    if (net.num_features() != data.test.front().features.size()) {
        throw bfd::ShapeMismatch("checkpoint expects " + std::to_string(net.num_features()) +
                                 " features but data provides " +
                                 std::to_string(data.test.front().features.size()));
    }
    const auto predictions = bfd::evaluate_model(net, data.test);
    std::vector<bfd::FaultClass> actuals;
    for (const auto& e : data.test) actuals.push_back(e.label);
    const auto report = bfd::build_report(cfg.model_id, cfg.seed, bfd::config_digest(cfg),
                                          predictions, actuals);
    const auto text = bfd::report_to_json(report);
    if (report_out.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(report_out);
        if (!out) throw bfd::IoError("cannot write " + report_out);
        out << text;
        if (!quiet) std::printf("accuracy %.4f  macro_f1 %.4f\n", report.accuracy, report.macro.f1);
    }
    return 0;
}

struct ReportRow {
    int model_id;
    std::uint64_t seed;
    double accuracy, precision, recall, f1;
    std::string time;
};

int cmd_report(const std::vector<std::string>& dirs, const std::string& csv_out) {
    std::vector<ReportRow> rows;
    for (const auto& dir : dirs) {
        const auto path = fs::path(dir) / "report.json";
        std::ifstream in(path);
        if (!in) throw bfd::MissingReport(dir);
        json j = json::parse(in);
        ReportRow r;
        r.model_id = j.at("model_id").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.precision = j.at("macro").at("precision").get<double>();
        r.recall = j.at("macro").at("recall").get<double>();
        r.f1 = j.at("macro").at("f1").get<double>();
        r.time = "-";
        std::ifstream t(fs::path(dir) / "wall_time.txt");
        if (t) {
            std::string line;
            if (std::getline(t, line) && !line.empty()) r.time = line + "s";
        }
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) { return a.model_id < b.model_id; });

    // Duplicate model ids keep both rows, disambiguated by seed.
    std::map<int, int> id_count;
    for (const auto& r : rows) id_count[r.model_id] += 1;

    std::printf("%-16s %-12s %-10s %-8s %-10s %s\n", "Model", "Accuracy (%)", "Precision",
                "Recall", "F-1 Score", "Training time");
    std::string csv = "model,accuracy_percent,precision,recall,f1,training_time\n";
    for (const auto& r : rows) {
        std::string label = "Model " + std::to_string(r.model_id);
        if (id_count[r.model_id] > 1) label += " (seed " + std::to_string(r.seed) + ")";
        std::printf("%-16s %-12.2f %-10.2f %-8.2f %-10.2f %s\n", label.c_str(),
                    100.0 * r.accuracy, r.precision, r.recall, r.f1, r.time.c_str());
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f,%.2f,%s\n", label.c_str(),
                      100.0 * r.accuracy, r.precision, r.recall, r.f1, r.time.c_str());
        csv += buf;
    }
    if (!csv_out.empty()) {
        std::ofstream out(csv_out);
        if (!out) throw bfd::IoError("cannot write " + csv_out);
        out << csv;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bearing fault diagnosis experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    bool quiet = false;
    app.add_option("--config", config_path, "flat key = value config file")->expected(1);
    app.add_flag("--quiet", quiet, "suppress progress output");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "synthesize a labeled dataset");
    generate->add_option("--n-per-class", gen.n_per_class, "signals per class");
    generate->add_option("--len", gen.len, "samples per signal");
    generate->add_option("--seed", gen.seed, "random seed");
    generate->add_option("--noise", gen.noise, "Gaussian noise sigma");
    generate->add_option("--amp-developing", gen.amp_developing, "developing-fault impulse amplitude");
    generate->add_option("--amp-faulty", gen.amp_faulty, "faulty impulse amplitude");
    generate->add_option("--out", gen.out, "output directory")->required();
    generate->add_option("--format", gen.format, "f32 or csv")
        ->check(CLI::IsMember({"f32", "csv"}));

    auto* train = app.add_subcommand("train", "train one of models 1-8");
    add_train_flags(train);

    std::string run_dir, checkpoint, report_out;
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint, no learning");
    evaluate->add_option("--run", run_dir, "run directory written by train");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file");
    evaluate->add_option("--report-out", report_out, "write report JSON here instead of stdout");
    add_train_flags(evaluate);

    std::vector<std::string> report_dirs;
    std::string report_csv;
    auto* report = app.add_subcommand("report", "tabulate run reports");
    report->add_option("dirs", report_dirs, "run directories")->required();
    report->add_option("--csv", report_csv, "also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen, quiet);
        if (train->parsed()) return cmd_train(train, config_path, quiet);
        if (evaluate->parsed()) {
            return cmd_evaluate(evaluate, run_dir, checkpoint, config_path, report_out, quiet);
        }
        if (report->parsed()) return cmd_report(report_dirs, report_csv);
    } catch (const bfd::InvalidParam& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
