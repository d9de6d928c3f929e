// Command-line driver: synth, train, fit-hmm, predict, experiment.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 config error. Diagnostics go
// to stderr; results go to files only.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mogphmm/mogphmm.hpp"

namespace fs = std::filesystem;
using namespace mogphmm;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& out_help)
{
    cmd->add_option("--config", opts.config_path, "JSON config file (missing keys take defaults)");
    cmd->add_option("--seed", opts.seed, "Base seed; overrides the config");
    cmd->add_option("--threads", opts.threads, "Worker threads (1 = single deterministic stream)");
    cmd->add_option("--out", opts.out, out_help)->required();
}

ExperimentConfig load_config(const CommonOptions& opts)
{
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) {
        Json j;
        try {
            j = read_json_file(opts.config_path);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        cfg = experiment_config_from_json(j);
    }
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.evolution.seed = *opts.seed;
    }
    if (opts.threads) {
        cfg.threads = *opts.threads;
    }
    cfg.validate();
    return cfg;
}

std::uint64_t fnv1a64_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now()
{
    std::time_t const t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Manifest {
    Manifest(std::string cmd, ExperimentConfig cfg) : command(std::move(cmd)), config(std::move(cfg)) {}

    std::string command;
    ExperimentConfig config;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::vector<std::string> warnings;
    Json seeds = Json::object();

    void write(const fs::path& path) const
    {
        Json in = Json::array();
        for (const fs::path& p : inputs) {
            in.push_back({{"path", p.string()}, {"fnv1a64", hex64(fnv1a64_file(p))}});
        }
        Json out = Json::array();
        for (const fs::path& p : outputs) {
            out.push_back(p.string());
        }
        Json j{{"tool", "mogphmm"},       {"version", kVersion}, {"command", command},
               {"config", to_json(config)}, {"seeds", seeds},    {"inputs", in},
               {"outputs", out},           {"warnings", warnings}, {"created_utc", utc_now()}};
        write_json_file(j, path);
    }
};

fs::path sidecar_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// Real-data inputs may come unlabeled; those are labeled with the configured rule.
LabeledSequence load_labeled(const fs::path& path, const LabelRule& rule, std::vector<std::string>& warnings)
{
    LabeledSequence seq = load_csv(path);
    if (!seq.has_labels()) {
        seq.labels = label_sequence(seq, rule);
        warnings.push_back(path.string() + ": no label column, labeled with the configured rule");
    }
    return seq;
}

template <class F>
void write_text(const fs::path& path, F&& writer)
{
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    writer(out);
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonOptions& opts, const std::string& raw_path, std::optional<std::size_t> per_class)
{
    ExperimentConfig const cfg = load_config(opts);
    Manifest m{"synth", cfg};
    LabeledSequence raw;
    if (raw_path.empty()) {
        raw = demo_participant({}, cfg.rule);
        m.warnings.push_back("no raw input given, used the bundled demo participant profile");
    } else {
        raw = load_labeled(raw_path, cfg.rule, m.warnings);
        m.inputs.emplace_back(raw_path);
    }
    SynthesisParams params = estimate_synthesis_params(raw, cfg.rule.score_count());
    params.samples_per_class = per_class.value_or(cfg.samples_per_class);
    params.seed = cfg.seed;
    for (int k : params.fallback_classes) {
        m.warnings.push_back("class " + std::to_string(k) +
                             " absent from raw data, synthesized from the global duration pool");
    }
    LabeledSequence const synthetic = synthesize(params);
    fs::path const out = opts.out;
    ensure_parent(out);
    save_csv(synthetic, out);
    m.outputs.push_back(out);
    m.seeds = {{"synthesis", params.seed}};
    for (const auto& w : m.warnings) {
        warn(w);
    }
    m.write(sidecar_manifest(out));
    return 0;
}

int cmd_train(const CommonOptions& opts, const std::string& synthetic_path)
{
    ExperimentConfig const cfg = load_config(opts);
    Manifest m{"train", cfg};
    LabeledSequence const data = load_csv(synthetic_path);
    (void)data.require_labels();
    m.inputs.emplace_back(synthetic_path);
    std::uint64_t const split_seed = derive_seed(cfg.seed, 1);
    Split const split = split_half(data, split_seed, cfg.split_fraction);
    for (int label : split.singleton_labels) {
        m.warnings.push_back("label " + std::to_string(label) + " has a single record; it went to the training half");
    }
    CascadeTraining const trained =
        build_cascade(to_dataset(split.train), to_dataset(split.validation), cfg.evolution,
                      cfg.rule.score_count(), cfg.threads);
    fs::path const out = opts.out;
    ensure_parent(out);
    write_json_file(to_json(trained.cascade), out);
    m.outputs.push_back(out);
    for (std::size_t k = 0; k < trained.runs.size(); ++k) {
        fs::path log = out;
        log.replace_filename(out.stem().string() + ".class" + std::to_string(k + 1) + ".log.csv");
        write_text(log, [&](std::ostream& os) {
            os << "generation,best_error,frontier_size,mean_size\n";
            for (const GenerationStats& g : trained.runs[k].log) {
                os << g.generation << ',' << format_double(g.best_error) << ',' << g.frontier_size << ','
                   << format_double(g.mean_size) << '\n';
            }
        });
        m.outputs.push_back(log);
    }
    m.seeds = {{"split", split_seed}, {"evolution_base", cfg.evolution.seed}};
    for (const auto& w : m.warnings) {
        warn(w);
    }
    m.write(sidecar_manifest(out));
    return 0;
}

int cmd_fit_hmm(const CommonOptions& opts, const std::string& real_path, const std::string& model_path)
{
    ExperimentConfig const cfg = load_config(opts);
    Manifest m{"fit-hmm", cfg};
    LabeledSequence const real = load_labeled(real_path, cfg.rule, m.warnings);
    CascadeClassifier const cascade = cascade_from_json(read_json_file(model_path));
    m.inputs = {real_path, model_path};
    ObservedSequence seq{*real.labels, classify_sequence(cascade, real.features())};
    CountingEstimate const est =
        estimate_counting(std::span<const ObservedSequence>(&seq, 1), cfg.rule.score_count(),
                          cascade.observation_count(), cfg.hmm);
    for (int r : est.undefined_transition_rows) {
        m.warnings.push_back("state " + std::to_string(r) + " has no outgoing transitions (alpha = 0)");
    }
    for (int r : est.undefined_emission_rows) {
        m.warnings.push_back("state " + std::to_string(r) + " never observed (alpha = 0)");
    }
    fs::path const out = opts.out;
    ensure_parent(out);
    write_json_file(to_json(est.model), out);
    m.outputs.push_back(out);
    for (const auto& w : m.warnings) {
        warn(w);
    }
    m.write(sidecar_manifest(out));
    return 0;
}

int cmd_predict(const CommonOptions& opts, const std::string& real_path, const std::string& model_path,
                const std::string& hmm_path)
{
    ExperimentConfig const cfg = load_config(opts);
    Manifest m{"predict", cfg};
    LabeledSequence const real = load_csv(real_path);
    CascadeClassifier const cascade = cascade_from_json(read_json_file(model_path));
    HmmModel const hmm = hmm_from_json(read_json_file(hmm_path));
    m.inputs = {real_path, model_path, hmm_path};
    std::vector<int> const observations = classify_sequence(cascade, real.features());
    std::vector<int> const states = predict_status(hmm, cascade, real.features());
    fs::path const out = opts.out;
    write_text(out, [&](std::ostream& os) {
        os << "date,observation,predicted_state" << (real.labels ? ",label,match" : "") << '\n';
        for (std::size_t i = 0; i < real.size(); ++i) {
            os << format_iso_date(real.records[i].date) << ',' << observations[i] << ',' << states[i];
            if (real.labels) {
                int const label = (*real.labels)[i];
                os << ',' << label << ',' << (label == states[i] ? 1 : 0);
            }
            os << '\n';
        }
    });
    m.outputs.push_back(out);
    m.write(sidecar_manifest(out));
    return 0;
}

int cmd_experiment(const CommonOptions& opts, const std::vector<std::string>& raw_paths)
{
    ExperimentConfig const cfg = load_config(opts);
    Manifest m{"experiment", cfg};
    std::vector<LabeledSequence> participants;
    if (raw_paths.empty()) {
        participants.push_back(demo_participant({}, cfg.rule));
        m.warnings.push_back("no raw input given, used the bundled demo participant profile");
    }
    for (const std::string& p : raw_paths) {
        participants.push_back(load_labeled(p, cfg.rule, m.warnings));
        m.inputs.emplace_back(p);
    }
    EvaluationReport report;
    for (std::size_t p = 0; p < participants.size(); ++p) {
        append_report(report, run_noise_grid(cfg, participants[p], p));
    }
    report.summary = rank_models(std::move(report.summary));
    for (auto& w : report.warnings) {
        m.warnings.push_back(std::move(w));
    }

    fs::path const dir = opts.out;
    fs::create_directories(dir);
    write_text(dir / "report.csv", [&](std::ostream& os) { write_report_csv(report, os); });
    write_text(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(report, os); });
    write_text(dir / "rankings.csv", [&](std::ostream& os) { write_rankings_csv(report, os); });
    write_text(dir / "predictions.csv", [&](std::ostream& os) { write_predictions_csv(report, os); });
    m.outputs = {dir / "report.csv", dir / "summary.csv", dir / "rankings.csv", dir / "predictions.csv"};
    m.seeds = {{"base", cfg.seed}, {"noise", cfg.noise.seed}};
    for (const auto& w : m.warnings) {
        warn(w);
    }
    m.write(dir / "manifest.json");
    return 0;
}

int cmd_demo_data(const CommonOptions& opts)
{
    ExperimentConfig const cfg = load_config(opts);
    DemoProfile profile;
    if (opts.seed) {
        profile.seed = *opts.seed;
    }
    Manifest m{"demo-data", cfg};
    fs::path const out = opts.out;
    ensure_parent(out);
    save_csv(demo_participant(profile, cfg.rule), out);
    m.outputs.push_back(out);
    m.seeds = {{"profile", profile.seed}};
    m.write(sidecar_manifest(out));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-stage GP-cascade / HMM activity-status predictor"};
    app.require_subcommand(0, 1);
    bool print_default = false;
    app.add_flag("--print-default-config", print_default, "Print the full default config as JSON and exit");

    CommonOptions synth_opts, train_opts, fit_opts, predict_opts, exp_opts, demo_opts;
    std::string synth_raw;
    std::optional<std::size_t> synth_per_class;
    auto* synth = app.add_subcommand("synth", "Write balanced synthetic training data");
    add_common(synth, synth_opts, "Output CSV");
    synth->add_option("--raw", synth_raw, "Raw participant CSV (default: bundled demo profile)")
        ;
    synth->add_option("--samples-per-class", synth_per_class, "Records per class");

    std::string train_input;
    auto* train = app.add_subcommand("train", "Evolve the cascade classifier on synthetic data");
    add_common(train, train_opts, "Output cascade JSON");
    train->add_option("synthetic_csv", train_input, "Labeled synthetic CSV")->required();

    std::string fit_real, fit_model;
    auto* fit = app.add_subcommand("fit-hmm", "Estimate the HMM from labeled real data");
    add_common(fit, fit_opts, "Output HMM JSON");
    fit->add_option("real_csv", fit_real, "Real participant CSV")->required();
    fit->add_option("--model", fit_model, "Cascade JSON")->required();

    std::string pred_real, pred_model, pred_hmm;
    auto* predict = app.add_subcommand("predict", "Decode the activity status of each day");
    add_common(predict, predict_opts, "Output CSV");
    predict->add_option("real_csv", pred_real, "Participant CSV")->required();
    predict->add_option("--model", pred_model, "Cascade JSON")->required();
    predict->add_option("--hmm", pred_hmm, "HMM JSON")->required();

    std::vector<std::string> exp_inputs;
    auto* experiment = app.add_subcommand("experiment", "Run the noise-grid cross-validation protocol");
    add_common(experiment, exp_opts, "Output directory");
    experiment->add_option("raw_csv", exp_inputs, "Participant CSVs (default: bundled demo profile)")
        ;

    auto* demo = app.add_subcommand("demo-data", "Write the bundled demo participant as CSV");
    add_common(demo, demo_opts, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int const code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (print_default) {
            std::cout << to_json(ExperimentConfig{}).dump(2) << '\n';
            return 0;
        }
        if (synth->parsed()) {
            return cmd_synth(synth_opts, synth_raw, synth_per_class);
        }
        if (train->parsed()) {
            return cmd_train(train_opts, train_input);
        }
        if (fit->parsed()) {
            return cmd_fit_hmm(fit_opts, fit_real, fit_model);
        }
        if (predict->parsed()) {
            return cmd_predict(predict_opts, pred_real, pred_model, pred_hmm);
        }
        if (experiment->parsed()) {
            return cmd_experiment(exp_opts, exp_inputs);
        }
        if (demo->parsed()) {
            return cmd_demo_data(demo_opts);
        }
        std::cerr << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
