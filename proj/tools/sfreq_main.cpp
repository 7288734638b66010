#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sfreq/benchmark.hpp"
#include "sfreq/metrics.hpp"
#include "sfreq/serialize.hpp"
#include "sfreq/spectral_estimators.hpp"
#include "sfreq/training.hpp"

using namespace sfreq;
using nlohmann::json;

namespace {

std::string iso_now() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::invalid_argument("cannot write file: " + path);
}

// Every run leaves a record of what it did. Timestamps make manifests
// non-reproducible by design, so they live next to the outputs instead of
// inside them.
struct Manifest {
    json body;

    Manifest(const std::string& command, json config) {
        body["command"] = command;
        body["config"] = std::move(config);
        if (body["config"].contains("seed")) body["seed"] = body["config"]["seed"];
        body["version"] = SFREQ_VERSION;
        body["started"] = iso_now();
    }

    void write(const std::string& path) {
        body["finished"] = iso_now();
        write_text(path, body.dump(2) + "\n");
    }

    void write_stderr() {
        body["finished"] = iso_now();
        std::cerr << body.dump(2) << "\n";
    }
};

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
    int n_signals = 1000;
    int n_samples = 50;
    int m_max = 10;
    double sigma_min = 0.0;
    double sigma_max = 1.0;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

void run_generate(const GenerateOptions& o) {
    GeneratorConfig cfg = GeneratorConfig::for_n(o.n_samples);
    cfg.m_max = o.m_max;
    cfg.sigma_min = o.sigma_min;
    cfg.sigma_max = o.sigma_max;
    cfg.seed = o.seed;

    Manifest manifest("generate", json{{"n_signals", o.n_signals},
                                       {"n_samples", o.n_samples},
                                       {"m_max", o.m_max},
                                       {"sigma_min", o.sigma_min},
                                       {"sigma_max", o.sigma_max},
                                       {"seed", o.seed},
                                       {"threads", o.threads},
                                       {"out", o.out}});
    Dataset ds;
    ds.config = cfg;
    ds.records = generate_records(cfg, o.n_signals, o.threads);
    save_dataset(o.out, ds);
    manifest.write(o.out + ".manifest.json");
}

// ---------------------------------------------------------------- training

struct TrainOptions {
    std::string data;
    std::string out;
    std::string fr_model;              // counter training only
    std::string variant = "deepfreq";  // fr training only
    int grid = 1000;                   // fr training only
    int m_max = 0;                     // counter training only; 0: dataset's
    TrainConfig train;
    bool resume = false;
    int threads = 1;
};

json train_flags_json(const TrainOptions& o) {
    return json{{"data", o.data},         {"out", o.out},
                {"n_signals", o.train.n_signals},
                {"epochs", o.train.epochs},
                {"batch_size", o.train.batch_size},
                {"lr", o.train.lr},
                {"sigma_min", o.train.sigma_min},
                {"sigma_max", o.train.sigma_max},
                {"val_fraction", o.train.val_fraction},
                {"eval_every", o.train.eval_every},
                {"seed", o.train.seed},  {"resume", o.resume},
                {"threads", o.threads}};
}

TrainResult run_training_io(const TrainOptions& o,
                            const std::function<TrainResult(const TrainIo&)>& body) {
    std::ofstream log(o.out + ".log.jsonl", std::ios::trunc);
    if (!log) throw std::invalid_argument("cannot write file: " + o.out + ".log.jsonl");
    TrainIo io;
    io.log = &log;
    io.checkpoint_path = o.out + ".ckpt";
    io.resume = o.resume;
    io.threads = o.threads;
    return body(io);
}

void run_train_fr(const TrainOptions& o) {
    json config = train_flags_json(o);
    config["variant"] = o.variant;
    config["grid"] = o.grid;
    Manifest manifest("train-fr", config);

    const Dataset ds = load_dataset(o.data);
    FrNetConfig cfg;
    cfg.variant = o.variant;
    cfg.n_samples = ds.config.n_samples;
    cfg.grid = o.grid;
    FrNet<float> model(cfg);
    model.init(o.train.seed);

    const TrainResult result = run_training_io(
        o, [&](const TrainIo& io) { return train_fr(model, ds.records, o.train, io); });
    save_fr_model(o.out, model,
                  TrainMeta{o.train.seed, o.train.epochs, result.final_train_loss,
                            result.best_val_loss});
    manifest.write(o.out + ".manifest.json");
}

void run_train_counter(const TrainOptions& o) {
    json config = train_flags_json(o);
    config["fr_model"] = o.fr_model;
    config["m_max"] = o.m_max;
    Manifest manifest("train-counter", config);

    const Dataset ds = load_dataset(o.data);
    LoadedFrModel fr = load_fr_model(o.fr_model);
    CounterConfig cfg;
    cfg.grid = fr.model.config.grid;
    cfg.m_max = o.m_max > 0 ? o.m_max : ds.config.m_max;
    CounterNet<float> model(cfg);
    model.init(o.train.seed);

    const TrainResult result = run_training_io(o, [&](const TrainIo& io) {
        return train_counter(model, fr.model, ds.records, o.train, io);
    });
    save_counter_model(o.out, model,
                       TrainMeta{o.train.seed, o.train.epochs, result.final_train_loss,
                                 result.best_val_loss});
    manifest.write(o.out + ".manifest.json");
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
    std::string input;
    std::string method = "learned";
    std::string fr_model;
    std::string counter_model;
    std::string count_rule;
    int known_m = 0;
    int window = 25;
    int grid = 1000;
    bool with_representation = false;
};

void run_estimate(const EstimateOptions& o) {
    Manifest manifest("estimate", json{{"input", o.input},
                                       {"method", o.method},
                                       {"fr_model", o.fr_model},
                                       {"counter_model", o.counter_model},
                                       {"count_rule", o.count_rule},
                                       {"known_m", o.known_m},
                                       {"window", o.window},
                                       {"grid", o.grid},
                                       {"with_representation", o.with_representation}});

    const Dataset ds = load_dataset(o.input);
    std::optional<LoadedFrModel> fr;
    std::optional<LoadedCounterModel> counter;
    Method method;
    Grid grid{o.grid};
    if (o.method == "periodogram") {
        method = periodogram_method(grid, o.count_rule.empty() ? "aic" : o.count_rule, o.window);
    } else if (o.method == "music") {
        method = music_method(grid, o.count_rule.empty() ? "mdl" : o.count_rule, o.window);
    } else if (o.method == "learned") {
        if (o.fr_model.empty())
            throw std::invalid_argument("estimate: --method learned needs --fr-model");
        fr.emplace(load_fr_model(o.fr_model));
        if (!o.counter_model.empty()) counter.emplace(load_counter_model(o.counter_model));
        grid = Grid{fr->model.config.grid};
        method = learned_method("learned", fr->model, counter ? &counter->model : nullptr);
    } else {
        throw std::invalid_argument("estimate: unknown method: " + o.method);
    }

    json out = json::array();
    for (const SampleRecord& rec : ds.records) {
        const Estimate est = method.run(rec.noisy, o.known_m > 0 ? o.known_m : -1);
        std::vector<double> sorted = est.frequencies;
        std::sort(sorted.begin(), sorted.end());
        json entry{{"frequencies", sorted}, {"count", est.count}};
        if (o.with_representation) {
            if (fr) {
                entry["representation"] = fr_forward(fr->model, rec.noisy).values;
            } else if (o.method == "periodogram") {
                entry["representation"] = periodogram(rec.noisy, grid).values;
            } else {
                const CovarianceEstimate cov = build_covariance(rec.noisy, o.window);
                entry["representation"] = music_pseudospectrum(cov, est.count, grid).values;
            }
        }
        out.push_back(std::move(entry));
    }
    std::cout << out.dump(2) << "\n";
    manifest.write_stderr();
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkOptions {
    std::vector<std::string> methods = {"all"};
    std::string protocol = "both";
    std::vector<double> sigmas = {0.1, 0.2, 0.5};
    std::string out;
    std::string fr_model;
    std::string psnet_model;
    std::string counter_model;
    std::string count_rule;
    int n_records = 1000;
    int n_samples = 50;
    int m_max = 10;
    int window = 25;
    int grid = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
    bool per_signal_fnr = false;
};

std::vector<std::string> expand_methods(const BenchmarkOptions& o) {
    std::vector<std::string> tokens;
    for (const std::string& token : o.methods) {
        if (token == "all") {
            tokens.push_back("periodogram");
            tokens.push_back("music");
            if (!o.fr_model.empty()) tokens.push_back("deepfreq");
            if (!o.psnet_model.empty()) tokens.push_back("psnet");
        } else {
            tokens.push_back(token);
        }
    }
    std::vector<std::string> unique;
    for (const std::string& token : tokens)
        if (std::find(unique.begin(), unique.end(), token) == unique.end())
            unique.push_back(token);
    return unique;
}

void run_benchmark_cmd(const BenchmarkOptions& o) {
    Manifest manifest("benchmark", json{{"methods", o.methods},
                                        {"protocol", o.protocol},
                                        {"sigmas", o.sigmas},
                                        {"out", o.out},
                                        {"fr_model", o.fr_model},
                                        {"psnet_model", o.psnet_model},
                                        {"counter_model", o.counter_model},
                                        {"count_rule", o.count_rule},
                                        {"n_records", o.n_records},
                                        {"n_samples", o.n_samples},
                                        {"m_max", o.m_max},
                                        {"window", o.window},
                                        {"grid", o.grid},
                                        {"seed", o.seed},
                                        {"threads", o.threads},
                                        {"per_signal_fnr", o.per_signal_fnr}});

    std::vector<Protocol> protocols;
    if (o.protocol == "known-m") {
        protocols = {Protocol::KnownM};
    } else if (o.protocol == "full") {
        protocols = {Protocol::Full};
    } else if (o.protocol == "both") {
        protocols = {Protocol::KnownM, Protocol::Full};
    } else {
        throw std::invalid_argument("benchmark: unknown protocol: " + o.protocol);
    }

    std::optional<LoadedFrModel> deepfreq;
    std::optional<LoadedFrModel> psnet;
    std::optional<LoadedCounterModel> counter;
    if (!o.counter_model.empty()) counter.emplace(load_counter_model(o.counter_model));

    const auto load_checked = [&](const std::string& path) {
        LoadedFrModel loaded = load_fr_model(path);
        if (loaded.model.config.n_samples != o.n_samples)
            throw std::invalid_argument(
                "benchmark: model " + path + " expects " +
                std::to_string(loaded.model.config.n_samples) +
                " samples but the test set uses " + std::to_string(o.n_samples));
        if (counter && counter->model.config.grid != loaded.model.config.grid)
            throw std::invalid_argument("benchmark: counter grid does not match " + path);
        return loaded;
    };

    const Grid grid{o.grid};
    std::vector<Method> methods;
    for (const std::string& token : expand_methods(o)) {
        if (token == "periodogram") {
            methods.push_back(periodogram_method(
                grid, o.count_rule.empty() ? "aic" : o.count_rule, o.window));
        } else if (token == "music") {
            methods.push_back(
                music_method(grid, o.count_rule.empty() ? "mdl" : o.count_rule, o.window));
        } else if (token == "deepfreq") {
            if (o.fr_model.empty())
                throw std::invalid_argument("benchmark: method deepfreq needs --fr-model");
            deepfreq.emplace(load_checked(o.fr_model));
            methods.push_back(learned_method("deepfreq", deepfreq->model,
                                             counter ? &counter->model : nullptr));
        } else if (token == "psnet") {
            if (o.psnet_model.empty())
                throw std::invalid_argument("benchmark: method psnet needs --psnet-model");
            psnet.emplace(load_checked(o.psnet_model));
            methods.push_back(
                learned_method("psnet", psnet->model, counter ? &counter->model : nullptr));
        } else {
            throw std::invalid_argument("benchmark: unknown method: " + token);
        }
    }

    BenchmarkConfig cfg;
    cfg.generator = GeneratorConfig::for_n(o.n_samples);
    cfg.generator.m_max = o.m_max;
    cfg.generator.seed = o.seed;
    cfg.n_records = o.n_records;
    cfg.sigmas = o.sigmas;
    cfg.per_signal_fnr = o.per_signal_fnr;
    cfg.threads = o.threads;

    const std::vector<EvalReport> reports = run_benchmark(methods, cfg, protocols);
    write_text(o.out + ".csv", report_csv(reports));
    write_text(o.out + ".json", report_json(reports));
    write_text(o.out + ".timing.csv", timing_csv(reports));
    manifest.write(o.out + ".manifest.json");
}

// ---------------------------------------------------------------- inspect

struct InspectOptions {
    std::string fr_model;
    std::string out;
};

void run_inspect_encoder(const InspectOptions& o) {
    Manifest manifest("inspect-encoder", json{{"fr_model", o.fr_model}, {"out", o.out}});

    LoadedFrModel fr = load_fr_model(o.fr_model);
    const Grid grid{fr.model.config.grid};
    const std::vector<Tensor<double>> maps = inspect_encoder(fr.model, grid);
    if (fr.model.config.variant == "psnet")
        std::cerr << "note: the psnet encoder is a single map; writing one matrix\n";

    for (std::size_t c = 0; c < maps.size(); ++c) {
        const Tensor<double>& map = maps[c];
        const int rows = map.shape[0];
        const int cols = map.shape[1];
        std::string csv;
        for (int r = 0; r < rows; ++r) {
            for (int g = 0; g < cols; ++g) {
                if (g > 0) csv += ',';
                csv += format_value(map.data[static_cast<std::size_t>(r * cols + g)]);
            }
            csv += '\n';
        }
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, ".ch%03zu.csv", c);
        write_text(o.out + suffix, csv);
    }
    manifest.write(o.out + ".manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multisinusoidal frequency estimation: learned representations and "
                 "classical baselines"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sfreq ") + SFREQ_VERSION);

    GenerateOptions gen;
    CLI::App* generate = app.add_subcommand("generate", "Generate a seeded dataset file");
    generate->add_option("--n-signals", gen.n_signals, "Number of records")
        ->capture_default_str();
    generate->add_option("--n-samples", gen.n_samples, "Measurements per record")
        ->capture_default_str();
    generate->add_option("--m-max", gen.m_max, "Largest component count")
        ->capture_default_str();
    generate->add_option("--sigma-min", gen.sigma_min, "Lower noise level")
        ->capture_default_str();
    generate->add_option("--sigma-max", gen.sigma_max, "Upper noise level")
        ->capture_default_str();
    generate->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    generate->add_option("--threads", gen.threads, "Worker threads")->capture_default_str();
    generate->add_option("--out", gen.out, "Output dataset path")->required();
    generate->callback([&] { run_generate(gen); });

    const auto add_train_flags = [](CLI::App* cmd, TrainOptions& o) {
        cmd->add_option("--data", o.data, "Training dataset")->required();
        cmd->add_option("--out", o.out, "Output model path")->required();
        cmd->add_option("--n-signals", o.train.n_signals,
                        "Records to train on (0: every record)")
            ->capture_default_str();
        cmd->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--batch", o.train.batch_size, "Batch size")->capture_default_str();
        cmd->add_option("--lr", o.train.lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--sigma-min", o.train.sigma_min, "Lower training noise level")
            ->capture_default_str();
        cmd->add_option("--sigma-max", o.train.sigma_max, "Upper training noise level")
            ->capture_default_str();
        cmd->add_option("--val-fraction", o.train.val_fraction,
                        "Trailing fraction held out for validation")
            ->capture_default_str();
        cmd->add_option("--eval-every", o.train.eval_every, "Epochs between validations")
            ->capture_default_str();
        cmd->add_option("--seed", o.train.seed, "Initialization and noise seed")
            ->capture_default_str();
        cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
        cmd->add_flag("--resume", o.resume, "Continue from <out>.ckpt");
    };

    TrainOptions fr_opts;
    CLI::App* train_fr_cmd =
        app.add_subcommand("train-fr", "Train a frequency-representation network");
    add_train_flags(train_fr_cmd, fr_opts);
    train_fr_cmd->add_option("--variant", fr_opts.variant, "Architecture: deepfreq or psnet")
        ->capture_default_str();
    train_fr_cmd->add_option("--grid", fr_opts.grid, "Representation grid size")
        ->capture_default_str();
    train_fr_cmd->callback([&] { run_train_fr(fr_opts); });

    TrainOptions counter_opts;
    CLI::App* train_counter_cmd =
        app.add_subcommand("train-counter", "Train a component-counting network");
    add_train_flags(train_counter_cmd, counter_opts);
    train_counter_cmd
        ->add_option("--fr-model", counter_opts.fr_model,
                     "Frozen representation model to feed the counter")
        ->required();
    train_counter_cmd
        ->add_option("--m-max", counter_opts.m_max, "Count ceiling (0: the dataset's)")
        ->capture_default_str();
    train_counter_cmd->callback([&] { run_train_counter(counter_opts); });

    EstimateOptions est;
    CLI::App* estimate =
        app.add_subcommand("estimate", "Estimate frequencies for every record of a dataset");
    estimate->add_option("--input", est.input, "Dataset to estimate from")->required();
    estimate->add_option("--method", est.method, "learned, periodogram, or music")
        ->capture_default_str();
    estimate->add_option("--fr-model", est.fr_model, "Representation model (learned method)");
    estimate->add_option("--counter-model", est.counter_model,
                         "Counting model (learned method)");
    estimate->add_option("--known-m", est.known_m,
                         "Return exactly this many frequencies (0: let the method choose)")
        ->capture_default_str();
    estimate->add_option("--count-rule", est.count_rule,
                         "Order rule for classical methods: aic, mdl, or sorte");
    estimate->add_option("--window", est.window, "Covariance window")->capture_default_str();
    estimate->add_option("--grid", est.grid, "Grid size for classical methods")
        ->capture_default_str();
    estimate->add_flag("--with-representation", est.with_representation,
                       "Include the frequency representation per record");
    estimate->callback([&] { run_estimate(est); });

    BenchmarkOptions bench;
    CLI::App* benchmark =
        app.add_subcommand("benchmark", "Compare methods over seeded test sets");
    benchmark
        ->add_option("--methods", bench.methods,
                     "Comma list of periodogram, music, deepfreq, psnet, or all")
        ->delimiter(',')
        ->capture_default_str();
    benchmark->add_option("--protocol", bench.protocol, "known-m, full, or both")
        ->capture_default_str();
    benchmark->add_option("--sigmas", bench.sigmas, "Comma list of noise levels")
        ->delimiter(',')
        ->capture_default_str();
    benchmark->add_option("--out", bench.out, "Report base path")->required();
    benchmark->add_option("--fr-model", bench.fr_model, "Model for the deepfreq method");
    benchmark->add_option("--psnet-model", bench.psnet_model, "Model for the psnet method");
    benchmark->add_option("--counter-model", bench.counter_model,
                          "Counting model for learned methods");
    benchmark->add_option("--count-rule", bench.count_rule,
                          "Order rule override for classical methods");
    benchmark->add_option("--n-records", bench.n_records, "Records per noise level")
        ->capture_default_str();
    benchmark->add_option("--n-samples", bench.n_samples, "Measurements per record")
        ->capture_default_str();
    benchmark->add_option("--m-max", bench.m_max, "Largest component count")
        ->capture_default_str();
    benchmark->add_option("--window", bench.window, "Covariance window")
        ->capture_default_str();
    benchmark->add_option("--grid", bench.grid, "Grid size for classical methods")
        ->capture_default_str();
    benchmark->add_option("--seed", bench.seed, "Test-set seed")->capture_default_str();
    benchmark->add_option("--threads", bench.threads, "Worker threads")
        ->capture_default_str();
    benchmark->add_flag("--per-signal-fnr", bench.per_signal_fnr,
                        "Average per-record miss rates instead of pooling");
    benchmark->callback([&] { run_benchmark_cmd(bench); });

    InspectOptions inspect;
    CLI::App* inspect_cmd = app.add_subcommand(
        "inspect-encoder", "Export encoder magnitude responses as CSV matrices");
    inspect_cmd->add_option("--fr-model", inspect.fr_model, "Representation model")
        ->required();
    inspect_cmd->add_option("--out", inspect.out, "Output base path")->required();
    inspect_cmd->callback([&] { run_inspect_encoder(inspect); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
