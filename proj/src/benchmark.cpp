#include "sfreq/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "sfreq/metrics.hpp"
#include "sfreq/parallel.hpp"
#include "sfreq/spectral_estimators.hpp"

namespace sfreq {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int rule_order(const CovarianceEstimate& cov, const std::string& rule) {
    if (rule == "aic") return aic_order(cov);
    if (rule == "mdl") return mdl_order(cov);
    if (rule == "sorte") return sorte_order(cov);
    throw std::invalid_argument("unknown count rule: " + rule);
}

void check_rule(const std::string& rule) {
    if (rule != "aic" && rule != "mdl" && rule != "sorte")
        throw std::invalid_argument("unknown count rule: " + rule);
}

void check_window(int window) {
    if (window < 2) throw std::invalid_argument("covariance window must span at least 2 samples");
}

}  // namespace

Method periodogram_method(const Grid& grid, const std::string& count_rule, int window) {
    check_rule(count_rule);
    check_window(window);
    Method method;
    method.name = "periodogram";
    method.run = [grid, count_rule, window](const std::vector<cplx>& samples, int known_m) {
        int m = known_m;
        if (m <= 0) {
            const CovarianceEstimate cov = build_covariance(samples, window);
            // An order rule may answer zero (noise only); an estimate must
            // still name at least one frequency.
            m = std::max(1, rule_order(cov, count_rule));
        }
        const FreqRepresentation fr = periodogram(samples, grid);
        return Estimate{pick_peaks(fr, m).frequencies, m};
    };
    return method;
}

Method music_method(const Grid& grid, const std::string& count_rule, int window) {
    check_rule(count_rule);
    check_window(window);
    Method method;
    method.name = "music";
    method.run = [grid, count_rule, window](const std::vector<cplx>& samples, int known_m) {
        const CovarianceEstimate cov = build_covariance(samples, window);
        int m = known_m;
        if (m <= 0) m = std::max(1, rule_order(cov, count_rule));
        const FreqRepresentation fr = music_pseudospectrum(cov, m, grid);
        return Estimate{pick_peaks(fr, m).frequencies, m};
    };
    return method;
}

Method learned_method(std::string name, FrNet<float>& model, CounterNet<float>* counter) {
    Method method;
    method.name = std::move(name);
    method.can_count = counter != nullptr;
    FrNet<float>* fr_model = &model;
    method.run = [fr_model, counter](const std::vector<cplx>& samples, int known_m) {
        const FreqRepresentation fr = fr_forward(*fr_model, samples);
        int m = known_m;
        if (m <= 0) {
            if (counter == nullptr)
                throw std::invalid_argument(
                    "benchmark: method has no way to choose a component count");
            m = count_components(*counter, fr);
        }
        return Estimate{pick_peaks(fr, m).frequencies, m};
    };
    return method;
}

std::string protocol_name(Protocol protocol) {
    return protocol == Protocol::KnownM ? "known-m" : "full";
}

namespace {

struct RecordOutcome {
    bool ok = false;
    int missed = 0;
    int true_count = 0;
    int est_count = 0;
    double record_fnr = 0.0;
    double chamfer_value = 0.0;
};

}  // namespace

EvalReport evaluate_method(const Method& method, const BenchmarkConfig& cfg, Protocol protocol) {
    if (!method.run) throw std::invalid_argument("benchmark: method has no run function");
    if (protocol == Protocol::Full && !method.can_count)
        throw std::invalid_argument("benchmark: " + method.name +
                                    " cannot run the unknown-count protocol");
    if (cfg.n_records < 1) throw std::invalid_argument("benchmark: need at least one record");
    if (cfg.sigmas.empty()) throw std::invalid_argument("benchmark: no noise levels given");
    for (const double s : cfg.sigmas)
        if (!(s >= 0.0)) throw std::invalid_argument("benchmark: noise levels must be nonnegative");

    EvalReport report;
    report.method = method.name;
    report.protocol = protocol_name(protocol);
    report.seed = cfg.generator.seed;
    report.n_records = cfg.n_records;

    for (const double sigma : cfg.sigmas) {
        GeneratorConfig gen = cfg.generator;
        gen.sigma_min = sigma;
        gen.sigma_max = sigma;
        const std::vector<SampleRecord> records = generate_records(gen, cfg.n_records, cfg.threads);

        std::vector<RecordOutcome> outcomes(records.size());
        const auto started = std::chrono::steady_clock::now();
        parallel_for(cfg.n_records, cfg.threads, [&](int i) {
            const SampleRecord& rec = records[static_cast<std::size_t>(i)];
            RecordOutcome& out = outcomes[static_cast<std::size_t>(i)];
            out.true_count = rec.truth.count();
            try {
                const Estimate est =
                    method.run(rec.noisy, protocol == Protocol::KnownM ? out.true_count : -1);
                if (est.frequencies.empty()) return;
                out.missed =
                    missed_count(rec.truth.frequencies, est.frequencies, rec.n_samples(),
                                 gen.distance);
                out.record_fnr = static_cast<double>(out.missed) / out.true_count;
                out.est_count = est.count;
                if (protocol == Protocol::Full)
                    out.chamfer_value = chamfer(rec.truth.frequencies, est.frequencies,
                                                gen.distance);
                out.ok = true;
            } catch (const std::exception&) {
                out.ok = false;
            }
        });
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();

        long missed_sum = 0;
        long true_sum = 0;
        double fnr_sum = 0.0;
        std::vector<int> true_counts;
        std::vector<int> est_counts;
        std::vector<double> chamfers;
        for (const RecordOutcome& out : outcomes) {
            if (!out.ok) continue;
            missed_sum += out.missed;
            true_sum += out.true_count;
            fnr_sum += out.record_fnr;
            true_counts.push_back(out.true_count);
            est_counts.push_back(out.est_count);
            chamfers.push_back(out.chamfer_value);
        }
        const int n_ok = static_cast<int>(chamfers.size());

        EvalRow row;
        row.sigma = sigma;
        row.snr_db = snr_db(sigma);
        row.failure_rate = static_cast<double>(cfg.n_records - n_ok) / cfg.n_records;
        row.runtime_ms = elapsed_ms;
        row.fnr = kNaN;
        row.counting_error = kNaN;
        row.mean_chamfer = kNaN;
        row.chamfer_std_err = kNaN;
        if (n_ok > 0) {
            row.fnr = cfg.per_signal_fnr
                          ? fnr_sum / n_ok
                          : static_cast<double>(missed_sum) / static_cast<double>(true_sum);
            if (protocol == Protocol::Full) {
                row.counting_error = counting_error(true_counts, est_counts);
                double mean = 0.0;
                for (const double c : chamfers) mean += c;
                mean /= n_ok;
                row.mean_chamfer = mean;
                if (n_ok >= 2) {
                    double var = 0.0;
                    for (const double c : chamfers) var += (c - mean) * (c - mean);
                    var /= n_ok - 1;
                    row.chamfer_std_err = std::sqrt(var / n_ok);
                }
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

std::vector<EvalReport> run_benchmark(const std::vector<Method>& methods,
                                      const BenchmarkConfig& cfg,
                                      const std::vector<Protocol>& protocols) {
    if (methods.empty()) throw std::invalid_argument("benchmark: no methods given");
    if (protocols.empty()) throw std::invalid_argument("benchmark: no protocols given");
    std::vector<EvalReport> reports;
    for (const Method& method : methods)
        for (const Protocol protocol : protocols) {
            if (protocol == Protocol::Full && !method.can_count) continue;
            reports.push_back(evaluate_method(method, cfg, protocol));
        }
    return reports;
}

namespace {

std::string format_cell(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

nlohmann::json json_number(double v) {
    // JSON has no NaN/inf literals; null marks a value a protocol does not
    // measure and a string keeps the unbounded-SNR row readable.
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

std::string report_csv(const std::vector<EvalReport>& reports) {
    std::string out =
        "method,protocol,sigma,snr_db,fnr,counting_error,mean_chamfer,chamfer_std_err,"
        "failure_rate\n";
    for (const EvalReport& rep : reports)
        for (const EvalRow& row : rep.rows) {
            out += rep.method + ',' + rep.protocol + ',';
            out += format_cell(row.sigma) + ',' + format_cell(row.snr_db) + ',';
            out += format_cell(row.fnr) + ',' + format_cell(row.counting_error) + ',';
            out += format_cell(row.mean_chamfer) + ',' + format_cell(row.chamfer_std_err) + ',';
            out += format_cell(row.failure_rate) + '\n';
        }
    return out;
}

std::string report_json(const std::vector<EvalReport>& reports) {
    nlohmann::json out = nlohmann::json::array();
    for (const EvalReport& rep : reports) {
        nlohmann::json rows = nlohmann::json::array();
        for (const EvalRow& row : rep.rows)
            rows.push_back({{"sigma", row.sigma},
                            {"snr_db", json_number(row.snr_db)},
                            {"fnr", json_number(row.fnr)},
                            {"counting_error", json_number(row.counting_error)},
                            {"mean_chamfer", json_number(row.mean_chamfer)},
                            {"chamfer_std_err", json_number(row.chamfer_std_err)},
                            {"failure_rate", row.failure_rate}});
        out.push_back({{"method", rep.method},
                       {"protocol", rep.protocol},
                       {"seed", rep.seed},
                       {"n_records", rep.n_records},
                       {"rows", rows}});
    }
    return out.dump(2) + "\n";
}

std::string timing_csv(const std::vector<EvalReport>& reports) {
    std::string out = "method,protocol,sigma,total_ms,per_record_ms\n";
    for (const EvalReport& rep : reports)
        for (const EvalRow& row : rep.rows) {
            out += rep.method + ',' + rep.protocol + ',';
            out += format_cell(row.sigma) + ',' + format_cell(row.runtime_ms) + ',';
            out += format_cell(row.runtime_ms / rep.n_records) + '\n';
        }
    return out;
}

FrProfile fr_profile(FrNet<float>& model, const SinusoidMixture& prototype, int n_trials,
                     double sigma, std::uint64_t seed, int threads) {
    if (prototype.count() < 1) throw std::invalid_argument("profile: mixture is empty");
    if (prototype.amplitudes.size() != prototype.frequencies.size())
        throw std::invalid_argument("profile: amplitude and frequency lists differ in length");
    if (n_trials < 2)
        throw std::invalid_argument("profile: need at least two trials for a spread estimate");
    if (!(sigma >= 0.0)) throw std::invalid_argument("profile: sigma must be nonnegative");

    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    const int n = model.config.n_samples;
    std::vector<std::vector<double>> runs(static_cast<std::size_t>(n_trials));
    parallel_for(n_trials, threads, [&](int t) {
        RandomStream rng(seed, stream_id("profile", static_cast<std::uint64_t>(t)));
        SinusoidMixture mix = prototype;
        for (cplx& a : mix.amplitudes) {
            const double theta = rng.uniform(0.0, kTwoPi);
            a = std::abs(a) * cplx(std::cos(theta), std::sin(theta));
        }
        const std::vector<cplx> noisy = apply_noise(synthesize(mix, n), sigma, rng);
        runs[static_cast<std::size_t>(t)] = fr_forward(model, noisy).values;
    });

    FrProfile profile;
    profile.grid = Grid{model.config.grid};
    profile.mean.assign(static_cast<std::size_t>(profile.grid.size), 0.0);
    profile.std_err.assign(static_cast<std::size_t>(profile.grid.size), 0.0);
    for (int g = 0; g < profile.grid.size; ++g) {
        const std::size_t gi = static_cast<std::size_t>(g);
        double mean = 0.0;
        for (const std::vector<double>& run : runs) mean += run[gi];
        mean /= n_trials;
        double var = 0.0;
        for (const std::vector<double>& run : runs) var += (run[gi] - mean) * (run[gi] - mean);
        var /= n_trials - 1;
        profile.mean[gi] = mean;
        profile.std_err[gi] = std::sqrt(var / n_trials);
    }
    return profile;
}

}  // namespace sfreq
