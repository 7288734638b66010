#include "sfreq/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "sfreq/parallel.hpp"
#include "sfreq/serialize.hpp"

namespace sfreq {
namespace {

using nlohmann::json;

json train_config_json(const TrainConfig& cfg) {
    return json{{"n_signals", cfg.n_signals},     {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},   {"lr", cfg.lr},
                {"sigma_min", cfg.sigma_min},     {"sigma_max", cfg.sigma_max},
                {"val_fraction", cfg.val_fraction}, {"seed", cfg.seed},
                {"eval_every", cfg.eval_every}};
}

// Noise level and noise vector for one (signal, epoch) pair; epoch 0 is the
// fixed validation draw. Keyed purely by (seed, tag, epoch, index), so any
// generation order produces the same data.
std::vector<cplx> noisy_row(const SampleRecord& rec, const TrainConfig& cfg, const char* tag,
                            std::uint64_t epoch, std::uint64_t index) {
    RandomStream rng(cfg.seed, stream_id(tag, epoch, index));
    const double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
    return apply_noise(rec.clean, sigma, rng);
}

using State = std::vector<std::pair<std::string, Tensor<float>*>>;

std::vector<Tensor<float>> snapshot_state(const State& state) {
    std::vector<Tensor<float>> snap;
    snap.reserve(state.size());
    for (const auto& [name, t] : state) snap.push_back(*t);
    return snap;
}

void load_state_snapshot(const State& state, const std::vector<Tensor<float>>& snap) {
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = snap[i];
}

struct TensorTable {
    std::unordered_map<std::string, const NamedTensor*> map;

    explicit TensorTable(const std::vector<NamedTensor>& tensors) {
        for (const NamedTensor& t : tensors) {
            if (!map.emplace(t.name, &t).second)
                throw IntegrityError("checkpoint file: duplicate tensor '" + t.name + "'");
        }
    }

    const Tensor<float>& fetch(const std::string& name, const std::vector<int>& shape) const {
        const auto it = map.find(name);
        if (it == map.end()) throw IntegrityError("checkpoint file: missing tensor '" + name + "'");
        if (it->second->value.shape != shape)
            throw IntegrityError("checkpoint file: tensor '" + name + "' has shape " +
                                 shape_string(it->second->value.shape) + ", expected " +
                                 shape_string(shape));
        return it->second->value;
    }
};

// The problem objects below supply what differs between the two networks:
// batch assembly and the forward call. The engine owns everything else.
struct FrProblem {
    FrNet<float>& net;
    std::vector<std::vector<float>> targets;

    const char* kind() const { return "fr"; }
    int n_input_samples() const { return net.config.n_samples; }
    State state() { return net.state(); }
    std::vector<Parameter<float>*> params() { return net.parameters(); }

    void prepare(const std::vector<SampleRecord>& records, int n_use, int threads) {
        const Grid grid{net.config.grid};
        const double std_dev = net.config.kernel_std();
        targets.assign(static_cast<std::size_t>(n_use), {});
        parallel_for(n_use, threads, [&](int i) {
            const FreqRepresentation fr = ground_truth_fr(records[static_cast<std::size_t>(i)].truth,
                                                          grid, std_dev);
            std::vector<float>& row = targets[static_cast<std::size_t>(i)];
            row.resize(fr.values.size());
            for (std::size_t g = 0; g < fr.values.size(); ++g)
                row[g] = static_cast<float>(fr.values[g]);
        });
    }

    void make_batch(const std::vector<SampleRecord>&, const std::vector<int>& idx,
                    const std::vector<const std::vector<cplx>*>& rows, Tensor<float>& input,
                    Tensor<float>& target) {
        const int b = static_cast<int>(idx.size());
        std::vector<std::vector<cplx>> batch_rows;
        batch_rows.reserve(idx.size());
        for (const auto* r : rows) batch_rows.push_back(*r);
        input = measurement_tensor<float>(batch_rows, net.config.n_samples);
        target = Tensor<float>({b, net.config.grid});
        for (int k = 0; k < b; ++k) {
            const std::vector<float>& row = targets[static_cast<std::size_t>(idx[k])];
            std::copy(row.begin(), row.end(),
                      target.data.begin() + static_cast<std::size_t>(k) * row.size());
        }
    }

    typename Graph<float>::Id forward(Graph<float>& g, typename Graph<float>::Id x, bool training) {
        return net.forward(g, x, training);
    }
};

struct CounterProblem {
    CounterNet<float>& net;
    FrNet<float>& fr;

    const char* kind() const { return "counter"; }
    int n_input_samples() const { return fr.config.n_samples; }
    State state() { return net.state(); }
    std::vector<Parameter<float>*> params() { return net.parameters(); }

    void prepare(const std::vector<SampleRecord>&, int, int) {}

    void make_batch(const std::vector<SampleRecord>& records, const std::vector<int>& idx,
                    const std::vector<const std::vector<cplx>*>& rows, Tensor<float>& input,
                    Tensor<float>& target) {
        const int b = static_cast<int>(idx.size());
        std::vector<std::vector<cplx>> batch_rows;
        batch_rows.reserve(idx.size());
        for (const auto* r : rows) batch_rows.push_back(*r);
        Graph<float> g;
        const auto out = fr.forward(g, g.input(measurement_tensor<float>(batch_rows, fr.config.n_samples)),
                                    /*training=*/false);
        const Tensor<float>& repr = g.value(out);
        input = Tensor<float>({b, 1, net.config.grid});
        for (std::size_t i = 0; i < repr.data.size(); ++i)
            input.data[i] = std::max(repr.data[i], 0.0f);
        target = Tensor<float>({b, 1});
        for (int k = 0; k < b; ++k)
            target.data[static_cast<std::size_t>(k)] =
                static_cast<float>(records[static_cast<std::size_t>(idx[k])].truth.count());
    }

    typename Graph<float>::Id forward(Graph<float>& g, typename Graph<float>::Id x, bool training) {
        return net.forward(g, x, training);
    }
};

template <typename Problem>
TrainResult run_training(Problem& problem, const json& model_config,
                         const std::vector<SampleRecord>& records, const TrainConfig& cfg,
                         const TrainIo& io) {
    cfg.validate();
    const int n_use = cfg.n_signals == 0 ? static_cast<int>(records.size()) : cfg.n_signals;
    if (static_cast<int>(records.size()) < n_use)
        throw std::invalid_argument("training: dataset holds " + std::to_string(records.size()) +
                                    " records, config asks for " + std::to_string(n_use));
    for (int i = 0; i < n_use; ++i) {
        if (records[static_cast<std::size_t>(i)].n_samples() != problem.n_input_samples())
            throw std::invalid_argument("training: record length does not match the network input");
    }
    const int n_val =
        cfg.val_fraction > 0 ? std::max(1, static_cast<int>(std::lround(cfg.val_fraction * n_use))) : 0;
    const int n_train = n_use - n_val;
    if (n_train < cfg.batch_size)
        throw std::invalid_argument("training: fewer training signals than one batch");

    problem.prepare(records, n_use, io.threads);

    // Fixed validation batches: noise drawn once, assembled once.
    std::vector<std::vector<cplx>> val_rows(static_cast<std::size_t>(n_val));
    parallel_for(n_val, io.threads, [&](int k) {
        const int i = n_train + k;
        val_rows[static_cast<std::size_t>(k)] =
            noisy_row(records[static_cast<std::size_t>(i)], cfg, "val-noise", 0,
                      static_cast<std::uint64_t>(i));
    });
    std::vector<std::pair<Tensor<float>, Tensor<float>>> val_batches;
    std::vector<int> val_sizes;
    for (int start = 0; start < n_val; start += cfg.batch_size) {
        const int end = std::min(n_val, start + cfg.batch_size);
        std::vector<int> idx;
        std::vector<const std::vector<cplx>*> rows;
        for (int k = start; k < end; ++k) {
            idx.push_back(n_train + k);
            rows.push_back(&val_rows[static_cast<std::size_t>(k)]);
        }
        Tensor<float> input, target;
        problem.make_batch(records, idx, rows, input, target);
        val_batches.emplace_back(std::move(input), std::move(target));
        val_sizes.push_back(end - start);
    }

    Adam<float> adam(problem.params(), cfg.lr);
    const State state = problem.state();
    const json train_config = train_config_json(cfg);

    int start_epoch = 1;
    int best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    double last_train_loss = 0.0;
    std::vector<Tensor<float>> best_snap;

    if (io.resume) {
        const Container ck = load_checkpoint(io.checkpoint_path);
        json header = json::parse(ck.header_json, nullptr, false);
        if (header.is_discarded())
            throw IntegrityError("checkpoint file: header is not valid JSON");
        if (header.at("kind").get<std::string>() != problem.kind())
            throw IntegrityError("checkpoint file: wrong network kind");
        // the epoch horizon may differ between the interrupted and the
        // resumed invocation; everything else must match exactly
        json stored_tc = header.at("train_config");
        json want_tc = train_config;
        stored_tc.erase("epochs");
        want_tc.erase("epochs");
        if (header.at("model_config") != model_config || stored_tc != want_tc)
            throw IntegrityError("checkpoint file: configuration does not match this run");
        const TensorTable table(ck.tensors);
        for (const auto& [name, slot] : state) *slot = table.fetch("state." + name, slot->shape);
        auto& m = adam.first_moments();
        auto& v = adam.second_moments();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = table.fetch("adam.m." + std::to_string(i), m[i].shape);
            v[i] = table.fetch("adam.v." + std::to_string(i), v[i].shape);
        }
        adam.set_steps_taken(header.at("steps").get<std::int64_t>());
        start_epoch = header.at("epoch_done").get<int>() + 1;
        last_train_loss = header.at("last_train_loss").get<double>();
        best_epoch = header.at("best_epoch").get<int>();
        if (best_epoch > 0) {
            best_val = header.at("best_val_loss").get<double>();
            best_snap.clear();
            for (const auto& [name, slot] : state)
                best_snap.push_back(table.fetch("best." + name, slot->shape));
        }
    }

    adam.zero_grad();
    TrainResult result;

    for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
        const auto tick = std::chrono::steady_clock::now();

        std::vector<std::vector<cplx>> rows(static_cast<std::size_t>(n_train));
        parallel_for(n_train, io.threads, [&](int i) {
            rows[static_cast<std::size_t>(i)] =
                noisy_row(records[static_cast<std::size_t>(i)], cfg, "epoch-noise",
                          static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i));
        });

        std::vector<int> order(static_cast<std::size_t>(n_train));
        std::iota(order.begin(), order.end(), 0);
        RandomStream shuffle(cfg.seed, stream_id("shuffle", static_cast<std::uint64_t>(epoch)));
        for (int i = n_train - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle.uniform_int(0, static_cast<std::uint64_t>(i)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        for (int start = 0; start < n_train;) {
            int end = std::min(n_train, start + cfg.batch_size);
            // batch statistics need at least two samples; fold an orphan in
            if (n_train - end == 1) end = n_train;
            std::vector<int> idx;
            std::vector<const std::vector<cplx>*> batch_rows;
            for (int k = start; k < end; ++k) {
                idx.push_back(order[static_cast<std::size_t>(k)]);
                batch_rows.push_back(&rows[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
            }
            Tensor<float> input, target;
            problem.make_batch(records, idx, batch_rows, input, target);

            Graph<float> g;
            const auto out = problem.forward(g, g.input(std::move(input)), /*training=*/true);
            const auto loss = g.mse_loss(out, target);
            const double batch_loss = static_cast<double>(g.value(loss).data[0]);
            if (!std::isfinite(batch_loss))
                throw DivergenceError("training loss is not finite at epoch " + std::to_string(epoch));
            g.backward(loss);
            adam.step();
            adam.zero_grad();
            loss_sum += batch_loss * (end - start);
            start = end;
        }
        const double train_loss = loss_sum / n_train;
        last_train_loss = train_loss;

        bool validated = false;
        double val_loss = 0.0;
        if (n_val > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
            validated = true;
            double val_sum = 0.0;
            for (std::size_t b = 0; b < val_batches.size(); ++b) {
                Graph<float> g;
                const auto out =
                    problem.forward(g, g.input(val_batches[b].first), /*training=*/false);
                const auto loss = g.mse_loss(out, val_batches[b].second);
                val_sum += static_cast<double>(g.value(loss).data[0]) * val_sizes[b];
            }
            val_loss = val_sum / n_val;
            if (!std::isfinite(val_loss))
                throw DivergenceError("validation loss is not finite at epoch " +
                                      std::to_string(epoch));
            if (val_loss < best_val) {
                best_val = val_loss;
                best_epoch = epoch;
                best_snap = snapshot_state(state);
            }
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
        result.history.push_back({epoch, train_loss, val_loss, validated, wall});

        if (io.log != nullptr) {
            json line{{"epoch", epoch},
                      {"train_loss", train_loss},
                      {"val_loss", validated ? json(val_loss) : json()},
                      {"wall_time", wall}};
            *io.log << line.dump() << "\n";
            io.log->flush();
        }

        if (!io.checkpoint_path.empty()) {
            json header{{"kind", problem.kind()},
                        {"model_config", model_config},
                        {"train_config", train_config},
                        {"epoch_done", epoch},
                        {"steps", adam.steps_taken()},
                        {"last_train_loss", last_train_loss},
                        {"best_epoch", best_epoch}};
            if (best_epoch > 0) header["best_val_loss"] = best_val;
            std::vector<NamedTensor> tensors;
            for (const auto& [name, slot] : state) tensors.push_back({"state." + name, *slot});
            auto& m = adam.first_moments();
            auto& v = adam.second_moments();
            for (std::size_t i = 0; i < m.size(); ++i) {
                tensors.push_back({"adam.m." + std::to_string(i), m[i]});
                tensors.push_back({"adam.v." + std::to_string(i), v[i]});
            }
            if (best_epoch > 0) {
                for (std::size_t i = 0; i < state.size(); ++i)
                    tensors.push_back({"best." + state[i].first, best_snap[i]});
            }
            const std::string tmp = io.checkpoint_path + ".tmp";
            save_checkpoint(tmp, header.dump(), tensors);
            if (std::rename(tmp.c_str(), io.checkpoint_path.c_str()) != 0)
                throw std::invalid_argument("cannot replace checkpoint: " + io.checkpoint_path);
        }
    }

    if (best_epoch > 0 && !best_snap.empty()) load_state_snapshot(state, best_snap);
    result.best_epoch = best_epoch;
    result.best_val_loss = best_val;
    result.final_train_loss = last_train_loss;
    return result;
}

json fr_model_config(const FrNetConfig& c) {
    return json{{"variant", c.variant},
                {"n_samples", c.n_samples},
                {"channels", c.channels},
                {"encoder_out", c.encoder_out},
                {"conv_layers", c.conv_layers},
                {"conv_filter", c.conv_filter},
                {"conv_channels", c.conv_channels},
                {"decoder_kernel", c.decoder_kernel},
                {"decoder_stride", c.decoder_stride},
                {"grid", c.grid}};
}

json counter_model_config(const CounterConfig& c) {
    return json{{"grid", c.grid},
                {"stem_filters", c.stem_filters},
                {"stem_kernel", c.stem_kernel},
                {"stem_stride", c.stem_stride},
                {"conv_layers", c.conv_layers},
                {"conv_filters", c.conv_filters},
                {"conv_kernel", c.conv_kernel},
                {"m_max", c.m_max}};
}

}  // namespace

void TrainConfig::validate() const {
    if (n_signals < 0) throw std::invalid_argument("train config: n_signals must be >= 0");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 2)
        throw std::invalid_argument("train config: batch_size must be >= 2 for batch statistics");
    if (!(lr >= 0.0)) throw std::invalid_argument("train config: lr must be >= 0");
    if (!(sigma_min >= 0.0) || !(sigma_max >= sigma_min))
        throw std::invalid_argument("train config: need 0 <= sigma_min <= sigma_max");
    if (!(val_fraction >= 0.0) || !(val_fraction <= 0.5))
        throw std::invalid_argument("train config: val_fraction must lie in [0, 0.5]");
    if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
}

TrainResult train_fr(FrNet<float>& model, const std::vector<SampleRecord>& records,
                     const TrainConfig& cfg, const TrainIo& io) {
    FrProblem problem{model, {}};
    return run_training(problem, fr_model_config(model.config), records, cfg, io);
}

TrainResult train_counter(CounterNet<float>& model, FrNet<float>& fr_model,
                          const std::vector<SampleRecord>& records, const TrainConfig& cfg,
                          const TrainIo& io) {
    if (model.config.grid != fr_model.config.grid)
        throw std::invalid_argument("training: counter grid does not match the representation grid");
    CounterProblem problem{model, fr_model};
    return run_training(problem, counter_model_config(model.config), records, cfg, io);
}

}  // namespace sfreq
