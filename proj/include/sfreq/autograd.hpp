#pragma once

#include <functional>
#include <vector>

#include "sfreq/rng.hpp"
#include "sfreq/tensor.hpp"

namespace sfreq {

// Channel normalization state. `decay` blends batch statistics into the
// running estimates after every training-mode pass; eval mode reads the
// running estimates only. The running variance stores the unbiased estimate.
template <typename T>
struct BatchNorm {
    Parameter<T> gamma;
    Parameter<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
    double decay = 0.9;
    double eps = 1e-5;

    BatchNorm() = default;
    BatchNorm(std::string name, int channels)
        : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}),
          running_mean({channels}), running_var({channels}) {
        gamma.value.fill(T{1});
        running_var.fill(T{1});
    }
};

// Recorded computation over tensors: each op evaluates immediately and pushes
// a pullback onto the tape. `backward` replays the tape in reverse, seeding
// the root with 1 and accumulating into every touched Parameter's grad (node
// grads are transient per call, so repeated backward calls add up).
template <typename T>
class Graph {
public:
    using Id = int;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Id input(Tensor<T> value);

    // x [B,I], weight [O,I], bias [O] -> [B,O]; y = x W^T + b
    Id linear(Id x, Parameter<T>& weight, Parameter<T>& bias);

    // x [B,Ci,L], weight [Co,Ci,K], bias [Co] -> [B,Co,L/stride]
    // Cross-correlation over the circularly extended input; K odd, the pad of
    // (K-1)/2 keeps length L at stride 1, and stride must divide L.
    Id conv1d(Id x, Parameter<T>& weight, Parameter<T>& bias, int stride = 1);

    // x [B,Ci,M], weight [Ci,Co,K], bias [Co] -> [B,Co,M*stride]
    // Adjoint of conv1d: every input element scatters its kernel onto the
    // circularly wrapped output.
    Id conv_transpose1d(Id x, Parameter<T>& weight, Parameter<T>& bias, int stride);

    // x [B,C,L]; per-channel statistics over (B,L). Training mode needs B >= 2.
    Id batchnorm1d(Id x, BatchNorm<T>& bn, bool training);

    Id relu(Id x);

    Id reshape(Id x, std::vector<int> shape);

    // mean of squared differences over all elements -> scalar [1]
    Id mse_loss(Id pred, const Tensor<T>& target);

    // sum of all elements -> scalar [1]
    Id sum(Id x);

    const Tensor<T>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    void backward(Id root);

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;                    // allocated lazily during backward
        std::function<void()> pullback;    // empty for leaves
    };

    Id push(Tensor<T> value, std::function<void()> pullback = {});
    Tensor<T>& grad_of(Id id);
    const Node& node(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

// Bias-corrected adaptive-moment optimizer over an explicit parameter list.
template <typename T>
class Adam {
public:
    explicit Adam(std::vector<Parameter<T>*> params, double lr = 3e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    std::int64_t steps_taken() const { return t_; }

    // Moment buffers, exposed for checkpointing. Layout parallels the
    // parameter list passed at construction.
    std::vector<Tensor<T>>& first_moments() { return m_; }
    std::vector<Tensor<T>>& second_moments() { return v_; }
    void set_steps_taken(std::int64_t t) { t_ = t; }

private:
    std::vector<Parameter<T>*> params_;
    std::vector<Tensor<T>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

// Fill with uniform draws on +-sqrt(6 / fan_in); the draw order is the flat
// element order, so initialization is a pure function of the stream.
template <typename T>
void init_uniform_fanin(Parameter<T>& param, int fan_in, RandomStream& rng);

}  // namespace sfreq
