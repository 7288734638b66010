#include "sfreq/autograd.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace sfreq {

namespace {

// C[m][n] += A[m][k] B[k][n], row-major. The k loop is unrolled four wide so
// each pass streams four B rows into one contiguous C row; the summation
// order is fixed, so results do not depend on call context.
template <typename T>
void gemm_axpy(T* c, const T* a, const T* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        const T* arow = a + static_cast<std::size_t>(i) * k;
        int p = 0;
        for (; p + 4 <= k; p += 4) {
            const T a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const T* b0 = b + static_cast<std::size_t>(p) * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (int j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const T ap = arow[p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

template <typename T>
void transpose(T* dst, const T* src, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
}

// xcol[(ci K + k)][t] = x[ci][(t stride + k - pad) mod L] for t in [0, t_out)
template <typename T>
void im2col_circular(T* xcol, const T* x, int channels, int length, int kernel, int stride, int t_out) {
    const int pad = (kernel - 1) / 2;
    for (int ci = 0; ci < channels; ++ci) {
        const T* xrow = x + static_cast<std::size_t>(ci) * length;
        for (int k = 0; k < kernel; ++k) {
            T* out = xcol + static_cast<std::size_t>(ci * kernel + k) * t_out;
            int idx = ((k - pad) % length + length) % length;
            for (int t = 0; t < t_out; ++t) {
                out[t] = xrow[idx];
                idx += stride;
                if (idx >= length) idx -= length;
            }
        }
    }
}

// Adjoint of im2col_circular: x[ci][(t stride + k - pad) mod L] += xcol[...][t]
template <typename T>
void col2im_circular(T* x, const T* xcol, int channels, int length, int kernel, int stride, int t_out) {
    const int pad = (kernel - 1) / 2;
    for (int ci = 0; ci < channels; ++ci) {
        T* xrow = x + static_cast<std::size_t>(ci) * length;
        for (int k = 0; k < kernel; ++k) {
            const T* col = xcol + static_cast<std::size_t>(ci * kernel + k) * t_out;
            int idx = ((k - pad) % length + length) % length;
            for (int t = 0; t < t_out; ++t) {
                xrow[idx] += col[t];
                idx += stride;
                if (idx >= length) idx -= length;
            }
        }
    }
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

}  // namespace

template <typename T>
typename Graph<T>::Id Graph<T>::push(Tensor<T> value, std::function<void()> pullback) {
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, std::move(pullback)});
    return static_cast<Id>(nodes_.size()) - 1;
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(Id id) {
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (nd.grad.empty()) nd.grad = Tensor<T>(nd.value.shape);
    return nd.grad;
}

template <typename T>
typename Graph<T>::Id Graph<T>::input(Tensor<T> value) {
    if (value.empty()) shape_fail("input", "empty tensor");
    return push(std::move(value));
}

template <typename T>
typename Graph<T>::Id Graph<T>::linear(Id xid, Parameter<T>& weight, Parameter<T>& bias) {
    const Tensor<T>& x = value(xid);
    if (x.rank() != 2) shape_fail("linear", "input must be [batch, in], got " + shape_string(x.shape));
    const int batch = x.dim(0), in = x.dim(1);
    if (weight.value.rank() != 2 || weight.value.dim(1) != in)
        shape_fail("linear", "weight " + shape_string(weight.value.shape) + " does not accept in=" + std::to_string(in));
    const int out = weight.value.dim(0);
    if (bias.value.shape != std::vector<int>{out}) shape_fail("linear", "bias must be [out]");

    Tensor<T> y({batch, out});
    for (int b = 0; b < batch; ++b)
        for (int o = 0; o < out; ++o)
            y.data[static_cast<std::size_t>(b) * out + o] = bias.value.data[static_cast<std::size_t>(o)];
    std::vector<T> wt(static_cast<std::size_t>(in) * out);
    transpose(wt.data(), weight.value.data.data(), out, in);
    gemm_axpy(y.data.data(), x.data.data(), wt.data(), batch, in, out);

    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid, &weight, &bias, batch, in, out]() {
        const Tensor<T>& gy = node(yid).grad;
        const Tensor<T>& x_val = node(xid).value;
        std::vector<T> gyt(static_cast<std::size_t>(out) * batch);
        transpose(gyt.data(), gy.data.data(), batch, out);
        gemm_axpy(weight.grad.data.data(), gyt.data(), x_val.data.data(), out, batch, in);
        for (int b = 0; b < batch; ++b)
            for (int o = 0; o < out; ++o)
                bias.grad.data[static_cast<std::size_t>(o)] += gy.data[static_cast<std::size_t>(b) * out + o];
        Tensor<T>& gx = grad_of(xid);
        gemm_axpy(gx.data.data(), gy.data.data(), weight.value.data.data(), batch, out, in);
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::conv1d(Id xid, Parameter<T>& weight, Parameter<T>& bias, int stride) {
    const Tensor<T>& x = value(xid);
    if (x.rank() != 3) shape_fail("conv1d", "input must be [batch, channels, length]");
    const int batch = x.dim(0), ci = x.dim(1), length = x.dim(2);
    if (weight.value.rank() != 3 || weight.value.dim(1) != ci)
        shape_fail("conv1d", "weight " + shape_string(weight.value.shape) + " does not accept channels=" + std::to_string(ci));
    const int co = weight.value.dim(0), kernel = weight.value.dim(2);
    if (kernel % 2 == 0) shape_fail("conv1d", "kernel width must be odd");
    if (stride < 1 || length % stride != 0) shape_fail("conv1d", "stride must divide the length");
    if (bias.value.shape != std::vector<int>{co}) shape_fail("conv1d", "bias must be [out_channels]");

    const int t_out = length / stride;
    const int ck = ci * kernel;
    Tensor<T> y({batch, co, t_out});
    std::vector<T> xcol(static_cast<std::size_t>(ck) * t_out);
    for (int b = 0; b < batch; ++b) {
        const T* xb = x.data.data() + static_cast<std::size_t>(b) * ci * length;
        T* yb = y.data.data() + static_cast<std::size_t>(b) * co * t_out;
        im2col_circular(xcol.data(), xb, ci, length, kernel, stride, t_out);
        for (int c = 0; c < co; ++c)
            for (int t = 0; t < t_out; ++t) yb[static_cast<std::size_t>(c) * t_out + t] = bias.value.data[static_cast<std::size_t>(c)];
        gemm_axpy(yb, weight.value.data.data(), xcol.data(), co, ck, t_out);
    }

    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid, &weight, &bias, batch, ci, co, kernel,
                                                      length, stride, t_out, ck]() {
        const Tensor<T>& gy = node(yid).grad;
        const Tensor<T>& x_val = node(xid).value;
        Tensor<T>& gx = grad_of(xid);
        std::vector<T> xcol(static_cast<std::size_t>(ck) * t_out);
        std::vector<T> xcolt(static_cast<std::size_t>(t_out) * ck);
        std::vector<T> wt(static_cast<std::size_t>(ck) * co);
        std::vector<T> gxcol(static_cast<std::size_t>(ck) * t_out);
        transpose(wt.data(), weight.value.data.data(), co, ck);
        for (int b = 0; b < batch; ++b) {
            const T* xb = x_val.data.data() + static_cast<std::size_t>(b) * ci * length;
            const T* gyb = gy.data.data() + static_cast<std::size_t>(b) * co * t_out;
            im2col_circular(xcol.data(), xb, ci, length, kernel, stride, t_out);
            transpose(xcolt.data(), xcol.data(), ck, t_out);
            gemm_axpy(weight.grad.data.data(), gyb, xcolt.data(), co, t_out, ck);
            for (int c = 0; c < co; ++c) {
                T acc{0};
                for (int t = 0; t < t_out; ++t) acc += gyb[static_cast<std::size_t>(c) * t_out + t];
                bias.grad.data[static_cast<std::size_t>(c)] += acc;
            }
            std::fill(gxcol.begin(), gxcol.end(), T{0});
            gemm_axpy(gxcol.data(), wt.data(), gyb, ck, co, t_out);
            col2im_circular(gx.data.data() + static_cast<std::size_t>(b) * ci * length, gxcol.data(), ci,
                            length, kernel, stride, t_out);
        }
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::conv_transpose1d(Id xid, Parameter<T>& weight, Parameter<T>& bias, int stride) {
    const Tensor<T>& x = value(xid);
    if (x.rank() != 3) shape_fail("conv_transpose1d", "input must be [batch, channels, length]");
    const int batch = x.dim(0), ci = x.dim(1), m = x.dim(2);
    if (weight.value.rank() != 3 || weight.value.dim(0) != ci)
        shape_fail("conv_transpose1d", "weight " + shape_string(weight.value.shape) + " does not accept channels=" + std::to_string(ci));
    const int co = weight.value.dim(1), kernel = weight.value.dim(2);
    if (kernel % 2 == 0) shape_fail("conv_transpose1d", "kernel width must be odd");
    if (stride < 1) shape_fail("conv_transpose1d", "stride must be positive");
    if (bias.value.shape != std::vector<int>{co}) shape_fail("conv_transpose1d", "bias must be [out_channels]");

    const int length = m * stride;
    const int cok = co * kernel;
    Tensor<T> y({batch, co, length});
    std::vector<T> wt(static_cast<std::size_t>(cok) * ci);
    transpose(wt.data(), weight.value.data.data(), ci, cok);
    std::vector<T> ycol(static_cast<std::size_t>(cok) * m);
    for (int b = 0; b < batch; ++b) {
        const T* xb = x.data.data() + static_cast<std::size_t>(b) * ci * m;
        T* yb = y.data.data() + static_cast<std::size_t>(b) * co * length;
        std::fill(ycol.begin(), ycol.end(), T{0});
        gemm_axpy(ycol.data(), wt.data(), xb, cok, ci, m);
        for (int c = 0; c < co; ++c)
            for (int t = 0; t < length; ++t) yb[static_cast<std::size_t>(c) * length + t] = bias.value.data[static_cast<std::size_t>(c)];
        col2im_circular(yb, ycol.data(), co, length, kernel, stride, m);
    }

    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid, &weight, &bias, batch, ci, co, kernel,
                                                      m, stride, length, cok]() {
        const Tensor<T>& gy = node(yid).grad;
        const Tensor<T>& x_val = node(xid).value;
        Tensor<T>& gx = grad_of(xid);
        std::vector<T> gycol(static_cast<std::size_t>(cok) * m);
        std::vector<T> gycolt(static_cast<std::size_t>(m) * cok);
        for (int b = 0; b < batch; ++b) {
            const T* xb = x_val.data.data() + static_cast<std::size_t>(b) * ci * m;
            const T* gyb = gy.data.data() + static_cast<std::size_t>(b) * co * length;
            im2col_circular(gycol.data(), gyb, co, length, kernel, stride, m);
            gemm_axpy(gx.data.data() + static_cast<std::size_t>(b) * ci * m, weight.value.data.data(),
                      gycol.data(), ci, cok, m);
            transpose(gycolt.data(), gycol.data(), cok, m);
            gemm_axpy(weight.grad.data.data(), xb, gycolt.data(), ci, m, cok);
            for (int c = 0; c < co; ++c) {
                T acc{0};
                for (int t = 0; t < length; ++t) acc += gyb[static_cast<std::size_t>(c) * length + t];
                bias.grad.data[static_cast<std::size_t>(c)] += acc;
            }
        }
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::batchnorm1d(Id xid, BatchNorm<T>& bn, bool training) {
    const Tensor<T>& x = value(xid);
    if (x.rank() != 3) shape_fail("batchnorm1d", "input must be [batch, channels, length]");
    const int batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
    if (bn.gamma.value.shape != std::vector<int>{channels})
        shape_fail("batchnorm1d", "state holds " + shape_string(bn.gamma.value.shape) + " channels");
    if (training && batch < 2) shape_fail("batchnorm1d", "training mode needs batch >= 2");

    const std::int64_t n = static_cast<std::int64_t>(batch) * length;
    Tensor<T> mean({channels}), invstd({channels});
    if (training) {
        for (int c = 0; c < channels; ++c) {
            T sum{0};
            for (int b = 0; b < batch; ++b) {
                const T* row = x.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                for (int t = 0; t < length; ++t) sum += row[t];
            }
            const T mu = sum / static_cast<T>(n);
            T ss{0};
            for (int b = 0; b < batch; ++b) {
                const T* row = x.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                for (int t = 0; t < length; ++t) ss += (row[t] - mu) * (row[t] - mu);
            }
            const T var = ss / static_cast<T>(n);
            mean.data[static_cast<std::size_t>(c)] = mu;
            invstd.data[static_cast<std::size_t>(c)] = T{1} / std::sqrt(var + static_cast<T>(bn.eps));
            const T d = static_cast<T>(bn.decay);
            bn.running_mean.data[static_cast<std::size_t>(c)] =
                d * bn.running_mean.data[static_cast<std::size_t>(c)] + (T{1} - d) * mu;
            bn.running_var.data[static_cast<std::size_t>(c)] =
                d * bn.running_var.data[static_cast<std::size_t>(c)] +
                (T{1} - d) * var * static_cast<T>(n) / static_cast<T>(n - 1);
        }
    } else {
        for (int c = 0; c < channels; ++c) {
            mean.data[static_cast<std::size_t>(c)] = bn.running_mean.data[static_cast<std::size_t>(c)];
            invstd.data[static_cast<std::size_t>(c)] =
                T{1} / std::sqrt(bn.running_var.data[static_cast<std::size_t>(c)] + static_cast<T>(bn.eps));
        }
    }

    Tensor<T> y(x.shape);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < channels; ++c) {
            const T* xr = x.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
            T* yr = y.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
            const T mu = mean.data[static_cast<std::size_t>(c)];
            const T is = invstd.data[static_cast<std::size_t>(c)];
            const T g = bn.gamma.value.data[static_cast<std::size_t>(c)];
            const T bt = bn.beta.value.data[static_cast<std::size_t>(c)];
            for (int t = 0; t < length; ++t) yr[t] = g * (xr[t] - mu) * is + bt;
        }

    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid, &bn, batch, channels, length, n,
                                                      training, mean = std::move(mean),
                                                      invstd = std::move(invstd)]() {
        const Tensor<T>& gy = node(yid).grad;
        const Tensor<T>& x_val = node(xid).value;
        Tensor<T>& gx = grad_of(xid);
        for (int c = 0; c < channels; ++c) {
            const T mu = mean.data[static_cast<std::size_t>(c)];
            const T is = invstd.data[static_cast<std::size_t>(c)];
            const T g = bn.gamma.value.data[static_cast<std::size_t>(c)];
            T sum_gy{0}, sum_gy_xhat{0};
            for (int b = 0; b < batch; ++b) {
                const T* xr = x_val.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                const T* gr = gy.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                for (int t = 0; t < length; ++t) {
                    sum_gy += gr[t];
                    sum_gy_xhat += gr[t] * (xr[t] - mu) * is;
                }
            }
            bn.beta.grad.data[static_cast<std::size_t>(c)] += sum_gy;
            bn.gamma.grad.data[static_cast<std::size_t>(c)] += sum_gy_xhat;
            const T mean_gy = sum_gy / static_cast<T>(n);
            const T mean_gy_xhat = sum_gy_xhat / static_cast<T>(n);
            for (int b = 0; b < batch; ++b) {
                const T* xr = x_val.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                const T* gr = gy.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                T* gxr = gx.data.data() + (static_cast<std::size_t>(b) * channels + c) * length;
                for (int t = 0; t < length; ++t) {
                    const T xhat = (xr[t] - mu) * is;
                    // batch statistics depend on x, so their variation feeds back;
                    // in eval mode the statistics are constants
                    if (training)
                        gxr[t] += g * is * (gr[t] - mean_gy - xhat * mean_gy_xhat);
                    else
                        gxr[t] += g * is * gr[t];
                }
            }
        }
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::relu(Id xid) {
    const Tensor<T>& x = value(xid);
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > T{0} ? x.data[i] : T{0};
    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid]() {
        const Tensor<T>& gy = node(yid).grad;
        const Tensor<T>& x_val = node(xid).value;
        Tensor<T>& gx = grad_of(xid);
        for (std::size_t i = 0; i < gy.data.size(); ++i)
            if (x_val.data[i] > T{0}) gx.data[i] += gy.data[i];
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::reshape(Id xid, std::vector<int> shape) {
    const Tensor<T>& x = value(xid);
    Tensor<T> y(std::move(shape), x.data);
    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid]() {
        const Tensor<T>& gy = node(yid).grad;
        Tensor<T>& gx = grad_of(xid);
        for (std::size_t i = 0; i < gy.data.size(); ++i) gx.data[i] += gy.data[i];
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::mse_loss(Id pid, const Tensor<T>& target) {
    const Tensor<T>& p = value(pid);
    if (!p.same_shape(target)) shape_fail("mse_loss", "prediction " + shape_string(p.shape) + " vs target " + shape_string(target.shape));
    T acc{0};
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const T d = p.data[i] - target.data[i];
        acc += d * d;
    }
    Tensor<T> y({1});
    y.data[0] = acc / static_cast<T>(p.size());
    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, pid, yid, target]() {
        const T g = node(yid).grad.data[0];
        const Tensor<T>& p_val = node(pid).value;
        Tensor<T>& gp = grad_of(pid);
        const T scale = g * T{2} / static_cast<T>(p_val.size());
        for (std::size_t i = 0; i < p_val.data.size(); ++i)
            gp.data[i] += scale * (p_val.data[i] - target.data[i]);
    };
    return yid;
}

template <typename T>
typename Graph<T>::Id Graph<T>::sum(Id xid) {
    const Tensor<T>& x = value(xid);
    T acc{0};
    for (const T v : x.data) acc += v;
    Tensor<T> y({1});
    y.data[0] = acc;
    const Id yid = push(std::move(y));
    nodes_[static_cast<std::size_t>(yid)].pullback = [this, xid, yid]() {
        const T g = node(yid).grad.data[0];
        Tensor<T>& gx = grad_of(xid);
        for (T& v : gx.data) v += g;
    };
    return yid;
}

template <typename T>
void Graph<T>::backward(Id root) {
    if (root < 0 || root >= static_cast<Id>(nodes_.size())) shape_fail("backward", "unknown node");
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.value.size() != 1) shape_fail("backward", "root must be a scalar node");
    for (Node& nd : nodes_) nd.grad = Tensor<T>{};
    r.grad = Tensor<T>(r.value.shape);
    r.grad.data[0] = T{1};
    for (Id i = root; i >= 0; --i) {
        Node& nd = nodes_[static_cast<std::size_t>(i)];
        if (!nd.grad.empty() && nd.pullback) nd.pullback();
    }
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter<T>* p : params_) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

template <typename T>
void Adam<T>::step() {
    ++t_;
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T bc1 = T{1} - static_cast<T>(std::pow(beta1_, static_cast<double>(t_)));
    const T bc2 = T{1} - static_cast<T>(std::pow(beta2_, static_cast<double>(t_)));
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter<T>& p = *params_[i];
        T* m = m_[i].data.data();
        T* v = v_[i].data.data();
        const T* g = p.grad.data.data();
        T* w = p.value.data.data();
        const std::size_t n = p.value.data.size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (T{1} - b1) * g[j];
            v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
            w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (Parameter<T>* p : params_) p->zero_grad();
}

template <typename T>
void init_uniform_fanin(Parameter<T>& param, int fan_in, RandomStream& rng) {
    if (fan_in < 1) throw std::invalid_argument("init_uniform_fanin: fan_in must be positive");
    const double bound = std::sqrt(6.0 / fan_in);
    for (T& v : param.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template class Graph<float>;
template class Graph<double>;
template class Adam<float>;
template class Adam<double>;
template void init_uniform_fanin<float>(Parameter<float>&, int, RandomStream&);
template void init_uniform_fanin<double>(Parameter<double>&, int, RandomStream&);

}  // namespace sfreq
