#pragma once

// Dense multilayer perceptron with hand-written backpropagation.
//
// Parameter layout (fixed, shared by every ParamVector in the library):
// layer by layer, the weight matrix in row-major (out x in) order followed by
// the bias vector of that layer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedmeta/error.hpp"
#include "fedmeta/param_vector.hpp"
#include "fedmeta/random.hpp"

namespace fedmeta {

enum class Activation { relu };
enum class Head { identity_mse, softmax_cross_entropy };

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;
    Head head = Head::identity_mse;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }

    void validate() const {
        require(layer_sizes.size() >= 2, errc::invalid_argument, "an MLP needs at least two layer sizes");
        for (std::size_t n : layer_sizes) require(n >= 1, errc::invalid_argument, "layer sizes must be >= 1");
        if (head == Head::softmax_cross_entropy)
            require(output_dim() >= 2, errc::invalid_argument, "softmax head needs >= 2 outputs");
    }
};

/// d = sum over layers of (n_in * n_out + n_out).
inline std::size_t param_count(const MlpSpec& spec) {
    spec.validate();
    std::size_t d = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l)
        d += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
    return d;
}

/// Rows of samples. Regression batches carry `targets` (size x output_dim);
/// classification batches carry integer `labels` (size).
struct Batch {
    std::size_t size = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<int> labels;

    bool is_classification() const noexcept { return !labels.empty(); }

    std::span<const double> input(std::size_t row) const {
        return {inputs.data() + row * input_dim, input_dim};
    }

    Batch gather(std::span<const std::size_t> rows) const {
        Batch out;
        out.size = rows.size();
        out.input_dim = input_dim;
        out.output_dim = output_dim;
        out.inputs.reserve(rows.size() * input_dim);
        if (!targets.empty()) out.targets.reserve(rows.size() * output_dim);
        if (!labels.empty()) out.labels.reserve(rows.size());
        for (std::size_t r : rows) {
            require(r < size, errc::invalid_argument, "batch row index out of range");
            out.inputs.insert(out.inputs.end(), inputs.begin() + r * input_dim,
                              inputs.begin() + (r + 1) * input_dim);
            if (!targets.empty())
                out.targets.insert(out.targets.end(), targets.begin() + r * output_dim,
                                   targets.begin() + (r + 1) * output_dim);
            if (!labels.empty()) out.labels.push_back(labels[r]);
        }
        return out;
    }

    static Batch regression(std::size_t input_dim, std::size_t output_dim, std::vector<double> inputs,
                            std::vector<double> targets) {
        require(input_dim >= 1 && output_dim >= 1, errc::shape_mismatch, "zero-width regression batch");
        require(inputs.size() % input_dim == 0, errc::shape_mismatch, "input buffer not a whole number of rows");
        Batch b;
        b.size = inputs.size() / input_dim;
        b.input_dim = input_dim;
        b.output_dim = output_dim;
        require(targets.size() == b.size * output_dim, errc::shape_mismatch, "target buffer size mismatch");
        b.inputs = std::move(inputs);
        b.targets = std::move(targets);
        return b;
    }

    static Batch classification(std::size_t input_dim, std::size_t num_classes, std::vector<double> inputs,
                                std::vector<int> labels) {
        require(input_dim >= 1, errc::shape_mismatch, "zero-width classification batch");
        require(inputs.size() == labels.size() * input_dim, errc::shape_mismatch, "input buffer size mismatch");
        for (int y : labels)
            require(y >= 0 && static_cast<std::size_t>(y) < num_classes, errc::shape_mismatch,
                    "label outside the output head");
        Batch b;
        b.size = labels.size();
        b.input_dim = input_dim;
        b.output_dim = num_classes;
        b.inputs = std::move(inputs);
        b.labels = std::move(labels);
        return b;
    }
};

/// Row-major (rows x cols) prediction matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

namespace detail {

inline void check_shapes(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    spec.validate();
    require(params.size() == param_count(spec), errc::shape_mismatch,
            "parameter vector has " + std::to_string(params.size()) + " entries, model needs " +
                std::to_string(param_count(spec)));
    require(batch.size >= 1, errc::shape_mismatch, "empty batch");
    require(batch.input_dim == spec.input_dim(), errc::shape_mismatch, "batch input width does not match model");
    require(batch.inputs.size() == batch.size * batch.input_dim, errc::shape_mismatch, "batch input buffer size");
    if (spec.head == Head::identity_mse) {
        require(!batch.is_classification() && batch.output_dim == spec.output_dim() &&
                    batch.targets.size() == batch.size * batch.output_dim,
                errc::shape_mismatch, "regression head needs real targets of the output width");
    } else {
        require(batch.is_classification() && batch.labels.size() == batch.size, errc::shape_mismatch,
                "softmax head needs one integer label per row");
        for (int y : batch.labels)
            require(y >= 0 && static_cast<std::size_t>(y) < spec.output_dim(), errc::shape_mismatch,
                    "label outside the output head");
    }
}

/// Pre-activations (z) and activations (a) of every layer for a whole batch.
/// acts[0] is the input; acts[L] holds head outputs (identity or softmax).
struct ForwardTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> acts;
};

inline void softmax_rows(std::vector<double>& z, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = z.data() + r * cols;
        const double peak = *std::max_element(row, row + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - peak);
            total += row[c];
        }
        for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
    }
}

inline ForwardTrace run_forward(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    const std::size_t layers = spec.num_layers();
    const std::size_t m = batch.size;
    ForwardTrace trace;
    trace.pre.resize(layers + 1);
    trace.acts.resize(layers + 1);
    trace.acts[0] = batch.inputs;

    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double* w = params.span().data() + offset;
        const double* b = w + n_in * n_out;
        offset += n_in * n_out + n_out;

        const auto& a_in = trace.acts[l];
        auto& z = trace.pre[l + 1];
        z.assign(m * n_out, 0.0);
        for (std::size_t s = 0; s < m; ++s) {
            const double* x = a_in.data() + s * n_in;
            double* zs = z.data() + s * n_out;
            for (std::size_t o = 0; o < n_out; ++o) {
                const double* wo = w + o * n_in;
                double acc = b[o];
                for (std::size_t i = 0; i < n_in; ++i) acc += wo[i] * x[i];
                zs[o] = acc;
            }
        }

        auto& a = trace.acts[l + 1];
        a = z;
        if (l + 1 < layers) {
            for (double& v : a) v = v > 0.0 ? v : 0.0;
        } else if (spec.head == Head::softmax_cross_entropy) {
            softmax_rows(a, m, n_out);
        }
    }
    return trace;
}

/// log(sum(exp(row))) computed stably from the raw logits.
inline double log_sum_exp(std::span<const double> row) {
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - peak);
    return peak + std::log(total);
}

} // namespace detail

inline Matrix forward(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    detail::check_shapes(spec, params, batch);
    auto trace = detail::run_forward(spec, params, batch);
    return Matrix{batch.size, spec.output_dim(), std::move(trace.acts.back())};
}

/// MSE head: mean over samples and output dims of the squared error.
/// Cross-entropy head: mean negative log-likelihood of the labels.
inline double loss(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    detail::check_shapes(spec, params, batch);
    const auto trace = detail::run_forward(spec, params, batch);
    const std::size_t m = batch.size;
    const std::size_t n_out = spec.output_dim();
    double total = 0.0;
    if (spec.head == Head::identity_mse) {
        const auto& pred = trace.acts.back();
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double e = pred[k] - batch.targets[k];
            total += e * e;
        }
        return total / static_cast<double>(m * n_out);
    }
    const auto& logits = trace.pre.back();
    for (std::size_t s = 0; s < m; ++s) {
        std::span<const double> row(logits.data() + s * n_out, n_out);
        total += detail::log_sum_exp(row) - row[static_cast<std::size_t>(batch.labels[s])];
    }
    return total / static_cast<double>(m);
}

/// Exact gradient of loss() by backpropagation, in ParamVector layout.
inline ParamVector grad(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    detail::check_shapes(spec, params, batch);
    const auto trace = detail::run_forward(spec, params, batch);
    const std::size_t layers = spec.num_layers();
    const std::size_t m = batch.size;
    const std::size_t n_last = spec.output_dim();

    // dL/dz for the output layer
    std::vector<double> delta(trace.acts.back());
    if (spec.head == Head::identity_mse) {
        const double scale = 2.0 / static_cast<double>(m * n_last);
        for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = scale * (delta[k] - batch.targets[k]);
    } else {
        const double scale = 1.0 / static_cast<double>(m);
        for (std::size_t s = 0; s < m; ++s) delta[s * n_last + static_cast<std::size_t>(batch.labels[s])] -= 1.0;
        for (double& v : delta) v *= scale;
    }

    std::vector<std::size_t> offsets(layers);
    for (std::size_t l = 0, off = 0; l < layers; ++l) {
        offsets[l] = off;
        off += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
    }

    ParamVector g(params.size());
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double* w = params.span().data() + offsets[l];
        double* gw = g.span().data() + offsets[l];
        double* gb = gw + n_in * n_out;
        const auto& a_in = trace.acts[l];

        for (std::size_t s = 0; s < m; ++s) {
            const double* x = a_in.data() + s * n_in;
            const double* ds = delta.data() + s * n_out;
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = ds[o];
                if (d == 0.0) continue;
                double* gwo = gw + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i) gwo[i] += d * x[i];
                gb[o] += d;
            }
        }

        if (l == 0) break;
        std::vector<double> prev(m * n_in, 0.0);
        const auto& z_in = trace.pre[l];
        for (std::size_t s = 0; s < m; ++s) {
            const double* ds = delta.data() + s * n_out;
            double* ps = prev.data() + s * n_in;
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = ds[o];
                if (d == 0.0) continue;
                const double* wo = w + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i) ps[i] += d * wo[i];
            }
            const double* zs = z_in.data() + s * n_in;
            for (std::size_t i = 0; i < n_in; ++i)
                if (zs[i] <= 0.0) ps[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return g;
}

/// Uniform in [-1/sqrt(n_in), 1/sqrt(n_in)] for every weight and bias of a layer.
inline ParamVector init_params(const MlpSpec& spec, Rng& rng) {
    ParamVector p(param_count(spec));
    std::size_t k = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t j = 0; j < n_in * n_out + n_out; ++j) p[k++] = dist(rng);
    }
    return p;
}

/// Draws mini-batch row indices without replacement inside an epoch and
/// reshuffles at each epoch boundary. An epoch tail shorter than the batch
/// size is dropped. A batch size >= the data size yields every row, in order.
class MinibatchSampler {
public:
    MinibatchSampler(std::size_t rows, std::size_t batch_size)
        : rows_(rows), batch_size_(std::min(batch_size, rows)), order_(rows) {
        require(rows >= 1, errc::empty_input, "cannot sample from an empty data source");
        require(batch_size >= 1, errc::invalid_argument, "batch size must be >= 1");
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        cursor_ = rows_;
    }

    bool full_batch() const noexcept { return batch_size_ == rows_; }

    std::span<const std::size_t> next(Rng& rng) {
        if (full_batch()) return order_;
        if (cursor_ + batch_size_ > rows_) {
            std::shuffle(order_.begin(), order_.end(), rng);
            cursor_ = 0;
        }
        std::span<const std::size_t> out(order_.data() + cursor_, batch_size_);
        cursor_ += batch_size_;
        return out;
    }

private:
    std::size_t rows_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t cursor_;
};

inline ParamVector sgd(const MlpSpec& spec, const ParamVector& init, const Batch& data, std::size_t steps,
                       double lr, std::size_t batch_size, Rng& rng) {
    require(lr > 0.0, errc::invalid_argument, "learning rate must be positive");
    require(data.size >= 1, errc::empty_input, "SGD on an empty data source");
    ParamVector params = init;
    if (steps == 0) return params;
    MinibatchSampler sampler(data.size, batch_size);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto g = sampler.full_batch() ? grad(spec, params, data) : grad(spec, params, data.gather(sampler.next(rng)));
        params.axpy(-lr, g);
    }
    return params;
}

/// Hessian-vector product by central differences of grad():
/// (grad(p + h v) - grad(p - h v)) / 2h with h = eps / max(1, |v|).
inline ParamVector hvp(const MlpSpec& spec, const ParamVector& params, const Batch& batch, const ParamVector& v,
                       double eps = 1e-4) {
    require(v.size() == params.size(), errc::dimension_mismatch, "hvp direction has the wrong length");
    const double h = eps / std::max(1.0, norm(v));
    ParamVector plus = params;
    plus.axpy(h, v);
    ParamVector minus = params;
    minus.axpy(-h, v);
    ParamVector out = grad(spec, plus, batch);
    out -= grad(spec, minus, batch);
    out *= 1.0 / (2.0 * h);
    return out;
}

/// Fraction of rows whose arg-max prediction equals the label.
inline double accuracy(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    const Matrix probs = forward(spec, params, batch);
    require(batch.is_classification(), errc::shape_mismatch, "accuracy needs labels");
    std::size_t hits = 0;
    for (std::size_t s = 0; s < batch.size; ++s) {
        const auto row = probs.row(s);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == batch.labels[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(batch.size);
}

} // namespace fedmeta
