#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wad/error.hpp"
#include "wad/pseudo_labeling.hpp"

namespace wad {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1 };

inline Activation parse_activation(std::string_view tag) {
    if (tag == "relu") return Activation::Relu;
    if (tag == "tanh") return Activation::Tanh;
    throw Error(ErrorCode::InvalidConfig, "unknown activation '" + std::string(tag) + "'");
}

inline std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

inline constexpr double kProbabilityFloor = 1e-12;

/// Layer widths of a fully connected classifier d -> hidden... -> K.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t num_classes = 0;
    Activation activation = Activation::Relu;

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_dim};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(num_classes);
        return w;
    }

    std::size_t num_layers() const noexcept { return hidden.size() + 1; }

    std::size_t parameter_count() const {
        const auto w = widths();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * w[l] + w[l + 1];
        return n;
    }

    void validate() const {
        if (input_dim == 0) throw Error(ErrorCode::InvalidConfig, "input dimension must be >= 1");
        if (num_classes < 2) throw Error(ErrorCode::InvalidConfig, "need at least two output classes");
        for (std::size_t h : hidden) {
            if (h == 0) throw Error(ErrorCode::InvalidConfig, "hidden widths must be >= 1");
        }
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
};

/// Classifier weights in one flat buffer. Layer l stores its weight matrix
/// (out x in, row-major) followed by its bias vector.
struct StudentParams {
    Architecture arch;
    std::vector<double> values;
    AdamState adam;

    static StudentParams zeros(const Architecture& arch) {
        arch.validate();
        StudentParams p;
        p.arch = arch;
        p.values.assign(arch.parameter_count(), 0.0);
        p.adam.first_moment.assign(p.values.size(), 0.0);
        p.adam.second_moment.assign(p.values.size(), 0.0);
        return p;
    }

    /// He-uniform weights for relu, Glorot-uniform for tanh; zero biases.
    static StudentParams initialized(const Architecture& arch, std::uint64_t seed) {
        StudentParams p = zeros(arch);
        std::mt19937_64 rng(seed);
        const auto w = arch.widths();
        std::size_t offset = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            const double fan_in = static_cast<double>(w[l]);
            const double fan_out = static_cast<double>(w[l + 1]);
            const double limit = arch.activation == Activation::Relu ? std::sqrt(6.0 / fan_in)
                                                                     : std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (std::size_t k = 0; k < w[l + 1] * w[l]; ++k) p.values[offset + k] = dist(rng);
            offset += w[l + 1] * w[l] + w[l + 1];
        }
        return p;
    }

    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }
};

struct TrainConfig {
    double learning_rate = 5e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    double input_noise_std = 0.15;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::vector<std::size_t> hidden{64};
    Activation activation = Activation::Relu;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
            throw Error(ErrorCode::InvalidConfig, "train.learning_rate must be a finite non-negative number");
        }
        if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "train.batch_size must be >= 1");
        if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "train.epochs must be >= 1");
        if (!(input_noise_std >= 0.0)) throw Error(ErrorCode::InvalidConfig, "train.input_noise_std must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw Error(ErrorCode::InvalidConfig, "train.beta1/beta2 must lie in [0, 1)");
        }
    }
};

struct LabeledExample {
    std::vector<double> x;
    ClassId label = 0;
};

struct WeightedExample {
    std::vector<double> x;
    ClassId label = 0;
    double weight = 1.0;
};

namespace detail {

inline double activate(Activation a, double z) { return a == Activation::Relu ? std::max(z, 0.0) : std::tanh(z); }

inline double activation_derivative(Activation a, double z, double activated) {
    return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - activated * activated;
}

inline void softmax_in_place(std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& v : logits) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : logits) v /= total;
}

/// Per-layer pre-activations and outputs kept for backpropagation.
struct ForwardTrace {
    std::vector<std::vector<double>> outputs;  // outputs[0] is the input
    std::vector<std::vector<double>> pre_activations;
    std::vector<double> probs;
};

inline ForwardTrace trace_forward(const StudentParams& params, std::span<const double> x) {
    const auto& arch = params.arch;
    if (x.size() != arch.input_dim) {
        throw Error(ErrorCode::DimensionMismatch, "input dimension " + std::to_string(x.size()) + ", expected " +
                                                      std::to_string(arch.input_dim));
    }
    const auto widths = arch.widths();
    ForwardTrace trace;
    trace.outputs.emplace_back(x.begin(), x.end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const double* w = params.values.data() + offset;
        const double* b = w + out * in;
        const auto& a = trace.outputs.back();
        std::vector<double> z(out);
        for (std::size_t r = 0; r < out; ++r) {
            double s = b[r];
            const double* row = w + r * in;
            for (std::size_t c = 0; c < in; ++c) s += row[c] * a[c];
            z[r] = s;
        }
        offset += out * in + out;
        const bool last = l + 2 == widths.size();
        trace.pre_activations.push_back(z);
        if (last) {
            softmax_in_place(z);
            trace.probs = z;
        } else {
            for (double& v : z) v = activate(arch.activation, v);
        }
        trace.outputs.push_back(std::move(z));
    }
    return trace;
}

/// Adds coef * d(-log p_label)/d(params) into grad.
inline void accumulate_gradient(const StudentParams& params, const ForwardTrace& trace, ClassId label, double coef,
                                std::vector<double>& grad) {
    const auto widths = params.arch.widths();
    const std::size_t layers = widths.size() - 1;
    const auto y = static_cast<std::size_t>(label);
    // Below the probability floor the clamped loss is flat.
    if (trace.probs[y] <= kProbabilityFloor) return;

    std::vector<double> delta(trace.probs);
    delta[y] -= 1.0;
    for (double& d : delta) d *= coef;

    std::vector<std::size_t> offsets(layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offsets[l] = offset;
        offset += widths[l + 1] * widths[l] + widths[l + 1];
    }

    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const auto& a = trace.outputs[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + out * in;
        for (std::size_t r = 0; r < out; ++r) {
            gb[r] += delta[r];
            double* row = gw + r * in;
            for (std::size_t c = 0; c < in; ++c) row[c] += delta[r] * a[c];
        }
        if (l == 0) break;
        const double* w = params.values.data() + offsets[l];
        std::vector<double> prev(in, 0.0);
        for (std::size_t r = 0; r < out; ++r) {
            const double* row = w + r * in;
            for (std::size_t c = 0; c < in; ++c) prev[c] += row[c] * delta[r];
        }
        const auto& z = trace.pre_activations[l - 1];
        for (std::size_t c = 0; c < in; ++c) {
            prev[c] *= activation_derivative(params.arch.activation, z[c], a[c]);
        }
        delta = std::move(prev);
    }
}

}  // namespace detail

inline std::vector<double> forward(const StudentParams& params, std::span<const double> x) {
    return detail::trace_forward(params, x).probs;
}

inline double cross_entropy(std::span<const double> probs, ClassId label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                                    std::to_string(probs.size()) + ")");
    }
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbabilityFloor));
}

inline ClassId predict(const StudentParams& params, std::span<const double> x) {
    const auto probs = forward(params, x);
    // max_element returns the first maximum: ties go to the lowest class id.
    return static_cast<ClassId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

/// Mean labeled cross-entropy plus mean weighted pseudo-label cross-entropy.
/// An empty side contributes nothing. When `grad` is given it receives the
/// gradient with respect to `params.values`.
inline double wad_loss(const StudentParams& params, std::span<const LabeledExample> labeled,
                       std::span<const WeightedExample> unlabeled, std::vector<double>* grad = nullptr) {
    if (grad) grad->assign(params.values.size(), 0.0);
    double labeled_term = 0.0;
    if (!labeled.empty()) {
        const double coef = 1.0 / static_cast<double>(labeled.size());
        for (const auto& ex : labeled) {
            const auto trace = detail::trace_forward(params, ex.x);
            labeled_term += cross_entropy(trace.probs, ex.label);
            if (grad) detail::accumulate_gradient(params, trace, ex.label, coef, *grad);
        }
        labeled_term *= coef;
    }
    double unlabeled_term = 0.0;
    if (!unlabeled.empty()) {
        const double coef = 1.0 / static_cast<double>(unlabeled.size());
        for (const auto& ex : unlabeled) {
            const auto trace = detail::trace_forward(params, ex.x);
            unlabeled_term += ex.weight * cross_entropy(trace.probs, ex.label);
            if (grad && ex.weight != 0.0) detail::accumulate_gradient(params, trace, ex.label, coef * ex.weight, *grad);
        }
        unlabeled_term *= coef;
    }
    return labeled_term + unlabeled_term;
}

/// One bias-corrected adaptive-moment update of `params` along `grad`.
inline void adam_update(StudentParams& params, std::span<const double> grad, const TrainConfig& config) {
    auto& st = params.adam;
    if (st.first_moment.size() != params.values.size()) {
        st.first_moment.assign(params.values.size(), 0.0);
        st.second_moment.assign(params.values.size(), 0.0);
    }
    ++st.step;
    const double t = static_cast<double>(st.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        st.first_moment[i] = config.beta1 * st.first_moment[i] + (1.0 - config.beta1) * grad[i];
        st.second_moment[i] = config.beta2 * st.second_moment[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = st.first_moment[i] / correction1;
        const double v_hat = st.second_moment[i] / correction2;
        params.values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
}

/// Independent engines for the labeled and unlabeled halves of each step, so
/// the labeled stream is unaffected by what happens on the unlabeled side.
struct TrainingStreams {
    std::mt19937_64 labeled;
    std::mt19937_64 unlabeled;

    explicit TrainingStreams(std::uint64_t seed) {
        std::seed_seq l{seed, std::uint64_t{0x1abe1ed}};
        std::seed_seq u{seed, std::uint64_t{0x0f1e1d}};
        labeled.seed(l);
        unlabeled.seed(u);
    }
};

namespace detail {

template <typename Example>
std::vector<Example> with_noise(std::span<const Example> batch, double stddev, std::mt19937_64& rng) {
    std::vector<Example> out(batch.begin(), batch.end());
    if (stddev <= 0.0) return out;
    std::normal_distribution<double> noise(0.0, stddev);
    for (auto& ex : out) {
        for (double& v : ex.x) v += noise(rng);
    }
    return out;
}

}  // namespace detail

/// Perturbs both batches with Gaussian input noise, then takes one optimizer
/// step on the weight-aware loss. Returns the loss at the pre-step parameters.
inline double train_step(StudentParams& params, std::span<const LabeledExample> labeled,
                         std::span<const WeightedExample> unlabeled, const TrainConfig& config,
                         TrainingStreams& streams) {
    const auto noisy_labeled = detail::with_noise(labeled, config.input_noise_std, streams.labeled);
    const auto noisy_unlabeled = detail::with_noise(unlabeled, config.input_noise_std, streams.unlabeled);
    std::vector<double> grad;
    const double loss = wad_loss(params, noisy_labeled, noisy_unlabeled, &grad);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw Error(ErrorCode::NonFiniteGradient, "gradient entry " + std::to_string(i) + " is " +
                                                          std::to_string(grad[i]) + " at optimizer step " +
                                                          std::to_string(params.adam.step + 1) + " (loss " +
                                                          std::to_string(loss) + ")");
        }
    }
    adam_update(params, grad, config);
    if (!params.all_finite()) {
        throw Error(ErrorCode::InvariantViolation,
                    "non-finite parameter after optimizer step " + std::to_string(params.adam.step));
    }
    return loss;
}

/// Fraction of argmax-correct predictions, no noise.
inline double evaluate(const StudentParams& params, std::span<const LabeledExample> test_set) {
    if (test_set.empty()) throw Error(ErrorCode::EmptyTestSet, "test set is empty");
    std::size_t correct = 0;
    for (const auto& ex : test_set) {
        if (predict(params, ex.x) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

}  // namespace wad
