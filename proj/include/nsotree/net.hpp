#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsotree/survival.hpp"

namespace nsotree {

enum class Activation { ReLU, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Parameters of the layered oblique-split network. Layer l (0-based)
/// consumes concat[x, a^(1), ..., a^(l)] of length d + l*d_h and emits d_h
/// units; the linear head consumes concat[x, a^(1), ..., a^(L)].
/// depth == 0 leaves only the head, a plain linear risk model.
struct NSOTreeParams {
    struct Layer {
        std::vector<double> w;  // d_h rows, row length d + l*d_h, row-major
        std::vector<double> b;  // d_h
        bool operator==(const Layer&) const = default;
    };

    int d = 0;
    int depth = 0;
    int d_h = 1;
    std::vector<Layer> layers;   // size depth
    std::vector<double> head_w;  // d + depth*d_h
    double head_b = 0.0;

    int layer_input_dim(int l) const { return d + l * d_h; }
    int head_input_dim() const { return d + depth * d_h; }
    std::size_t layer_weight_count() const;
    bool operator==(const NSOTreeParams&) const = default;

    /// Enforces the dimension schedule d + l*d_h and finiteness.
    void validate() const;
};

/// Uniform fan-in initialization: weights i.i.d. on
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero. Deterministic in seed.
NSOTreeParams init_params(int d, int depth, int d_h, std::uint64_t seed);

/// Pre-activations, activations, and binary activation patterns for one
/// input, stored layer-major with stride d_h.
struct ActivationTrace {
    int depth = 0;
    int d_h = 1;
    std::vector<double> z;             // depth * d_h
    std::vector<double> a;             // depth * d_h
    std::vector<std::uint8_t> pattern; // 1 iff z >= 0
    double score = 0.0;
};

ActivationTrace forward(const NSOTreeParams& p, const double* x, Activation mode);

/// Score only, no trace.
double forward_score(const NSOTreeParams& p, const double* x, Activation mode);

std::vector<double> score_dataset(const NSOTreeParams& p, const SurvivalDataset& ds,
                                  Activation mode);

/// Gradient accumulator shaped like the parameters.
struct ParamGrads {
    std::vector<std::vector<double>> layer_w;
    std::vector<std::vector<double>> layer_b;
    std::vector<double> head_w;
    double head_b = 0.0;

    static ParamGrads zeros_like(const NSOTreeParams& p);
};

/// Accumulates exact gradients of sum_i dscore[i] * score(x_i) into `grads`.
/// Traces must come from forward() with the same mode.
void backward(const NSOTreeParams& p, const std::vector<const double*>& xs,
              const std::vector<ActivationTrace>& traces,
              const std::vector<double>& dscore, Activation mode, ParamGrads& grads);

/// Convenience overload that recomputes the forward traces.
ParamGrads backward(const NSOTreeParams& p, const std::vector<const double*>& xs,
                    const std::vector<double>& dscore, Activation mode);

/// Soft-thresholds every layer weight matrix by lambda. Biases and the
/// output head are left untouched.
NSOTreeParams prox_step(const NSOTreeParams& p, double lambda);

/// Fraction of exactly-zero entries among the layer weight matrices.
double sparsity(const NSOTreeParams& p);

/// Model checkpoint: parameters plus the bookkeeping needed to evaluate
/// them later (training-data reference, standardization, feature names).
struct Checkpoint {
    std::string model_kind = "nsotree";  // "nsotree" | "linear"
    Activation activation = Activation::Softplus;
    NSOTreeParams params;
    std::string train_data_path;             // empty if unknown
    std::vector<std::string> feature_names;  // post-encoding names, may be empty
    std::optional<Standardization> standardization;
};

/// Versioned line-oriented text format; doubles are written with 17
/// significant digits so parse(serialize(c)) is bit-exact.
std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nsotree
