#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/rng.hpp"
#include "xens/tensor.hpp"

namespace xens {

// Probability vector produced by a classifier. label is the argmax with
// the smallest index winning ties; confidence is probs[label].
struct PredictionVector {
    std::vector<double> probs;
    int label = 0;
    double confidence = 0.0;

    static PredictionVector from_probs(std::vector<double> probs);
};

std::vector<double> softmax(const std::vector<double>& logits);
int argmax_lowest(const std::vector<double>& v);

enum class Activation { Relu, Identity };

struct Layer {
    Tensor w;                // {out_dim, in_dim}
    std::vector<double> b;   // out_dim
    Activation act = Activation::Relu;
};

// Small fully connected classifier. All arithmetic is double precision;
// softmax is applied only when producing a PredictionVector, so logits
// stay available for margin-based attacks.
class MicroModel {
  public:
    MicroModel() = default;
    MicroModel(size_t input_dim, std::vector<Layer> layers);

    // He-scaled random initialization; hidden layers use ReLU and the
    // final layer is identity (logits).
    static MicroModel random(size_t input_dim, const std::vector<size_t>& hidden,
                             size_t num_classes, uint64_t seed);

    size_t input_dim() const { return input_dim_; }
    size_t num_classes() const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& mutable_layers() { return layers_; }

    std::vector<double> logits(const Tensor& x) const;
    PredictionVector forward(const Tensor& x) const;

    // Cross-entropy of the softmax output against `label`.
    double loss(const Tensor& x, int label) const;

    // d loss / d x, same size as the flattened input.
    std::vector<double> input_gradient(const Tensor& x, int label) const;

    // d probs_k / d x_i as a {num_classes, input_dim} tensor.
    Tensor jacobian(const Tensor& x) const;

    // Gradient of an arbitrary scalar with given d(scalar)/d(logits).
    std::vector<double> logit_seed_gradient(const Tensor& x,
                                            const std::vector<double>& dlogits) const;

    std::string to_json() const;
    static MicroModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static MicroModel load(const std::string& path);

    bool operator==(const MicroModel& other) const;

  private:
    struct Trace {
        std::vector<std::vector<double>> pre;   // pre-activation per layer
        std::vector<std::vector<double>> post;  // post-activation per layer
    };
    std::vector<double> run_forward(const Tensor& x, Trace* trace) const;
    void check_input(const Tensor& x) const;

    size_t input_dim_ = 0;
    std::vector<Layer> layers_;
};

}  // namespace xens
