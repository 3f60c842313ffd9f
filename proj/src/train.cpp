#include "xens/train.hpp"

#include <numeric>

#include "xens/error.hpp"

namespace xens {

namespace {

struct Grads {
    std::vector<Tensor> w;
    std::vector<std::vector<double>> b;

    explicit Grads(const MicroModel& m) {
        for (const Layer& l : m.layers()) {
            w.emplace_back(l.w.shape, 0.0);
            b.emplace_back(l.b.size(), 0.0);
        }
    }
    void zero() {
        for (auto& t : w) std::fill(t.data.begin(), t.data.end(), 0.0);
        for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    }
};

// Forward with trace, then accumulate d CE / d params into `acc`.
void accumulate_example(const MicroModel& model, const Tensor& x, int label, Grads& acc) {
    const auto& layers = model.layers();
    std::vector<std::vector<double>> post;  // activations entering each layer
    post.reserve(layers.size() + 1);
    post.push_back(x.data);
    std::vector<std::vector<double>> pre(layers.size());
    std::vector<double> cur = x.data;
    for (size_t li = 0; li < layers.size(); ++li) {
        const Layer& l = layers[li];
        const size_t out = l.w.rows(), in = l.w.cols();
        std::vector<double> z(out);
        for (size_t r = 0; r < out; ++r) {
            double a = l.b[r];
            const double* wr = &l.w.data[r * in];
            for (size_t c = 0; c < in; ++c) a += wr[c] * cur[c];
            z[r] = a;
        }
        pre[li] = z;
        if (l.act == Activation::Relu)
            for (double& v : z) v = std::max(0.0, v);
        cur = z;
        post.push_back(cur);
    }

    std::vector<double> grad = softmax(post.back());
    grad[size_t(label)] -= 1.0;  // d CE / d logits

    for (size_t li = layers.size(); li-- > 0;) {
        const Layer& l = layers[li];
        const size_t out = l.w.rows(), in = l.w.cols();
        if (l.act == Activation::Relu)
            for (size_t r = 0; r < out; ++r)
                if (pre[li][r] <= 0.0) grad[r] = 0.0;
        const std::vector<double>& input = post[li];
        for (size_t r = 0; r < out; ++r) {
            const double g = grad[r];
            if (g == 0.0) continue;
            acc.b[li][r] += g;
            double* wr = &acc.w[li].data[r * in];
            for (size_t c = 0; c < in; ++c) wr[c] += g * input[c];
        }
        if (li == 0) break;
        std::vector<double> down(in, 0.0);
        for (size_t r = 0; r < out; ++r) {
            const double g = grad[r];
            if (g == 0.0) continue;
            const double* wr = &l.w.data[r * in];
            for (size_t c = 0; c < in; ++c) down[c] += g * wr[c];
        }
        grad = std::move(down);
    }
}

}  // namespace

MicroModel train(const MicroModel& model, const Dataset& data, const TrainConfig& cfg) {
    if (data.kind != DatasetKind::InDistribution)
        fail_invalid("train: dataset has no labels");
    if (data.count() == 0) fail_invalid("train: empty dataset");
    if (data.labels.size() != data.count()) fail_invalid("train: label count mismatch");
    if (cfg.batch_size == 0) fail_invalid("train: batch_size must be positive");
    for (int y : data.labels)
        if (y < 0 || size_t(y) >= model.num_classes())
            fail_invalid("train: label out of range for model");

    MicroModel m = model;
    Grads grads(m), velocity(m);
    Rng rng(cfg.seed);
    std::vector<size_t> order(data.count());
    std::iota(order.begin(), order.end(), 0);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            grads.zero();
            for (size_t i = start; i < end; ++i)
                accumulate_example(m, data.images[order[i]], data.labels[order[i]], grads);
            const double inv = 1.0 / double(end - start);
            auto& layers = m.mutable_layers();
            for (size_t li = 0; li < layers.size(); ++li) {
                for (size_t j = 0; j < layers[li].w.data.size(); ++j) {
                    double& v = velocity.w[li].data[j];
                    v = cfg.momentum * v + grads.w[li].data[j] * inv;
                    layers[li].w.data[j] -= cfg.learning_rate * v;
                }
                for (size_t j = 0; j < layers[li].b.size(); ++j) {
                    double& v = velocity.b[li][j];
                    v = cfg.momentum * v + grads.b[li][j] * inv;
                    layers[li].b[j] -= cfg.learning_rate * v;
                }
            }
        }
    }
    return m;
}

double accuracy(const MicroModel& model, const Dataset& data) {
    if (data.count() == 0) fail_invalid("accuracy: empty dataset");
    if (data.labels.size() != data.count()) fail_invalid("accuracy: dataset has no labels");
    size_t hits = 0;
    for (size_t i = 0; i < data.count(); ++i)
        if (model.forward(data.images[i]).label == data.labels[i]) ++hits;
    return double(hits) / double(data.count());
}

}  // namespace xens
