#include "xens/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xens/error.hpp"

namespace xens {

using json = nlohmann::ordered_json;

int argmax_lowest(const std::vector<double>& v) {
    if (v.empty()) fail_invalid("argmax of empty vector");
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return int(best);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) fail_invalid("softmax of empty vector");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

PredictionVector PredictionVector::from_probs(std::vector<double> probs) {
    PredictionVector pv;
    pv.label = argmax_lowest(probs);
    pv.confidence = probs[size_t(pv.label)];
    pv.probs = std::move(probs);
    return pv;
}

MicroModel::MicroModel(size_t input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    if (layers_.empty()) fail_invalid("model needs at least one layer");
    size_t in = input_dim_;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (l.w.shape.size() != 2)
            fail_dim("layer " + std::to_string(li) + ": weight must be 2-D");
        if (l.w.cols() != in)
            fail_dim("layer " + std::to_string(li) + ": expected input " +
                     std::to_string(in) + ", got " + std::to_string(l.w.cols()));
        if (l.b.size() != l.w.rows())
            fail_dim("layer " + std::to_string(li) + ": bias size mismatch");
        in = l.w.rows();
    }
    if (num_classes() < 2) fail_invalid("model must output at least 2 classes");
}

size_t MicroModel::num_classes() const {
    if (layers_.empty()) fail_invalid("empty model");
    return layers_.back().w.rows();
}

MicroModel MicroModel::random(size_t input_dim, const std::vector<size_t>& hidden,
                              size_t num_classes, uint64_t seed) {
    if (num_classes < 2) fail_invalid("need at least 2 classes");
    Rng rng(seed);
    std::vector<Layer> layers;
    size_t in = input_dim;
    std::vector<size_t> dims = hidden;
    dims.push_back(num_classes);
    for (size_t li = 0; li < dims.size(); ++li) {
        const size_t out = dims[li];
        Layer l;
        l.w = Tensor({out, in});
        const double scale = std::sqrt(2.0 / double(in));
        for (double& v : l.w.data) v = rng.normal() * scale;
        l.b.assign(out, 0.0);
        l.act = (li + 1 == dims.size()) ? Activation::Identity : Activation::Relu;
        layers.push_back(std::move(l));
        in = out;
    }
    return MicroModel(input_dim, std::move(layers));
}

void MicroModel::check_input(const Tensor& x) const {
    if (x.size() != input_dim_)
        fail_dim("input has " + std::to_string(x.size()) + " elements, model expects " +
                 std::to_string(input_dim_));
}

std::vector<double> MicroModel::run_forward(const Tensor& x, Trace* trace) const {
    check_input(x);
    std::vector<double> cur = x.data;
    if (trace) {
        trace->pre.clear();
        trace->post.clear();
    }
    for (const Layer& l : layers_) {
        const size_t out = l.w.rows(), in = l.w.cols();
        std::vector<double> z(out);
        for (size_t r = 0; r < out; ++r) {
            double acc = l.b[r];
            const double* wr = &l.w.data[r * in];
            for (size_t c = 0; c < in; ++c) acc += wr[c] * cur[c];
            z[r] = acc;
        }
        if (trace) trace->pre.push_back(z);
        if (l.act == Activation::Relu)
            for (double& v : z) v = std::max(0.0, v);
        if (trace) trace->post.push_back(z);
        cur = std::move(z);
    }
    return cur;
}

std::vector<double> MicroModel::logits(const Tensor& x) const {
    return run_forward(x, nullptr);
}

PredictionVector MicroModel::forward(const Tensor& x) const {
    return PredictionVector::from_probs(softmax(run_forward(x, nullptr)));
}

double MicroModel::loss(const Tensor& x, int label) const {
    if (label < 0 || size_t(label) >= num_classes())
        fail_invalid("loss: label " + std::to_string(label) + " out of range");
    const std::vector<double> p = softmax(run_forward(x, nullptr));
    return -std::log(std::max(p[size_t(label)], 1e-300));
}

// Reverse pass from a seed vector on the logits. The last layer is
// identity, so the seed is d(scalar)/d(logits) directly.
std::vector<double> MicroModel::logit_seed_gradient(const Tensor& x,
                                                    const std::vector<double>& dlogits) const {
    if (dlogits.size() != num_classes()) fail_dim("seed gradient size mismatch");
    Trace tr;
    run_forward(x, &tr);
    std::vector<double> grad = dlogits;
    for (size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const size_t out = l.w.rows(), in = l.w.cols();
        if (l.act == Activation::Relu)
            for (size_t r = 0; r < out; ++r)
                if (tr.pre[li][r] <= 0.0) grad[r] = 0.0;
        std::vector<double> down(in, 0.0);
        for (size_t r = 0; r < out; ++r) {
            const double g = grad[r];
            if (g == 0.0) continue;
            const double* wr = &l.w.data[r * in];
            for (size_t c = 0; c < in; ++c) down[c] += g * wr[c];
        }
        grad = std::move(down);
    }
    return grad;
}

std::vector<double> MicroModel::input_gradient(const Tensor& x, int label) const {
    if (label < 0 || size_t(label) >= num_classes())
        fail_invalid("input_gradient: label out of range");
    const std::vector<double> p = softmax(run_forward(x, nullptr));
    std::vector<double> seed = p;  // d CE / d logits = p - onehot
    seed[size_t(label)] -= 1.0;
    return logit_seed_gradient(x, seed);
}

Tensor MicroModel::jacobian(const Tensor& x) const {
    const size_t K = num_classes();
    const std::vector<double> p = softmax(run_forward(x, nullptr));
    Tensor jac({K, input_dim_});
    for (size_t k = 0; k < K; ++k) {
        // d p_k / d z_j = p_k (delta_kj - p_j)
        std::vector<double> seed(K);
        for (size_t j = 0; j < K; ++j)
            seed[j] = p[k] * ((j == k ? 1.0 : 0.0) - p[j]);
        const std::vector<double> row = logit_seed_gradient(x, seed);
        std::copy(row.begin(), row.end(), jac.data.begin() + long(k * input_dim_));
    }
    return jac;
}

static const char* act_name(Activation a) {
    return a == Activation::Relu ? "relu" : "identity";
}

static Activation act_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    fail_data("unknown activation '" + s + "'");
}

std::string MicroModel::to_json() const {
    json doc;
    doc["version"] = 1;
    doc["input_dim"] = input_dim_;
    doc["num_classes"] = num_classes();
    json jlayers = json::array();
    for (const Layer& l : layers_) {
        json jl;
        jl["act"] = act_name(l.act);
        jl["rows"] = l.w.rows();
        jl["cols"] = l.w.cols();
        jl["w"] = l.w.data;
        jl["b"] = l.b;
        jlayers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(jlayers);
    return doc.dump(2) + "\n";
}

MicroModel MicroModel::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail_data(std::string("model JSON parse error: ") + e.what());
    }
    try {
        if (doc.at("version").get<int>() != 1)
            fail_data("unsupported model file version " + doc.at("version").dump());
        const size_t input_dim = doc.at("input_dim").get<size_t>();
        std::vector<Layer> layers;
        for (const auto& jl : doc.at("layers")) {
            Layer l;
            l.act = act_from_name(jl.at("act").get<std::string>());
            const size_t rows = jl.at("rows").get<size_t>();
            const size_t cols = jl.at("cols").get<size_t>();
            l.w = Tensor({rows, cols}, jl.at("w").get<std::vector<double>>());
            l.b = jl.at("b").get<std::vector<double>>();
            layers.push_back(std::move(l));
        }
        MicroModel m(input_dim, std::move(layers));
        if (m.num_classes() != doc.at("num_classes").get<size_t>())
            fail_data("model num_classes disagrees with layer shapes");
        return m;
    } catch (const json::exception& e) {
        fail_data(std::string("model JSON schema error: ") + e.what());
    }
}

void MicroModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path + "' for writing");
    out << to_json();
    if (!out) fail_data("failed writing '" + path + "'");
}

MicroModel MicroModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

bool MicroModel::operator==(const MicroModel& other) const {
    if (input_dim_ != other.input_dim_ || layers_.size() != other.layers_.size())
        return false;
    for (size_t i = 0; i < layers_.size(); ++i) {
        if (!(layers_[i].w == other.layers_[i].w)) return false;
        if (layers_[i].b != other.layers_[i].b) return false;
        if (layers_[i].act != other.layers_[i].act) return false;
    }
    return true;
}

}  // namespace xens
