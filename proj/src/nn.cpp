#include "qrrn/nn.hpp"

#include <cmath>
#include <string>

#include "qrrn/errors.hpp"
#include "qrrn/rng.hpp"

namespace qrrn {

DenseNet::DenseNet(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw BadDims("a network needs an input and an output width");
    for (int d : dims_)
        if (d < 1) throw BadDims("layer widths must be >= 1");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        LayerShape shape;
        shape.in = dims_[l];
        shape.out = dims_[l + 1];
        shape.act = l + 2 == dims_.size() ? Activation::identity : Activation::relu;
        shape.weight_offset = offset;
        offset += static_cast<std::size_t>(shape.in) * shape.out;
        shape.bias_offset = offset;
        offset += shape.out;
        layers_.push_back(shape);
    }
    params_.assign(offset, 0.0);
}

double& DenseNet::weight(int layer, int row, int col) {
    const LayerShape& s = layers_.at(layer);
    return params_.at(s.weight_offset + static_cast<std::size_t>(row) * s.in + col);
}

double& DenseNet::bias(int layer, int row) {
    return params_.at(layers_.at(layer).bias_offset + row);
}

namespace {

// a_out = act(W a_in + b)
void affine(const LayerShape& s, const double* p, std::span<const double> in, std::vector<double>& out) {
    out.assign(p + s.bias_offset, p + s.bias_offset + s.out);
    for (int c = 0; c < s.in; ++c) {
        const double xc = in[c];
        if (xc == 0.0) continue;
        const double* col = p + s.weight_offset + c;
        for (int r = 0; r < s.out; ++r) out[r] += col[static_cast<std::size_t>(r) * s.in] * xc;
    }
    if (s.act == Activation::relu)
        for (double& v : out) v = v > 0.0 ? v : 0.0;
}

}  // namespace

std::vector<double> DenseNet::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw DimMismatch("input has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(input_dim()));
    std::vector<double> cur(x.begin(), x.end()), next;
    for (const LayerShape& s : layers_) {
        affine(s, params_.data(), cur, next);
        cur.swap(next);
    }
    return cur;
}

void DenseNet::backward_accumulate(std::span<const double> x, std::span<const double> grad_out,
                                   std::span<double> grads) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw DimMismatch("input has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(input_dim()));
    if (static_cast<int>(grad_out.size()) != output_dim())
        throw DimMismatch("grad_out has " + std::to_string(grad_out.size()) +
                          " entries, expected " + std::to_string(output_dim()));
    if (grads.size() != params_.size()) throw DimMismatch("gradient buffer size");

    std::vector<std::vector<double>> acts;
    acts.reserve(layers_.size() + 1);
    acts.emplace_back(x.begin(), x.end());
    for (const LayerShape& s : layers_) {
        std::vector<double> next;
        affine(s, params_.data(), acts.back(), next);
        acts.push_back(std::move(next));
    }

    std::vector<double> delta(grad_out.begin(), grad_out.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const LayerShape& s = layers_[l];
        const std::vector<double>& out = acts[l + 1];
        const std::vector<double>& in = acts[l];
        if (s.act == Activation::relu)
            for (int r = 0; r < s.out; ++r)
                if (!(out[r] > 0.0)) delta[r] = 0.0;

        double* gw = grads.data() + s.weight_offset;
        double* gb = grads.data() + s.bias_offset;
        for (int r = 0; r < s.out; ++r) {
            const double dr = delta[r];
            gb[r] += dr;
            if (dr == 0.0) continue;
            double* row = gw + static_cast<std::size_t>(r) * s.in;
            for (int c = 0; c < s.in; ++c)
                if (in[c] != 0.0) row[c] += dr * in[c];
        }
        if (l == 0) break;
        std::vector<double> prev(s.in, 0.0);
        const double* w = params_.data() + s.weight_offset;
        for (int r = 0; r < s.out; ++r) {
            const double dr = delta[r];
            if (dr == 0.0) continue;
            const double* row = w + static_cast<std::size_t>(r) * s.in;
            for (int c = 0; c < s.in; ++c) prev[c] += row[c] * dr;
        }
        delta.swap(prev);
    }
}

std::vector<double> DenseNet::backward(std::span<const double> x, std::span<const double> grad_out) const {
    std::vector<double> grads(params_.size(), 0.0);
    backward_accumulate(x, grad_out, grads);
    return grads;
}

DenseNet init_net(std::vector<int> dims, std::uint64_t seed) {
    DenseNet net(std::move(dims));
    Rng rng(seed);
    auto params = net.params();
    for (const LayerShape& s : net.layers()) {
        const double limit = std::sqrt(6.0 / (s.in + s.out));
        const std::size_t n = static_cast<std::size_t>(s.in) * s.out;
        for (std::size_t i = 0; i < n; ++i)
            params[s.weight_offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
    }
    return net;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, double lr) {
    if (grads.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size())
        throw DimMismatch("adam_step: parameter, gradient and moment sizes differ");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
    if (grads.size() != params.size()) throw DimMismatch("sgd_step: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace qrrn
