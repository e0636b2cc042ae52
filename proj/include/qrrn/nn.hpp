#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qrrn {

enum class Activation { relu, identity };

struct LayerShape {
    int in = 0;
    int out = 0;
    Activation act = Activation::identity;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Fully connected network with parameters stored in one flat array:
/// per layer, the row-major weight matrix followed by the bias vector.
/// Hidden layers use ReLU, the output layer is linear. For QR-DQN the output
/// is action-major: entries [a*N, (a+1)*N) hold action a's quantiles.
class DenseNet {
public:
    DenseNet() = default;

    /// Zero-initialized net with layer widths `dims` (input first). Throws
    /// BadDims when fewer than two widths are given or any width is < 1.
    explicit DenseNet(std::vector<int> dims);

    int input_dim() const noexcept { return dims_.front(); }
    int output_dim() const noexcept { return dims_.back(); }
    const std::vector<int>& dims() const noexcept { return dims_; }
    const std::vector<LayerShape>& layers() const noexcept { return layers_; }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::size_t num_params() const noexcept { return params_.size(); }

    double& weight(int layer, int row, int col);
    double& bias(int layer, int row);

    /// Throws DimMismatch when |x| != input_dim.
    std::vector<double> forward(std::span<const double> x) const;

    /// Adds d(grad_out . forward(x)) / d(params) into `grads`. ReLU's
    /// subgradient at 0 is 0. Zero inputs are skipped in the first layer,
    /// which keeps one-hot inputs cheap.
    void backward_accumulate(std::span<const double> x, std::span<const double> grad_out,
                             std::span<double> grads) const;

    std::vector<double> backward(std::span<const double> x, std::span<const double> grad_out) const;

    friend bool operator==(const DenseNet&, const DenseNet&) = default;

private:
    std::vector<int> dims_{1, 1};
    std::vector<LayerShape> layers_;
    std::vector<double> params_;
};

/// Glorot-uniform weights, zero biases.
DenseNet init_net(std::vector<int> dims, std::uint64_t seed);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update. Throws DimMismatch on shape disagreement.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

}  // namespace qrrn
