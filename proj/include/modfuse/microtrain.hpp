#pragma once
// Desk-scale feedforward classifier trainer: ReLU MLP with inverted dropout on
// hidden activations, softmax cross-entropy loss, AdamW updates and a cosine
// annealed learning rate stepped once per epoch.

#include "modfuse/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace modfuse::microtrain {

class TrainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Layer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

struct MlpParams {
    std::vector<Layer> layers;

    // He-uniform weights, zero biases. arch = {in, hidden..., 2}.
    static MlpParams init(std::span<const std::size_t> arch, Rng& rng);
    // Same shapes, all zeros.
    static MlpParams zeros_like(const MlpParams& other);

    std::size_t input_dim() const;
    std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
    bool all_finite() const;
};

// Gradients share the parameter layout.
using Gradients = MlpParams;

// Column-major batch: inputs are in_dim x n, one column per sample.
struct Batch {
    Eigen::MatrixXd inputs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

// One keep-mask (entries 0 or 1) per hidden layer, hidden_dim x batch.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

DropoutMasks sample_masks(const MlpParams& params, std::size_t batch_size, double dropout_p,
                          Rng& rng);
DropoutMasks all_ones_masks(const MlpParams& params, std::size_t batch_size);

struct ForwardPass {
    Eigen::MatrixXd probs;                  // 2 x n, columns sum to 1
    std::vector<Eigen::MatrixXd> pre;       // pre-activation of every layer
    std::vector<Eigen::MatrixXd> activations; // [0] = input, [l] = hidden l after dropout
};

// Train mode when `masks` is non-null: hidden units are multiplied by their
// mask and by 1/(1-p). Eval mode (null) applies neither.
ForwardPass forward(const MlpParams& params, const Eigen::MatrixXd& inputs, double dropout_p,
                    const DropoutMasks* masks);
ForwardPass forward_train(const MlpParams& params, const Eigen::MatrixXd& inputs,
                          double dropout_p, Rng& rng);
ForwardPass forward_eval(const MlpParams& params, const Eigen::MatrixXd& inputs);

struct LossAndGrads {
    double loss = 0.0;
    Gradients grads;
    Eigen::MatrixXd probs; // forward output the gradients were taken at
};

// Mean cross-entropy of one-hot labels against the predicted probabilities,
// with reverse-mode gradients through the given masks (null = eval mode).
LossAndGrads loss_and_grads(const MlpParams& params, const Batch& batch, double dropout_p,
                            const DropoutMasks* masks);
LossAndGrads loss_and_grads(const MlpParams& params, const Batch& batch, double dropout_p,
                            Rng& rng);
double batch_loss(const MlpParams& params, const Batch& batch, double dropout_p,
                  const DropoutMasks* masks);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const MlpParams& params);
};

// Decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  bias-correct both, then
//   param <- param - lr (m_hat / (sqrt(v_hat) + eps) + weight_decay param)
void adamw_step(MlpParams& params, const Gradients& grads, AdamState& state, double lr,
                const AdamWConfig& cfg);

// lr_min + (lr_max - lr_min)(1 + cos(pi epoch / total_epochs)) / 2, evaluated
// so that epochs 0, total/2 and total give lr_max, the midpoint and lr_min
// exactly.
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr_max, double lr_min);

struct TrainConfig {
    double dropout_p = 0.0;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double lr_max = 5e-5;
    double lr_min = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;     // mean minibatch loss, dropout active
    double train_accuracy = 0.0; // running accuracy over the epoch's minibatches, dropout active
    double train_accuracy_eval = 0.0; // whole train set, eval mode, after the epoch
    double test_accuracy = 0.0;  // eval mode, after the epoch
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

// CSV `epoch,lr,train_loss,train_acc,test_acc`.
void write_report_csv(const TrainReport& report, std::ostream& out);

struct TrainResult {
    MlpParams params;
    TrainReport report;
};

// Eval-mode accuracy (class 1 when its probability >= 0.5).
double accuracy(const MlpParams& params, const Batch& data);

TrainResult train(const Batch& train_set, const Batch& test_set,
                  std::span<const std::size_t> arch, const TrainConfig& cfg);

// Two well separated Gaussian blobs in 2-D.
Batch make_separable_fixture(std::size_t n, std::uint64_t seed);

// Small noisy training set and a large test set drawn from the same 2-D
// distribution; an unregularised 2-32-32-2 network memorises the training
// noise and generalises worse.
struct OverfitFixture {
    Batch train;
    Batch test;
};
OverfitFixture make_overfit_fixture(std::uint64_t seed);

inline constexpr std::size_t kDemoArch[] = {2, 32, 32, 2};

struct SweepRow {
    double dropout_p = 0.0;
    double train_accuracy = 0.0; // monitored (dropout-active) accuracy, mean of the last epochs
    double test_accuracy = 0.0;  // eval mode after the final epoch
    TrainReport report;
};

// Training preset used by the dropout sweep on the overfit fixture.
TrainConfig sweep_config(double dropout_p, std::size_t epochs, std::uint64_t seed);
inline constexpr std::size_t kSweepDefaultEpochs = 600;
inline constexpr std::size_t kSweepTrainWindow = 20;

std::vector<SweepRow> dropout_sweep(std::span<const double> ps, std::size_t epochs,
                                    std::uint64_t seed);

} // namespace modfuse::microtrain
