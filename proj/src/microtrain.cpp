#include "modfuse/microtrain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

namespace modfuse::microtrain {

namespace {

constexpr double kProbClamp = 1e-12;

void check_dropout(double p)
{
    if (!(p >= 0.0 && p < 1.0)) {
        throw TrainError("dropout_p must lie in [0,1)");
    }
}

void check_input(const MlpParams& params, const Eigen::MatrixXd& inputs)
{
    if (params.layers.empty()) {
        throw TrainError("network has no layers");
    }
    if (static_cast<std::size_t>(inputs.rows()) != params.input_dim()) {
        throw TrainError("input dimension " + std::to_string(inputs.rows()) +
                         " does not match first layer width " +
                         std::to_string(params.input_dim()));
    }
}

// Column-wise softmax with the max subtracted.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits)
{
    Eigen::MatrixXd out = logits;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double mx = out.col(j).maxCoeff();
        out.col(j) = (out.col(j).array() - mx).exp();
        out.col(j) /= out.col(j).sum();
    }
    return out;
}

double mean_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels)
{
    double total = 0.0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const double q = probs(labels[j], static_cast<Eigen::Index>(j));
        total -= std::log(std::clamp(q, kProbClamp, 1.0));
    }
    return total / static_cast<double>(labels.size());
}

void check_batch(const MlpParams& params, const Batch& batch)
{
    if (batch.labels.empty()) {
        throw TrainError("batch is empty");
    }
    if (static_cast<std::size_t>(batch.inputs.cols()) != batch.labels.size()) {
        throw TrainError("batch inputs and labels differ in count");
    }
    check_input(params, batch.inputs);
    for (int y : batch.labels) {
        if (y != 0 && y != 1) {
            throw TrainError("labels must be 0 or 1");
        }
    }
}

Batch gather(const Batch& data, std::span<const std::size_t> idx)
{
    Batch out;
    out.inputs.resize(data.inputs.rows(), static_cast<Eigen::Index>(idx.size()));
    out.labels.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.inputs.col(static_cast<Eigen::Index>(k)) =
            data.inputs.col(static_cast<Eigen::Index>(idx[k]));
        out.labels.push_back(data.labels[idx[k]]);
    }
    return out;
}

std::size_t count_correct(const Eigen::MatrixXd& probs, const std::vector<int>& labels)
{
    std::size_t correct = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const int pred = probs(1, static_cast<Eigen::Index>(j)) >= 0.5 ? 1 : 0;
        correct += static_cast<std::size_t>(pred == labels[j]);
    }
    return correct;
}

std::string shortest(double value)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

} // namespace

MlpParams MlpParams::init(std::span<const std::size_t> arch, Rng& rng)
{
    if (arch.size() < 2) {
        throw TrainError("architecture needs at least an input and an output width");
    }
    if (arch.back() != 2) {
        throw TrainError("output layer must have 2 units");
    }
    MlpParams params;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(arch[l]);
        const auto out = static_cast<Eigen::Index>(arch[l + 1]);
        if (in == 0 || out == 0) {
            throw TrainError("layer widths must be positive");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) {
                layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
            }
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

MlpParams MlpParams::zeros_like(const MlpParams& other)
{
    MlpParams params;
    for (const auto& l : other.layers) {
        params.layers.push_back(Layer{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                                      Eigen::VectorXd::Zero(l.bias.size())});
    }
    return params;
}

std::size_t MlpParams::input_dim() const
{
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

bool MlpParams::all_finite() const
{
    return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
        return l.weight.allFinite() && l.bias.allFinite();
    });
}

DropoutMasks sample_masks(const MlpParams& params, std::size_t batch_size, double dropout_p,
                          Rng& rng)
{
    check_dropout(dropout_p);
    DropoutMasks masks;
    for (std::size_t l = 0; l < params.hidden_layers(); ++l) {
        const auto rows = params.layers[l].weight.rows();
        Eigen::MatrixXd mask(rows, static_cast<Eigen::Index>(batch_size));
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            for (Eigen::Index r = 0; r < rows; ++r) {
                mask(r, c) = rng.bernoulli(dropout_p) ? 0.0 : 1.0;
            }
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

DropoutMasks all_ones_masks(const MlpParams& params, std::size_t batch_size)
{
    DropoutMasks masks;
    for (std::size_t l = 0; l < params.hidden_layers(); ++l) {
        masks.push_back(Eigen::MatrixXd::Ones(params.layers[l].weight.rows(),
                                              static_cast<Eigen::Index>(batch_size)));
    }
    return masks;
}

ForwardPass forward(const MlpParams& params, const Eigen::MatrixXd& inputs, double dropout_p,
                    const DropoutMasks* masks)
{
    check_input(params, inputs);
    check_dropout(dropout_p);
    if (masks && masks->size() != params.hidden_layers()) {
        throw TrainError("one dropout mask per hidden layer is required");
    }
    const double keep_scale = 1.0 / (1.0 - dropout_p);

    ForwardPass pass;
    pass.activations.push_back(inputs);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        if (layer.weight.cols() != pass.activations.back().rows()) {
            throw TrainError("layer dimensions do not chain at layer " + std::to_string(l));
        }
        Eigen::MatrixXd z = layer.weight * pass.activations.back();
        z.colwise() += layer.bias;
        pass.pre.push_back(z);
        if (l + 1 == params.layers.size()) {
            pass.probs = softmax(z);
            break;
        }
        Eigen::MatrixXd h = z.cwiseMax(0.0);
        if (masks) {
            const auto& mask = (*masks)[l];
            if (mask.rows() != h.rows() || mask.cols() != h.cols()) {
                throw TrainError("dropout mask shape mismatch at layer " + std::to_string(l));
            }
            h = h.cwiseProduct(mask) * keep_scale;
        }
        pass.activations.push_back(std::move(h));
    }
    return pass;
}

ForwardPass forward_train(const MlpParams& params, const Eigen::MatrixXd& inputs,
                          double dropout_p, Rng& rng)
{
    check_input(params, inputs);
    const auto masks =
        sample_masks(params, static_cast<std::size_t>(inputs.cols()), dropout_p, rng);
    return forward(params, inputs, dropout_p, &masks);
}

ForwardPass forward_eval(const MlpParams& params, const Eigen::MatrixXd& inputs)
{
    return forward(params, inputs, 0.0, nullptr);
}

double batch_loss(const MlpParams& params, const Batch& batch, double dropout_p,
                  const DropoutMasks* masks)
{
    check_batch(params, batch);
    return mean_loss(forward(params, batch.inputs, dropout_p, masks).probs, batch.labels);
}

LossAndGrads loss_and_grads(const MlpParams& params, const Batch& batch, double dropout_p,
                            const DropoutMasks* masks)
{
    check_batch(params, batch);
    const ForwardPass pass = forward(params, batch.inputs, dropout_p, masks);
    const auto n = static_cast<double>(batch.size());
    const double keep_scale = 1.0 / (1.0 - dropout_p);

    LossAndGrads out{mean_loss(pass.probs, batch.labels), MlpParams::zeros_like(params), pass.probs};

    // d loss / d logits = (q - onehot) / n
    Eigen::MatrixXd delta = pass.probs;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        delta(batch.labels[j], static_cast<Eigen::Index>(j)) -= 1.0;
    }
    delta /= n;

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        out.grads.layers[l].weight = delta * pass.activations[l].transpose();
        out.grads.layers[l].bias = delta.rowwise().sum();
        if (l == 0) {
            break;
        }
        Eigen::MatrixXd upstream = params.layers[l].weight.transpose() * delta;
        if (masks) {
            upstream = upstream.cwiseProduct((*masks)[l - 1]) * keep_scale;
        }
        delta = upstream.cwiseProduct((pass.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return out;
}

LossAndGrads loss_and_grads(const MlpParams& params, const Batch& batch, double dropout_p,
                            Rng& rng)
{
    check_batch(params, batch);
    const auto masks = sample_masks(params, batch.size(), dropout_p, rng);
    return loss_and_grads(params, batch, dropout_p, &masks);
}

AdamState AdamState::zeros_like(const MlpParams& params)
{
    return AdamState{MlpParams::zeros_like(params), MlpParams::zeros_like(params), 0};
}

void adamw_step(MlpParams& params, const Gradients& grads, AdamState& state, double lr,
                const AdamWConfig& cfg)
{
    const auto congruent = [](const MlpParams& a, const MlpParams& b) {
        if (a.layers.size() != b.layers.size()) {
            return false;
        }
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            if (a.layers[l].weight.rows() != b.layers[l].weight.rows() ||
                a.layers[l].weight.cols() != b.layers[l].weight.cols() ||
                a.layers[l].bias.size() != b.layers[l].bias.size()) {
                return false;
            }
        }
        return true;
    };
    if (!congruent(params, grads) || !congruent(params, state.m) || !congruent(params, state.v)) {
        throw TrainError("adamw_step: parameter, gradient and state shapes differ");
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);

    const auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const auto m_hat = (m / correction1).array();
        const auto v_hat = (v / correction2).array();
        p.array() -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * p.array());
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads.layers[l].weight, state.m.layers[l].weight,
               state.v.layers[l].weight);
        update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias,
               state.v.layers[l].bias);
    }
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr_max, double lr_min)
{
    if (total_epochs == 0) {
        throw TrainError("cosine_lr: total_epochs must be positive");
    }
    if (epoch > total_epochs) {
        throw TrainError("cosine_lr: epoch beyond total_epochs");
    }
    double c = 0.0;
    if (epoch == 0) {
        c = 1.0;
    } else if (epoch == total_epochs) {
        c = -1.0;
    } else if (2 * epoch != total_epochs) {
        c = std::cos(std::numbers::pi * static_cast<double>(epoch) /
                     static_cast<double>(total_epochs));
    }
    // == lr_min + (lr_max - lr_min)(1 + c)/2, arranged to be exact at c = 1, 0, -1
    return 0.5 * ((1.0 + c) * lr_max + (1.0 - c) * lr_min);
}

void TrainConfig::validate() const
{
    check_dropout(dropout_p);
    if (epochs == 0 || batch_size == 0) {
        throw TrainError("epochs and batch_size must be positive");
    }
    if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max) {
        throw TrainError("learning rates must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw TrainError("betas must lie in (0,1)");
    }
    if (weight_decay < 0.0) {
        throw TrainError("weight_decay must be non-negative");
    }
}

void write_report_csv(const TrainReport& report, std::ostream& out)
{
    out << "epoch,lr,train_loss,train_acc,test_acc\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << ',' << shortest(e.learning_rate) << ',' << shortest(e.train_loss) << ','
            << shortest(e.train_accuracy) << ',' << shortest(e.test_accuracy) << '\n';
    }
}

double accuracy(const MlpParams& params, const Batch& data)
{
    check_batch(params, data);
    const auto pass = forward_eval(params, data.inputs);
    return static_cast<double>(count_correct(pass.probs, data.labels)) /
           static_cast<double>(data.size());
}

TrainResult train(const Batch& train_set, const Batch& test_set,
                  std::span<const std::size_t> arch, const TrainConfig& cfg)
{
    cfg.validate();
    Rng rng(cfg.seed);
    TrainResult result{MlpParams::init(arch, rng), {}};
    check_batch(result.params, train_set);
    check_batch(result.params, test_set);

    AdamState state = AdamState::zeros_like(result.params);
    const AdamWConfig opt{cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Batch batch =
                gather(train_set, std::span<const std::size_t>(order).subspan(start, stop - start));
            const auto masks = sample_masks(result.params, batch.size(), cfg.dropout_p, rng);
            const auto lg = loss_and_grads(result.params, batch, cfg.dropout_p, &masks);
            correct += count_correct(lg.probs, batch.labels);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            adamw_step(result.params, lg.grads, state, lr, opt);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.learning_rate = lr;
        stats.train_loss = loss_sum / static_cast<double>(train_set.size());
        stats.train_accuracy =
            static_cast<double>(correct) / static_cast<double>(train_set.size());
        stats.train_accuracy_eval = accuracy(result.params, train_set);
        stats.test_accuracy = accuracy(result.params, test_set);
        result.report.epochs.push_back(stats);
    }
    if (!result.params.all_finite()) {
        throw TrainError("training diverged: non-finite parameters");
    }
    return result;
}

Batch make_separable_fixture(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Batch data;
    data.inputs.resize(2, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 2 == 0 ? 1 : 0;
        const double centre = label == 1 ? 1.5 : -1.5;
        data.inputs(0, static_cast<Eigen::Index>(i)) = centre + 0.3 * rng.normal();
        data.inputs(1, static_cast<Eigen::Index>(i)) = centre + 0.3 * rng.normal();
        data.labels.push_back(label);
    }
    return data;
}

namespace {

// Quadrant (XOR) concept on [-1,1]^2 with a fraction of labels flipped.
Batch quadrant_sample(std::size_t n, double flip_rate, Rng& rng)
{
    Batch data;
    data.inputs.resize(2, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = 2.0 * rng.uniform() - 1.0;
        const double x1 = 2.0 * rng.uniform() - 1.0;
        int label = x0 * x1 > 0.0 ? 1 : 0;
        if (rng.bernoulli(flip_rate)) {
            label = 1 - label;
        }
        data.inputs(0, static_cast<Eigen::Index>(i)) = x0;
        data.inputs(1, static_cast<Eigen::Index>(i)) = x1;
        data.labels.push_back(label);
    }
    return data;
}

} // namespace

OverfitFixture make_overfit_fixture(std::uint64_t seed)
{
    Rng rng(seed);
    OverfitFixture f;
    f.train = quadrant_sample(80, 0.2, rng);
    f.test = quadrant_sample(4000, 0.0, rng);
    return f;
}

TrainConfig sweep_config(double dropout_p, std::size_t epochs, std::uint64_t seed)
{
    TrainConfig cfg;
    cfg.dropout_p = dropout_p;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.lr_max = 1e-2;
    cfg.lr_min = 1e-4;
    cfg.weight_decay = 0.0;
    cfg.seed = seed;
    return cfg;
}

std::vector<SweepRow> dropout_sweep(std::span<const double> ps, std::size_t epochs,
                                    std::uint64_t seed)
{
    const OverfitFixture fixture = make_overfit_fixture(seed);
    std::vector<SweepRow> rows;
    for (double p : ps) {
        check_dropout(p);
        auto result = train(fixture.train, fixture.test, kDemoArch, sweep_config(p, epochs, seed));
        const auto& epochs_run = result.report.epochs;
        const std::size_t window = std::min(kSweepTrainWindow, epochs_run.size());
        double train_acc = 0.0;
        for (std::size_t k = epochs_run.size() - window; k < epochs_run.size(); ++k) {
            train_acc += epochs_run[k].train_accuracy;
        }
        train_acc /= static_cast<double>(window);
        rows.push_back(SweepRow{p, train_acc, epochs_run.back().test_accuracy,
                                std::move(result.report)});
    }
    return rows;
}

} // namespace modfuse::microtrain
