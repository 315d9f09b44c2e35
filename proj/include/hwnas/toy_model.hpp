#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hwnas/evaluator.hpp"
#include "hwnas/genotype.hpp"

namespace hwnas {

/// Capsule nonlinearity: x * |x| / (1 + |x|)^2, i.e. the output points along x
/// with length |x|^2 / (1 + |x|)^2. Zero maps to zero.
std::vector<double> squash(std::span<const double> x);

enum class Activation { Relu, Squash, Softmax };

struct DenseSpec {
  int width = 1;
  Activation activation = Activation::Relu;
  int capsule_dim = 1;  // squash groups consecutive units of this size

  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

/// Output of layer `source` (zero-padded or truncated) is added to the input
/// of layer `destination`.
struct Shortcut {
  int source = 0;
  int destination = 0;

  friend bool operator==(const Shortcut&, const Shortcut&) = default;
};

/// Fully-connected network with exact manual gradients. The last layer is a
/// softmax over the classes; training minimizes cross-entropy.
class ToyModel {
 public:
  ToyModel(int input_dim, std::vector<DenseSpec> layers, std::vector<Shortcut> shortcuts,
           std::uint64_t seed);

  /// Dense realization of a genotype followed by a softmax head. Each layer
  /// has min(out_channels * out_capsules, 256) units (rounded down to whole
  /// capsules); capsule layers use squash, the others ReLU.
  static ToyModel from_genotype(const Genotype& g, int input_dim, int num_classes,
                                std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int num_classes() const { return layers_.back().width; }
  const std::vector<DenseSpec>& layers() const { return layers_; }
  const std::vector<Shortcut>& shortcuts() const { return shortcuts_; }

  std::vector<double>& parameters() { return theta_; }
  const std::vector<double>& parameters() const { return theta_; }

  /// Class probabilities. Throws ShapeMismatch on wrong input size.
  std::vector<double> forward(std::span<const double> x) const;

  double loss(std::span<const double> x, int label) const;

  struct Gradients {
    double loss = 0.0;
    std::vector<double> parameters;  // empty unless requested
    std::vector<double> input;
  };
  Gradients loss_and_grads(std::span<const double> x, int label,
                           bool parameter_grads = true) const;

  /// Adds d(loss)/d(theta) into `accum` and returns the loss.
  double accumulate_grads(std::span<const double> x, int label, std::span<double> accum) const;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;

 private:
  struct Trace;
  void run(std::span<const double> x, Trace& t) const;
  double backward(const Trace& t, int label, std::span<double> param_grad,
                  std::vector<double>* input_grad) const;

  int input_dim_;
  std::vector<DenseSpec> layers_;
  std::vector<Shortcut> shortcuts_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::vector<int> fan_in_;
  std::vector<double> theta_;
};

struct Dataset {
  int dim = 0;
  int classes = 0;
  std::vector<double> inputs;  // row-major, size() * dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

struct BlobOptions {
  int classes = 10;
  int dim = 16;
  int train_size = 2000;
  int test_size = 500;
  double spread = 0.12;  // per-coordinate standard deviation
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Dataset train;
  Dataset test;
};

/// Gaussian blobs around class centres drawn in [0.2, 0.8]^dim, clamped to [0, 1].
SyntheticDataset make_blobs(const BlobOptions& opts);

struct TrainOptions {
  int epochs = 1;
  double lr = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double momentum = 0.9;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> epoch_loss;
};

/// Minibatch SGD with heavy-ball momentum and per-epoch shuffling from `seed`. Throws
/// std::invalid_argument for epochs < 1 and NumericalDivergence on a
/// non-finite loss.
TrainResult train(ToyModel model, const Dataset& data, const TrainOptions& opts);

double accuracy(const ToyModel& m, const Dataset& data);
int predict(const ToyModel& m, std::span<const double> x);

struct PgdOptions {
  double epsilon = 0.0;
  double alpha = 0.0;
  int iterations = 10;
  bool random_start = false;
  std::uint64_t seed = 0;
};

/// Untargeted L-inf PGD: ascend the true-label loss by alpha * sign(grad),
/// then project the iterate into the epsilon ball around x and the [0, 1]
/// box. If `loss_trace` is given it receives the loss at every iterate,
/// starting with the unperturbed input.
std::vector<double> pgd_attack(const ToyModel& m, std::span<const double> x, int label,
                               const PgdOptions& opts, std::vector<double>* loss_trace = nullptr);

inline std::vector<double> fgsm_attack(const ToyModel& m, std::span<const double> x, int label,
                                       double epsilon) {
  return pgd_attack(m, x, label, {epsilon, epsilon, 1, false, 0});
}

double adversarial_accuracy(const ToyModel& m, const Dataset& data, const PgdOptions& opts);

struct ToyOptions {
  int classes = 10;
  int dim = 16;
  int train_size = 2000;
  int test_size = 500;
  double spread = 0.12;
  std::uint64_t data_seed = 1234;
  double lr = 0.05;
  int batch_size = 32;
  int pgd_steps = 10;
  double pgd_alpha_ratio = 0.25;  // alpha = ratio * epsilon
  int workers = 1;
};

/// Trains the dense realization of each genotype on the synthetic blobs and
/// attacks every test example with PGD.
class ToyEvaluator final : public Evaluator {
 public:
  explicit ToyEvaluator(ToyOptions opts = {});

  EvaluationResult evaluate(const EvaluationRequest& req) override;
  std::vector<EvaluationResult> evaluate_batch(std::span<const EvaluationRequest> reqs) override;

  const SyntheticDataset& data() const { return data_; }
  const ToyOptions& options() const { return opts_; }

 private:
  ToyOptions opts_;
  SyntheticDataset data_;
};

}  // namespace hwnas
