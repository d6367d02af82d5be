#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsdx/core_data.hpp"
#include "nsdx/image.hpp"

namespace nsdx {

enum class Arch { Linear, Mlp1 };
enum class LossKind { BinaryCrossEntropy, CategoricalCrossEntropy };

std::string_view to_string(Arch a);       // "linear" / "mlp1"
std::string_view to_string(LossKind k);   // "binary_ce" / "categorical_ce"
Arch parse_arch(std::string_view s);
LossKind parse_loss_kind(std::string_view s);

/// Small differentiable classifier standing in for the deep S/R/end-to-end
/// networks.
///
/// `Linear` computes logits = W x + b. `Mlp1` adds one tanh hidden layer:
/// logits = W2 tanh(W1 x + b1) + b2. Parameters live in a single flat
/// vector laid out as [W1 (hidden x input, row-major), b1, W2, b2] for
/// Mlp1 and [W (output x input), b] for Linear.
class ToyModel {
 public:
  struct Shape {
    Arch arch = Arch::Linear;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;  // ignored (forced to 0) for Linear
    std::size_t output_dim = 0;
    LossKind loss = LossKind::BinaryCrossEntropy;

    friend bool operator==(const Shape&, const Shape&) = default;
  };

  ToyModel() = default;
  ToyModel(Shape shape, std::vector<double> weights);

  static ToyModel zeros(Shape shape);
  /// Weights drawn uniformly from [-0.05, 0.05].
  static ToyModel random(Shape shape, std::uint64_t seed);
  static std::size_t param_count(const Shape& shape);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> mutable_weights() noexcept { return weights_; }

  std::vector<double> logits(std::span<const double> input) const;
  /// Sigmoid per output for binary CE, softmax for categorical CE.
  std::vector<double> outputs(std::span<const double> input) const;

  double loss(std::span<const double> input, std::span<const double> target) const;
  /// Returns the loss and accumulates d(loss)/d(weights) into `grad`.
  double accumulate_gradient(std::span<const double> input, std::span<const double> target,
                             std::span<double> grad) const;
  /// d(logit[output])/d(input).
  std::vector<double> logit_input_gradient(std::span<const double> input, std::size_t output) const;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;

 private:
  void check_input(std::span<const double> input) const;

  Shape shape_;
  std::vector<double> weights_;
};

/// Adaptive moment estimation with bias correction.
class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamOptimizer(std::size_t n_params, double lr);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_;
  long long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct Example {
  std::vector<double> input;
  std::vector<double> target;
};

struct TrainOptions {
  double lr = 1e-3;
  int epochs = 100;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> epoch_loss;  // mean mini-batch loss per epoch
};

TrainResult train(const ToyModel& init, std::span<const Example> data, const TrainOptions& opts);

/// Categorical: argmax hit rate. Binary: per-output hit rate at threshold 0.5.
double accuracy(const ToyModel& model, std::span<const Example> data);

struct GridRun {
  double lr = 0.0;
  int epochs = 0;
  ToyModel model;
  double val_accuracy = 0.0;
  double final_loss = 0.0;
};

struct GridResult {
  std::vector<GridRun> runs;  // lr-major order
  std::size_t best = 0;       // first run with the highest validation accuracy
};

/// Trains one model per (lr, epochs) pair, each with its own PRNG stream
/// derived from (seed, grid index), and selects on validation accuracy.
GridResult grid_search(const ToyModel& init, std::span<const Example> train_set,
                       std::span<const Example> val_set, std::span<const double> lrs,
                       std::span<const int> epochs, std::uint64_t seed, bool parallel = true);

// --- stub roles -----------------------------------------------------------

ToyModel::Shape s_model_shape(const GrayImage& like, Arch arch = Arch::Linear, std::size_t hidden = 0);
ToyModel::Shape r_model_shape(const GrayImage& like, Arch arch = Arch::Linear, std::size_t hidden = 0);
ToyModel::Shape e2e_model_shape(const GrayImage& like, Arch arch = Arch::Linear, std::size_t hidden = 0);

/// Pixels followed by the 14 symptom probabilities.
std::vector<double> r_input(const GrayImage& img, const SymptomVector& symptoms);

SymptomVector predict_s(const ToyModel& model, const GrayImage& img);
MorphProbs predict_r(const ToyModel& model, const GrayImage& img, const SymptomVector& symptoms);
/// Probability of COV+ from the single-output end-to-end baseline.
double predict_e2e(const ToyModel& model, const GrayImage& img);

struct SaliencyMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // in [0,1], max 1 unless all zero
};

struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // 0 or 1
};

/// |d(argmax-class logit)/d(pixel)| of the R-model, max-normalized.
SaliencyMap saliency(const ToyModel& r_model, const GrayImage& img, const SymptomVector& symptoms);

inline constexpr double kDefaultSegmentThreshold = 0.5;

/// 1 where pixel >= tau. tau must lie in [0,1].
SegmentationMask segment(const GrayImage& img, double tau = kDefaultSegmentThreshold);

void write_pgm(std::ostream& out, const SaliencyMap& map);
void write_pgm(std::ostream& out, const SegmentationMask& mask);

// --- checkpoints ----------------------------------------------------------

/// JSON checkpoint; weights printed with 17 significant digits.
std::string to_checkpoint(const ToyModel& model);
ToyModel from_checkpoint(std::string_view json_text);
ToyModel load_checkpoint(const std::string& path);

}  // namespace nsdx
