#include "nsdx/toy_neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "nsdx/errors.hpp"
#include "nsdx/rng.hpp"

namespace nsdx {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (out[i] = std::exp(z[i] - mx));
  for (auto& v : out) v /= sum;
  return out;
}

// Offsets of each parameter block inside the flat weight vector.
struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;
};

Layout layout_of(const ToyModel::Shape& s) {
  Layout l;
  if (s.arch == Arch::Linear) {
    l.w1 = 0;
    l.b1 = s.output_dim * s.input_dim;
    l.total = l.b1 + s.output_dim;
  } else {
    l.w1 = 0;
    l.b1 = s.hidden_dim * s.input_dim;
    l.w2 = l.b1 + s.hidden_dim;
    l.b2 = l.w2 + s.output_dim * s.hidden_dim;
    l.total = l.b2 + s.output_dim;
  }
  return l;
}

void validate_shape(const ToyModel::Shape& s) {
  if (s.input_dim == 0 || s.output_dim == 0) throw ConfigError("model dimensions must be positive");
  if (s.arch == Arch::Mlp1 && s.hidden_dim == 0) throw ConfigError("mlp1 needs hidden_dim > 0");
  if (s.arch == Arch::Linear && s.hidden_dim != 0) throw ConfigError("linear model must have hidden_dim 0");
}

// Intermediate values of one forward pass.
struct Forward {
  std::vector<double> hidden;  // tanh activations (Mlp1 only)
  std::vector<double> logits;
};

Forward forward(const ToyModel::Shape& s, std::span<const double> w, std::span<const double> x) {
  const auto l = layout_of(s);
  Forward f;
  if (s.arch == Arch::Linear) {
    f.logits.resize(s.output_dim);
    for (std::size_t k = 0; k < s.output_dim; ++k) {
      const double* row = &w[l.w1 + k * s.input_dim];
      double z = w[l.b1 + k];
      for (std::size_t i = 0; i < s.input_dim; ++i) z += row[i] * x[i];
      f.logits[k] = z;
    }
    return f;
  }
  f.hidden.resize(s.hidden_dim);
  for (std::size_t j = 0; j < s.hidden_dim; ++j) {
    const double* row = &w[l.w1 + j * s.input_dim];
    double a = w[l.b1 + j];
    for (std::size_t i = 0; i < s.input_dim; ++i) a += row[i] * x[i];
    f.hidden[j] = std::tanh(a);
  }
  f.logits.resize(s.output_dim);
  for (std::size_t k = 0; k < s.output_dim; ++k) {
    const double* row = &w[l.w2 + k * s.hidden_dim];
    double z = w[l.b2 + k];
    for (std::size_t j = 0; j < s.hidden_dim; ++j) z += row[j] * f.hidden[j];
    f.logits[k] = z;
  }
  return f;
}

void validate_example(const ToyModel::Shape& s, const Example& ex, std::size_t index) {
  const auto where = "example " + std::to_string(index) + ": ";
  if (ex.input.size() != s.input_dim)
    throw DimensionError(where + "input has " + std::to_string(ex.input.size()) + " values, model expects " +
                         std::to_string(s.input_dim));
  if (ex.target.size() != s.output_dim)
    throw DimensionError(where + "target has " + std::to_string(ex.target.size()) +
                         " values, model expects " + std::to_string(s.output_dim));
  if (s.loss == LossKind::BinaryCrossEntropy) {
    for (double t : ex.target)
      if (t != 0.0 && t != 1.0) throw ConfigError(where + "binary targets must be 0 or 1");
  } else {
    std::size_t ones = 0;
    for (double t : ex.target) {
      if (t != 0.0 && t != 1.0) throw ConfigError(where + "categorical target must be one-hot");
      ones += (t == 1.0);
    }
    if (ones != 1) throw ConfigError(where + "categorical target must be one-hot");
  }
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Arch a) { return a == Arch::Linear ? "linear" : "mlp1"; }

std::string_view to_string(LossKind k) {
  return k == LossKind::BinaryCrossEntropy ? "binary_ce" : "categorical_ce";
}

Arch parse_arch(std::string_view s) {
  if (s == "linear") return Arch::Linear;
  if (s == "mlp1") return Arch::Mlp1;
  throw ConfigError("unknown arch '" + std::string(s) + "'");
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "binary_ce") return LossKind::BinaryCrossEntropy;
  if (s == "categorical_ce") return LossKind::CategoricalCrossEntropy;
  throw ConfigError("unknown loss_kind '" + std::string(s) + "'");
}

// ------------------------------------------------------------------ model

ToyModel::ToyModel(Shape shape, std::vector<double> weights)
    : shape_(shape), weights_(std::move(weights)) {
  validate_shape(shape_);
  if (weights_.size() != param_count(shape_))
    throw DimensionError("weight vector has " + std::to_string(weights_.size()) + " entries, arch needs " +
                         std::to_string(param_count(shape_)));
}

std::size_t ToyModel::param_count(const Shape& shape) { return layout_of(shape).total; }

ToyModel ToyModel::zeros(Shape shape) {
  validate_shape(shape);
  return ToyModel(shape, std::vector<double>(param_count(shape), 0.0));
}

ToyModel ToyModel::random(Shape shape, std::uint64_t seed) {
  validate_shape(shape);
  Rng rng(seed);
  std::vector<double> w(param_count(shape));
  for (auto& v : w) v = rng.uniform(-0.05, 0.05);
  return ToyModel(shape, std::move(w));
}

void ToyModel::check_input(std::span<const double> input) const {
  if (input.size() != shape_.input_dim)
    throw DimensionError("input has " + std::to_string(input.size()) + " values, model expects " +
                         std::to_string(shape_.input_dim));
}

std::vector<double> ToyModel::logits(std::span<const double> input) const {
  check_input(input);
  return forward(shape_, weights_, input).logits;
}

std::vector<double> ToyModel::outputs(std::span<const double> input) const {
  auto z = logits(input);
  if (shape_.loss == LossKind::CategoricalCrossEntropy) return softmax(z);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double ToyModel::loss(std::span<const double> input, std::span<const double> target) const {
  check_input(input);
  if (target.size() != shape_.output_dim) throw DimensionError("target size mismatch");
  const auto z = forward(shape_, weights_, input).logits;
  double total = 0.0;
  if (shape_.loss == LossKind::BinaryCrossEntropy) {
    for (std::size_t k = 0; k < z.size(); ++k)
      total += std::max(z[k], 0.0) - z[k] * target[k] + std::log1p(std::exp(-std::abs(z[k])));
  } else {
    const double mx = *std::max_element(z.begin(), z.end());
    double se = 0.0;
    for (double v : z) se += std::exp(v - mx);
    const double lse = mx + std::log(se);
    for (std::size_t k = 0; k < z.size(); ++k) total += target[k] * (lse - z[k]);
  }
  return total;
}

double ToyModel::accumulate_gradient(std::span<const double> input, std::span<const double> target,
                                     std::span<double> grad) const {
  check_input(input);
  if (target.size() != shape_.output_dim) throw DimensionError("target size mismatch");
  if (grad.size() != weights_.size()) throw DimensionError("gradient buffer size mismatch");

  const auto f = forward(shape_, weights_, input);
  const auto& z = f.logits;
  const std::size_t out = shape_.output_dim;
  std::vector<double> dz(out);
  double total = 0.0;
  if (shape_.loss == LossKind::BinaryCrossEntropy) {
    for (std::size_t k = 0; k < out; ++k) {
      total += std::max(z[k], 0.0) - z[k] * target[k] + std::log1p(std::exp(-std::abs(z[k])));
      dz[k] = sigmoid(z[k]) - target[k];
    }
  } else {
    const auto p = softmax(z);
    const double mx = *std::max_element(z.begin(), z.end());
    double se = 0.0;
    for (double v : z) se += std::exp(v - mx);
    const double lse = mx + std::log(se);
    double tsum = 0.0;
    for (std::size_t k = 0; k < out; ++k) {
      total += target[k] * (lse - z[k]);
      tsum += target[k];
    }
    for (std::size_t k = 0; k < out; ++k) dz[k] = tsum * p[k] - target[k];
  }

  const auto l = layout_of(shape_);
  const std::size_t in = shape_.input_dim;
  if (shape_.arch == Arch::Linear) {
    for (std::size_t k = 0; k < out; ++k) {
      double* row = &grad[l.w1 + k * in];
      for (std::size_t i = 0; i < in; ++i) row[i] += dz[k] * input[i];
      grad[l.b1 + k] += dz[k];
    }
    return total;
  }

  const std::size_t hid = shape_.hidden_dim;
  std::vector<double> dpre(hid, 0.0);
  for (std::size_t k = 0; k < out; ++k) {
    double* grow = &grad[l.w2 + k * hid];
    const double* wrow = &weights_[l.w2 + k * hid];
    for (std::size_t j = 0; j < hid; ++j) {
      grow[j] += dz[k] * f.hidden[j];
      dpre[j] += dz[k] * wrow[j];
    }
    grad[l.b2 + k] += dz[k];
  }
  for (std::size_t j = 0; j < hid; ++j) {
    dpre[j] *= 1.0 - f.hidden[j] * f.hidden[j];
    double* row = &grad[l.w1 + j * in];
    for (std::size_t i = 0; i < in; ++i) row[i] += dpre[j] * input[i];
    grad[l.b1 + j] += dpre[j];
  }
  return total;
}

std::vector<double> ToyModel::logit_input_gradient(std::span<const double> input, std::size_t output) const {
  check_input(input);
  if (output >= shape_.output_dim) throw DimensionError("output index out of range");
  const auto l = layout_of(shape_);
  const std::size_t in = shape_.input_dim;
  std::vector<double> g(in, 0.0);
  if (shape_.arch == Arch::Linear) {
    std::copy_n(&weights_[l.w1 + output * in], in, g.begin());
    return g;
  }
  const auto f = forward(shape_, weights_, input);
  const std::size_t hid = shape_.hidden_dim;
  for (std::size_t j = 0; j < hid; ++j) {
    const double coef = weights_[l.w2 + output * hid + j] * (1.0 - f.hidden[j] * f.hidden[j]);
    if (coef == 0.0) continue;
    const double* row = &weights_[l.w1 + j * in];
    for (std::size_t i = 0; i < in; ++i) g[i] += coef * row[i];
  }
  return g;
}

// -------------------------------------------------------------- optimizer

AdamOptimizer::AdamOptimizer(std::size_t n_params, double lr)
    : lr_(lr), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + kEpsilon);
  }
}

// --------------------------------------------------------------- training

TrainResult train(const ToyModel& init, std::span<const Example> data, const TrainOptions& opts) {
  if (!(opts.lr > 0.0) || !std::isfinite(opts.lr)) throw ConfigError("learning rate must be positive");
  if (opts.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (opts.batch_size == 0) throw ConfigError("batch size must be positive");
  for (std::size_t i = 0; i < data.size(); ++i) validate_example(init.shape(), data[i], i);

  TrainResult result{init, {}};
  if (opts.epochs == 0) return result;
  if (data.empty()) throw EmptyInputError("training set is empty");

  ToyModel& model = result.model;
  AdamOptimizer adam(model.weights().size(), opts.lr);
  Rng rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.weights().size());

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_total = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        batch_total += model.accumulate_gradient(ex.input, ex.target, grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad) g *= scale;
      if (!std::isfinite(batch_total)) throw DivergenceError(epoch + 1, "non-finite training loss");
      adam.step(model.mutable_weights(), grad);
      epoch_total += batch_total;
    }
    const double mean = epoch_total / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw DivergenceError(epoch + 1, "non-finite training loss");
    for (double w : model.weights())
      if (!std::isfinite(w)) throw DivergenceError(epoch + 1, "non-finite parameter");
    result.epoch_loss.push_back(mean);
  }
  return result;
}

double accuracy(const ToyModel& model, std::span<const Example> data) {
  if (data.empty()) throw EmptyInputError("accuracy of an empty set");
  double hits = 0.0, total = 0.0;
  for (const auto& ex : data) {
    const auto out = model.outputs(ex.input);
    if (model.shape().loss == LossKind::CategoricalCrossEntropy) {
      const auto pred = std::max_element(out.begin(), out.end()) - out.begin();
      const auto truth = std::max_element(ex.target.begin(), ex.target.end()) - ex.target.begin();
      hits += (pred == truth);
      total += 1.0;
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) {
        hits += ((out[k] > 0.5) == (ex.target[k] > 0.5));
        total += 1.0;
      }
    }
  }
  return hits / total;
}

GridResult grid_search(const ToyModel& init, std::span<const Example> train_set,
                       std::span<const Example> val_set, std::span<const double> lrs,
                       std::span<const int> epochs, std::uint64_t seed, bool parallel) {
  if (lrs.empty() || epochs.empty()) throw ConfigError("hyperparameter grid must be nonempty");
  if (val_set.empty()) throw EmptyInputError("validation set is empty");

  struct Point {
    double lr;
    int epochs;
  };
  std::vector<Point> points;
  for (double lr : lrs)
    for (int e : epochs) points.push_back({lr, e});

  auto run_one = [&](std::size_t idx) {
    TrainOptions opts;
    opts.lr = points[idx].lr;
    opts.epochs = points[idx].epochs;
    opts.seed = Rng::stream(seed, idx).next();
    auto trained = train(init, train_set, opts);
    GridRun run;
    run.lr = points[idx].lr;
    run.epochs = points[idx].epochs;
    run.final_loss = trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back();
    run.val_accuracy = accuracy(trained.model, val_set);
    run.model = std::move(trained.model);
    return run;
  };

  GridResult result;
  if (parallel) {
    std::vector<std::future<GridRun>> futures;
    for (std::size_t i = 0; i < points.size(); ++i)
      futures.push_back(std::async(std::launch::async, run_one, i));
    for (auto& f : futures) result.runs.push_back(f.get());
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) result.runs.push_back(run_one(i));
  }
  for (std::size_t i = 1; i < result.runs.size(); ++i)
    if (result.runs[i].val_accuracy > result.runs[result.best].val_accuracy) result.best = i;
  return result;
}

// ------------------------------------------------------------ stub roles

ToyModel::Shape s_model_shape(const GrayImage& like, Arch arch, std::size_t hidden) {
  return {arch, like.size(), arch == Arch::Linear ? 0 : hidden, kNumSymptoms, LossKind::BinaryCrossEntropy};
}

ToyModel::Shape r_model_shape(const GrayImage& like, Arch arch, std::size_t hidden) {
  return {arch, like.size() + kNumSymptoms, arch == Arch::Linear ? 0 : hidden, kNumMorphClasses,
          LossKind::CategoricalCrossEntropy};
}

ToyModel::Shape e2e_model_shape(const GrayImage& like, Arch arch, std::size_t hidden) {
  return {arch, like.size(), arch == Arch::Linear ? 0 : hidden, 1, LossKind::BinaryCrossEntropy};
}

std::vector<double> r_input(const GrayImage& img, const SymptomVector& symptoms) {
  std::vector<double> x(img.pixels().begin(), img.pixels().end());
  x.insert(x.end(), symptoms.values().begin(), symptoms.values().end());
  return x;
}

SymptomVector predict_s(const ToyModel& model, const GrayImage& img) {
  const auto& s = model.shape();
  if (s.output_dim != kNumSymptoms || s.loss != LossKind::BinaryCrossEntropy)
    throw DimensionError("not a symptom model: needs 14 binary outputs");
  if (s.input_dim != img.size())
    throw DimensionError("image has " + std::to_string(img.size()) + " pixels, model expects " +
                         std::to_string(s.input_dim));
  const auto out = model.outputs(img.pixels());
  std::array<double, kNumSymptoms> probs{};
  std::copy(out.begin(), out.end(), probs.begin());
  return SymptomVector(probs);
}

MorphProbs predict_r(const ToyModel& model, const GrayImage& img, const SymptomVector& symptoms) {
  const auto& s = model.shape();
  if (s.output_dim != kNumMorphClasses || s.loss != LossKind::CategoricalCrossEntropy)
    throw DimensionError("not a morphology model: needs 5 categorical outputs");
  if (s.input_dim != img.size() + kNumSymptoms)
    throw DimensionError("morphology model expects " + std::to_string(s.input_dim) +
                         " inputs, image + symptoms give " + std::to_string(img.size() + kNumSymptoms));
  const auto out = model.outputs(r_input(img, symptoms));
  std::array<double, kNumMorphClasses> probs{};
  std::copy(out.begin(), out.end(), probs.begin());
  return MorphProbs(probs);
}

double predict_e2e(const ToyModel& model, const GrayImage& img) {
  const auto& s = model.shape();
  if (s.output_dim != 1 || s.loss != LossKind::BinaryCrossEntropy)
    throw DimensionError("not an end-to-end model: needs one binary output");
  if (s.input_dim != img.size()) throw DimensionError("image size does not match end-to-end model");
  return model.outputs(img.pixels())[0];
}

SaliencyMap saliency(const ToyModel& r_model, const GrayImage& img, const SymptomVector& symptoms) {
  const auto probs = predict_r(r_model, img, symptoms);
  const auto cls = static_cast<std::size_t>(probs.argmax());
  const auto grad = r_model.logit_input_gradient(r_input(img, symptoms), cls);

  SaliencyMap map{img.width(), img.height(), std::vector<double>(img.size())};
  double mx = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    map.values[i] = std::abs(grad[i]);
    mx = std::max(mx, map.values[i]);
  }
  if (mx > 0.0)
    for (auto& v : map.values) v /= mx;
  return map;
}

SegmentationMask segment(const GrayImage& img, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValueError("segmentation threshold must lie in [0,1]");
  SegmentationMask mask{img.width(), img.height(), std::vector<std::uint8_t>(img.size())};
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) mask.values[i] = px[i] >= tau ? 1 : 0;
  return mask;
}

void write_pgm(std::ostream& out, const SaliencyMap& map) { write_pgm(out, map.width, map.height, map.values); }

void write_pgm(std::ostream& out, const SegmentationMask& mask) {
  std::vector<double> v(mask.values.begin(), mask.values.end());
  write_pgm(out, mask.width, mask.height, v);
}

// ------------------------------------------------------------ checkpoints

std::string to_checkpoint(const ToyModel& model) {
  const auto& s = model.shape();
  std::ostringstream os;
  os << "{\n"
     << "  \"arch\": \"" << to_string(s.arch) << "\",\n"
     << "  \"input_dim\": " << s.input_dim << ",\n"
     << "  \"hidden_dim\": " << s.hidden_dim << ",\n"
     << "  \"output_dim\": " << s.output_dim << ",\n"
     << "  \"loss_kind\": \"" << to_string(s.loss) << "\",\n"
     << "  \"weights\": [";
  const auto w = model.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) os << ", ";
    os << format17(w[i]);
  }
  os << "]\n}\n";
  return os.str();
}

ToyModel from_checkpoint(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    ToyModel::Shape s;
    s.arch = parse_arch(j.at("arch").get<std::string>());
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    s.output_dim = j.at("output_dim").get<std::size_t>();
    s.loss = parse_loss_kind(j.at("loss_kind").get<std::string>());
    return ToyModel(s, j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModelError(std::string("bad checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptModelError(std::string("bad checkpoint: ") + e.what());
  }
}

ToyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_checkpoint(ss.str());
}

}  // namespace nsdx
