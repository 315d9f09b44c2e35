#include "hwnas/toy_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "hwnas/errors.hpp"
#include "hwnas/rng.hpp"

namespace hwnas {

namespace {

constexpr int kMaxWidth = 256;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// n / (1 + n)^2, the factor multiplying x
double squash_gain(double n) { return n / ((1.0 + n) * (1.0 + n)); }

void squash_groups(std::span<const double> z, int dim, std::span<double> out) {
  for (std::size_t g = 0; g < z.size(); g += static_cast<std::size_t>(dim)) {
    const auto in = z.subspan(g, static_cast<std::size_t>(dim));
    const double k = squash_gain(norm(in));
    for (std::size_t i = 0; i < in.size(); ++i) out[g + i] = k * in[i];
  }
}

// dx = h dv + h'(n)/n * x (x . dv), with h(n) = n / (1 + n)^2
void squash_backward(std::span<const double> z, int dim, std::span<const double> dv,
                     std::span<double> dz) {
  for (std::size_t g = 0; g < z.size(); g += static_cast<std::size_t>(dim)) {
    const auto x = z.subspan(g, static_cast<std::size_t>(dim));
    const double n = norm(x);
    if (n == 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) dz[g + i] = 0.0;
      continue;
    }
    const double h = squash_gain(n);
    const double c = (1.0 - n) / ((1.0 + n) * (1.0 + n) * (1.0 + n) * n);
    double xdv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) xdv += x[i] * dv[g + i];
    for (std::size_t i = 0; i < x.size(); ++i) dz[g + i] = h * dv[g + i] + c * x[i] * xdv;
  }
}

}  // namespace

std::vector<double> squash(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (!x.empty()) squash_groups(x, static_cast<int>(x.size()), out);
  return out;
}

struct ToyModel::Trace {
  std::vector<std::vector<double>> in, z, h;
};

ToyModel::ToyModel(int input_dim, std::vector<DenseSpec> layers, std::vector<Shortcut> shortcuts,
                   std::uint64_t seed)
    : input_dim_(input_dim), layers_(std::move(layers)), shortcuts_(std::move(shortcuts)) {
  if (input_dim_ < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (layers_.empty() || layers_.back().activation != Activation::Softmax)
    throw std::invalid_argument("model must end with a softmax layer");
  const int n = static_cast<int>(layers_.size());
  for (const auto& s : shortcuts_)
    if (s.source < 0 || s.source >= s.destination || s.destination >= n)
      throw std::invalid_argument("invalid shortcut");

  Rng rng(seed);
  std::size_t offset = 0;
  int fan_in = input_dim_;
  for (const auto& spec : layers_) {
    if (spec.width < 1) throw std::invalid_argument("layer width must be >= 1");
    if (spec.activation == Activation::Squash &&
        (spec.capsule_dim < 1 || spec.width % spec.capsule_dim != 0))
      throw std::invalid_argument("squash width must be a multiple of capsule_dim");
    fan_in_.push_back(fan_in);
    weight_offset_.push_back(offset);
    offset += static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(fan_in);
    bias_offset_.push_back(offset);
    offset += static_cast<std::size_t>(spec.width);
    fan_in = spec.width;
  }
  theta_.assign(offset, 0.0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& spec = layers_[l];
    const double fan = fan_in_[l];
    const double limit = spec.activation == Activation::Relu
                             ? std::sqrt(6.0 / fan)
                             : std::sqrt(6.0 / (fan + spec.width));
    const auto count = static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(fan_in_[l]);
    for (std::size_t i = 0; i < count; ++i)
      theta_[weight_offset_[l] + i] = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

ToyModel ToyModel::from_genotype(const Genotype& g, int input_dim, int num_classes,
                                 std::uint64_t seed) {
  std::vector<DenseSpec> specs;
  for (const auto& d : g.layers) {
    DenseSpec s;
    if (is_capsule_type(d.type)) {
      const int dim = std::min(d.out_capsules, kMaxWidth);
      const int caps = std::max(1, std::min(d.out_channels, kMaxWidth / dim));
      s = {caps * dim, Activation::Squash, dim};
    } else {
      s = {std::min(d.out_channels * d.out_capsules, kMaxWidth), Activation::Relu, 1};
    }
    specs.push_back(s);
  }
  specs.push_back({num_classes, Activation::Softmax, 1});
  std::vector<Shortcut> shortcuts;
  for (const auto& s : g.skip_connections) shortcuts.push_back({s.source, s.destination});
  return ToyModel(input_dim, std::move(specs), std::move(shortcuts), seed);
}

void ToyModel::run(std::span<const double> x, Trace& t) const {
  if (static_cast<int>(x.size()) != input_dim_)
    throw ShapeMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                        std::to_string(input_dim_));
  const std::size_t n = layers_.size();
  t.in.resize(n);
  t.z.resize(n);
  t.h.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& spec = layers_[l];
    auto& in = t.in[l];
    if (l == 0) {
      in.assign(x.begin(), x.end());
    } else {
      in = t.h[l - 1];
    }
    for (const auto& s : shortcuts_) {
      if (s.destination != static_cast<int>(l)) continue;
      const auto& src = t.h[static_cast<std::size_t>(s.source)];
      const std::size_t m = std::min(src.size(), in.size());
      for (std::size_t i = 0; i < m; ++i) in[i] += src[i];
    }
    const std::size_t fan = in.size(), width = static_cast<std::size_t>(spec.width);
    auto& z = t.z[l];
    z.assign(width, 0.0);
    const double* w = theta_.data() + weight_offset_[l];
    const double* b = theta_.data() + bias_offset_[l];
    for (std::size_t o = 0; o < width; ++o) {
      double acc = b[o];
      const double* row = w + o * fan;
      for (std::size_t i = 0; i < fan; ++i) acc += row[i] * in[i];
      z[o] = acc;
    }
    auto& h = t.h[l];
    h.resize(width);
    switch (spec.activation) {
      case Activation::Relu:
        for (std::size_t o = 0; o < width; ++o) h[o] = z[o] > 0.0 ? z[o] : 0.0;
        break;
      case Activation::Squash:
        squash_groups(z, spec.capsule_dim, h);
        break;
      case Activation::Softmax: {
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t o = 0; o < width; ++o) sum += (h[o] = std::exp(z[o] - mx));
        for (auto& v : h) v /= sum;
        break;
      }
    }
  }
}

double ToyModel::backward(const Trace& t, int label, std::span<double> param_grad,
                          std::vector<double>* input_grad) const {
  const std::size_t n = layers_.size();
  const auto& logits = t.z.back();
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw ShapeMismatch("label " + std::to_string(label) + " out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double loss = mx + std::log(sum) - logits[static_cast<std::size_t>(label)];

  std::vector<std::vector<double>> dh(n);
  for (std::size_t l = 0; l < n; ++l) dh[l].assign(t.h[l].size(), 0.0);

  std::vector<double> dz;
  for (std::size_t l = n; l-- > 0;) {
    const auto& spec = layers_[l];
    const std::size_t width = static_cast<std::size_t>(spec.width), fan = t.in[l].size();
    dz.assign(width, 0.0);
    switch (spec.activation) {
      case Activation::Softmax:
        dz = t.h[l];
        dz[static_cast<std::size_t>(label)] -= 1.0;
        break;
      case Activation::Relu:
        for (std::size_t o = 0; o < width; ++o) dz[o] = t.z[l][o] > 0.0 ? dh[l][o] : 0.0;
        break;
      case Activation::Squash:
        squash_backward(t.z[l], spec.capsule_dim, dh[l], dz);
        break;
    }

    const double* w = theta_.data() + weight_offset_[l];
    if (!param_grad.empty()) {
      double* gw = param_grad.data() + weight_offset_[l];
      double* gb = param_grad.data() + bias_offset_[l];
      for (std::size_t o = 0; o < width; ++o) {
        gb[o] += dz[o];
        double* row = gw + o * fan;
        for (std::size_t i = 0; i < fan; ++i) row[i] += dz[o] * t.in[l][i];
      }
    }
    std::vector<double> din(fan, 0.0);
    for (std::size_t o = 0; o < width; ++o) {
      const double* row = w + o * fan;
      for (std::size_t i = 0; i < fan; ++i) din[i] += row[i] * dz[o];
    }
    for (const auto& s : shortcuts_) {
      if (s.destination != static_cast<int>(l)) continue;
      auto& target = dh[static_cast<std::size_t>(s.source)];
      const std::size_t m = std::min(target.size(), din.size());
      for (std::size_t i = 0; i < m; ++i) target[i] += din[i];
    }
    if (l > 0) {
      for (std::size_t i = 0; i < fan; ++i) dh[l - 1][i] += din[i];
    } else if (input_grad) {
      *input_grad = std::move(din);
    }
  }
  return loss;
}

std::vector<double> ToyModel::forward(std::span<const double> x) const {
  Trace t;
  run(x, t);
  return t.h.back();
}

double ToyModel::loss(std::span<const double> x, int label) const {
  Trace t;
  run(x, t);
  const auto& logits = t.z.back();
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw ShapeMismatch("label " + std::to_string(label) + " out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

ToyModel::Gradients ToyModel::loss_and_grads(std::span<const double> x, int label,
                                             bool parameter_grads) const {
  Trace t;
  run(x, t);
  Gradients g;
  if (parameter_grads) g.parameters.assign(theta_.size(), 0.0);
  g.loss = backward(t, label, g.parameters, &g.input);
  return g;
}

double ToyModel::accumulate_grads(std::span<const double> x, int label,
                                  std::span<double> accum) const {
  if (accum.size() != theta_.size()) throw ShapeMismatch("gradient buffer size mismatch");
  Trace t;
  run(x, t);
  return backward(t, label, accum, nullptr);
}

SyntheticDataset make_blobs(const BlobOptions& opts) {
  if (opts.classes < 2 || opts.dim < 1 || opts.train_size < 1 || opts.test_size < 1)
    throw std::invalid_argument("invalid blob options");
  Rng rng(opts.seed);
  std::vector<double> centres(static_cast<std::size_t>(opts.classes * opts.dim));
  for (auto& c : centres) c = 0.2 + 0.6 * rng.uniform();

  auto sample = [&](int count) {
    Dataset d;
    d.dim = opts.dim;
    d.classes = opts.classes;
    d.inputs.reserve(static_cast<std::size_t>(count * opts.dim));
    for (int i = 0; i < count; ++i) {
      const int label = i % opts.classes;
      d.labels.push_back(label);
      for (int k = 0; k < opts.dim; ++k) {
        const double v = centres[static_cast<std::size_t>(label * opts.dim + k)] +
                         opts.spread * rng.normal();
        d.inputs.push_back(std::clamp(v, 0.0, 1.0));
      }
    }
    return d;
  };
  SyntheticDataset out;
  out.train = sample(opts.train_size);
  out.test = sample(opts.test_size);
  return out;
}

TrainResult train(ToyModel model, const Dataset& data, const TrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(opts.momentum >= 0.0 && opts.momentum < 1.0))
    throw std::invalid_argument("momentum must lie in [0, 1)");
  if (data.dim != model.input_dim()) throw ShapeMismatch("dataset dimension mismatch");
  if (data.size() == 0) throw std::invalid_argument("empty dataset");

  Rng rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.parameters().size());
  std::vector<double> velocity(grad.size(), 0.0);
  TrainResult out{std::move(model), {}};
  auto& theta = out.model.parameters();

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i)
        total += out.model.accumulate_grads(data.row(order[i]), data.labels[order[i]], grad);
      const double step = opts.lr / static_cast<double>(end - start);
      for (std::size_t p = 0; p < theta.size(); ++p) {
        velocity[p] = opts.momentum * velocity[p] - step * grad[p];
        theta[p] += velocity[p];
      }
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean))
      throw NumericalDivergence("training loss became non-finite in epoch " +
                                std::to_string(epoch));
    out.epoch_loss.push_back(mean);
  }
  return out;
}

int predict(const ToyModel& m, std::span<const double> x) {
  const auto p = m.forward(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double accuracy(const ToyModel& m, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict(m, data.row(i)) == data.labels[i]) ++hits;
  return data.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<double> pgd_attack(const ToyModel& m, std::span<const double> x, int label,
                               const PgdOptions& opts, std::vector<double>* loss_trace) {
  if (!(opts.epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (!(opts.alpha > 0.0) && opts.epsilon > 0.0) throw std::invalid_argument("alpha must be > 0");
  if (opts.iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  std::vector<double> adv(x.begin(), x.end());
  auto project = [&](std::size_t i) {
    adv[i] = std::clamp(adv[i], x[i] - opts.epsilon, x[i] + opts.epsilon);
    // x +- eps can round one ulp past the ball
    while (std::abs(adv[i] - x[i]) > opts.epsilon) adv[i] = std::nextafter(adv[i], x[i]);
    adv[i] = std::clamp(adv[i], 0.0, 1.0);
  };
  if (opts.random_start && opts.epsilon > 0.0) {
    Rng rng(opts.seed);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      adv[i] += (2.0 * rng.uniform() - 1.0) * opts.epsilon;
      project(i);
    }
  }
  if (opts.epsilon == 0.0) {
    if (loss_trace) loss_trace->assign(static_cast<std::size_t>(opts.iterations) + 1, m.loss(adv, label));
    return adv;
  }

  if (loss_trace) loss_trace->clear();
  for (int it = 0; it < opts.iterations; ++it) {
    const auto g = m.loss_and_grads(adv, label, false);
    if (loss_trace) loss_trace->push_back(g.loss);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double s = g.input[i] > 0.0 ? 1.0 : (g.input[i] < 0.0 ? -1.0 : 0.0);
      adv[i] += opts.alpha * s;
      project(i);
    }
  }
  if (loss_trace) loss_trace->push_back(m.loss(adv, label));
  return adv;
}

double adversarial_accuracy(const ToyModel& m, const Dataset& data, const PgdOptions& opts) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto adv = pgd_attack(m, data.row(i), data.labels[i], opts);
    if (predict(m, adv) == data.labels[i]) ++hits;
  }
  return data.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

ToyEvaluator::ToyEvaluator(ToyOptions opts)
    : opts_(opts),
      data_(make_blobs({opts.classes, opts.dim, opts.train_size, opts.test_size, opts.spread,
                        opts.data_seed})) {
  if (opts_.pgd_steps < 1 || !(opts_.pgd_alpha_ratio > 0.0) || !(opts_.lr > 0.0) ||
      opts_.workers < 1)
    throw ConfigError("invalid toy evaluator options");
}

EvaluationResult ToyEvaluator::evaluate(const EvaluationRequest& req) {
  check_request(req);
  try {
    auto model = ToyModel::from_genotype(req.genotype, opts_.dim, opts_.classes, req.seed);
    auto trained = train(std::move(model), data_.train,
                         {req.train_epochs, opts_.lr, opts_.batch_size, req.seed});
    EvaluationResult res;
    res.id = req.id;
    res.clean_accuracy = accuracy(trained.model, data_.test);
    for (double eps : req.epsilons) {
      if (eps == 0.0) {
        res.adversarial_accuracies.push_back(res.clean_accuracy);
        continue;
      }
      const PgdOptions pgd{eps, opts_.pgd_alpha_ratio * eps, opts_.pgd_steps, false, req.seed};
      res.adversarial_accuracies.push_back(adversarial_accuracy(trained.model, data_.test, pgd));
    }
    return res;
  } catch (const Error& e) {
    return EvaluationResult::failed(req.id, e.what(), req.epsilons.size());
  }
}

std::vector<EvaluationResult> ToyEvaluator::evaluate_batch(std::span<const EvaluationRequest> reqs) {
  for (const auto& r : reqs) check_request(r);
  std::vector<EvaluationResult> out(reqs.size());
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(opts_.workers), reqs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < reqs.size(); ++i) out[i] = evaluate(reqs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < reqs.size(); i = next++) out[i] = evaluate(reqs[i]);
      });
  }
  return out;
}

}  // namespace hwnas
