#include "hwnas/evaluator.hpp"

#include <cmath>
#include <stdexcept>

#include "hwnas/errors.hpp"
#include "hwnas/hw_model.hpp"
#include "hwnas/rng.hpp"

namespace hwnas {

std::vector<EvaluationResult> Evaluator::evaluate_batch(std::span<const EvaluationRequest> reqs) {
  std::vector<EvaluationResult> out;
  out.reserve(reqs.size());
  for (const auto& r : reqs) out.push_back(evaluate(r));
  return out;
}

void Evaluator::check_request(const EvaluationRequest& req) {
  for (double e : req.epsilons)
    if (!std::isfinite(e) || e < 0.0)
      throw std::invalid_argument("epsilons must be finite and non-negative");
  if (req.train_epochs < 1) throw std::invalid_argument("train_epochs must be >= 1");
}

nlohmann::json request_to_json(const EvaluationRequest& req) {
  return nlohmann::json{{"id", req.id},
                        {"genotype", to_json(req.genotype)},
                        {"epsilons", req.epsilons},
                        {"train_epochs", req.train_epochs},
                        {"seed", req.seed}};
}

EvaluationRequest request_from_json(const nlohmann::json& j) {
  try {
    EvaluationRequest r;
    r.id = j.at("id").get<std::int64_t>();
    r.genotype = genotype_from_json(j.at("genotype"));
    r.epsilons = j.at("epsilons").get<std::vector<double>>();
    r.train_epochs = j.at("train_epochs").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
}

nlohmann::json result_to_json(const EvaluationResult& res) {
  return nlohmann::json{{"id", res.id},
                        {"clean_accuracy", res.clean_accuracy},
                        {"adversarial_accuracies", res.adversarial_accuracies},
                        {"status", res.ok() ? "ok" : "failed"}};
}

EvaluationResult result_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("response is not an object");
  EvaluationResult r;
  try {
    const auto& id = j.at("id");
    if (!id.is_number_integer()) throw ProtocolError("response id must be an integer");
    r.id = id.get<std::int64_t>();
    const auto status = j.at("status").get<std::string>();
    if (status == "ok") {
      r.status = EvaluationStatus::Ok;
    } else if (status == "failed") {
      r.status = EvaluationStatus::Failed;
    } else {
      throw ProtocolError("unknown status '" + status + "'");
    }
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.adversarial_accuracies = j.at("adversarial_accuracies").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (r.ok()) {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!in_unit(r.clean_accuracy)) throw ProtocolError("clean_accuracy outside [0, 1]");
    for (double a : r.adversarial_accuracies)
      if (!in_unit(a)) throw ProtocolError("adversarial accuracy outside [0, 1]");
  }
  return r;
}

SurrogateFeatures surrogate_features(const Genotype& g) {
  SurrogateFeatures f;
  double params = 0.0;
  int capsule_layers = 0;
  for (const auto& d : g.layers) {
    params += static_cast<double>(layer_shape_params(d).weights);
    if (is_capsule_type(d.type)) ++capsule_layers;
  }
  f.params = std::max(params, 1.0);
  f.depth = static_cast<int>(g.layers.size());
  f.capsule_fraction =
      g.layers.empty() ? 0.0 : static_cast<double>(capsule_layers) / f.depth;
  return f;
}

double genotype_noise(const Genotype& g, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : encode(g)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  const std::uint64_t mixed = Rng::mix(h ^ Rng::mix(seed));
  return static_cast<double>(mixed >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double surrogate_clean_accuracy(const SurrogateFeatures& f, const SurrogateParams& p) {
  const double z =
      p.log_params_weight * std::log10(f.params) + p.depth_weight * f.depth + p.bias;
  return 1.0 / (1.0 + std::exp(-z));
}

double surrogate_adversarial_accuracy(double clean, double epsilon, const SurrogateFeatures& f,
                                      const SurrogateParams& p) {
  const double scale = p.eps_base * (1.0 + f.capsule_fraction);
  return clean * std::exp(-epsilon / scale);
}

EvaluationResult SurrogateEvaluator::evaluate(const EvaluationRequest& req) {
  check_request(req);
  const auto f = surrogate_features(req.genotype);
  double clean = surrogate_clean_accuracy(f, params_) +
                 params_.jitter * genotype_noise(req.genotype, req.seed);
  clean = std::clamp(clean, 0.0, 1.0);

  EvaluationResult res;
  res.id = req.id;
  res.clean_accuracy = clean;
  for (double e : req.epsilons)
    res.adversarial_accuracies.push_back(
        e == 0.0 ? clean : surrogate_adversarial_accuracy(clean, e, f, params_));
  return res;
}

}  // namespace hwnas
