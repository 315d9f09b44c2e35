#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hwnas/genotype.hpp"

namespace hwnas {

struct EvaluationRequest {
  std::int64_t id = 0;
  Genotype genotype;
  std::vector<double> epsilons;  // L-inf budgets in input scale [0, 1]
  int train_epochs = 1;
  std::uint64_t seed = 0;
};

enum class EvaluationStatus { Ok, Failed };

struct EvaluationResult {
  std::int64_t id = 0;
  double clean_accuracy = 0.0;
  std::vector<double> adversarial_accuracies;  // aligned with request epsilons
  EvaluationStatus status = EvaluationStatus::Ok;
  std::string error;  // diagnostic for Failed results; not part of the wire format

  bool ok() const { return status == EvaluationStatus::Ok; }

  static EvaluationResult failed(std::int64_t id, std::string why, std::size_t n_eps) {
    return {id, 0.0, std::vector<double>(n_eps, 0.0), EvaluationStatus::Failed, std::move(why)};
  }
};

/// Fitness-evaluation backend. Implementations must be deterministic in
/// (genotype, epsilons, train_epochs, seed) and safe to call concurrently.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual EvaluationResult evaluate(const EvaluationRequest& req) = 0;

  /// Results are returned in request order regardless of how the backend
  /// schedules the work.
  virtual std::vector<EvaluationResult> evaluate_batch(std::span<const EvaluationRequest> reqs);

  /// Throws std::invalid_argument on negative or non-finite epsilons.
  static void check_request(const EvaluationRequest& req);
};

// Wire protocol (one JSON object per line).
inline constexpr int kProtocolVersion = 1;
nlohmann::json request_to_json(const EvaluationRequest& req);
EvaluationRequest request_from_json(const nlohmann::json& j);
nlohmann::json result_to_json(const EvaluationResult& res);
/// Throws ProtocolError on schema violations.
EvaluationResult result_from_json(const nlohmann::json& j);

/// Synthetic fitness used for fast reproducible runs. Not a model of any
/// real dataset: accuracy grows with log parameter count and depth, and
/// decays exponentially in epsilon with a scale widened by the fraction of
/// capsule layers.
struct SurrogateParams {
  double log_params_weight = 0.35;
  double depth_weight = 0.1;
  double bias = -2.5;
  double eps_base = 0.01;
  double jitter = 0.02;  // half-width of the per-genotype hash perturbation
};

struct SurrogateFeatures {
  double params = 1.0;
  int depth = 0;
  double capsule_fraction = 0.0;
};

SurrogateFeatures surrogate_features(const Genotype& g);

/// Uniform value in [-1, 1] derived from the genotype and seed.
double genotype_noise(const Genotype& g, std::uint64_t seed);

/// Clean accuracy before jitter.
double surrogate_clean_accuracy(const SurrogateFeatures& f, const SurrogateParams& p);
double surrogate_adversarial_accuracy(double clean, double epsilon,
                                      const SurrogateFeatures& f, const SurrogateParams& p);

class SurrogateEvaluator final : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateParams params = {}) : params_(params) {}

  EvaluationResult evaluate(const EvaluationRequest& req) override;

  const SurrogateParams& params() const { return params_; }

 private:
  SurrogateParams params_;
};

}  // namespace hwnas
