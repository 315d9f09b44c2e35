#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hwnas/errors.hpp"
#include "hwnas/toy_model.hpp"
#include "toy_checks.hpp"

using namespace hwnas;

namespace {

Genotype fixture() {
  std::ifstream f(HWNAS_FIXTURE_DIR "/three_layer.json");
  std::stringstream s;
  s << f.rdbuf();
  return decode(s.str());
}

double length(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

ToyOptions small_toy() {
  ToyOptions o;
  o.train_size = 1000;
  o.test_size = 200;
  return o;
}

}  // namespace

TEST_CASE("squash anchors") {
  const std::vector<double> unit{0.6, 0.8};
  CHECK(length(squash(unit)) == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> ten{0.0, 6.0, 8.0};
  CHECK(length(squash(ten)) == doctest::Approx(100.0 / 121.0).epsilon(1e-15));
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(squash(zero) == zero);
  CHECK(squash(std::vector<double>{}).empty());

  // Direction is kept.
  const std::vector<double> v{-3.0, 1.0, 2.0};
  const auto s = squash(v);
  const double k = s[0] / v[0];
  CHECK(k > 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(s[i] == doctest::Approx(k * v[i]));
  CHECK(length(s) < 1.0);
}

TEST_CASE("forward pass yields a distribution") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto m = toy_checks::random_model(rng);
    const auto p = m.forward(toy_checks::random_input(rng, m.input_dim()));
    REQUIRE(static_cast<int>(p.size()) == m.num_classes());
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double q : p) CHECK(q >= 0.0);
  }
}

TEST_CASE("zero parameters give uniform output") {
  ToyModel m(4, {{6, Activation::Relu, 1}, {4, Activation::Squash, 2}, {5, Activation::Softmax, 1}},
             {}, 1);
  std::fill(m.parameters().begin(), m.parameters().end(), 0.0);
  const auto p = m.forward(std::vector<double>{0.1, 0.9, 0.4, 0.3});
  for (double q : p) CHECK(q == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(m.loss(std::vector<double>{0.1, 0.9, 0.4, 0.3}, 2) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("model construction is checked") {
  CHECK_THROWS_AS(ToyModel(0, {{2, Activation::Softmax, 1}}, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(ToyModel(3, {{2, Activation::Relu, 1}}, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(ToyModel(3, {{5, Activation::Squash, 2}, {2, Activation::Softmax, 1}}, {}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      ToyModel(3, {{4, Activation::Relu, 1}, {2, Activation::Softmax, 1}}, {{1, 1}}, 0),
      std::invalid_argument);
  const ToyModel m(3, {{2, Activation::Softmax, 1}}, {}, 0);
  CHECK_THROWS_AS(m.forward(std::vector<double>{1.0, 2.0}), ShapeMismatch);
}

TEST_CASE("dense realization of a genotype") {
  const auto m = ToyModel::from_genotype(fixture(), 16, 10, 0);
  REQUIRE(m.layers().size() == 4);
  CHECK(m.layers()[0].width == 40);
  CHECK(m.layers()[0].activation == Activation::Relu);
  CHECK(m.layers()[1].width == 9);
  CHECK(m.layers()[2].width == 100);
  CHECK(m.layers()[2].activation == Activation::Squash);
  CHECK(m.layers()[2].capsule_dim == 10);
  CHECK(m.layers()[3].activation == Activation::Softmax);
  REQUIRE(m.shortcuts().size() == 1);
  CHECK(m.shortcuts()[0].source == 0);
  CHECK(m.shortcuts()[0].destination == 2);

  const SearchSpace space;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = ToyModel::from_genotype(random_genotype(space, seed), 16, 10, seed);
    for (const auto& l : r.layers()) CHECK(l.width <= 256);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const auto r = toy_checks::gradient_check(100, 11);
  INFO("checked " << r.checked << ", kinks " << r.kinks);
  CHECK(r.checked > 1000);
  CHECK(r.kinks * 50 < r.checked);
  CHECK(r.worst < 1e-4);
}

TEST_CASE("training separates two blobs") {
  const auto data = make_blobs({2, 8, 400, 200, 0.08, 5});
  ToyModel m(8, {{8, Activation::Relu, 1}, {2, Activation::Softmax, 1}}, {}, 2);
  const auto res = train(m, data.train, {20, 0.05, 16, 9});
  CHECK(res.epoch_loss.size() == 20);
  CHECK(res.epoch_loss.back() < res.epoch_loss.front());
  CHECK(accuracy(res.model, data.test) >= 0.95);

  const auto again = train(m, data.train, {20, 0.05, 16, 9});
  CHECK(again.model == res.model);

  CHECK_THROWS_AS(train(m, data.train, {0, 0.1, 16, 0}), std::invalid_argument);
  CHECK_THROWS_AS(train(m, data.train, {1, 0.1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(train(m, data.train, {1, 0.1, 16, 0, 1.0}), std::invalid_argument);
}

TEST_CASE("blobs stay in the unit box") {
  const auto data = make_blobs({3, 5, 100, 50, 0.3, 1});
  CHECK(data.train.size() == 100);
  CHECK(data.test.size() == 50);
  for (double v : data.train.inputs) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (int y : data.test.labels) CHECK((y >= 0 && y < 3));
}

TEST_CASE("zero budget leaves the input alone") {
  Rng rng(8);
  const auto m = toy_checks::random_model(rng);
  const auto x = toy_checks::random_input(rng, m.input_dim());
  CHECK(pgd_attack(m, x, 0, {0.0, 0.0, 5, true, 1}) == x);
  CHECK(fgsm_attack(m, x, 0, 0.0) == x);
}

TEST_CASE("attack arguments are checked") {
  const ToyModel m(2, {{2, Activation::Softmax, 1}}, {}, 0);
  const std::vector<double> x{0.5, 0.5};
  CHECK_THROWS_AS(pgd_attack(m, x, 0, {-0.1, 0.1, 1, false, 0}), std::invalid_argument);
  CHECK_THROWS_AS(pgd_attack(m, x, 0, {0.1, 0.0, 1, false, 0}), std::invalid_argument);
  CHECK_THROWS_AS(pgd_attack(m, x, 0, {0.1, 0.1, 0, false, 0}), std::invalid_argument);
}

TEST_CASE("attacks stay inside the ball and the box") {
  CHECK(toy_checks::pgd_feasibility_violations(1000, 21) == 0);
}

TEST_CASE("signed steps never lower a convex loss") {
  CHECK(toy_checks::pgd_monotone_violations(100, 10, 4) == 0);
}

TEST_CASE("fgsm is one full step") {
  const ToyModel m(2, {{2, Activation::Softmax, 1}}, {}, 7);
  const std::vector<double> x{0.5, 0.5};
  const auto g = m.loss_and_grads(x, 1, false);
  const auto adv = fgsm_attack(m, x, 1, 0.1);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(adv[i] == doctest::Approx(x[i] + (g.input[i] > 0 ? 0.1 : -0.1)));
}

TEST_CASE("toy evaluator on the fixture") {
  ToyEvaluator ev(small_toy());
  const auto res = ev.evaluate({1, fixture(), {0.0, 1.0}, 3, 0});
  REQUIRE(res.ok());
  CHECK(res.adversarial_accuracies[0] == res.clean_accuracy);
  CHECK(res.clean_accuracy > 0.5);
  CHECK(res.adversarial_accuracies[1] <= res.clean_accuracy);
  CHECK(std::abs(res.adversarial_accuracies[1] - 0.1) <= 0.15);

  const auto again = ev.evaluate({1, fixture(), {0.0, 1.0}, 3, 0});
  CHECK(again.clean_accuracy == res.clean_accuracy);
  CHECK(again.adversarial_accuracies == res.adversarial_accuracies);
}

TEST_CASE("adversarial accuracy falls along the epsilon grid") {
  const std::vector<double> grid{0.0, 0.01, 0.03, 0.1, 0.3};
  auto opts = small_toy();
  opts.workers = 5;
  ToyEvaluator ev(opts);
  std::vector<EvaluationRequest> reqs;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    reqs.push_back({static_cast<std::int64_t>(seed), fixture(), grid, 3, seed});
  const auto out = ev.evaluate_batch(reqs);
  std::vector<double> mean(grid.size(), 0.0);
  for (const auto& r : out) {
    REQUIRE(r.ok());
    for (std::size_t i = 0; i < grid.size(); ++i) mean[i] += r.adversarial_accuracies[i] / 5;
  }
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(mean[i] <= mean[i - 1]);
  CHECK(mean.back() < mean.front());
}

TEST_CASE("toy evaluator options are validated") {
  auto o = small_toy();
  o.pgd_steps = 0;
  CHECK_THROWS_AS(ToyEvaluator{o}, ConfigError);
  o = small_toy();
  o.workers = 0;
  CHECK_THROWS_AS(ToyEvaluator{o}, ConfigError);
}
