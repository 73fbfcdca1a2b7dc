#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sgr/errors.hpp"
#include "sgr/grpo.hpp"
#include "support.hpp"

using namespace sgr;
using namespace sgr::grpo;

namespace {

SyntheticTaskConfig small_task() {
  SyntheticTaskConfig t;
  t.vocab_size = 20;
  t.num_contexts = 300;
  t.head_top_k = 5;
  return t;
}

GrpoConfig small_run() {
  GrpoConfig c;
  c.iterations = 20;
  c.queries_per_iteration = 16;
  c.eval_interval = 10;
  c.warm_start_epochs = 3;
  return c;
}

}  // namespace

TEST_SUITE("grpo") {
  TEST_CASE("advantage examples") {
    auto a = normalize_advantages(std::vector<double>{2, 1, 0, 1});
    CHECK(a[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.0));
    CHECK(a[2] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
    CHECK(normalize_advantages(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});
    auto two = normalize_advantages(std::vector<double>{0, 1});
    CHECK(two[0] == doctest::Approx(-1.0));
    CHECK(two[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(normalize_advantages(std::vector<double>{1}), std::invalid_argument);
  }

  TEST_CASE("normalized advantages have zero mean and unit spread") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 500; ++t) {
      std::vector<double> r(2 + rng() % 15);
      for (auto& x : r) x = std::normal_distribution<double>(0, 3)(rng);
      auto a = normalize_advantages(r);
      double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
      double var = 0;
      for (double x : a) var += (x - mean) * (x - mean);
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(std::sqrt(var / a.size()) - 1.0) < 1e-9);
    }
  }

  TEST_CASE("group sampling") {
    auto policy = ToyPolicy::random(6, 2, 1, 0.5, 0.5);
    std::vector<double> x{0.3, -1.0};
    auto g = sample_group(policy, x, 8, 99);
    CHECK(g.candidates.size() == 8);
    auto again = sample_group(policy, x, 8, 99);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(g.candidates[i].labels == again.candidates[i].labels);
      CHECK(g.candidates[i].old_log_prob == again.candidates[i].old_log_prob);
      CHECK(g.candidates[i].old_log_prob == doctest::Approx(policy.log_prob(g.candidates[i].labels, x)));
    }
    auto silent = ToyPolicy::random(6, 2, 1, 0.0, 0.5);
    for (std::size_t a = 0; a < 6; ++a) silent.bias(a) = -800.0;
    auto empty = sample_group(silent, x, 8, 5);
    for (const auto& c : empty.candidates) {
      CHECK(std::count(c.labels.begin(), c.labels.end(), 1) == 0);
      CHECK(c.old_log_prob == empty.candidates[0].old_log_prob);
    }
  }

  TEST_CASE("loss at identical policies") {
    auto policy = ToyPolicy::random(5, 3, 2, 0.5, 0.3);
    std::vector<double> x{1.0, 0.5, -0.2};
    auto g = sample_group(policy, x, 8, 3);
    g.advantages = normalize_advantages(std::vector<double>{1, 2, 3, 4, 0, 0, 1, 5});
    GrpoConfig cfg;
    auto r = grpo_loss(policy, policy, policy, g, x, cfg);
    CHECK(r.kl == doctest::Approx(0.0));
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.clip_fraction == 0.0);

    cfg.kl_beta = 0.0;
    g.advantages.assign(8, 0.0);
    auto flat = grpo_loss(policy, policy, policy, g, x, cfg);
    CHECK(flat.loss == 0.0);
    for (double d : flat.gradient) CHECK(d == 0.0);
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 25; ++t) {
      auto inst = sgr::testing::random_grad_instance(rng);
      CHECK(sgr::testing::gradient_check(inst) < 1e-4);
    }
  }

  TEST_CASE("bernoulli kl") {
    std::vector<double> z{0.3, -2.0}, same{0.3, -2.0}, other{1.0, 0.0};
    CHECK(bernoulli_kl(z, same) == doctest::Approx(0.0));
    double p = 1 / (1 + std::exp(-0.3)), q = 1 / (1 + std::exp(-1.0));
    double p2 = 1 / (1 + std::exp(2.0)), q2 = 0.5;
    double expected = p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q)) + p2 * std::log(p2 / q2) +
                      (1 - p2) * std::log((1 - p2) / (1 - q2));
    CHECK(bernoulli_kl(z, other) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::isfinite(bernoulli_kl(std::vector<double>{800}, std::vector<double>{-800})));
  }

  TEST_CASE("non-finite loss raises a divergence error") {
    auto policy = ToyPolicy::random(3, 1, 2, 0.5, 0.5);
    std::vector<double> x{1.0};
    auto g = sample_group(policy, x, 4, 1);
    g.advantages = {1, -1, 1, -1};
    auto broken = policy;
    broken.bias(0) = std::nan("");
    CHECK_THROWS_AS(grpo_loss(broken, policy, policy, g, x, GrpoConfig{}), DivergenceError);
  }

  TEST_CASE("warm start on a two-label separable task") {
    SyntheticTaskConfig tc;
    tc.vocab_size = 2;
    tc.feature_dim = 2;
    tc.num_contexts = 400;
    tc.head_top_k = 1;
    SyntheticTask task(tc);
    auto start = ToyPolicy::random(2, 2, 3, 0.01, 0.5);
    auto sft = sft_warm_start(start, task, 200, 1.0);
    // Exact match under the most probable of the four subsets.
    std::size_t exact = 0;
    for (std::size_t c = 0; c < task.num_sft(); ++c) {
      auto x = task.context(c);
      LabelMask best;
      double best_lp = -1e300;
      for (int m = 0; m < 4; ++m) {
        LabelMask mask{static_cast<std::uint8_t>(m & 1), static_cast<std::uint8_t>((m >> 1) & 1)};
        double lp = sft.policy.log_prob(mask, x);
        if (lp > best_lp) {
          best_lp = lp;
          best = mask;
        }
      }
      exact += best == task.gold(c);
      CHECK(best == greedy_labels(sft.policy, x));
    }
    CHECK(static_cast<double>(exact) / task.num_sft() >= 0.95);
    for (std::size_t e = 1; e < sft.log_likelihood.size(); ++e) {
      CHECK(sft.log_likelihood[e] >= sft.log_likelihood[e - 1] - 1e-12);
    }
    CHECK(sft_warm_start(start, task, 0, 1.0).policy == start);
    CHECK(sft_warm_start(start, task, 5, 0.0).policy == start);
  }

  TEST_CASE("synthetic task structure") {
    SyntheticTask task(small_task());
    CHECK(task.num_sft() < task.num_train());
    CHECK(task.num_train() < task.num_contexts());
    const auto& m = task.marginals();
    for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] < m[i - 1]);
    CHECK(task.vocabulary().size() <= task.num_labels());
    SyntheticTask again(small_task());
    for (std::size_t c = 0; c < task.num_contexts(); c += 37) CHECK(task.gold(c) == again.gold(c));
    auto bad = small_task();
    bad.heldout_fraction = 1.5;
    CHECK_THROWS(SyntheticTask{bad});
  }

  TEST_CASE("training is seed deterministic and independent of jobs") {
    SyntheticTask task(small_task());
    auto cfg = small_run();
    auto a = train(cfg, task, RewardMode::combined);
    cfg.jobs = 4;
    auto b = train(cfg, task, RewardMode::combined);
    REQUIRE(a.trace.size() == cfg.iterations + 1);
    CHECK(a.policy == b.policy);
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(trace_line(a.trace[i]) == trace_line(b.trace[i]));
    CHECK(a.trace.front().heldout.has_value());
    CHECK(a.trace.back().heldout.has_value());
  }

  TEST_CASE("stronger kl keeps the policy nearer the reference") {
    SyntheticTask task(small_task());
    auto cfg = small_run();
    cfg.iterations = 30;
    cfg.learning_rate = 1.0;
    double last = 1e300;
    for (double beta : {0.0, 0.1, 0.4, 1.6}) {
      cfg.kl_beta = beta;
      auto r = train(cfg, task, RewardMode::combined);
      double d = parameter_distance(r.policy, r.reference);
      CAPTURE(beta);
      CHECK(d < last);
      last = d;
    }
  }

  TEST_CASE("mode weights and parsing") {
    rewards::RewardWeights base;
    CHECK(mode_weights(RewardMode::f1_only, base).gamma == 0.0);
    CHECK(mode_weights(RewardMode::word_only, base).alpha == 0.0);
    CHECK(mode_weights(RewardMode::combined, base).alpha == base.alpha);
    for (auto m : {RewardMode::f1_only, RewardMode::word_only, RewardMode::combined}) {
      CHECK(parse_reward_mode(to_string(m)) == m);
    }
    CHECK(parse_optimizer("adam") == Optimizer::adam);
    CHECK_FALSE(parse_optimizer("rmsprop").has_value());
  }

  TEST_CASE("config files") {
    GrpoConfig cfg;
    SyntheticTaskConfig task;
    std::stringstream in("# comment\niterations = 7\ngroup_size=4\nvocab_size = 30  # trailing\noptimizer = adam\n");
    apply_config(in, cfg, task);
    CHECK(cfg.iterations == 7);
    CHECK(cfg.group_size == 4);
    CHECK(task.vocab_size == 30);
    CHECK(cfg.optimizer == Optimizer::adam);
    std::stringstream unknown("warp = 9\n");
    CHECK_THROWS_AS(apply_config(unknown, cfg, task), DataError);
    GrpoConfig invalid;
    invalid.group_size = 1;
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
  }
}
