#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mgrpo/trainer.hpp"
#include "support/oracles.hpp"

using namespace mgrpo;

namespace {

double max_abs_diff(const TabularPolicy& a, const TabularPolicy& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

TrainConfig small_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.total_rollouts = 16;
  c.momentum_rollouts = 4;
  c.batch_size = 4;
  c.total_steps = 30;
  c.eval_interval = 10;
  c.eval_samples = 4;
  c.seed = 9;
  return c;
}

std::pair<TaskSet, TabularPolicy> small_env(std::uint64_t seed, bool shortcut = false) {
  EnvConfig env;
  env.num_prompts = 24;
  env.shortcut = shortcut;
  env.shortcut_entry = -1.0;
  env.shortcut_chain = 2.0;
  env.shortcut_confidence = 2.0;
  return generate_tasks(env, seed);
}

}  // namespace

TEST(TrainConfig, DefaultsAndDerivedCounts) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.total_rollouts, 32);
  EXPECT_EQ(c.momentum_rollouts, 8);
  EXPECT_EQ(c.current_rollouts(), 24);
  EXPECT_DOUBLE_EQ(c.momentum, 0.99);
  EXPECT_DOUBLE_EQ(c.train_temperature, 1.1);
  EXPECT_DOUBLE_EQ(c.eval_temperature, 0.8);
  EXPECT_DOUBLE_EQ(c.kl_coefficient, 0.005);
  EXPECT_DOUBLE_EQ(c.warmup_ratio, 0.1);
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_DOUBLE_EQ(c.effective_momentum_temperature(), 1.1);
  c.momentum_temperature = 0.7;
  EXPECT_DOUBLE_EQ(c.effective_momentum_temperature(), 0.7);

  c.mode = Mode::SrtBaseline;
  EXPECT_EQ(c.effective_momentum_rollouts(), 0);
  EXPECT_EQ(c.current_rollouts(), 32);
  EXPECT_FALSE(c.filter_active());
  c.mode = Mode::MgrpoNoFilter;
  EXPECT_FALSE(c.filter_active());
  c.mode = Mode::MgrpoIqr;
  EXPECT_TRUE(c.filter_active());
}

TEST(TrainConfig, ValidationNamesTheField) {
  auto expect_bad = [](auto mutate, const std::string& field) {
    TrainConfig c;
    mutate(c);
    try {
      c.validate();
      ADD_FAILURE() << "accepted bad " << field;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_bad([](TrainConfig& c) { c.total_rollouts = 0; }, "total_rollouts");
  expect_bad([](TrainConfig& c) { c.momentum_rollouts = 32; }, "momentum_rollouts");
  expect_bad([](TrainConfig& c) { c.momentum_rollouts = -1; }, "momentum_rollouts");
  expect_bad([](TrainConfig& c) { c.momentum = 1.0; }, "momentum");
  expect_bad([](TrainConfig& c) { c.train_temperature = 0.0; }, "train_temperature");
  expect_bad([](TrainConfig& c) { c.batch_size = 0; }, "batch_size");
  expect_bad([](TrainConfig& c) { c.total_steps = -1; }, "total_steps");
  expect_bad([](TrainConfig& c) { c.filter.k = -1; }, "filter.k");
  expect_bad([](TrainConfig& c) { c.eval_interval = 0; }, "eval_interval");
}

TEST(ModeNames, RoundTrip) {
  for (Mode m : {Mode::MgrpoIqr, Mode::MgrpoNoFilter, Mode::SrtBaseline}) {
    EXPECT_EQ(mode_from_string(to_string(m)), m);
  }
  EXPECT_EQ(to_string(Mode::SrtBaseline), "SRT_BASELINE");
  EXPECT_THROW(mode_from_string("GRPO"), std::invalid_argument);
}

TEST(LearningRate, CosineWarmup) {
  TrainConfig c;
  c.total_steps = 100;
  c.learning_rate = 0.05;
  EXPECT_EQ(lr_at(0, c), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(10, c), 0.05);
  EXPECT_NEAR(lr_at(5, c), 0.025, 1e-15);
  EXPECT_NEAR(lr_at(55, c), 0.025, 1e-12);
  EXPECT_NEAR(lr_at(55, c), 0.05 * 0.5 * (1 + std::cos(M_PI * 45 / 90)), 1e-15);
  EXPECT_NEAR(lr_at(100, c), 0.0, 1e-15);
  for (int s = 10; s < 100; ++s) EXPECT_GE(lr_at(s, c), lr_at(s + 1, c));
  c.schedule = Schedule::Constant;
  EXPECT_EQ(lr_at(0, c), 0.05);
  EXPECT_EQ(lr_at(77, c), 0.05);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  TrainConfig c;
  TabularPolicy params(1, 1, 3), grad(1, 1, 3);
  params.data()[0] = 0.7;
  OptimizerState opt(params.size());
  opt.first_moment[0] = 1.0;
  opt.second_moment[0] = 1.0;
  optimizer_step(params, grad, opt, 0.1, c);
  EXPECT_NEAR(opt.first_moment[0], 0.9, 1e-15);
  EXPECT_NEAR(opt.second_moment[0], 0.999, 1e-15);
  EXPECT_EQ(opt.step, 1);
  TabularPolicy fresh(1, 1, 3);
  fresh.data()[0] = 0.7;
  OptimizerState zero(fresh.size());
  optimizer_step(fresh, grad, zero, 0.1, c);
  EXPECT_EQ(fresh.data()[0], 0.7);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  TrainConfig c;
  for (double g : {3.0, -0.02, 250.0}) {
    TabularPolicy params(1, 1, 2), grad(1, 1, 2);
    grad.data()[0] = g;
    OptimizerState opt(params.size());
    optimizer_step(params, grad, opt, 0.01, c);
    EXPECT_NEAR(params.data()[0], 0.01 * g / (std::abs(g) + 1e-8), 1e-9);
    EXPECT_EQ(params.data()[1], 0.0);
  }
}

TEST(Optimizer, ClimbsConcaveQuadratic) {
  TrainConfig c;
  TabularPolicy x(1, 1, 2), grad(1, 1, 2);
  OptimizerState opt(x.size());
  for (int i = 0; i < 200; ++i) {
    grad.data()[0] = -2.0 * (x.data()[0] - 3.0);
    optimizer_step(x, grad, opt, 0.1, c);
  }
  EXPECT_LT(std::abs(x.data()[0] - 3.0), 0.05);
}

TEST(Optimizer, WeightDecayShrinks) {
  TrainConfig c;
  c.weight_decay = 0.1;
  TabularPolicy x(1, 1, 2), grad(1, 1, 2);
  x.data()[0] = 2.0;
  OptimizerState opt(x.size());
  optimizer_step(x, grad, opt, 0.5, c);
  EXPECT_NEAR(x.data()[0], 2.0 - 0.5 * 0.1 * 2.0, 1e-15);
}

TEST(Optimizer, RejectsNonFiniteGradient) {
  TrainConfig c;
  TabularPolicy x(1, 1, 2), grad(1, 1, 2);
  grad.data()[1] = std::nan("");
  OptimizerState opt(x.size());
  try {
    optimizer_step(x, grad, opt, 0.1, c);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
  EXPECT_THROW(optimizer_step(x, TabularPolicy(1, 1, 3), opt, 0.1, c), std::invalid_argument);
}

TEST(Objective, HandComputedSingleTrajectory) {
  TabularPolicy policy(1, 1, 2);
  policy.row(0, 0, policy.bos())[0] = 1.0;
  RolloutGroup group;
  group.prompt_id = 0;
  Trajectory traj;
  traj.tokens = {0};
  traj.answer = 0;
  group.trajectories = {traj};
  group.keep_mask = {true};
  group.scored = {0};
  group.advantages = {1.5};
  std::vector<RolloutGroup> groups{group};
  auto r = objective_and_gradient(policy, policy, groups, 0.0, 2.0);
  const double p = std::exp(0.5) / (std::exp(0.5) + 1);
  EXPECT_NEAR(r.objective, 1.5 * std::log(p), 1e-14);
  EXPECT_NEAR(r.gradient.row(0, 0, 2)[0], 1.5 * (1 - p) / 2.0, 1e-14);
  EXPECT_NEAR(r.gradient.row(0, 0, 2)[1], -1.5 * (1 - p) / 2.0, 1e-14);

  groups[0].degenerate = true;
  auto d = objective_and_gradient(policy, policy, groups, 0.0, 2.0);
  EXPECT_EQ(d.objective, 0.0);
  for (double g : d.gradient.data()) EXPECT_EQ(g, 0.0);
}

TEST(Objective, ZeroAdvantagesLeaveOnlyKl) {
  std::mt19937_64 rng(6);
  TabularPolicy current = oracle::random_policy(3, 3, 4, 1.0, rng);
  TabularPolicy reference = oracle::random_policy(3, 3, 4, 1.0, rng);
  auto groups = oracle::random_groups(current, 3, 5, 1.1, rng);
  for (auto& g : groups) std::fill(g.advantages.begin(), g.advantages.end(), 0.0);

  auto none = objective_and_gradient(current, reference, groups, 0.0, 1.1);
  EXPECT_EQ(none.objective, 0.0);
  for (double g : none.gradient.data()) EXPECT_EQ(g, 0.0);

  auto kl = objective_and_gradient(current, reference, groups, 0.005, 1.1);
  EXPECT_NEAR(kl.objective, -0.005 * kl.mean_kl, 1e-15);
  EXPECT_GT(kl.mean_kl, 0.0);
  double expected_kl = 0;
  int count = 0;
  for (const auto& g : groups)
    for (int i : g.scored) {
      expected_kl += kl_to_reference(current, reference, g.trajectories[i], 1.1);
      ++count;
    }
  EXPECT_NEAR(kl.mean_kl, expected_kl / count, 1e-14);
  EXPECT_LT(oracle::check_gradient(current, reference, groups, 0.005, 1.1).relative_error, 1e-6);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const int vocab = 2 + trial % 3;
    const int seq_len = 1 + trial % 3;
    const bool shared = trial % 2 == 1;
    TabularPolicy current = oracle::random_policy(2, seq_len, vocab, 1.0, rng, shared);
    TabularPolicy reference = oracle::random_policy(2, seq_len, vocab, 1.0, rng, shared);
    auto groups = oracle::random_groups(current, 2, 4, 1.1, rng);
    for (double beta : {0.0, 0.005, 0.5}) {
      auto check = oracle::check_gradient(current, reference, groups, beta, 1.1);
      EXPECT_LT(check.relative_error, 1e-6) << "trial " << trial << " beta " << beta;
      EXPECT_LT(check.max_entry_error, 1e-4) << "trial " << trial << " beta " << beta;
    }
  }
}

TEST(Objective, SharedRowGradientIsSumOverPrompts) {
  std::mt19937_64 rng(8);
  TabularPolicy current = oracle::random_policy(3, 2, 3, 1.0, rng, true);
  auto groups = oracle::random_groups(current, 3, 4, 1.0, rng);
  auto r = objective_and_gradient(current, current, groups, 0.0, 1.0);
  for (int v = 0; v < 3; ++v) {
    double sum = 0;
    for (int p = 0; p < 3; ++p) sum += r.gradient.row(p, 0, current.bos())[v];
    EXPECT_NEAR(r.gradient.shared_row()[v], sum, 1e-14);
  }
}

TEST(Objective, ShapeErrors) {
  TabularPolicy a(1, 2, 3), b(1, 2, 4);
  std::vector<RolloutGroup> none;
  EXPECT_THROW(objective_and_gradient(a, b, none, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(objective_and_gradient(a, a, none, 0.0, 0.0), std::domain_error);
}

TEST(ClippedSurrogate, OnPolicyEqualsUnclipped) {
  std::mt19937_64 rng(9);
  TabularPolicy current = oracle::random_policy(2, 3, 4, 1.0, rng);
  auto groups = oracle::random_groups(current, 3, 6, 1.1, rng);
  auto plain = objective_and_gradient(current, current, groups, 0.0, 1.1);
  auto clipped = clipped_surrogate_and_gradient(current, groups, 0.2, 1.1);
  for (std::size_t i = 0; i < current.size(); ++i) {
    EXPECT_NEAR(clipped.gradient.data()[i], plain.gradient.data()[i], 1e-12);
  }
}

TEST(ClippedSurrogate, ClipsStaleRatios) {
  // Behaviour policy was uniform over 3 tokens; the current one strongly
  // prefers token 0, so every positive-advantage ratio exceeds 1 + eps.
  RolloutGroup group;
  for (int i = 0; i < 4; ++i) {
    Trajectory t;
    t.tokens = {0};
    t.answer = 0;
    t.step_logprobs = {std::log(1.0 / 3)};
    group.trajectories.push_back(t);
    group.keep_mask.push_back(true);
    group.scored.push_back(i);
    group.advantages.push_back(1.0);
  }
  std::vector<RolloutGroup> groups{group};
  TabularPolicy moved(1, 1, 3);
  moved.row(0, 0, moved.bos())[0] = 5.0;
  auto clipped = clipped_surrogate_and_gradient(moved, groups, 0.2, 1.0);
  for (double g : clipped.gradient.data()) EXPECT_NEAR(g, 0.0, 1e-12);
  EXPECT_NEAR(clipped.objective, 4 * 1.2, 1e-12);

  TabularPolicy fresh(1, 1, 3);
  auto live = clipped_surrogate_and_gradient(fresh, groups, 0.2, 1.0);
  EXPECT_NEAR(live.objective, 4.0, 1e-12);
  EXPECT_GT(live.gradient.row(0, 0, fresh.bos())[0], 0.0);
  EXPECT_THROW(clipped_surrogate_and_gradient(moved, groups, -0.1, 1.0), std::domain_error);
}

TEST(Batching, EachEpochIsAPermutation) {
  TrainConfig c;
  c.batch_size = 8;
  const int prompts = 24;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::multiset<int> seen;
    for (int s = epoch * 3 + 1; s <= epoch * 3 + 3; ++s) {
      for (int p : batch_for_step(s, prompts, c)) seen.insert(p);
    }
    ASSERT_EQ(seen.size(), 24u);
    for (int p = 0; p < prompts; ++p) EXPECT_EQ(seen.count(p), 1u);
  }
  EXPECT_EQ(batch_for_step(5, prompts, c), batch_for_step(5, prompts, c));
  EXPECT_THROW(batch_for_step(0, prompts, c), std::invalid_argument);
}

TEST(BuildGroup, PoolLayoutAndScoring) {
  auto [tasks, initial] = small_env(3);
  TrainState state = TrainState::from_initial(initial);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  RolloutGroup g = build_group(state, 5, 1, c);
  ASSERT_EQ(g.trajectories.size(), 16u);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(g.trajectories[i].origin, Origin::Current);
  for (int i = 12; i < 16; ++i) EXPECT_EQ(g.trajectories[i].origin, Origin::Momentum);
  ASSERT_TRUE(g.pseudo_answer.has_value());

  std::vector<int> kept_answers;
  std::vector<double> entropies;
  for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
    entropies.push_back(g.trajectories[i].entropy);
    if (g.keep_mask[i]) kept_answers.push_back(g.trajectories[i].answer);
  }
  EXPECT_EQ(g.keep_mask, oracle::iqr_keep(entropies, c.filter.k, c.filter.min_pool_for_filter));
  EXPECT_EQ(*g.pseudo_answer, oracle::majority_vote(kept_answers));
  for (std::size_t j = 0; j < g.scored.size(); ++j) {
    const auto& t = g.trajectories[g.scored[j]];
    EXPECT_EQ(t.origin, Origin::Current);
    EXPECT_TRUE(g.keep_mask[g.scored[j]]);
    EXPECT_EQ(g.rewards[j], t.answer == *g.pseudo_answer ? 1.0 : 0.0);
  }
  auto adv = oracle::advantages(g.rewards);
  EXPECT_EQ(g.degenerate, adv.degenerate);
  for (std::size_t j = 0; j < g.advantages.size(); ++j) EXPECT_NEAR(g.advantages[j], adv.values[j], 1e-12);
}

TEST(BuildGroup, CurrentRolloutsArePrefixAcrossModes) {
  auto [tasks, initial] = small_env(4);
  TrainState state = TrainState::from_initial(initial);
  TrainConfig iqr = small_config(Mode::MgrpoIqr);
  TrainConfig srt = small_config(Mode::SrtBaseline);
  srt.total_rollouts = iqr.current_rollouts();
  auto a = build_group(state, 2, 3, iqr);
  auto b = build_group(state, 2, 3, srt);
  ASSERT_EQ(b.trajectories.size(), static_cast<std::size_t>(iqr.current_rollouts()));
  for (std::size_t i = 0; i < b.trajectories.size(); ++i) EXPECT_EQ(a.trajectories[i], b.trajectories[i]);
}

TEST(TrainStep, UnanimousPromptIsDegenerate) {
  TabularPolicy initial(2, 2, 3);
  for (int p = 0; p < 2; ++p)
    for (int t = 0; t < 2; ++t)
      for (int prev = 0; prev <= 3; ++prev) initial.row(p, t, prev)[1] = 1e9;
  TrainState state = TrainState::from_initial(initial);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  c.kl_coefficient = 0.0;
  std::vector<int> batch{0};
  StepMetrics m = train_step(state, batch, c);
  EXPECT_EQ(*m.degenerate_group_fraction, 1.0);
  EXPECT_EQ(*m.mean_self_reward, 1.0);
  EXPECT_FALSE(m.skipped);
  EXPECT_EQ(state.current, initial);
  EXPECT_EQ(state.step, 1);
}

TEST(TrainStep, EmptyScoredPoolsSkipTheStep) {
  // Confident current policy, uniform momentum: the lone current rollout is a
  // low-entropy outlier in every pool, so nothing can be scored.
  TabularPolicy confident(1, 2, 4);
  for (int t = 0; t < 2; ++t)
    for (int prev = 0; prev <= 4; ++prev) confident.row(0, t, prev)[2] = 1e9;
  TrainState state = TrainState::from_initial(confident);
  state.momentum = TabularPolicy(1, 2, 4);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  c.total_rollouts = 5;
  c.momentum_rollouts = 4;
  std::vector<int> batch{0};
  StepMetrics m = train_step(state, batch, c);
  EXPECT_TRUE(m.skipped);
  EXPECT_FALSE(m.mean_self_reward.has_value());
  EXPECT_EQ(*m.filtered_fraction_current, 1.0);
  EXPECT_EQ(state.current, confident);
  EXPECT_EQ(state.step, 1);
}

TEST(TrainStep, MomentumTrailsCurrent) {
  auto [tasks, initial] = small_env(5, true);
  for (double m : {0.0, 0.5, 0.99}) {
    TrainConfig c = small_config(Mode::MgrpoIqr);
    c.momentum = m;
    c.learning_rate = 0.3;
    TrainState state = TrainState::from_initial(initial);
    for (int s = 1; s <= 15; ++s) {
      TabularPolicy before = state.momentum;
      train_step(state, batch_for_step(s, tasks.num_prompts, c), c);
      const double moved = max_abs_diff(state.momentum, before);
      const double gap = max_abs_diff(before, state.current);
      EXPECT_LE(moved, (1 - m) * gap + 1e-12);
    }
  }
}

TEST(TrainStep, NoFilterWithoutMomentumRolloutsEqualsSrt) {
  auto [tasks, initial] = small_env(6);
  TrainConfig srt = small_config(Mode::SrtBaseline);
  TrainConfig reduced = small_config(Mode::MgrpoNoFilter);
  reduced.momentum_rollouts = 0;
  reduced.momentum = 0.37;
  TrainState a = TrainState::from_initial(initial);
  TrainState b = TrainState::from_initial(initial);
  for (int s = 1; s <= 20; ++s) {
    auto batch = batch_for_step(s, tasks.num_prompts, srt);
    StepMetrics ma = train_step(a, batch, srt);
    StepMetrics mb = train_step(b, batch, reduced);
    ASSERT_EQ(a.current, b.current) << "step " << s;
    EXPECT_EQ(ma.mean_self_reward, mb.mean_self_reward);
    EXPECT_EQ(ma.objective_value, mb.objective_value);
  }
}

TEST(TrainStep, SrtKeepsMomentumFrozen) {
  auto [tasks, initial] = small_env(7);
  TrainConfig c = small_config(Mode::SrtBaseline);
  TrainState state = TrainState::from_initial(initial);
  for (int s = 1; s <= 5; ++s) train_step(state, batch_for_step(s, tasks.num_prompts, c), c);
  EXPECT_EQ(state.momentum, initial);
  EXPECT_NE(state.current, initial);
  EXPECT_EQ(state.reference, initial);
}

TEST(RunTraining, ZeroStepsGivesInitialRowOnly) {
  auto [tasks, initial] = small_env(8);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  c.total_steps = 0;
  auto log = run_training(c, tasks, initial);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].step, 0);
  EXPECT_TRUE(log[0].true_accuracy.has_value());
  EXPECT_FALSE(log[0].mean_self_reward.has_value());
}

TEST(RunTraining, RowLayout) {
  auto [tasks, initial] = small_env(9);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  c.total_steps = 25;
  int rows = 0, checkpoints = 0;
  RunHooks hooks;
  hooks.on_row = [&](const StepMetrics& r) { EXPECT_EQ(r.step, rows++); };
  hooks.on_checkpoint = [&](const TrainState&) { ++checkpoints; };
  c.checkpoint_interval = 10;
  auto log = run_training(c, tasks, initial, hooks);
  ASSERT_EQ(log.size(), 26u);
  EXPECT_EQ(rows, 26);
  EXPECT_EQ(checkpoints, 3);
  for (const auto& r : log) {
    const bool eval = r.step % 10 == 0 || r.step == 25;
    EXPECT_EQ(r.true_accuracy.has_value(), eval) << r.step;
    if (r.true_accuracy) {
      EXPECT_GE(*r.true_accuracy, 0.0);
      EXPECT_LE(*r.true_accuracy, 1.0);
    }
  }
}

TEST(RunTraining, DeterministicAcrossRunsAndThreads) {
  auto [tasks, initial] = small_env(10, true);
  for (Mode mode : {Mode::MgrpoIqr, Mode::MgrpoNoFilter, Mode::SrtBaseline}) {
    TrainConfig c = small_config(mode);
    auto first = run_training(c, tasks, initial);
    auto second = run_training(c, tasks, initial);
    c.threads = 4;
    auto parallel = run_training(c, tasks, initial);
    EXPECT_EQ(first, second);
    EXPECT_EQ(first, parallel);
  }
}

TEST(RunTraining, SeedChangesTheRun) {
  auto [tasks, initial] = small_env(11);
  TrainConfig c = small_config(Mode::MgrpoIqr);
  auto a = run_training(c, tasks, initial);
  c.seed += 1;
  auto b = run_training(c, tasks, initial);
  EXPECT_NE(a, b);
}

TEST(RunTraining, ErrorsCarryTheStep) {
  auto [tasks, initial] = small_env(12);
  TrainConfig c = small_config(Mode::SrtBaseline);
  c.learning_rate = 1e308;
  c.schedule = Schedule::Constant;
  c.total_steps = 200;
  try {
    run_training(c, tasks, initial);
    FAIL() << "expected divergence";
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("step ", 0), 0u) << e.what();
  }
  EXPECT_THROW(run_training(c, tasks, TabularPolicy(3, 4, 8)), std::invalid_argument);
}
