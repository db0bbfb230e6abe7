#include <gtest/gtest.h>

#include "support.hpp"
#include "wwtp/env.hpp"

namespace wwtp {
namespace {

using testing::small_env;

TEST(Scheduler, E1ConsecutiveFixedLength) {
  EpisodeScheduler s({SchedulerMode::E1, 288, 72, 576}, 10'000, 1);
  Episode prev = s.next();
  EXPECT_EQ(prev.start, 0);
  for (int i = 0; i < 100; ++i) {
    const Episode ep = s.next();
    EXPECT_EQ(ep.length, 288);
    if (prev.start + 2 * 288 <= 10'000) {
      EXPECT_EQ(ep.start, prev.start + 288);
    } else {
      EXPECT_EQ(ep.start, 0);  // wrapped
    }
    prev = ep;
  }
}

TEST(Scheduler, E2ConsecutiveRandomLength) {
  EpisodeScheduler s({SchedulerMode::E2, 288, 72, 576}, 1'000'000, 2);
  Episode prev = s.next();
  for (int i = 0; i < 1000; ++i) {
    const Episode ep = s.next();
    EXPECT_EQ(ep.start, prev.start + prev.length);
    EXPECT_GE(ep.length, 72);
    EXPECT_LE(ep.length, 576);
    prev = ep;
  }
}

TEST(Scheduler, E3RandomStartsReproducible) {
  EpisodeScheduler a({SchedulerMode::E3, 288, 72, 576}, 10'000, 5);
  EpisodeScheduler b({SchedulerMode::E3, 288, 72, 576}, 10'000, 5);
  std::vector<std::int64_t> starts;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next(), y = b.next();
    EXPECT_EQ(x.start, y.start);
    EXPECT_EQ(x.length, 288);
    EXPECT_GE(x.start, 0);
    EXPECT_LE(x.start + x.length, 10'000);
    starts.push_back(x.start / 971);  // ten bins of width 971 over [0, 9712]
  }
  EXPECT_TRUE(testing::chi_square_uniform(starts, 0, 9).pass());
}

TEST(Scheduler, E4LengthsUniformOverRange) {
  EpisodeScheduler s({SchedulerMode::E4, 288, 72, 576}, 10'000, 9);
  std::vector<std::int64_t> bins;
  for (int i = 0; i < 1000; ++i) {
    const auto ep = s.next();
    ASSERT_GE(ep.length, 72);
    ASSERT_LE(ep.length, 576);
    ASSERT_LE(ep.start + ep.length, 10'000);
    bins.push_back((ep.length - 72) / 101);  // five bins of 101 lengths each
  }
  const auto chi = testing::chi_square_uniform(bins, 0, 4);
  EXPECT_TRUE(chi.pass()) << chi.statistic << " > " << chi.critical;
}

TEST(Scheduler, RejectsInvalidRanges) {
  EXPECT_THROW(EpisodeScheduler({SchedulerMode::E4, 288, 600, 500}, 10'000, 1), ConfigError);
  EXPECT_THROW(EpisodeScheduler({SchedulerMode::E4, 288, 72, 576}, 100, 1), ConfigError);
  EXPECT_THROW(EpisodeScheduler({SchedulerMode::E1, 0, 72, 576}, 10'000, 1), ConfigError);
}

TEST(Normalize, EndpointsMidpointAndClipping) {
  NormalizationBounds b{{0.0, -1.0}, {2.0, 1.0}};
  const std::vector<double> raw{0.0, 1.0, 0.7};
  auto n = normalize(raw, b);
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[1], 1.0);
  EXPECT_EQ(n[2], 0.7);  // passes through
  n = normalize(std::vector<double>{1.0, 0.0}, b);
  EXPECT_EQ(n[0], 0.5);
  EXPECT_EQ(n[1], 0.5);
  n = normalize(std::vector<double>{5.0, -3.0}, b);
  EXPECT_EQ(n[0], 1.0);
  EXPECT_EQ(n[1], 0.0);
}

TEST(PlantEnv, ExactlyScheduledStepsThenError) {
  PlantEnv env(small_env(SchedulerMode::E1, 30), 1);
  EXPECT_THROW(env.step({}), UsageError);
  env.reset();
  for (int i = 1; i <= 30; ++i) {
    const auto r = env.step({100.0, 10.0});
    EXPECT_EQ(r.done, i == 30);
  }
  EXPECT_THROW(env.step({100.0, 10.0}), UsageError);
}

TEST(PlantEnv, DeterministicForSeedAndActions) {
  const auto actions = testing::random_actions(200, 4);
  auto rollout = [&] {
    PlantEnv env(small_env(SchedulerMode::E4), 77);
    std::vector<double> trace;
    env.reset();
    for (const auto& a : actions) {
      auto r = env.step(a);
      trace.push_back(r.reward);
      trace.insert(trace.end(), r.observation.begin(), r.observation.end());
      if (r.done) env.reset();
    }
    return trace;
  };
  EXPECT_EQ(rollout(), rollout());
}

TEST(PlantEnv, ZeroDoseFromEmptyPlantGivesZeroReward) {
  EnvConfig cfg = small_env();
  cfg.exogenous.baseline = {0.0, 0.0, 0.0};
  cfg.exogenous.diurnal_amp = cfg.exogenous.weekly_amp = {0.0, 0.0, 0.0};
  cfg.exogenous.noise_amplitude = 0.0;
  PlantEnv env(cfg, 1);
  env.reset();
  EXPECT_EQ(env.state().c_p, 0.0);
  const auto r = env.step({0.0, 0.0});
  EXPECT_EQ(r.reward, 0.0);
}

TEST(PlantEnv, RewardMatchesRecomputationFromInfo) {
  PlantEnv env(small_env(SchedulerMode::E2), 3);
  env.reset();
  for (const auto& a : testing::random_actions(500, 8)) {
    const auto r = env.step(a);
    PlantState s;
    s.c_p = r.info.c_p;
    s.q_w = r.info.q_w;
    EXPECT_EQ(r.reward, reward(s, r.info.applied, env.config().reward).reward);
    EXPECT_EQ(r.observation.size(), PlantEnv::observation_dim());
    for (std::size_t i = 0; i < ObservationLayout::kTime; ++i) {
      EXPECT_GE(r.observation[i], 0.0);
      EXPECT_LE(r.observation[i], 1.0);
    }
    if (r.done) env.reset();
  }
}

TEST(PlantEnv, ClipsOutOfRangeActionsAndCounts) {
  PlantEnv env(small_env(), 1);
  env.reset();
  auto r = env.step({500.0, -5.0});
  EXPECT_TRUE(r.info.clipped);
  EXPECT_EQ(r.info.applied, (Action{300.0, 0.0}));
  EXPECT_EQ(r.info.clip_events, 1);
  r = env.step({10.0, 10.0});
  EXPECT_FALSE(r.info.clipped);
  EXPECT_EQ(r.info.clip_events, 1);
  EXPECT_THROW(env.step({NAN, 0.0}), DomainError);
}

TEST(PlantEnv, ResetStartsAtScheduledIndex) {
  PlantEnv env(small_env(SchedulerMode::E1, 40), 1);
  env.reset();
  EXPECT_EQ(env.state().t, 0);
  for (int i = 0; i < 40; ++i) env.step({});
  env.reset();
  EXPECT_EQ(env.state().t, 40);
  EXPECT_EQ(env.state().x_e, env.exogenous().at(40));
}

TEST(EnvConfig, RejectsInconsistentTiming) {
  EnvConfig cfg;
  cfg.reward.t_dose = 5.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace wwtp
