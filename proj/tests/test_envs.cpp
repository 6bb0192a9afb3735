#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tdp/envs/dataset.hpp"
#include "tdp/envs/dataset_io.hpp"
#include "tdp/envs/point_mass.hpp"

namespace tdp {
namespace {

TEST(PointMass, ZeroActionFromRestStaysPut) {
  const auto env = point_reach_env();
  const Vec s{{0.5, -1.0, 0.0, 0.0}};
  const auto r = env.step(s, Vec::Zero(2));
  EXPECT_EQ(r.next, s);
}

TEST(PointMass, ConstantPushFollowsKinematics) {
  const auto env = line_world_env();
  Vec s = Vec::Zero(2);
  for (int n = 1; n <= 15; ++n) {
    s = env.step(s, Vec::Ones(1)).next;
    // Semi-implicit Euler: v_n = n a dt, x_n = dt^2 a n (n + 1) / 2.
    EXPECT_NEAR(s[0], 0.01 * n * (n + 1) / 2.0, 1e-12);
    EXPECT_NEAR(s[1], 0.1 * n, 1e-12);
  }
}

TEST(PointMass, VelocityIsClipped) {
  const auto env = line_world_env();
  Vec s = Vec::Zero(2);
  for (int n = 0; n < 40; ++n) s = env.step(s, Vec::Ones(1)).next;
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  const auto r = env.step(Vec{{0.0, -1.95}}, -Vec::Ones(1));
  EXPECT_DOUBLE_EQ(r.next[1], -2.0);
}

TEST(PointMass, ActionsOutsideTheBoxAreClipped) {
  const auto env = point_reach_env();
  const Vec s = Vec::Zero(4);
  EXPECT_EQ(env.step(s, Vec{{5.0, -7.0}}).next, env.step(s, Vec{{1.0, -1.0}}).next);
}

TEST(PointMass, RewardIsZeroOnlyAtGoal) {
  const auto env = point_reach_env();
  EXPECT_EQ(env.reward(Vec::Zero(4)), 0.0);
  EXPECT_LT(env.reward(Vec{{1e-6, 0.0, 0.0, 0.0}}), 0.0);
  EXPECT_DOUBLE_EQ(env.reward(Vec{{3.0, 4.0, 9.0, 9.0}}), -5.0);
}

TEST(PointMass, ReplayReproducesStatesExactly) {
  const auto env = point_reach_env();
  NoiseStream rng(1);
  const auto tr = rollout_behaviour(env, Behaviour::random, rng);
  Vec s = tr.states.col(0);
  for (int t = 0; t + 1 < tr.length(); ++t) {
    s = env.step(s, tr.actions.col(t)).next;
    ASSERT_EQ(s, Vec(tr.states.col(t + 1)));
  }
}

TEST(PointMass, BadSpecsAreRejected) {
  auto sp = line_world_spec();
  sp.state_dim = 3;
  EXPECT_THROW(PointMassEnv{sp}, ConfigError);
  EXPECT_THROW(make_env("cartpole"), ConfigError);
}

TEST(Dataset, TiersAreOrderedByReturn) {
  const auto env = point_reach_env();
  auto stats = [&](Tier t) {
    const auto ds = gen_dataset(env, t, 100, 2);
    double m = 0.0, m2 = 0.0;
    for (const auto& tr : ds.trajectories) {
      m += tr.rewards.sum();
      m2 += tr.rewards.sum() * tr.rewards.sum();
    }
    m /= 100.0;
    const double se = std::sqrt((m2 / 100.0 - m * m) / 99.0);
    return std::pair{m, se};
  };
  const auto [e, se_e] = stats(Tier::expert);
  const auto [md, se_m] = stats(Tier::medium);
  const auto [mx, se_x] = stats(Tier::mixed);
  EXPECT_GT(e - md, 3.0 * std::hypot(se_e, se_m));
  EXPECT_GT(md - mx, 3.0 * std::hypot(se_m, se_x));
}

TEST(Dataset, SameSeedSameBytes) {
  const auto env = line_world_env();
  std::ostringstream a, b;
  write_dataset(a, gen_dataset(env, Tier::mixed, 5, 3));
  write_dataset(b, gen_dataset(env, Tier::mixed, 5, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Dataset, NormalisedStatesHaveZeroMean) {
  const auto env = point_reach_env();
  const auto ds = gen_dataset(env, Tier::medium, 30, 4);
  Vec sum = Vec::Zero(4);
  long n = 0;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Mat w = ds.window(i, 0, ds.trajectories[i].length(), ArrayMode::state_only);
    sum += w.rowwise().sum();
    n += w.cols();
  }
  EXPECT_LT((sum / static_cast<double>(n)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Dataset, NormalisationRoundTrips) {
  const auto env = point_reach_env();
  const auto ds = gen_dataset(env, Tier::expert, 10, 5);
  const Vec s{{0.3, -1.7, 0.2, 1.1}};
  EXPECT_LT((ds.stats.denormalize_state(ds.stats.normalize_state(s)) - s).cwiseAbs().maxCoeff(), 1e-9);
  const Vec a{{0.4, -0.9}};
  EXPECT_LT((ds.stats.denormalize_action(ds.stats.normalize_action(a)) - a).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dataset, DenormalisedActionsAreClipped) {
  const auto env = point_reach_env();
  const auto ds = gen_dataset(env, Tier::expert, 10, 6);
  const Vec out = ds.stats.denormalize_action(Vec{{1e3, -1e3}});
  EXPECT_EQ(out, (Vec{{1.0, -1.0}}));
}

TEST(Dataset, ConstantDataIsRejected) {
  const auto env = line_world_env();
  Trajectory t;
  t.states = Mat::Zero(2, 4);
  t.actions = Mat::Ones(1, 4);
  t.rewards = Vec::Zero(4);
  EXPECT_THROW(compute_norm_stats({t}, env.spec()), InputError);
}

TEST(Dataset, ReturnsToGoTelescope) {
  const auto env = point_reach_env();
  const auto ds = gen_dataset(env, Tier::mixed, 4, 7);
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Vec g = ds.returns_to_go(i, 0.97);
    const Vec& r = ds.trajectories[i].rewards;
    for (Eigen::Index t = 0; t + 1 < g.size(); ++t) ASSERT_EQ(g[t], r[t] + 0.97 * g[t + 1]);
    ASSERT_EQ(g[g.size() - 1], r[r.size() - 1]);
  }
}

TEST(Dataset, StoredActionsRespectTheBox) {
  const auto env = point_reach_env();
  for (Tier t : {Tier::expert, Tier::medium, Tier::mixed}) {
    const auto ds = gen_dataset(env, t, 20, 8);
    for (const auto& tr : ds.trajectories) ASSERT_LE(tr.actions.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Dataset, ElementBoundsEncloseEveryWindow) {
  const auto env = line_world_env();
  const auto ds = gen_dataset(env, Tier::mixed, 6, 9);
  const auto [lo, hi] = ds.element_bounds(ArrayMode::state_action);
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Mat w = ds.window(i, 0, ds.trajectories[i].length(), ArrayMode::state_action);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      ASSERT_TRUE((w.col(j).array() >= lo.array()).all());
      ASSERT_TRUE((w.col(j).array() <= hi.array()).all());
    }
  }
}

TEST(DatasetIo, RoundTripIsBitExact) {
  const auto env = point_reach_env();
  const auto ds = gen_dataset(env, Tier::mixed, 6, 10);
  std::stringstream buf;
  write_dataset(buf, ds);
  const std::string first = buf.str();
  const Dataset back = read_dataset(buf);
  ASSERT_EQ(back.trajectories.size(), ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    EXPECT_EQ(back.trajectories[i].states, ds.trajectories[i].states);
    EXPECT_EQ(back.trajectories[i].actions, ds.trajectories[i].actions);
    EXPECT_EQ(back.trajectories[i].rewards, ds.trajectories[i].rewards);
  }
  EXPECT_EQ(back.stats, ds.stats);
  EXPECT_EQ(back.tier, ds.tier);
  std::ostringstream again;
  write_dataset(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(DatasetIo, MalformedInputIsRejected) {
  std::istringstream empty;
  EXPECT_THROW(read_dataset(empty), InputError);
  std::istringstream wrong("{\"format\":\"something-else\",\"version\":1}\n");
  EXPECT_THROW(read_dataset(wrong), InputError);
}

TEST(ReferenceReturns, ScoreMapsEndpoints) {
  const auto ref = reference_returns(line_world_env(), 20);
  EXPECT_LT(ref.random, ref.expert);
  EXPECT_NEAR(ref.score(ref.random), 0.0, 1e-12);
  EXPECT_NEAR(ref.score(ref.expert), 100.0, 1e-12);
}

}  // namespace
}  // namespace tdp
