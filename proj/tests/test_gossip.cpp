#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include <vsnet/gossip.hpp>

using namespace vsnet;

namespace {

// Push/pull rumor spreading: informed sensors push until they meet an informed peer,
// uninformed sensors keep polling.
struct Epidemic {
  std::vector<char> informed, stopped;

  Epidemic(std::size_t n, SensorId seed) : informed(n, 0), stopped(n, 0) { informed[seed] = 1; }

  bool is_active(SensorId i) const { return informed[i] ? !stopped[i] : true; }

  void on_contact(SensorId i, SensorId j, MessageSink& sink) {
    if (informed[i] && !informed[j]) {
      sink.send(i, j, "rumor");
      informed[j] = 1;
    } else if (!informed[i] && informed[j]) {
      sink.send(j, i, "rumor");
      informed[i] = 1;
    } else if (informed[i] && informed[j]) {
      stopped[i] = 1;
    }
  }

  std::size_t count() const { return std::accumulate(informed.begin(), informed.end(), std::size_t{0}); }
};

struct Dormant {
  bool is_active(SensorId) const { return false; }
  void on_contact(SensorId, SensorId, MessageSink&) { ADD_FAILURE() << "dormant protocol contacted"; }
};

struct Line {
  std::vector<std::vector<SensorId>> adj;
  explicit Line(int n) : adj(static_cast<std::size_t>(n)) {
    for (int i = 0; i + 1 < n; ++i) {
      adj[i].push_back(i + 1);
      adj[i + 1].push_back(i);
    }
  }
  std::size_t size() const { return adj.size(); }
  const std::vector<SensorId>& neighbors(SensorId i) const { return adj[i]; }
};

bool connected(const Swarm& s) {
  const auto d = hop_distances(s, 0);
  return std::find(d.begin(), d.end(), unreachable) == d.end();
}

Swarm connected_swarm(long long p, double r, std::uint64_t& seed) {
  for (;; ++seed) {
    auto s = generate_swarm(p, r, 50, 100, seed);
    if (connected(s))
      return s;
  }
}

} // namespace

TEST(ScheduleSlot, EmptyActiveSet) {
  Rng rng(1);
  EXPECT_TRUE(schedule_slot(Line(3), {}, rng).empty());
}

TEST(ScheduleSlot, IsolatedSensorNeverContacts) {
  const Swarm s({{0, {0.1, 0.1}, 1}, {1, {0.9, 0.9}, 1}}, 0.1);
  Rng rng(1);
  for (int k = 0; k < 100; ++k)
    EXPECT_TRUE(schedule_slot(s, {0}, rng).empty());
}

TEST(ScheduleSlot, SameSeedSameSchedule) {
  const Line g(2);
  Rng a(42), b(42);
  for (int k = 0; k < 50; ++k)
    EXPECT_EQ(schedule_slot(g, {0, 1}, a), schedule_slot(g, {0, 1}, b));
}

TEST(ScheduleSlot, FollowsTransitionRow) {
  // middle of a path: self, left and right each with probability 1/3
  const Line g(3);
  Rng rng(5);
  int left = 0, right = 0, none = 0;
  const int trials = 30000;
  for (int k = 0; k < trials; ++k) {
    const auto c = schedule_slot(g, {1}, rng);
    if (c.empty())
      ++none;
    else if (c[0].target == 0)
      ++left;
    else
      ++right;
  }
  for (int x : {left, right, none})
    EXPECT_NEAR(x / double(trials), 1.0 / 3.0, 0.015);
}

TEST(RunProtocol, PathEpidemic) {
  const Line g(3);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Epidemic e(3, 0);
    Rng rng(seed);
    const auto tr = run_protocol(g, e, 1000, rng);
    EXPECT_EQ(e.count(), 3u);
    EXPECT_GE(tr.slots_used, 2u);
    EXPECT_FALSE(tr.timed_out);
    EXPECT_EQ(tr.total_messages, 2u);
    EXPECT_EQ(std::accumulate(tr.messages_per_sensor.begin(), tr.messages_per_sensor.end(), std::uint64_t{0}),
              tr.total_messages);
  }
}

TEST(RunProtocol, InactiveProtocolDoesNothing) {
  Dormant d;
  Rng rng(1);
  const auto tr = run_protocol(Line(4), d, 100, rng);
  EXPECT_EQ(tr.slots_used, 0u);
  EXPECT_EQ(tr.total_messages, 0u);
  EXPECT_FALSE(tr.timed_out);
}

TEST(RunProtocol, TimeoutKeepsPartialTrace) {
  Epidemic e(50, 0);
  Rng rng(3);
  const auto tr = run_protocol(Line(50), e, 5, rng);
  EXPECT_TRUE(tr.timed_out);
  EXPECT_EQ(tr.slots_used, 5u);
  EXPECT_LT(e.count(), 50u);
  EXPECT_EQ(tr.total_messages + 1, e.count());
}

TEST(RunProtocol, SpreadsOverConnectedSwarm) {
  std::uint64_t seed = 1;
  const auto s = connected_swarm(50, 0.3, seed);
  Epidemic e(50, 0);
  Rng rng(seed);
  const auto tr = run_protocol(s, e, default_max_slots(50), rng);
  EXPECT_FALSE(tr.timed_out);
  EXPECT_EQ(e.count(), 50u);
  EXPECT_EQ(tr.total_messages, 49u);
}

TEST(RunProtocol, Deterministic) {
  const auto s = generate_swarm(200, 0.12, 50, 100, 9);
  auto run = [&] {
    Epidemic e(200, 3);
    Rng rng(77);
    std::ostringstream log;
    EventLog el{&log, {{"phase", "t"}}};
    const auto tr = run_protocol(s, e, default_max_slots(200), rng, &el);
    return std::make_tuple(tr.slots_used, tr.messages_per_sensor, log.str());
  };
  EXPECT_EQ(run(), run());
}

TEST(RunProtocol, EventLogLines) {
  Epidemic e(3, 0);
  Rng rng(1);
  std::ostringstream log;
  EventLog el{&log, {{"phase", "demo"}}};
  run_protocol(Line(3), e, 100, rng, &el);
  std::istringstream in(log.str());
  std::string line;
  std::size_t sends = 0, lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("phase"), "demo");
    EXPECT_GE(j.at("slot").get<int>(), 1);
    EXPECT_NE(j.at("initiator"), j.at("target"));
    sends += j.at("messages").size();
    ++lines;
  }
  EXPECT_GT(lines, 0u);
  EXPECT_EQ(sends, 2u);
}

// Spread time over a fixed-radius swarm grows far slower than P log P.
TEST(RunProtocol, SpreadTimeScaling) {
  const std::vector<long long> sizes{50, 100, 200, 400};
  std::vector<double> lx, ly;
  for (long long p : sizes) {
    double slots = 0.0;
    const int reps = 10;
    std::uint64_t seed = 100 * static_cast<std::uint64_t>(p);
    for (int r = 0; r < reps; ++r, ++seed) {
      const auto s = connected_swarm(p, 0.3, seed);
      Epidemic e(static_cast<std::size_t>(p), 0);
      Rng rng(seed);
      const auto tr = run_protocol(s, e, default_max_slots(static_cast<std::size_t>(p)), rng);
      ASSERT_FALSE(tr.timed_out);
      slots += static_cast<double>(tr.slots_used);
    }
    lx.push_back(std::log(static_cast<double>(p) * std::log(static_cast<double>(p))));
    ly.push_back(std::log(slots / reps));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  EXPECT_LT(sxy / sxx, 0.5);
}

TEST(SyncTracker, ActiveUntilEveryParticipatingNeighborSynced) {
  const Line g(4);
  SyncTracker q(g, {1, 1, 1, 0});
  EXPECT_FALSE(q.active(1));
  q.wake(1);
  EXPECT_TRUE(q.active(1));
  q.synced(1, 0);
  EXPECT_TRUE(q.active(1));
  q.synced(2, 1); // either end may initiate
  EXPECT_FALSE(q.active(1));
  q.wake(2); // neighbor 3 does not participate
  q.synced(2, 1);
  EXPECT_FALSE(q.active(2));
  q.wake(3);
  EXPECT_FALSE(q.active(3));
}
