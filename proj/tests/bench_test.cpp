#include <gtest/gtest.h>

#include "edgebus/bench.hpp"
#include "edgebus/broker.hpp"
#include "testutil.hpp"

using namespace edgebus;
using namespace edgebus::bench;

namespace {

TEST(Bench, RejectsBadPlans) {
  Endpoint ep{"127.0.0.1", 1};
  BenchPlan plan;
  plan.mpr = 0;
  EXPECT_THROW(run_bench(plan, ep, ep), Error);
  plan.mpr = 10;
  plan.payload_bytes = 0;
  EXPECT_THROW(run_bench(plan, ep, ep), Error);
  plan.payload_bytes = 1;
  plan.publishers = 0;
  EXPECT_THROW(run_bench(plan, ep, ep), Error);
}

TEST(Bench, UnreachableBrokerIsFlaggedInvalid) {
  BenchPlan plan;
  plan.mpr = 10;
  plan.duration_s = 1;
  Endpoint nowhere{"127.0.0.1", 1};  // nothing listens there
  BenchResult r = run_bench(plan, nowhere, nowhere);
  EXPECT_FALSE(r.valid);
  EXPECT_FALSE(r.error.empty());
}

TEST(Bench, ShortRunDeliversCloseToTheRate) {
  MonitorRegistry registry;
  builtin_monitors::register_all(registry);
  broker::Broker b(broker::BrokerConfig::parse(
                       "broker B\nlisten 127.0.0.1:0\nlinktype t\n"
                       "allow t t\nclient-default ingress t egress t\n"),
                   &registry);
  b.start();

  BenchPlan plan;
  plan.mpr = 400;
  plan.duration_s = 2;
  plan.payload_bytes = 175;
  plan.publishers = 2;
  plan.grace_ms = 1500;
  plan.per_second = true;
  Endpoint ep{"127.0.0.1", b.port()};
  BenchResult r = run_bench(plan, ep, ep);
  ASSERT_TRUE(r.valid) << r.error;
  EXPECT_LE(r.received, r.published);
  // Loose sanity bounds; the tight tolerance lives in the acceptance
  // suite where the run is long enough to smooth pacing noise.
  EXPECT_GT(r.mt, plan.mpr * 0.7);
  EXPECT_LT(r.mt, plan.mpr * 1.3);
  EXPECT_EQ(r.per_second.size(), 2u);
  b.stop();
}

}  // namespace
