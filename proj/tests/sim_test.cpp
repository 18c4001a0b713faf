#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "edgebus/compilers.hpp"
#include "edgebus/sim.hpp"
#include "testutil.hpp"

using namespace edgebus;
using namespace edgebus::sim;
using testutil::smart_home_schema;

namespace {

AnnotatedTask transmit(const std::string& x, const std::string& y,
                       const std::string& a, std::uint64_t gen,
                       std::uint64_t pub, std::uint64_t seq) {
  return AnnotatedTask{TransmitTask{x, y, a}, gen, pub, seq};
}

// The sample hierarchy: brokers A..E, device dN under each leaf
// broker; C and D share ancestor A, D also hangs under B, E under B.
policy::HierarchyPolicy sample_hierarchy() {
  policy::HierarchyPolicy p;
  p.brokers = {"A", "B", "C", "D", "E"};
  p.devices = {"dev1", "dev2", "dev3", "dev4", "dev5"};
  p.parenthood.child_parent = {
      {"C", "A"}, {"D", "A"}, {"D", "B"}, {"E", "B"},
      {"dev1", "C"}, {"dev2", "C"}, {"dev3", "D"},
      {"dev4", "E"}, {"dev5", "E"},
  };
  return p;
}

Schema hierarchy_schema_with_topic() {
  Schema s = policy::compile_hierarchy(sample_hierarchy());
  s.events.alphabet = {"t"};
  for (int i = 1; i <= 5; ++i) {
    std::string dev = "dev" + std::to_string(i);
    for (const auto& b : s.graph.brokers) {
      if (s.graph.has_link(b, dev))
        s.subscriptions.by_link[Link{b, dev}].insert("t");
    }
  }
  return s;
}

TEST(Select, EmptyAndAntichain) {
  TaskOrdering fifo = broker_fifo_ordering();
  EXPECT_TRUE(select({}, fifo).empty());

  auto t1 = transmit("a", "b", "x", 0, 0, 1);
  auto t2 = transmit("c", "d", "y", 1, 1, 2);
  auto both = select({t1, t2}, fifo);
  EXPECT_EQ(both.size(), 2u);  // different links: incomparable
}

TEST(Select, BrokerTasksFirstUnderFifo) {
  TaskOrdering fifo = broker_fifo_ordering();
  AnnotatedTask b{BrokerTask{"a", "B", {"x"}}, 3, 0, 1};
  auto t = transmit("c", "B", "y", 0, 0, 2);
  auto minimal = select({t, b}, fifo);
  ASSERT_EQ(minimal.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<BrokerTask>(minimal[0].task));

  // Same link: FIFO by generation time.
  auto t1 = transmit("c", "B", "y", 0, 0, 3);
  auto t2 = transmit("c", "B", "z", 1, 1, 4);
  auto first = select({t2, t1}, fifo);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(std::get<TransmitTask>(first[0].task).topic, "y");
}

TEST(Ordering, StrictPartialOrderOnSamples) {
  // Irreflexivity and transitivity, sampled over a small task zoo.
  std::vector<AnnotatedTask> zoo;
  std::uint64_t seq = 0;
  for (std::uint64_t g : {0u, 1u, 2u}) {
    zoo.push_back(transmit("a", "B", "x", g, 0, seq++));
    zoo.push_back(transmit("a", "B", "y", g, 0, seq++));
    zoo.push_back(transmit("c", "D", "x", g, 0, seq++));
    zoo.push_back(AnnotatedTask{BrokerTask{"a", "B", {"x"}}, g, 0, seq++});
  }
  for (const auto& name : {"trivial", "fifo"}) {
    TaskOrdering ord = task_ordering(name);
    for (const auto& a : zoo) EXPECT_FALSE(ord(a, a));
    for (const auto& a : zoo)
      for (const auto& b : zoo)
        for (const auto& c : zoo)
          if (ord(a, b) && ord(b, c)) EXPECT_TRUE(ord(a, c));
  }
  EXPECT_THROW(task_ordering("nope"), Error);
}

TEST(TPublish, AddsAnnotatedTransmit) {
  Schema s = smart_home_schema();
  SystemState st = initial_state(s);
  EXPECT_EQ(st.clock, 0u);
  EXPECT_TRUE(st.work_list.empty());
  EXPECT_EQ(st.ea_states.at(Link{"H", "S"}), "q0");

  st = t_publish(s, std::move(st), "MD", "S", "MD_motion");
  EXPECT_EQ(st.clock, 1u);
  ASSERT_EQ(st.work_list.size(), 1u);
  const auto& a = st.work_list[0];
  EXPECT_EQ(a.t_gen, 0u);
  EXPECT_EQ(a.t_pub, 0u);
  EXPECT_EQ(std::get<TransmitTask>(a.task),
            (TransmitTask{"MD", "S", "MD_motion"}));

  st = t_publish(s, std::move(st), "MD", "S", "MD_no_motion");
  EXPECT_EQ(st.work_list[1].t_gen, 1u);
}

TEST(TPublish, RejectsNonPublishLinksAndUnknownTopics) {
  Schema s = smart_home_schema();
  SystemState st = initial_state(s);
  EXPECT_THROW(t_publish(s, st, "H", "I", "MD_motion"), Error);  // bridge
  EXPECT_THROW(t_publish(s, st, "MD", "S", "zz"), Error);
}

TEST(TNotify, ConsumesTheTask) {
  Schema s = smart_home_schema();
  TaskOrdering ord = trivial_ordering();
  SystemState st = initial_state(s);
  AnnotatedTask a = transmit("S", "DL", "DL_unlock", 0, 0, st.next_seq++);
  st.work_list.push_back(a);
  st.clock = 1;

  SystemState st2 = t_notify(s, ord, st, a);
  EXPECT_TRUE(st2.work_list.empty());
  EXPECT_EQ(st2.clock, 2u);
  EXPECT_EQ(st2.ea_states, st.ea_states);

  EXPECT_THROW(t_notify(s, ord, st2, a), Error);  // no longer in the list
  AnnotatedTask b{BrokerTask{"S", "H", {"x"}}, 0, 0, 99};
  st.work_list.push_back(b);
  EXPECT_THROW(t_notify(s, ord, st, b), Error);  // wrong task kind
}

TEST(TNotify, RequiresMinimality) {
  Schema s = smart_home_schema();
  TaskOrdering ord = broker_fifo_ordering();
  SystemState st = initial_state(s);
  AnnotatedTask early = transmit("S", "DL", "DL_lock", 0, 0, st.next_seq++);
  AnnotatedTask late = transmit("S", "DL", "DL_unlock", 1, 1, st.next_seq++);
  st.work_list = {early, late};
  EXPECT_THROW(t_notify(s, ord, st, late), Error);
  EXPECT_NO_THROW(t_notify(s, ord, st, early));
}

TEST(TDeliver, MonitorSuppressionAndAdvance) {
  Schema s = smart_home_schema();
  TaskOrdering ord = trivial_ordering();

  // A suppressed event creates no broker task.
  SystemState st = initial_state(s);
  AnnotatedTask a = transmit("I", "H", "DL_unlock", 0, 0, st.next_seq++);
  st.work_list.push_back(a);
  SystemState st2 = t_deliver(s, ord, st, a);
  EXPECT_TRUE(st2.work_list.empty());
  EXPECT_EQ(st2.ea_states.at(Link{"I", "H"}), "q0");

  // The protocol automaton advances and forwards.
  AnnotatedTask b = transmit("H", "S", "AC_request", 0, 0, st2.next_seq++);
  st2.work_list.push_back(b);
  std::vector<AnnotatedTask> created;
  SystemState st3 = t_deliver(s, ord, st2, b, &created);
  EXPECT_EQ(st3.ea_states.at(Link{"H", "S"}), "q1");
  ASSERT_EQ(created.size(), 1u);
  EXPECT_EQ(std::get<BrokerTask>(created[0].task),
            (BrokerTask{"H", "S", {"AC_request"}}));

  // Identity monitor forwards unchanged.
  AnnotatedTask c = transmit("MD", "S", "MD_motion", 5, 5, st3.next_seq++);
  st3.work_list.push_back(c);
  created.clear();
  SystemState st4 = t_deliver(s, ord, st3, c, &created);
  ASSERT_EQ(created.size(), 1u);
  EXPECT_EQ(std::get<BrokerTask>(created[0].task),
            (BrokerTask{"MD", "S", {"MD_motion"}}));
  EXPECT_EQ(created[0].t_pub, 5u);
}

TEST(TBroker, PropagationAndNoEcho) {
  Schema s = smart_home_schema();
  TaskOrdering ord = trivial_ordering();

  // Sensitive events brokered at H never head toward the cloud.
  SystemState st = initial_state(s);
  AnnotatedTask a{BrokerTask{"S", "H", {"MD_motion"}}, 2, 0, st.next_seq++};
  st.work_list.push_back(a);
  std::vector<AnnotatedTask> created;
  SystemState st2 = t_broker(s, ord, st, a, &created);
  ASSERT_EQ(created.size(), 1u);  // only the door-bell notification
  EXPECT_EQ(std::get<TransmitTask>(created[0].task),
            (TransmitTask{"H", "DB", "MD_motion"}));
  EXPECT_EQ(created[0].t_pub, 0u);

  // Multi-event sequences peel one event and keep a residual task.
  AnnotatedTask b{BrokerTask{"I", "H", {"AC_grant", "AC_deny"}}, 3, 1,
                  st2.next_seq++};
  st2.work_list.push_back(b);
  created.clear();
  SystemState st3 = t_broker(s, ord, st2, b, &created);
  (void)st3;
  ASSERT_EQ(created.size(), 3u);
  EXPECT_EQ(std::get<BrokerTask>(created[0].task),
            (BrokerTask{"I", "H", {"AC_deny"}}));
  // AC_grant continues to the hub bridge and the subscribed door bell,
  // but never back to I.
  std::set<std::string> dsts;
  for (size_t i = 1; i < created.size(); ++i)
    dsts.insert(std::get<TransmitTask>(created[i].task).dst);
  EXPECT_EQ(dsts, (std::set<std::string>{"S", "DB"}));
}

TEST(RunToQuiescence, SingleBrokerBaseCase) {
  Schema s;
  s.graph.devices = {"p", "q"};
  s.graph.brokers = {"B"};
  s.events.alphabet = {"a"};
  s.brokering.link_types = {"t"};
  s.brokering.allow = {{"t", "t"}};
  for (const auto& d : s.graph.devices) {
    s.graph.links.insert(Link{d, "B"});
    s.graph.links.insert(Link{"B", d});
    s.brokering.type_of[Link{d, "B"}] = "t";
    s.brokering.type_of[Link{"B", d}] = "t";
  }
  s.subscriptions.by_link[Link{"B", "q"}] = {"a"};
  s.subscriptions.by_link[Link{"B", "p"}] = {"a"};
  ASSERT_TRUE(validate_schema(s).ok());

  Trace trace = run_to_quiescence(s, {{"p", "B", "a", std::nullopt}});
  EXPECT_EQ(trace.delivered["q"], std::vector<std::string>{"a"});
  // p subscribed too, but a broker never echoes to the task's source.
  EXPECT_TRUE(trace.delivered["p"].empty());
}

TEST(RunToQuiescence, SmartHomeScenario) {
  Schema s = smart_home_schema();
  std::vector<Publication> pubs = {
      {"DB", "H", "AC_request", std::nullopt},
      {"SP", "I", "AC_grant", std::nullopt},
      {"DB", "H", "DL_unlock", std::nullopt},
  };
  Trace trace = run_to_quiescence(s, pubs);
  // The door lock sees exactly one unlock, the phone sees the request.
  EXPECT_EQ(trace.delivered["DL"], std::vector<std::string>{"DL_unlock"});
  EXPECT_EQ(trace.delivered["SP"], std::vector<std::string>{"AC_request"});
  // The door bell hears the grant.
  EXPECT_EQ(trace.delivered["DB"], std::vector<std::string>{"AC_grant"});
}

TEST(RunToQuiescence, UnlockOutOfOrderIsSuppressed) {
  Schema s = smart_home_schema();
  for (const auto& order :
       std::vector<std::vector<std::string>>{{"DL_unlock", "AC_request",
                                              "AC_grant"},
                                             {"AC_request", "DL_unlock",
                                              "AC_grant"},
                                             {"AC_grant", "AC_request",
                                              "DL_unlock"}}) {
    std::vector<Publication> pubs;
    for (const auto& topic : order) {
      if (topic == "AC_grant")
        pubs.push_back({"SP", "I", topic, std::nullopt});
      else
        pubs.push_back({"DB", "H", topic, std::nullopt});
    }
    Trace trace = run_to_quiescence(s, pubs);
    size_t unlocks = std::count(trace.delivered["DL"].begin(),
                                trace.delivered["DL"].end(), "DL_unlock");
    EXPECT_EQ(unlocks, 0u) << "order starting with " << order[0];
  }
}

TEST(RunToQuiescence, SensitiveEventsStayHome) {
  Schema s = smart_home_schema();
  Trace trace = run_to_quiescence(s, {{"MD", "S", "MD_motion", std::nullopt}});
  EXPECT_EQ(trace.delivered["DB"], std::vector<std::string>{"MD_motion"});
  // Nothing ever moves on a link into the cloud broker.
  for (const auto& ev : trace.events) {
    if (const auto* t = std::get_if<TransmitTask>(&ev.fired.task))
      EXPECT_NE(t->dst, "I");
    if (const auto* b = std::get_if<BrokerTask>(&ev.fired.task))
      EXPECT_NE(b->at, "I");
    for (const auto& added : ev.added) {
      if (const auto* t = std::get_if<TransmitTask>(&added.task))
        EXPECT_NE(t->dst, "I");
    }
  }
}

TEST(RunToQuiescence, HierarchyVisibility) {
  Schema s = hierarchy_schema_with_topic();
  Trace trace = run_to_quiescence(s, {{"dev1", "C", "t", std::nullopt}});
  // Subscribers under C and D are notified; E shares no ancestor.
  EXPECT_EQ(trace.delivered["dev2"], std::vector<std::string>{"t"});
  EXPECT_EQ(trace.delivered["dev3"], std::vector<std::string>{"t"});
  EXPECT_TRUE(trace.delivered["dev4"].empty());
  EXPECT_TRUE(trace.delivered["dev5"].empty());
  EXPECT_TRUE(trace.delivered["dev1"].empty());  // publisher excluded
}

TEST(RunToQuiescence, TimestampsAndConservation) {
  Schema s = smart_home_schema();
  std::vector<Publication> pubs = {
      {"DB", "H", "AC_request", std::nullopt},
      {"SP", "I", "AC_grant", std::nullopt},
      {"DB", "H", "DL_unlock", std::nullopt},
      {"MD", "S", "MD_motion", std::nullopt},
  };
  Trace trace = run_to_quiescence(s, pubs);

  // Clock strictly increases by one per firing.
  for (size_t i = 0; i < trace.events.size(); ++i) {
    if (i > 0) EXPECT_GE(trace.events[i].clock, trace.events[i - 1].clock + 1);
    const auto& ev = trace.events[i];
    EXPECT_LE(ev.fired.t_pub, ev.fired.t_gen);
    EXPECT_LE(ev.fired.t_gen, ev.clock);
    for (const auto& a : ev.added) {
      EXPECT_LE(a.t_pub, a.t_gen);
      EXPECT_EQ(a.t_gen, ev.clock);
    }
  }

  // Conservation: replaying the trace reconstructs an empty work list.
  std::map<std::uint64_t, AnnotatedTask> pending;  // by seq
  for (const auto& ev : trace.events) {
    if (ev.rule != "T-Publish") {
      ASSERT_TRUE(pending.count(ev.fired.seq));
      pending.erase(ev.fired.seq);
    }
    for (const auto& a : ev.added) pending.emplace(a.seq, a);
  }
  EXPECT_TRUE(pending.empty());
  EXPECT_TRUE(trace.final_state.work_list.empty());
}

TEST(RunToQuiescence, TimedPublicationsInterleave) {
  Schema s = smart_home_schema();
  // Both publications enter at their scheduled clocks even though the
  // first is still propagating.
  std::vector<Publication> pubs = {
      {"DB", "H", "AC_request", 0},
      {"DB", "H", "SC_request", 2},
  };
  Trace trace = run_to_quiescence(s, pubs);
  ASSERT_GE(trace.events.size(), 3u);
  EXPECT_EQ(trace.events[0].rule, "T-Publish");
  EXPECT_NE(trace.events[1].rule, "T-Publish");  // first is still in flight
  EXPECT_EQ(trace.events[2].rule, "T-Publish");  // due at clock 2
  EXPECT_EQ(trace.delivered["SC"], std::vector<std::string>{"SC_request"});
}

TEST(RunToQuiescence, StepBoundAbortsCyclicPropagation) {
  Schema s;
  s.graph.devices = {"d"};
  s.graph.brokers = {"B1", "B2", "B3"};
  s.events.alphabet = {"a"};
  s.brokering.link_types = {"t"};
  s.brokering.allow = {{"t", "t"}};
  auto link = [&s](const std::string& a, const std::string& b) {
    s.graph.links.insert(Link{a, b});
    s.graph.links.insert(Link{b, a});
    s.brokering.type_of[Link{a, b}] = "t";
    s.brokering.type_of[Link{b, a}] = "t";
  };
  link("d", "B1");
  link("B1", "B2");
  link("B2", "B3");
  link("B3", "B1");
  ASSERT_TRUE(validate_schema(s).ok());

  RunOptions opts;
  opts.max_steps = 500;
  try {
    run_to_quiescence(s, {{"d", "B1", "a", std::nullopt}}, opts);
    FAIL() << "expected step-bound abort";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("step bound"), std::string::npos);
  }
}

TEST(RunToQuiescence, SeededSchedulerIsReproducible) {
  Schema s = smart_home_schema();
  std::vector<Publication> pubs = {
      {"DB", "H", "AC_request", std::nullopt},
      {"SP", "I", "AC_grant", std::nullopt},
  };
  RunOptions a, b;
  a.ordering = "trivial";
  a.scheduler = random_scheduler(42);
  b.ordering = "trivial";
  b.scheduler = random_scheduler(42);
  Trace ta = run_to_quiescence(s, pubs, a);
  Trace tb = run_to_quiescence(s, pubs, b);
  EXPECT_EQ(ta.delivered, tb.delivered);
  EXPECT_EQ(ta.events.size(), tb.events.size());
}

}  // namespace
