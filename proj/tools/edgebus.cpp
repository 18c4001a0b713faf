/*
 * Copyright (c) 2026, the edgebus authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "edgebus/bench.hpp"
#include "edgebus/broker.hpp"
#include "edgebus/client.hpp"
#include "edgebus/compilers.hpp"
#include "edgebus/flow.hpp"
#include "edgebus/monitors.hpp"
#include "edgebus/schema_text.hpp"
#include "edgebus/sim.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kViolations = 1;
constexpr int kUsage = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw edgebus::Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw edgebus::Error("cannot write '" + path + "'");
  out << text;
}

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

int cmd_validate(const std::string& schema_path) {
  edgebus::Schema schema = edgebus::parse_schema_file(schema_path);
  edgebus::ValidationReport report = edgebus::validate_schema(schema);
  for (const auto& v : report.violations) std::cout << v << "\n";
  if (report.ok()) {
    std::cout << "ok: " << schema.graph.devices.size() << " devices, "
              << schema.graph.brokers.size() << " brokers, "
              << schema.graph.links.size() << " links\n";
    return kOk;
  }
  return kViolations;
}

int cmd_simulate(const std::string& schema_path, const std::string& script_path,
                 const std::string& ordering, const std::string& scheduler,
                 std::uint64_t seed, std::uint64_t max_steps, bool quiet) {
  edgebus::Schema schema = edgebus::parse_schema_file(schema_path);
  edgebus::ValidationReport report = edgebus::validate_schema(schema);
  if (!report.ok()) {
    for (const auto& v : report.violations) std::cerr << v << "\n";
    return kViolations;
  }
  auto pubs = edgebus::sim::parse_publications(slurp(script_path), script_path);

  edgebus::sim::RunOptions opts;
  if (!ordering.empty()) opts.ordering = ordering;
  opts.scheduler = scheduler == "random"
                       ? edgebus::sim::random_scheduler(seed)
                       : edgebus::sim::lex_scheduler();
  opts.max_steps = max_steps;
  edgebus::sim::Trace trace = edgebus::sim::run_to_quiescence(schema, pubs, opts);
  if (quiet) {
    std::ostringstream out;
    for (const auto& [device, topics] : trace.delivered) {
      out << "delivered " << device << ":";
      for (const auto& t : topics) out << " " << t;
      out << "\n";
    }
    std::cout << out.str();
  } else {
    std::cout << edgebus::sim::render_trace(trace);
  }
  return kOk;
}

int cmd_analyze_routes(const std::string& schema_path) {
  edgebus::Schema schema = edgebus::parse_schema_file(schema_path);
  auto matrix = edgebus::flow::link_reachability(schema);
  for (const auto& from : matrix.index().links) {
    for (const auto& to : matrix.index().links) {
      if (matrix.reachable(from, to))
        std::cout << "route " << edgebus::to_string(from) << " => "
                  << edgebus::to_string(to) << "\n";
    }
  }
  return kOk;
}

int cmd_analyze_blp(const std::string& schema_path,
                    const std::string& labels_path) {
  edgebus::Schema schema = edgebus::parse_schema_file(schema_path);
  auto labeling =
      edgebus::flow::parse_labeling(slurp(labels_path), schema, labels_path);
  auto report = edgebus::flow::check_blp(schema, labeling);
  for (const auto& v : report.violations) std::cout << v << "\n";
  if (report.ok()) {
    std::cout << "ok: labeling is monotone\n";
    return kOk;
  }
  return kViolations;
}

int cmd_analyze_visible(const std::string& schema_path, const std::string& pub,
                        const std::string& sub) {
  edgebus::Schema schema = edgebus::parse_schema_file(schema_path);
  bool v = edgebus::flow::visible(schema, pub, sub);
  std::cout << (v ? "visible" : "not-visible") << "\n";
  return kOk;
}

int cmd_compile_hierarchy(const std::string& policy_path,
                          const std::string& out_path) {
  auto policy =
      edgebus::policy::parse_hierarchy_policy(slurp(policy_path), policy_path);
  edgebus::Schema schema = edgebus::policy::compile_hierarchy(policy);
  write_out(out_path, edgebus::render_schema(schema));
  return kOk;
}

int cmd_compile_rbac(const std::string& policy_path,
                     const std::string& out_path) {
  auto policy =
      edgebus::policy::parse_rbac_policy(slurp(policy_path), policy_path);
  edgebus::Schema schema = edgebus::policy::compile_rbac(policy);
  write_out(out_path, edgebus::render_schema(schema));
  return kOk;
}

int cmd_serve(const std::string& config_path, std::uint64_t seed,
              const std::string& log_path) {
  auto cfg = edgebus::broker::BrokerConfig::parse_file(config_path);
  edgebus::MonitorRegistry registry;
  edgebus::builtin_monitors::register_all(registry);

  edgebus::broker::Broker::Options opts;
  opts.seed = seed;
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::app);
    if (!log_file) throw edgebus::Error("cannot open log file '" + log_path + "'");
    opts.log = [&log_file](const std::string& msg) {
      log_file << msg << "\n";
      log_file.flush();
    };
  }

  edgebus::broker::Broker broker(cfg, &registry, opts);
  broker.start();
  std::cout << "LISTEN " << broker.port() << "\n" << std::flush;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  broker.stop();
  return kOk;
}

int cmd_bench(const std::string& pub, const std::string& sub, double mpr,
              int duration, size_t payload, int publishers, int subscribers,
              std::uint64_t seed, const std::string& csv_path) {
  auto [ph, pp] = edgebus::net::parse_endpoint(pub);
  auto [sh, sp] = edgebus::net::parse_endpoint(sub.empty() ? pub : sub);

  edgebus::bench::BenchPlan plan;
  plan.mpr = mpr;
  plan.duration_s = duration;
  plan.payload_bytes = payload;
  plan.publishers = publishers;
  plan.subscribers = subscribers;
  plan.seed = seed;
  plan.per_second = !csv_path.empty();

  auto result = edgebus::bench::run_bench(plan, {ph, pp}, {sh, sp});
  if (!result.valid) {
    std::cerr << "bench invalid: " << result.error << "\n";
    return kViolations;
  }
  std::cout << "published=" << result.published
            << " received=" << result.received << " duration=" << duration
            << "s mt=" << result.mt << " mps\n";
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    csv << "second,published,received\n";
    for (size_t i = 0; i < result.per_second.size(); ++i)
      csv << (i + 1) << "," << result.per_second[i].first << ","
          << result.per_second[i].second << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgebus: policy-enforcing event-broker toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for schedulers and native monitors");

  // validate
  std::string schema_path;
  auto* validate = app.add_subcommand("validate", "check a schema file");
  validate->add_option("schema", schema_path, "schema file")->required();

  // simulate
  std::string sim_schema, sim_script, sim_ordering, sim_scheduler = "lex";
  std::uint64_t sim_max_steps = 0;
  bool sim_quiet = false;
  auto* simulate =
      app.add_subcommand("simulate", "run the operational semantics");
  simulate->add_option("schema", sim_schema, "schema file")->required();
  simulate->add_option("script", sim_script, "publications script")->required();
  simulate->add_option("--ordering", sim_ordering, "trivial|fifo");
  simulate->add_option("--scheduler", sim_scheduler, "lex|random");
  simulate->add_option("--max-steps", sim_max_steps, "step bound (0 = auto)");
  simulate->add_flag("--quiet", sim_quiet, "only print delivery summary");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "static schema analysis");
  analyze->require_subcommand(1);
  std::string an_schema, an_labels, an_pub, an_sub;
  auto* routes = analyze->add_subcommand("routes", "flow-route reachability");
  routes->add_option("schema", an_schema, "schema file")->required();
  auto* blp = analyze->add_subcommand("blp", "label monotonicity check");
  blp->add_option("schema", an_schema, "schema file")->required();
  blp->add_option("labels", an_labels, "labeling file")->required();
  auto* vis = analyze->add_subcommand("visible", "broker-to-broker visibility");
  vis->add_option("schema", an_schema, "schema file")->required();
  vis->add_option("publisher", an_pub, "publishing broker")->required();
  vis->add_option("subscriber", an_sub, "subscribing broker")->required();

  // compile
  auto* compile = app.add_subcommand("compile", "policy to schema compilers");
  compile->require_subcommand(1);
  std::string co_policy, co_out;
  auto* hierarchy =
      compile->add_subcommand("hierarchy", "up/down scoping hierarchy");
  hierarchy->add_option("policy", co_policy, "parenthood policy file")
      ->required();
  hierarchy->add_option("-o,--output", co_out, "output schema file");
  auto* rbac = compile->add_subcommand("rbac", "protection-domain policy");
  rbac->add_option("policy", co_policy, "rbac policy file")->required();
  rbac->add_option("-o,--output", co_out, "output schema file");

  // serve
  std::string serve_config, serve_log;
  auto* serve = app.add_subcommand("serve", "run a broker");
  serve->add_option("config", serve_config, "broker config file")->required();
  serve->add_option("--log", serve_log, "structured log file (default stderr)");

  // bench
  std::string bench_pub, bench_sub, bench_csv;
  double bench_mpr = 1000;
  int bench_duration = 30, bench_publishers = 1, bench_subscribers = 1;
  size_t bench_payload = 175;
  auto* bench = app.add_subcommand("bench", "throughput load harness");
  bench->add_option("--pub", bench_pub, "publish broker host:port")->required();
  bench->add_option("--sub", bench_sub, "subscribe broker host:port");
  bench->add_option("--mpr", bench_mpr, "target publish rate (msg/s)");
  bench->add_option("--duration", bench_duration, "publish window (s)");
  bench->add_option("--payload", bench_payload, "payload size (bytes)");
  bench->add_option("--publishers", bench_publishers, "publisher count");
  bench->add_option("--subscribers", bench_subscribers, "subscriber count");
  bench->add_option("--csv", bench_csv, "per-second counters file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      app.exit(e);
      return kOk;
    }
    app.exit(e);
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(schema_path);
    if (*simulate)
      return cmd_simulate(sim_schema, sim_script, sim_ordering, sim_scheduler,
                          seed, sim_max_steps, sim_quiet);
    if (*routes) return cmd_analyze_routes(an_schema);
    if (*blp) return cmd_analyze_blp(an_schema, an_labels);
    if (*vis) return cmd_analyze_visible(an_schema, an_pub, an_sub);
    if (*hierarchy) return cmd_compile_hierarchy(co_policy, co_out);
    if (*rbac) return cmd_compile_rbac(co_policy, co_out);
    if (*serve) return cmd_serve(serve_config, seed, serve_log);
    if (*bench)
      return cmd_bench(bench_pub, bench_sub, bench_mpr, bench_duration,
                       bench_payload, bench_publishers, bench_subscribers,
                       seed, bench_csv);
  } catch (const edgebus::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
