#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "brook/analyzer.hpp"
#include "brook/bench.hpp"
#include "brook/chopper.hpp"

namespace fs = std::filesystem;
using namespace brook;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

BenchConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  BenchConfig cfg = parse_bench_config(j);
  if (const char* seed = std::getenv("BROOK_SEED")) {
    try {
      cfg.seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw ConfigError("BROOK_SEED must be an unsigned integer");
    }
  }
  return cfg;
}

int cmd_analyze(const std::string& dsl, const std::string& out_dir) {
  Workload w = parse_workload(read_text(dsl));
  for (const auto& e : validate_schema(w.templates, w.schema))
    throw ConfigError(e.template_name + " op " + std::to_string(e.op_index) + ": " + e.reason);
  AnalysisResult r = analyze(w);
  fs::path dir(out_dir);
  std::string stem = fs::path(dsl).stem().string();
  write_text(dir / (stem + ".plan"), serialize_plans(r.plans, r.workload.schema, r.workload.templates));
  write_text(dir / (stem + ".report.json"), r.report.dump(2) + "\n");
  write_text(dir / (stem + ".initial.dot"), to_dot(r.initial));
  write_text(dir / (stem + ".chosen.dot"), to_dot(r.chosen));
  write_text(dir / (stem + ".sc.dot"), to_dot(r.sc, r.chosen));
  write_text(dir / (stem + ".plans.dot"), plans_to_dot(r.plans, r.workload.schema, r.workload.templates));
  std::cout << r.plans.size() << " plans written to " << (dir / (stem + ".plan")).string() << "\n";
  for (const auto& name : r.dynamic_fallbacks) std::cout << "dynamic fallback: " << name << "\n";
  return kOk;
}

void write_report(const BenchReport& report, const std::string& out) {
  if (out.empty()) return;
  fs::path json_path(out);
  write_text(json_path, report.to_json().dump(2) + "\n");
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_text(csv_path, report.to_csv());
}

int cmd_bench(const std::string& config, const std::string& out) {
  BenchConfig cfg = load_config(config);
  BenchReport report = run_bench(cfg, &std::cerr);
  write_report(report, out);
  for (const auto& r : report.runs)
    for (const auto& v : r.violations) std::cerr << "violation [" << to_string(r.protocol) << "]: " << v << "\n";
  return report.ok() ? kOk : kViolation;
}

int cmd_verify(const std::string& config, const std::string& out) {
  BenchConfig cfg = load_config(config);
  cfg.record_history = true;
  cfg.watchdog = true;
  BenchReport report = run_bench(cfg, &std::cerr);
  write_report(report, out);
  for (const auto& r : report.runs) {
    std::cout << (r.violations.empty() ? "PASS " : "FAIL ") << to_string(r.protocol) << " p_hot=" << r.p_hot
              << " txns=" << r.history_txns.value_or(0);
    for (const auto& v : r.violations) std::cout << " | " << v;
    std::cout << "\n";
  }
  return report.ok() ? kOk : kViolation;
}

int cmd_export_dot(const std::string& input, const std::string& workload_dsl, const std::string& graph,
                   const std::string& out) {
  std::string text = read_text(input);
  std::string dot;
  if (text.rfind("plan ", 0) == 0 || text.find("\nplan ") != std::string::npos) {
    if (workload_dsl.empty()) throw ConfigError("plan input needs --workload for table names");
    Workload w = parse_workload(read_text(workload_dsl));
    dot = plans_to_dot(parse_plans(text, w.schema), w.schema, w.templates);
  } else {
    Workload w = parse_workload(text);
    if (graph == "initial") {
      dot = to_dot(build_initial_slw_graph(w.templates, w.schema));
    } else {
      AnalysisResult r = analyze(w);
      dot = graph == "sc" ? to_dot(r.sc, r.chosen) : to_dot(r.chosen);
    }
  }
  write_text(out, dot);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadlock-free two-phase locking: plan analysis and protocol benchmarks"};
  app.require_subcommand(1);

  std::string dsl, out_dir = ".";
  auto* analyze_cmd = app.add_subcommand("analyze", "Derive execution plans from a workload DSL file");
  analyze_cmd->add_option("dsl", dsl, "Workload DSL file")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("-o,--out", out_dir, "Output directory");

  std::string config, report;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark configuration");
  bench_cmd->add_option("-c,--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("-o,--out", report, "Report path (JSON; a CSV is written alongside)");

  auto* verify_cmd = app.add_subcommand("verify", "Check serializability and deadlock freedom on a small run");
  verify_cmd->add_option("-c,--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("-o,--out", report, "Optional report path");

  std::string input, workload_dsl, graph = "chosen", dot_out;
  auto* dot_cmd = app.add_subcommand("export-dot", "Render a plan file or a workload graph as DOT");
  dot_cmd->add_option("input", input, "Plan file or workload DSL file")->required()->check(CLI::ExistingFile);
  dot_cmd->add_option("-o,--out", dot_out, "DOT output file")->required();
  dot_cmd->add_option("--workload", workload_dsl, "Workload DSL naming the tables of a plan file");
  dot_cmd->add_option("--graph", graph, "Graph to render from a DSL file")
      ->check(CLI::IsMember({"initial", "chosen", "sc"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(dsl, out_dir);
    if (*bench_cmd) return cmd_bench(config, report);
    if (*verify_cmd) return cmd_verify(config, report);
    if (*dot_cmd) return cmd_export_dot(input, workload_dsl, graph, dot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DslError& e) {
    std::cerr << "dsl error: " << e.what() << "\n";
    return kConfigError;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kViolation;
  }
  return kOk;
}
