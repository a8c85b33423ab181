// escroom command-line interface.
//
// Exit codes:
//   0  success
//   1  usage error
//   2  unreadable file or missing asset
//   3  invalid scene or solution script
//   4  no walkable navmesh (or invalid agent parameters)
//   5  validate: scene is not solvable
//   6  simulate: the script did not escape before time ran out
//   7  serve failure or internal error
#include "escroom/error.hpp"
#include "escroom/runtime.hpp"
#include "escroom/serve.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

namespace {

using escroom::Errc;
using ordered_json = nlohmann::ordered_json;

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kInvalid = 3, kNoNavmesh = 4, kUnsolvable = 5, kNotEscaped = 6, kInternal = 7 };

int exit_for(Errc code) {
  switch (code) {
    case Errc::Io:
    case Errc::MissingAsset: return kIo;
    case Errc::NoWalkableSurface:
    case Errc::InvalidAgentParams: return kNoNavmesh;
    default: return kInvalid;
  }
}

ordered_json error_json(const escroom::Error& e) {
  return {{"code", std::string(escroom::to_string(e.code()))}, {"message", e.detail()}, {"line", e.line()}};
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("escroom");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  const char* level = std::getenv("ESCROOM_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

ordered_json vec_json(const escroom::Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw escroom::Error(Errc::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  int code = kOk;
  ordered_json json;
  std::string text;
};

Outcome validate_scene(const std::string& scene, const escroom::AssembleOptions& options, int max_depth) {
  Outcome out;
  ordered_json& j = out.json;
  std::ostringstream text;
  j["scene"] = scene;
  j["ok"] = false;
  try {
    escroom::World world = escroom::assemble_world(scene, options);
    const auto& chart = world.chart();
    ordered_json rooms = ordered_json::array(), sequences = ordered_json::array(), puzzles = ordered_json::array();
    for (int id : chart.rooms()) rooms.push_back(chart.node(id).name);
    for (int id : chart.sequences()) sequences.push_back(chart.node(id).name);
    for (const auto& p : world.puzzles()) {
      puzzles.push_back({{"name", p.name},
                         {"room", p.room},
                         {"entity", p.entity},
                         {"position", p.position ? vec_json(*p.position) : ordered_json(nullptr)}});
    }
    j["rooms"] = rooms;
    j["puzzles"] = puzzles;
    j["sequences"] = sequences;
    j["navmesh"] = {{"polygons", world.mesh().polygons().size()},
                    {"area", world.mesh().area(false)},
                    {"active_area", world.mesh().area(true)},
                    {"blockers", world.mesh().blocker_ids()}};
    ordered_json panels = ordered_json::array();
    for (const auto& [id, panel] : world.panels()) panels.push_back(id);
    j["panels"] = panels;
    ordered_json bindings = ordered_json::array();
    for (const auto& b : world.bindings()) {
      bindings.push_back({{"kind", std::string(escroom::to_string(b.kind))}, {"subject", b.subject}, {"paths", b.paths()}});
    }
    j["bindings"] = bindings;
    j["clock"] = {{"start", world.clock().display()}, {"running", world.clock().running}};
    j["warnings"] = world.warnings();
    for (const auto& w : world.warnings()) spdlog::warn("{}", w);

    text << scene << "\n";
    text << "  rooms: " << chart.rooms().size() << ", puzzles: " << world.puzzles().size()
         << ", sequences: " << chart.sequences().size() << "\n";
    for (const auto& p : world.puzzles()) text << "    " << p.room << "." << p.name << " (" << p.entity << ")\n";
    text << "  navmesh: " << world.mesh().polygons().size() << " polygons, " << world.mesh().area(false) << " m2, "
         << world.mesh().blocker_ids().size() << " blockers\n";
    text << "  panels: " << world.panels().size() << ", bindings: " << world.bindings().size()
         << ", clock: " << (world.clock().running ? world.clock().display() : "none") << "\n";
    for (const auto& w : world.warnings()) text << "  warning: " << w << "\n";

    if (world.puzzles().empty()) {
      j["solvable"] = nullptr;
      j["errors"] = ordered_json::array();
      j["ok"] = true;
      text << "  solvable: n/a (no puzzles)\n";
      j["exit_code"] = out.code;
      out.text = text.str();
      return out;
    }
    escroom::SolvabilityResult solve = escroom::check_solvable(world, max_depth);
    j["solvable"] = ordered_json::parse(solve.to_json());
    if (solve.solvable) {
      text << "  solvable: yes (" << solve.witness.actions.size() << " actions, " << solve.explored << " nodes)\n";
      j["ok"] = true;
    } else {
      text << "  solvable: no (" << (solve.exhausted ? "search exhausted" : "depth limit reached") << ", "
           << solve.explored << " nodes";
      if (!solve.unsolved_puzzles.empty()) {
        text << "; never solved:";
        for (const auto& p : solve.unsolved_puzzles) text << " " << p;
      }
      text << ")\n";
      out.code = kUnsolvable;
    }
    j["errors"] = ordered_json::array();
  } catch (const escroom::Error& e) {
    j["errors"] = ordered_json::array({error_json(e)});
    text << scene << "\n  error: " << escroom::to_string(e.code()) << ": " << e.detail() << "\n";
    out.code = exit_for(e.code());
  }
  j["exit_code"] = out.code;
  out.text = text.str();
  return out;
}

escroom::StaticServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

static int run(int argc, char** argv) {
  CLI::App app{"Build, check and play escape-room scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "escroom 0.1.0");

  escroom::AssembleOptions options;
  bool json = false;

  std::vector<std::string> scenes;
  int max_depth = 64;
  auto* validate = app.add_subcommand("validate", "Run assemble-time checks and the solvability search");
  validate->add_option("scene", scenes, "Scene files")->required()->check(CLI::ExistingFile);
  validate->add_flag("--json", json, "Machine-readable report on stdout");
  validate->add_flag("--z-up", options.z_up, "Treat model assets as z-up");
  validate->add_option("--max-depth", max_depth, "Event budget of the solvability search")->check(CLI::NonNegativeNumber);

  std::string scene, output;
  auto* bake = app.add_subcommand("bake", "Export the baked navmesh as JSON");
  bake->add_option("scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  bake->add_option("-o,--output", output, "Output path")->required();
  bake->add_flag("--z-up", options.z_up, "Treat model assets as z-up");

  std::string script_path, report_path;
  escroom::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Play a solution script headlessly");
  simulate->add_option("scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--script", script_path, "Solution script JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--report", report_path, "Write the simulation report here");
  simulate->add_option("--dt", sim.dt, "Step length in seconds")->check(CLI::PositiveNumber);
  simulate->add_flag("--json", json, "Machine-readable summary on stdout");
  simulate->add_flag("--z-up", options.z_up, "Treat model assets as z-up");

  std::string dir, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve a directory as static files");
  serve->add_option("dir", dir, "Directory to publish")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*validate) {
    std::vector<std::future<Outcome>> jobs;
    for (const auto& s : scenes) jobs.push_back(std::async(std::launch::async, validate_scene, s, options, max_depth));
    int code = kOk;
    ordered_json all = ordered_json::array();
    for (auto& job : jobs) {
      Outcome o = job.get();
      code = std::max(code, o.code);
      if (json) {
        all.push_back(o.json);
      } else {
        std::cout << o.text;
      }
    }
    if (json) std::cout << (all.size() == 1 ? all[0] : all).dump(2) << "\n";
    return code;
  }

  if (*bake) {
    try {
      escroom::World world = escroom::assemble_world(scene, options);
      for (const auto& w : world.warnings()) spdlog::warn("{}", w);
      std::ofstream out(output, std::ios::binary);
      if (!out) throw escroom::Error(Errc::Io, "cannot write " + output);
      out << world.mesh().to_json().dump(2) << "\n";
      if (!out) throw escroom::Error(Errc::Io, "cannot write " + output);
      spdlog::info("wrote {} polygons to {}", world.mesh().polygons().size(), output);
      return kOk;
    } catch (const escroom::Error& e) {
      spdlog::error("{}: {}", escroom::to_string(e.code()), e.detail());
      return exit_for(e.code());
    }
  }

  if (*simulate) {
    try {
      escroom::SolutionScript script = escroom::SolutionScript::from_json(read_file(script_path));
      escroom::World world = escroom::assemble_world(scene, options);
      for (const auto& w : world.warnings()) spdlog::warn("{}", w);
      escroom::SimulationResult result = escroom::simulate(world, script, sim);
      for (const auto& e : result.errors) spdlog::warn("{}", e);
      if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        out << result.to_json() << "\n";
        if (!out) throw escroom::Error(Errc::Io, "cannot write " + report_path);
      }
      if (json) {
        ordered_json j = ordered_json::parse(result.to_json());
        j.erase("frames");
        std::cout << j.dump(2) << "\n";
      } else if (result.escaped) {
        std::cout << "escaped at t=" << *result.escape_time << " s after " << result.steps << " steps\n";
      } else {
        std::cout << (result.failed ? "failed" : "did not escape") << " at t=" << result.end_time << " s\n";
      }
      return result.escaped ? kOk : kNotEscaped;
    } catch (const escroom::Error& e) {
      spdlog::error("{}: {}", escroom::to_string(e.code()), e.detail());
      return exit_for(e.code());
    }
  }

  if (*serve) {
    try {
      escroom::StaticServer server(dir);
      int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << dir << " on http://" << host << ":" << bound << "/" << std::endl;
      server.run();
      g_server = nullptr;
      return kOk;
    } catch (const escroom::Error& e) {
      spdlog::error("{}: {}", escroom::to_string(e.code()), e.detail());
      return kInternal;
    }
  }
  return kUsage;
}

int main(int argc, char** argv) {
  setup_logging();
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return kInternal;
  }
}
