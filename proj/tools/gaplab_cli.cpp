// gaplab: runs the guidance-gap experiments and writes their artifacts.
//
//   gaplab <train|sample|sweep-omega|gap-report|refine-compare>
//          [--config FILE] [--seed N] [--out DIR] [--set key=value]...
//
// Output directory: --out, else $GAPLAB_OUT, else ./gaplab_out.
// Exit status: 0 success, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>

#include <cstdlib>
#include <map>
#include <iostream>

#include "gaplab/commands.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int report(const std::string& kind, const std::string& message, const std::vector<std::string>& details, int code) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  if (!details.empty()) j["error"]["problems"] = details;
  std::cerr << j.dump(2) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guidance-gap lab: score-error, optimal guidance weight and refinement experiments"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file or a run manifest to re-run");
  app.add_option("--seed", seed, "Master seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", overrides, "Override a config value: dotted.key=value (repeatable)")->take_all();

  const std::map<std::string, std::string> blurbs{
      {"train", "Fit the MLP score model on the configured family and write a checkpoint"},
      {"sample", "Run guided reverse chains and write samples, trajectories and metrics"},
      {"sweep-omega", "Estimate the optimal guidance weight per step and the L(omega) curves"},
      {"gap-report", "Accumulate the per-step score gap along sampled trajectories"},
      {"refine-compare", "Compare omega = 1, omega*(t) and their refined variants across seeds"},
  };
  for (const auto& name : gaplab::command_names()) {
    const auto it = blurbs.find(name);
    app.add_subcommand(name, it == blurbs.end() ? "" : it->second)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what(), {}, kConfigError);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::string out = "gaplab_out";
  if (out_dir) out = *out_dir;
  else if (const char* env = std::getenv("GAPLAB_OUT"); env && *env) out = env;

  gaplab::ExperimentConfig cfg;
  try {
    std::optional<std::filesystem::path> file;
    if (config_path) file = *config_path;
    cfg = gaplab::ExperimentConfig::resolve(file, overrides, seed);
    cfg.validate();
  } catch (const gaplab::ConfigError& e) {
    return report("config", "invalid configuration", e.errors(), kConfigError);
  } catch (const std::exception& e) {
    return report("config", e.what(), {}, kConfigError);
  }

  try {
    const auto manifest = gaplab::run_command(command, cfg, out);
    std::cout << "wrote " << manifest.outputs.size() << " outputs to " << out << '\n';
    for (const auto& o : manifest.outputs) std::cout << "  " << o.path << "  " << o.sha256 << '\n';
  } catch (const gaplab::ConfigError& e) {
    return report("config", "invalid configuration", e.errors(), kConfigError);
  } catch (const gaplab::PersistError& e) {
    return report("persist", e.what(), {}, kRuntimeError);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), {}, kRuntimeError);
  }
  return 0;
}
