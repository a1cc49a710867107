// tnqg: optimise, refine, extrapolate and benchmark TFI quench dynamics.
#include <iostream>
#include <string>
#include <vector>

#include <boost/program_options.hpp>

#include "tnqg/cli/commands.hpp"

namespace po = boost::program_options;
using namespace tnqg;
using namespace tnqg::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

const char* kUsage =
    "usage: tnqg <command> [options]\n"
    "\n"
    "commands:\n"
    "  run          optimise all windows; writes checkpoints, loss CSVs, trajectory.csv\n"
    "  refine       linear variational coefficients in each trained basis (needs --out RUN_DIR)\n"
    "  extrapolate  infinite-time values and thermal reference (needs --out RUN_DIR)\n"
    "  benchmark    train, then compare with the exact dynamics up to [benchmark] eval_time\n"
    "  cg-study     coarse-grained basis error vs M on the exact spectrum\n";

}  // namespace

int main(int argc, char** argv) {
  std::string command, config_path, estimator, out;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::vector<std::string> observables;

  po::options_description opts("options");
  opts.add_options()
      ("help", "show this message")
      ("config", po::value(&config_path), "INI config file")
      ("seed", po::value(&seed), "RNG seed (overrides [run] seed)")
      ("threads", po::value(&threads), "worker cap (overrides [run] threads)")
      ("out", po::value(&out), "output directory; the run directory for refine and extrapolate")
      ("estimator", po::value(&estimator), "mc or exact (overrides [estimator] mode)")
      ("observable", po::value(&observables)->composing(), "extrapolate: restrict to this observable (repeatable)");
  po::options_description hidden;
  hidden.add_options()("command", po::value(&command));
  po::options_description all;
  all.add(opts).add(hidden);
  po::positional_options_description pos;
  pos.add("command", 1);

  po::variables_map vm;
  try {
    po::store(po::command_line_parser(argc, argv).options(all).positional(pos).run(), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    std::cerr << "tnqg: " << e.what() << "\n" << kUsage << opts;
    return kExitConfig;
  }
  if (vm.count("help") || command.empty()) {
    std::cout << kUsage << opts;
    return vm.count("help") ? kExitOk : kExitConfig;
  }

  try {
    Overrides ov;
    if (vm.count("seed")) ov.seed = seed;
    if (vm.count("threads")) ov.threads = threads;
    if (vm.count("estimator")) ov.estimator = parse_estimator_mode(estimator);
    if (vm.count("out")) ov.output = out;

    Context ctx;
    ctx.command = command;
    ctx.log = &std::cerr;

    if (command == "run" || command == "benchmark" || command == "cg-study") {
      if (config_path.empty()) throw ConfigError(command + " needs --config");
      ctx.config = load_config(config_path);
      apply_overrides(ctx.config, ov);
      if (command == "run") cmd_run(ctx);
      if (command == "benchmark") cmd_benchmark(ctx);
      if (command == "cg-study") cmd_cg_study(ctx);
    } else if (command == "refine" || command == "extrapolate") {
      if (out.empty()) throw ConfigError(command + " needs --out RUN_DIR");
      auto [config, traj] = load_run(out);
      ctx.config = std::move(config);
      apply_overrides(ctx.config, ov);
      if (command == "refine") cmd_refine(ctx, traj);
      if (command == "extrapolate") cmd_extrapolate(ctx, traj, observables);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
  } catch (const WindowError& e) {
    std::cerr << "tnqg: numerical failure in window " << e.window() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "tnqg: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "tnqg: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "tnqg: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
