/**
 * coarselab — command-line laboratory for invariant metrics on finitely
 * generated groups.
 *
 *   coarselab <subcommand> --config <file> [--out <dir>] [--cache <dir>]
 *
 * Subcommands: ball, spectrum, compare, hyperbolicity, relhyp, witness, suite.
 *
 * Exit codes: 0 success, 1 finding-level failure (a suite row failed),
 * 2 usage/config/stale-cache error, 3 budget or window limit hit.
 */

#include <cstring>
#include <iostream>
#include <string>

#include "coarselab/config.hpp"
#include "coarselab/runner.hpp"

namespace {

void print_usage(std::ostream& os) {
  os << "usage: coarselab <subcommand> --config <file> [--out <dir>] [--cache <dir>]\n"
        "\n"
        "subcommands:\n"
        "  ball           enumerate/cache metric balls, audit and summarize them\n"
        "  spectrum       translation-length tables and two-metric comparison\n"
        "  compare        |Delta| profiles, triangle/additivity/constancy checks\n"
        "  hyperbolicity  thin-triangle estimates, fellow traveling, power tracks\n"
        "  relhyp         relative distances, projections, intersections, lifts\n"
        "  witness        power sweep for a linear-divergence witness\n"
        "  suite          the full acceptance battery (exit 1 on any FAIL)\n"
        "\n"
        "options:\n"
        "  --config <file>  experiment description (required)\n"
        "  --out <dir>      artifact directory (default: 'out' from the config)\n"
        "  --cache <dir>    ball cache directory (default: no on-disk cache;\n"
        "                   'ball' caches into the artifact directory)\n"
        "\n"
        "exit codes: 0 ok, 1 finding, 2 usage/config error, 3 budget/window limit\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace coarse;

  if (argc >= 2 && (std::strcmp(argv[1], "--help") == 0 || std::strcmp(argv[1], "-h") == 0)) {
    print_usage(std::cout);
    return run::kOk;
  }
  if (argc < 2) {
    print_usage(std::cerr);
    return run::kUsage;
  }

  std::string subcommand = argv[1];
  std::string config_path, out_dir, cache_dir;
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    auto next = [&](const char* name) -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "coarselab: " << name << " needs a value\n";
        std::exit(run::kUsage);
      }
      return argv[++i];
    };
    if (arg == "--config")
      config_path = next("--config");
    else if (arg == "--out")
      out_dir = next("--out");
    else if (arg == "--cache")
      cache_dir = next("--cache");
    else {
      std::cerr << "coarselab: unknown option '" << arg << "'\n";
      print_usage(std::cerr);
      return run::kUsage;
    }
  }
  if (config_path.empty()) {
    std::cerr << "coarselab: --config is required\n";
    print_usage(std::cerr);
    return run::kUsage;
  }

  static const char* kSubcommands[] = {"ball",   "spectrum", "compare", "hyperbolicity",
                                       "relhyp", "witness",  "suite"};
  bool known = false;
  for (const char* s : kSubcommands) known = known || subcommand == s;
  if (!known) {
    std::cerr << "coarselab: unknown subcommand '" << subcommand << "'\n";
    print_usage(std::cerr);
    return run::kUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    run::Paths paths;
    paths.out = out_dir.empty() ? cfg.out : out_dir;
    paths.cache = cache_dir;
    return run::dispatch(subcommand, cfg, paths);
  } catch (const BudgetExceeded& e) {
    std::cerr << "coarselab: budget exceeded: " << e.what() << "\n";
    return run::kBudget;
  } catch (const OutOfBall& e) {
    std::cerr << "coarselab: window limit: " << e.what() << "\n";
    return run::kBudget;
  } catch (const WindowTooSmall& e) {
    std::cerr << "coarselab: window too small: " << e.what() << "\n";
    return run::kBudget;
  } catch (const CacheMismatch& e) {
    std::cerr << "coarselab: " << e.what() << "\n";
    return run::kUsage;
  } catch (const NonWordMetric& e) {
    std::cerr << "coarselab: " << e.what() << "\n";
    return run::kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "coarselab: " << e.what() << "\n";
    return run::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "coarselab: error: " << e.what() << "\n";
    return run::kUsage;
  }
}
