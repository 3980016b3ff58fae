#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "probstl/errors.hpp"
#include "probstl/scenario.hpp"

namespace {

struct CommandArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  int threads = 1;
  bool negate = false;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* cmd, CommandArgs& args, bool with_negate) {
  cmd->add_option("--scenario", args.scenario, "Scenario JSON file")->required();
  args.seed_opt = cmd->add_option("--seed", args.seed, "Override the scenario seed");
  args.threads_opt = cmd->add_option("--threads", args.threads, "Worker threads");
  cmd->add_option("--out", args.out, "Directory for result and CSV files");
  if (with_negate) cmd->add_flag("--negate", args.negate, "Target the complement event");
}

probstl::RunOptions options_of(const CommandArgs& args) {
  probstl::RunOptions opt;
  if (args.seed_opt->count() > 0) opt.seed = args.seed;
  if (args.threads_opt->count() > 0) opt.threads = args.threads;
  opt.negate = args.negate;
  opt.out_dir = args.out;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probability that a closed-loop stochastic system satisfies an STL formula"};
  app.require_subcommand(1);

  CommandArgs verify_args, ra_args, mc_args, sample_args, compare_args;
  int sample_count = 0;
  std::string sample_side = "satisfy";
  int compare_runs = 20;
  std::string fit_csv, fit_fragment = "{}", fit_out = ".";

  CLI::App* verify = app.add_subcommand("verify", "Splitting estimate of the formula probability");
  add_common(verify, verify_args, true);

  CLI::App* verify_ra =
      app.add_subcommand("verify-ra", "Failure probability of a reach-avoid task");
  add_common(verify_ra, ra_args, false);

  CLI::App* mc = app.add_subcommand("mc", "Simple random sampling baseline");
  add_common(mc, mc_args, true);

  CLI::App* sample =
      app.add_subcommand("sample", "Draw trajectories conditioned on a satisfaction side");
  add_common(sample, sample_args, false);
  sample->add_option("--count", sample_count, "Trajectories to draw")->required();
  sample->add_option("--side", sample_side, "satisfy or violate");

  CLI::App* fit = app.add_subcommand("fit", "Fit a trajectory Gaussian to CSV data");
  fit->add_option("--csv", fit_csv, "Trajectory CSV file")->required();
  fit->add_option("--fragment", fit_fragment, "JSON options, e.g. {\"ridge\": 1e-9}");
  fit->add_option("--out", fit_out, "Directory for the fitted Gaussian");

  CLI::App* compare = app.add_subcommand("compare", "Paired splitting and SRS runs");
  add_common(compare, compare_args, true);
  compare->add_option("--runs", compare_runs, "Number of paired runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nlohmann::json doc;
    if (app.got_subcommand(verify)) {
      doc = probstl::run_verify(probstl::load_scenario(verify_args.scenario),
                                options_of(verify_args));
    } else if (app.got_subcommand(verify_ra)) {
      doc = probstl::run_verify_ra(probstl::load_scenario(ra_args.scenario), options_of(ra_args));
    } else if (app.got_subcommand(mc)) {
      doc = probstl::run_mc(probstl::load_scenario(mc_args.scenario), options_of(mc_args));
    } else if (app.got_subcommand(sample)) {
      doc = probstl::run_sample(probstl::load_scenario(sample_args.scenario), sample_count,
                                sample_side, options_of(sample_args));
    } else if (app.got_subcommand(fit)) {
      nlohmann::json fragment;
      try {
        fragment = nlohmann::json::parse(fit_fragment);
      } catch (const nlohmann::json::exception& e) {
        throw probstl::ConfigError(std::string("--fragment is not valid JSON: ") + e.what());
      }
      std::filesystem::create_directories(fit_out);
      std::string gaussian_path = (std::filesystem::path(fit_out) / "gaussian.json").string();
      doc = probstl::run_fit(fit_csv, fragment, gaussian_path);
    } else if (app.got_subcommand(compare)) {
      doc = probstl::run_compare(probstl::load_scenario(compare_args.scenario), compare_runs,
                                 options_of(compare_args));
    }
    std::cout << doc.dump(2) << std::endl;
    return 0;
  } catch (const probstl::ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const probstl::EstimationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
