#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "steinlab/runner.hpp"

namespace {

steinlab::ExperimentConfig default_config() {
  steinlab::ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.seed_set = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steinlab: numerical laboratory for Gaussian approximation of Hilbert-valued Wiener functionals"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_flag = -1;
  int threads_flag = 0;
  std::string out_flag;
  bool seed_given = false, threads_given = false, out_given = false;

  for (const char* name : {"selftest", "bounds", "breuer-major", "neural-net", "spde", "all"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment configuration file");
    sub->add_option("--seed", seed_flag, "override the experiment seed")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--threads", threads_flag, "worker threads (0 = auto)")->each([&](const std::string&) {
      threads_given = true;
    });
    sub->add_option("--out", out_flag, "output directory")->each([&](const std::string&) {
      out_given = true;
    });
  }

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    steinlab::ExperimentConfig cfg =
        config_path.empty() ? default_config() : steinlab::parse_config_file(config_path);
    if (seed_given) {
      cfg.seed = static_cast<std::uint64_t>(seed_flag);
      cfg.seed_set = true;
    }
    if (threads_given) {
      cfg.threads = threads_flag;
    } else if (const char* env = std::getenv("STEINLAB_THREADS")) {
      // Environment override applies only when the flag is absent.
      cfg.threads = std::atoi(env);
    }
    if (out_given) cfg.output_dir = out_flag;

    steinlab::Runner runner(std::move(cfg));
    return runner.run(subcommand);
  } catch (const steinlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
