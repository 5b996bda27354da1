#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ehsim/app/commands.hpp"
#include "ehsim/common/error.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> jobs;
  std::string policy;
};

int run(const std::string& command, const Flags& f) {
  using namespace ehsim;
  app::Context ctx;
  ctx.config = app::load_config_file(f.config);
  ctx.seed = f.seed ? *f.seed : ctx.config.run.seed;
  ctx.jobs = f.jobs ? *f.jobs : ctx.config.run.jobs;
  if (ctx.jobs < 1) throw InvalidArgument("--jobs must be at least 1");
  ctx.out = app::resolve_out(f.out, ctx.config);
  ctx.policy = f.policy;
  if (command == "all") {
    for (const auto& name : app::command_names()) {
      std::cerr << "ehsim: " << name << "\n";
      app::run_command(name, ctx);
    }
  } else {
    app::run_command(command, ctx);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"ehsim: adaptive multi-modal sensing and edge orchestration simulator"};
  cli.require_subcommand(1);
  Flags flags;
  std::string chosen;
  auto names = ehsim::app::command_names();
  names.push_back("all");
  for (const auto& name : names) {
    auto* sub = cli.add_subcommand(name, name == "all" ? "run every command in pipeline order" : "run " + name);
    sub->add_option("--config", flags.config, "scenario configuration file")->required();
    sub->add_option("--seed", flags.seed, "root seed (overrides run.seed)");
    sub->add_option("--out", flags.out, "output directory (default: run.out, $EHSIM_OUT, ./out)");
    sub->add_option("--jobs", flags.jobs, "worker threads");
    if (name == "simulate" || name == "all")
      sub->add_option("--policy", flags.policy, "placement policy: device-only, edge-only, cloud-only, partial, rl");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ehsim: " << e.what() << "\n";
    return 1;
  }
  try {
    return run(chosen, flags);
  } catch (const ehsim::InvalidArgument& e) {
    std::cerr << "ehsim: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ehsim: " << e.what() << "\n";
    return 2;
  }
}
