#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ehsim/app/commands.hpp"
#include "ehsim/app/config.hpp"
#include "ehsim/common/error.hpp"

using namespace ehsim;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = EHSIM_CONFIG_DIR;

app::ScenarioConfig parse(const std::string& text) { return app::load_config(toml::parse(text, kConfigs / "inline.toml")); }

int error_line(const std::string& text, std::string* key = nullptr) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    if (key) *key = e.key();
    return e.line();
  }
  return -1;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("ehsim_test_app_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("shipped default file matches the built-in defaults") {
  const auto file = app::load_config_file(kConfigs / "default.toml");
  const auto builtin = app::default_config();
  CHECK(file.signals.windows == 200);
  CHECK(file.signals.modalities == builtin.signals.modalities);
  CHECK(file.pool.windows == builtin.pool.windows);
  CHECK(file.pool.family == pool::Family::kNearestCentroid);
  CHECK(file.pool.reduced_k.at(signal::ModalityId::ecg()) == 12);
  CHECK(file.amser.seeds == builtin.amser.seeds);
  CHECK(file.rl.train.hyper.alpha == builtin.rl.train.hyper.alpha);
  CHECK(file.rl.train.hyper.gamma == builtin.rl.train.hyper.gamma);
  CHECK(file.rl.train.episodes == builtin.rl.train.episodes);
  const auto& a = file.edgesim.sim;
  const auto b = rl::default_orchestration_config();
  REQUIRE(a.topology.nodes.size() == b.topology.nodes.size());
  for (std::size_t i = 0; i < a.topology.nodes.size(); ++i) {
    CHECK(a.topology.nodes[i].speed_mops_per_s == b.topology.nodes[i].speed_mops_per_s);
    CHECK(a.topology.nodes[i].per_user == b.topology.nodes[i].per_user);
  }
  for (std::size_t i = 0; i < a.topology.links.size(); ++i)
    CHECK(a.topology.links[i].bandwidth_mbps == b.topology.links[i].bandwidth_mbps);
  CHECK(a.pipelines[0].input_bytes == b.pipelines[0].input_bytes);
  CHECK(a.pipelines[0].stages[1].compute_mops == b.pipelines[0].stages[1].compute_mops);
  CHECK(a.utilization_window_s == b.utilization_window_s);
  CHECK(a.arrival.period_s == b.arrival.period_s);
}

TEST_CASE("config hash follows content") {
  CHECK(parse("").hash == parse("").hash);
  CHECK(parse("[run]\nseed = 2\n").hash != parse("").hash);
  CHECK(parse("").hash.size() == 16);
}

TEST_CASE("validation errors name the key and line") {
  std::string key;
  CHECK(error_line("[pool]\nwindows = 100\nwindowz = 3\n", &key) == 3);
  CHECK(key == "pool.windowz");
  CHECK(error_line("[signals]\n\nmodalities = [\"ECG\", \"XYZ\"]\n", &key) == 3);
  CHECK(key == "signals.modalities");
  CHECK(error_line("[signals]\nmodalities = [\"ECG\", \"ACC\"]\n") == 2);
  CHECK(error_line("[rl]\nalpha = 0\n", &key) == 2);
  CHECK(key == "rl.alpha");
  CHECK(error_line("[edgesim]\npolicy = \"fastest\"\n", &key) == 2);
  CHECK(key == "edgesim.policy");
  CHECK(error_line("[quality]\nnoisy_db = 4.0\n") > 0);
  CHECK(error_line("[pool]\nfamily = \"svm\"\n") == 2);
  CHECK(error_line("[calibrate]\nfree = [\"node.9.speed\"]\n") == 2);
  CHECK(error_line("[signals.scenario.S1.ECG]\nkind = \"wander\"\n") > 0);
  CHECK(error_line("[[edgesim.links]]\nbandwidth_mbps = [1.0, 2.0]\n") == 2);
  CHECK(error_line("[run]\nseed = \"x\"\n") == 2);
  CHECK_THROWS_AS(app::load_config_file(kConfigs / "missing.toml"), InvalidArgument);
}

TEST_CASE("overrides reach the module configs") {
  const auto c = parse(
      "[signals]\nmodalities = [\"PPG\", \"ECG\"]\nwindow_s = 30.0\n"
      "[signals.scenario.S2.ECG]\nsnr_db = 8.0\n"
      "[signals.profile.ECG]\nnominal_rate_hz = 200.0\n"
      "[amser]\nseeds = 4\n"
      "[edgesim]\nusers = 3\ntier = \"low\"\n[edgesim.arrival]\nkind = \"poisson\"\n");
  REQUIRE(c.signals.modalities.size() == 2);
  CHECK(c.signals.modalities[0] == signal::ModalityId::ecg());
  CHECK(c.signals.scenarios.at(signal::ScenarioId::kS2).per_modality.at(signal::ModalityId::ecg()).target_snr_db == 8.0);
  CHECK(c.signals.synth.profile(signal::ModalityId::ecg()).nominal_rate_hz == 200.0);
  const auto run = c.amser_run(1);
  CHECK(run.seeds == 4);
  CHECK(run.window_s == 30.0);
  CHECK(c.edgesim.sim.users == 3);
  CHECK(c.edgesim.sim.tier == edgesim::BandwidthTier::kLow);
  CHECK(c.edgesim.sim.arrival.kind == edgesim::ArrivalKind::kPoisson);
  CHECK(c.dataset_spec().modalities == c.signals.modalities);
}

TEST_CASE("include merges beneath the including file") {
  const auto smoke = app::load_config_file(kConfigs / "smoke.toml");
  CHECK(smoke.signals.windows == 12);
  CHECK(smoke.pool.family == pool::Family::kNearestCentroid);
  CHECK(smoke.edgesim.sim.topology.nodes.size() == 3);
}

TEST_CASE("output directory precedence") {
  auto c = parse("");
  ::setenv("EHSIM_OUT", "/tmp/from_env", 1);
  CHECK(app::resolve_out("flag", c) == fs::path("flag"));
  CHECK(app::resolve_out("", c) == fs::path("/tmp/from_env"));
  c.run.out = "cfg";
  CHECK(app::resolve_out("", c) == fs::path("cfg"));
  ::unsetenv("EHSIM_OUT");
  CHECK(app::resolve_out("", parse("")) == fs::path("out"));
}

TEST_CASE("policy names") {
  CHECK_NOTHROW(app::check_policy_name("rl"));
  CHECK_NOTHROW(app::check_policy_name("partial"));
  try {
    app::check_policy_name("fastest");
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    for (const char* n : {"device-only", "edge-only", "cloud-only", "partial", "rl"}) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("commands on a small config") {
  app::Context ctx;
  ctx.config = app::load_config_file(kConfigs / "smoke.toml");
  ctx.out = scratch("smoke");

  SUBCASE("downstream commands name their producer") {
    for (const auto& [cmd, producer] : std::vector<std::pair<std::string, std::string>>{
             {"amser", "train-pool"}, {"report", "calibrate"}}) {
      try {
        app::run_command(cmd, ctx);
        FAIL("expected a missing artifact");
      } catch (const MissingArtifact& e) {
        CHECK(e.producer() == producer);
      }
    }
    ctx.policy = "rl";
    CHECK_THROWS_AS(app::cmd_simulate(ctx), MissingArtifact);
    CHECK_THROWS_AS(app::run_command("plot", ctx), InvalidArgument);
  }

  SUBCASE("full pipeline") {
    for (const auto& name : app::command_names()) app::run_command(name, ctx);
    for (auto s : {"S1", "S2", "S3", "S4"}) {
      const auto t = read_csv(ctx.out / "generate" / s / "features.csv");
      CHECK(t.rows.size() == 12);
      CHECK(t.header[0] == "window_id");
      CHECK(t.comments.size() == 3);
    }
    for (auto f : {"fig8.csv", "fig10.csv", "fig13.csv", "fig14.csv"}) {
      const auto t = read_csv(ctx.out / "report" / f);
      CHECK(t.comments[1] == " config_hash=" + ctx.config.hash);
      CHECK_FALSE(t.rows.empty());
    }
    CHECK(read_csv(ctx.out / "report" / "fig8.csv").rows.size() == 54);
    CHECK(read_csv(ctx.out / "report" / "fig10.csv").rows.size() == 20);
    CHECK(read_csv(ctx.out / "report" / "fig14.csv").rows.size() == 4);
    CHECK(fs::exists(ctx.out / "calibrate" / "fitted.toml"));

    // The fitted topology reads back as an edgesim section.
    const auto fitted = toml::parse_file(ctx.out / "calibrate" / "fitted.toml");
    const auto c = app::load_config(fitted);
    CHECK(c.edgesim.sim.topology.nodes.size() == 2);

    // Stored Q-table reloads exactly.
    const auto& sim = ctx.config.edgesim.sim;
    const auto actions = edgesim::enumerate_placements(sim.pipelines[0].stages.size(), sim.topology.layers());
    const auto names = rl::action_names(actions, sim.topology);
    const auto q = app::read_qtable(ctx.out / "train-rl" / "qtable.csv", ctx.config.rl.train.space, names,
                                    ctx.config.rl.train.hyper);
    const auto t = read_csv(ctx.out / "train-rl" / "qtable.csv");
    CHECK(q.value(3, 1) == parse_double(t.rows[3 * names.size() + 1][t.column("value")]));
    auto wrong = names;
    std::swap(wrong[0], wrong[1]);
    CHECK_THROWS_AS(app::read_qtable(ctx.out / "train-rl" / "qtable.csv", ctx.config.rl.train.space, wrong,
                                     ctx.config.rl.train.hyper),
                    RuntimeError);

    ctx.policy = "rl";
    app::cmd_simulate(ctx);
    CHECK(read_csv(ctx.out / "simulate" / "trace.csv").rows.size() == 120);

    // A report against artifacts from another seed is refused.
    auto other = ctx;
    other.seed = 99;
    CHECK_THROWS_AS(app::cmd_report(other), RuntimeError);
  }
  fs::remove_all(ctx.out);
}
