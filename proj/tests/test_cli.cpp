#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "kplab/formats.hpp"
#include "test_util.hpp"

using namespace kplab;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const std::string cmd = std::string(KPLAB_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, fs::exists(out) ? read_file(out) : ""};
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  TempDir tmp("cli_usage");
  CHECK(run("", tmp.path()).code == 1);
  CHECK(run("frobnicate", tmp.path()).code == 1);
  CHECK(run("poses", tmp.path()).code == 1);  // --session missing
  CHECK(run("augment --session x --frame f --rotate 9", tmp.path()).code == 1);
  CHECK(run("--help", tmp.path()).code == 0);
}

TEST_CASE("cli: data errors exit 2") {
  TempDir tmp("cli_data");
  CHECK(run("poses --session " + (tmp.path() / "absent").string(), tmp.path()).code == 2);
  write_text_atomic(tmp.path() / "bad.json", "{");
  CHECK(run("simulate-error --config " + (tmp.path() / "bad.json").string(), tmp.path()).code == 2);
}

TEST_CASE("cli: synthetic session through the pipeline, then a rejection") {
  TempDir tmp("cli_pipe");
  const std::string dir = (tmp.path() / "s").string();
  write_json_file(tmp.path() / "cfg.json", Json{{"n_frames", 14}, {"num_keypoints", 3}});
  REQUIRE(run("make-synthetic --seed 3 --config " + (tmp.path() / "cfg.json").string() + " --out " + dir, tmp.path())
              .code == 0);
  const Run ok = run("pipeline --session " + dir, tmp.path());
  CHECK(ok.code == 0);
  CHECK(ok.out.find("qa accept") != std::string::npos);
  CHECK(fs::exists(fs::path(dir) / "labels.json"));
  CHECK(run("select -k 4 --session " + dir, tmp.path()).code == 0);
  CHECK(parse_json_file(fs::path(dir) / "selection.json")["frames"].size() == 4);

  // Push one annotation 50 px off and re-run: QA rejects with exit 3.
  Json ann = parse_json_file(fs::path(dir) / "annotations.json");
  ann["annotations"][0]["uv"][1] = ann["annotations"][0]["uv"][1].get<double>() + 50;
  write_json_file(fs::path(dir) / "annotations.json", ann);
  const Run bad = run("pipeline --session " + dir + " --out " + (tmp.path() / "qa.json").string(), tmp.path());
  CHECK(bad.code == 3);
  CHECK(parse_json_file(tmp.path() / "qa.json")["accept"] == false);
  CHECK(run("qa --threshold 1000 --session " + dir, tmp.path()).code == 0);
}

TEST_CASE("cli: simulate-error, eval, fit-pose") {
  TempDir tmp("cli_misc");
  const fs::path sim = tmp.path() / "sim.json";
  REQUIRE(run("simulate-error --trials 50 --seed 1 --out " + sim.string(), tmp.path()).code == 0);
  const Json s = parse_json_file(sim);
  CHECK(s["n_trials"] == 50);
  CHECK(s["rmse_mm"].get<double>() > 0);
  REQUIRE(run("simulate-error --trials 50 --seed 1 --out " + (tmp.path() / "sim2.json").string(), tmp.path()).code ==
          0);
  CHECK(read_file(sim) == read_file(tmp.path() / "sim2.json"));

  const Json rig = to_json(testutil::default_rig());
  const Json labels{{"rig", rig}, {"samples", {{{"id", "a"}, {"uvd", {{320, 240, 48}, {330, 250, 50}}}}}}};
  const Json pred{{"samples", {{{"id", "a"}, {"uvd", {{320, 240, 48}, {330, 250, 50}}}}}}};
  write_json_file(tmp.path() / "labels.json", labels);
  write_json_file(tmp.path() / "pred.json", pred);
  const fs::path metrics = tmp.path() / "metrics.json";
  REQUIRE(run("eval --pred " + (tmp.path() / "pred.json").string() + " --labels " +
                  (tmp.path() / "labels.json").string() + " --out " + metrics.string(),
              tmp.path())
              .code == 0);
  const Json m = parse_json_file(metrics);
  CHECK(m["auc"] == 100);
  CHECK(m["mae_mm"] == 0);
  CHECK(m.contains("config_hash"));

  const Json model{{"points", {{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0, 0, 0.1}}}};
  const Json xyz{{"samples", {{{"id", "p"}, {"xyz", {{1, 2, 3}, {1.1, 2, 3}, {1, 2.1, 3}, {1, 2, 3.1}}}}}}};
  write_json_file(tmp.path() / "model.json", model);
  write_json_file(tmp.path() / "xyz.json", xyz);
  const fs::path poses = tmp.path() / "poses.json";
  REQUIRE(run("fit-pose --model " + (tmp.path() / "model.json").string() + " --pred " +
                  (tmp.path() / "xyz.json").string() + " --out " + poses.string(),
              tmp.path())
              .code == 0);
  const Json p = parse_json_file(poses);
  const Json first = p["poses"][0];
  CHECK(first["rmsd"].get<double>() < 1e-9);
  CHECK(first["translation"][0].get<double>() == doctest::Approx(1));
}
