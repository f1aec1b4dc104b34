#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "etfc/error.hpp"
#include "etfc/experiments.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace etfc::experiments;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("etfc_test_experiments") / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("etf command") {
  const fs::path a = scratch("etf_a"), b = scratch("etf_b");
  const Outcome o = cmd_etf(R"({"d": 3, "K": 4, "seed": 2})", a);
  REQUIRE(o.exit_code == kOk);
  const json s = json::parse(o.summary_json);
  CHECK(s["pass"].get<bool>());
  CHECK(s["max_deviation"].get<double>() < 1e-10);
  for (const char* f : {"frame.json", "frame.csv", "gram.csv", "summary.json", "manifest.json"}) {
    CHECK(fs::exists(a / f));
  }
  REQUIRE(cmd_etf(R"({"d": 3, "K": 4, "seed": 2})", b).exit_code == kOk);
  CHECK(slurp(a / "frame.csv") == slurp(b / "frame.csv"));
  CHECK(slurp(a / "gram.csv") == slurp(b / "gram.csv"));

  const Outcome bad = cmd_etf(R"({"d": 2, "K": 4})", scratch("etf_bad"));
  CHECK(bad.exit_code == kConfig);
  CHECK(bad.message.find("d") != std::string::npos);
  CHECK(cmd_etf("{not json", scratch("etf_parse")).exit_code == kConfig);
  CHECK(cmd_etf(R"({"K": 4})", scratch("etf_missing")).exit_code == kConfig);
}

TEST_CASE("peeled command") {
  SUBCASE("starting at the optimum keeps the gap at zero") {
    const fs::path out = scratch("peeled_opt");
    const Outcome o = cmd_peeled(
        R"({"mode": "dlpm", "loss": "ce", "K": 4, "d": 4, "counts": [3, 2, 2, 1], "init": "optimum",
            "steps": 20, "stop_tol": 1e-300})",
        out);
    REQUIRE(o.exit_code == kOk);
    const json s = json::parse(o.summary_json);
    CHECK(s["final_gap"].get<double>() < 1e-10);
    const std::string traj = slurp(out / "trajectory.csv");
    CHECK(!traj.empty());
  }
  SUBCASE("learnable mode writes the classifier probe") {
    const fs::path out = scratch("peeled_lpm");
    const Outcome o = cmd_peeled(R"({"mode": "lpm", "K": 4, "d": 4, "counts": [20, 20, 2, 2], "steps": 50})", out);
    REQUIRE(o.exit_code == kOk);
    CHECK(fs::exists(out / "probe.csv"));
    CHECK(json::parse(o.summary_json).contains("minority_probe"));
  }
  CHECK(cmd_peeled(R"({"mode": "lpm", "loss": "dr"})", scratch("peeled_bad")).exit_code == kConfig);
  CHECK(cmd_peeled(R"({"mode": "sideways"})", scratch("peeled_mode")).exit_code == kConfig);
}

TEST_CASE("regularity command") {
  const Outcome none = cmd_regularity(R"({"trials": 0, "K": [4]})", scratch("reg_none"));
  CHECK(none.exit_code == kOk);
  CHECK(json::parse(none.summary_json)["no_data"].get<bool>());

  const Outcome dr = cmd_regularity(R"({"losses": ["dr"], "trials": 20, "K": [4], "deltas": [0.1]})",
                                    scratch("reg_dr"));
  CHECK(dr.exit_code == kOk);
  CHECK(json::parse(dr.summary_json)["bound_pass"].get<bool>());
  CHECK(cmd_regularity(R"({"gammas": ["fast"]})", scratch("reg_bad")).exit_code == kConfig);
}

TEST_CASE("train and report commands") {
  const fs::path runs = scratch("train_runs");
  const std::string cfg = R"({"dataset": {"num_classes": 3, "input_dim": 4, "n_max": 30, "imbalance_ratio": 0.2,
                                          "test_per_class": 10},
                              "regimes": ["learnable_ce", "etf_dr"], "seeds": [0, 1], "epochs": 4,
                              "training": {"hidden": [6], "feature_dim": 3, "batch_size": 8}})";
  const Outcome t = cmd_train(cfg, runs);
  REQUIRE(t.exit_code == kOk);
  const json s = json::parse(t.summary_json);
  CHECK(s["runs"].size() == 4);
  CHECK(fs::exists(runs / "etf_dr" / "seed_1" / "trainlog.csv"));
  for (const auto& r : s["runs"])
    if (r["regime"] == "etf_dr") CHECK(r["classifier_unchanged"].get<bool>());

  const Outcome missing = cmd_train(R"({"dataset": {"num_classes": 3}, "regimes": ["etf_dr"], "seeds": [0],
                                        "epochs": 2})",
                                    scratch("train_missing"));
  CHECK(missing.exit_code == kConfig);
  CHECK(missing.message.find("dataset.input_dim") != std::string::npos);

  const fs::path rep = scratch("report");
  const Outcome r = cmd_report(json({{"runs", {runs.string()}}}).dump(), rep);
  REQUIRE(r.exit_code == kOk);
  const std::string csv = slurp(rep / "summary.csv");
  CHECK(csv.find("learnable_ce") != std::string::npos);
  CHECK(csv.find("etf_dr") != std::string::npos);

  CHECK(cmd_report(R"({"runs": []})", scratch("report_empty")).exit_code == kConfig);
  CHECK(cmd_report(json({{"runs", {(runs / "nowhere").string()}}}).dump(), scratch("report_io")).exit_code == kIo);
}

TEST_CASE("dispatch and exit codes") {
  CHECK(command_names().size() == 5);
  CHECK(run_command("etf", R"({"d": 2, "K": 3})", scratch("dispatch")).exit_code == kOk);
  CHECK(run_command("nope", "{}", scratch("dispatch_bad")).exit_code == kConfig);
  CHECK(exit_code_for(etfc::NumericError("x")) == kNumeric);
  CHECK(exit_code_for(etfc::IoError("x")) == kIo);
  CHECK(exit_code_for(etfc::DimensionError("x")) == kConfig);
  CHECK(exit_code_for(etfc::Error(etfc::ErrorCode::CheckFailed, "x")) == kCheckFailed);
}
