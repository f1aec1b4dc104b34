// Command-line front end. Everything goes through the C API in etfc/etfc.h.
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "etfc/etfc.h"

using json = nlohmann::ordered_json;

namespace {

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::string config_path;
  std::string out;
  // Copies each flag that was given into the config.
  std::vector<std::function<void(json&)>> apply;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

// Registers a flag whose value, when given, is copied into the config under key.
template <class T>
void flag(Command& c, const std::string& name, const std::string& key, const std::string& help) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = c.app->add_option(name, *value, help);
  c.apply.push_back([opt, key, value](json& cfg) {
    if (opt->count()) cfg[key] = *value;
  });
}

template <class T>
void list_flag(Command& c, const std::string& name, const std::string& key, const std::string& help) {
  auto value = std::make_shared<std::vector<T>>();
  CLI::Option* opt = c.app->add_option(name, *value, help)->delimiter(',');
  c.apply.push_back([opt, key, value](json& cfg) {
    if (opt->count()) cfg[key] = *value;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-ETF classifier and neural-collapse experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(etfc_version()));

  std::vector<Command> cmds;
  cmds.reserve(5);
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    cmds.push_back({name, app.add_subcommand(name, help), {}, {}, {}});
    Command& c = cmds.back();
    c.app->add_option("--config", c.config_path, "JSON config; flags override its fields");
    c.app->add_option("--out", c.out, "output directory")->required();
    return c;
  };

  Command& etf = add("etf", "generate and verify a simplex ETF");
  flag<int>(etf, "--d", "d", "feature dimension");
  flag<int>(etf, "--K", "K", "number of classes");
  flag<std::uint64_t>(etf, "--seed", "seed", "rotation seed");
  flag<double>(etf, "--tol", "tol", "Gram tolerance");

  Command& peeled = add("peeled", "layer-peeled / decoupled layer-peeled optimisation");
  flag<std::string>(peeled, "--mode", "mode", "lpm or dlpm");
  flag<std::string>(peeled, "--loss", "loss", "ce or dr");
  flag<int>(peeled, "--K", "K", "number of classes");
  flag<int>(peeled, "--d", "d", "feature dimension");
  list_flag<int>(peeled, "--counts", "counts", "per-class sample counts");
  flag<double>(peeled, "--tau", "tau", "imbalance ratio n_min/n_max");
  flag<int>(peeled, "--n-max", "n_max", "largest class size");
  flag<double>(peeled, "--gamma", "gamma", "step size");
  flag<int>(peeled, "--steps", "steps", "maximum steps");
  flag<double>(peeled, "--stop-tol", "stop_tol", "stopping tolerance");
  flag<double>(peeled, "--e-h", "e_h", "feature energy E_H");
  flag<double>(peeled, "--e-w", "e_w", "classifier energy E_W");
  flag<std::uint64_t>(peeled, "--seed", "seed", "master seed");
  flag<std::string>(peeled, "--init", "init", "random, theorem or optimum");
  flag<std::string>(peeled, "--update", "update", "full or cyclic");
  list_flag<int>(peeled, "--minor", "minor_classes", "classes for the minority-collapse probe");

  Command& reg = add("regularity", "one-step contraction experiment near the optimum");
  list_flag<std::string>(reg, "--losses", "losses", "subset of dr,ce");
  list_flag<std::string>(reg, "--gammas", "gammas", "step sizes; 'auto' means sqrt(E_H/E_W)");
  list_flag<double>(reg, "--deltas", "deltas", "perturbation sizes");
  flag<int>(reg, "--trials", "trials", "trials per configuration");
  list_flag<int>(reg, "--K", "K", "class counts");
  flag<int>(reg, "--d", "d", "feature dimension (default K)");
  flag<double>(reg, "--e-h", "e_h", "feature energy E_H");
  flag<double>(reg, "--e-w", "e_w", "classifier energy E_W");
  flag<std::uint64_t>(reg, "--seed", "seed", "master seed");
  flag<double>(reg, "--gate", "gate", "off-class uniformity gate");
  flag<bool>(reg, "--adaptive", "adaptive", "also run CE with the per-point optimal step");

  Command& train = add("train", "train the MLP backbone under the configured regimes");
  list_flag<std::uint64_t>(train, "--seeds", "seeds", "master seeds");
  flag<int>(train, "--epochs", "epochs", "epochs per run");
  list_flag<std::string>(train, "--regimes", "regimes", "learnable_ce,learnable_wce,etf_ce,etf_dr");

  Command& report = add("report", "aggregate training runs");
  list_flag<std::string>(report, "--runs", "runs", "run directories");

  CLI11_PARSE(app, argc, argv);

  for (auto& c : cmds) {
    if (!c.app->parsed()) continue;
    json cfg;
    try {
      cfg = load_config(c.config_path);
    } catch (const std::exception& e) {
      std::cerr << "etfc " << c.name << ": " << e.what() << "\n";
      return 2;
    }
    if (!cfg.is_object()) {
      std::cerr << "etfc " << c.name << ": config must be a JSON object\n";
      return 2;
    }
    for (const auto& f : c.apply) f(cfg);
    const int code = etfc_run_command(c.name.c_str(), cfg.dump().c_str(), c.out.c_str());
    (code == 0 ? std::cout : std::cerr) << etfc_last_message() << "\n";
    return code;
  }
  return 1;
}
