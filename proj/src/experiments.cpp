#include "etfc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "etfc/csv.hpp"
#include "etfc/dataset.hpp"
#include "etfc/error.hpp"
#include "etfc/etf.hpp"
#include "etfc/frame_io.hpp"
#include "etfc/peeled.hpp"
#include "etfc/regularity.hpp"
#include "etfc/seed.hpp"
#include "etfc/svg.hpp"
#include "etfc/trainer.hpp"

namespace etfc::experiments {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::Dimension:
    case ErrorCode::Domain:
    case ErrorCode::Unsupported:
      return kConfig;
    case ErrorCode::Numeric:
      return kNumeric;
    case ErrorCode::CheckFailed:
      return kCheckFailed;
    case ErrorCode::Io:
      return kIo;
    default:
      return kOther;
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json parse_config(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& path = "") {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& path = "") {
  if (!j.contains(key) || j.at(key).is_null()) throw ConfigError("config: missing required field '" + path + key + "'");
  return get_or<T>(j, key, T{}, path);
}

/// Accepts a scalar or an array for list-valued fields.
template <class T>
std::vector<T> list_or(const json& j, const std::string& key, std::vector<T> fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (j.at(key).is_array()) return get_or<std::vector<T>>(j, key, fallback);
  return {get_or<T>(j, key, T{})};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v) { return csv::format_double(v); }

/// Collects artifacts written by a command so the manifest can hash them.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  void write(const std::string& name, const std::string& content) {
    csv::write_file(root_ / name, content);
    hashes_[name] = "fnv1a64:" + hex64(fnv1a64(content));
  }

  void manifest(const std::string& command, const json& config, const json& results) {
    json m;
    m["command"] = command;
    m["tool_version"] = "0.1.0";
    m["config"] = config;
    json art = json::object();
    for (const auto& [k, v] : hashes_) art[k] = v;
    m["artifacts"] = art;
    m["results"] = results;
    m["created_utc"] = utc_now();
    csv::write_file(root_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::map<std::string, std::string> hashes_;
};

Outcome guarded(const std::function<Outcome()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    return {exit_code_for(e), e.what(), ""};
  } catch (const fs::filesystem_error& e) {
    return {kIo, e.what(), ""};
  } catch (const json::exception& e) {
    return {kConfig, std::string("config: ") + e.what(), ""};
  } catch (const std::exception& e) {
    return {kOther, e.what(), ""};
  }
}

// ---------------------------------------------------------------- etf

Outcome etf_body(const std::string& text, const fs::path& out) {
  const json in = parse_config(text);
  json cfg;
  cfg["d"] = require<int>(in, "d");
  cfg["K"] = require<int>(in, "K");
  cfg["seed"] = get_or<std::uint64_t>(in, "seed", 0);
  cfg["tol"] = get_or<double>(in, "tol", 1e-9);

  const EtfFrame frame = generate_etf(cfg["d"], cfg["K"], cfg["seed"].get<std::uint64_t>());
  const GramReport rep = verify_etf(frame, cfg["tol"]);
  const Matrix target = etf_gram_target(frame.num_classes);
  const double col_sum = frame.columns.rowwise().sum().cwiseAbs().maxCoeff();

  RunDir dir(out);
  dir.write("frame.json", frame_to_json(frame) + "\n");
  dir.write("frame.csv", frame_to_csv(frame));
  csv::Writer gram({"row", "col", "gram", "target", "deviation"});
  for (int r = 0; r < frame.num_classes; ++r)
    for (int c = 0; c < frame.num_classes; ++c)
      gram.add_row({std::to_string(r), std::to_string(c), fmt(rep.gram(r, c)), fmt(target(r, c)),
                    fmt(std::abs(rep.gram(r, c) - target(r, c)))});
  dir.write("gram.csv", gram.str());

  json res;
  res["max_deviation"] = rep.max_deviation;
  res["worst_row"] = rep.worst_row;
  res["worst_col"] = rep.worst_col;
  res["max_column_sum"] = col_sum;
  res["pass"] = rep.pass;
  dir.write("summary.json", res.dump(2) + "\n");
  dir.manifest("etf", cfg, res);
  if (!rep.pass) return {kCheckFailed, "etf: Gram deviation " + fmt(rep.max_deviation) + " exceeds tolerance", res.dump()};
  return {kOk, "etf: frame verified", res.dump()};
}

// ---------------------------------------------------------------- peeled

std::vector<int> resolve_counts(const json& in, json& cfg) {
  if (in.contains("counts") && (in.contains("tau") || in.contains("n_max"))) {
    throw ConfigError("config: give either 'counts' or 'tau'/'n_max', not both");
  }
  std::vector<int> counts;
  const int K = cfg["K"];
  if (in.contains("counts")) {
    counts = get_or<std::vector<int>>(in, "counts", {});
    if (static_cast<int>(counts.size()) != K) {
      throw ConfigError("config: 'counts' has " + std::to_string(counts.size()) + " entries for K=" + std::to_string(K));
    }
  } else {
    counts = imbalanced_counts(get_or<int>(in, "n_max", 1000), get_or<double>(in, "tau", 0.01), K);
  }
  cfg["counts"] = counts;
  return counts;
}

void write_probe(RunDir& dir, const std::string& name, const ProbeResult& p) {
  csv::Writer w({"a", "b", "cosine"});
  for (const auto& pr : p.pairs) w.add_row({std::to_string(pr.a), std::to_string(pr.b), fmt(pr.cosine)});
  dir.write(name, w.str());
}

json probe_json(const ProbeResult& p) {
  json j;
  j["mean_cosine"] = p.mean_cosine;
  j["min_cosine"] = p.min_cosine;
  double max_c = -1.0;
  for (const auto& pr : p.pairs) max_c = std::max(max_c, pr.cosine);
  j["max_cosine"] = max_c;
  return j;
}

std::vector<double> flat_row_major(const Matrix& M) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) v.push_back(M(r, c));
  return v;
}

Outcome peeled_body(const std::string& text, const fs::path& out) {
  const json in = parse_config(text);
  json cfg;
  cfg["mode"] = get_or<std::string>(in, "mode", "dlpm");
  cfg["loss"] = get_or<std::string>(in, "loss", "ce");
  cfg["K"] = get_or<int>(in, "K", 10);
  cfg["d"] = get_or<int>(in, "d", 16);
  const std::vector<int> counts = resolve_counts(in, cfg);
  const bool lpm = cfg["mode"] == "lpm";
  if (!lpm && cfg["mode"] != "dlpm") throw ConfigError("config: 'mode' must be lpm or dlpm");
  cfg["gamma"] = get_or<double>(in, "gamma", 0.5);
  cfg["steps"] = get_or<int>(in, "steps", 5000);
  cfg["stop_tol"] = get_or<double>(in, "stop_tol", lpm ? 1e-5 : 1e-3);
  cfg["e_h"] = get_or<double>(in, "e_h", 1.0);
  cfg["e_w"] = get_or<double>(in, "e_w", 1.0);
  cfg["seed"] = get_or<std::uint64_t>(in, "seed", 0);
  cfg["init"] = get_or<std::string>(in, "init", "random");
  cfg["update"] = get_or<std::string>(in, "update", "full");
  const LossKind loss = parse_loss_kind(cfg["loss"]);
  const std::uint64_t seed = cfg["seed"];
  const double e_h = cfg["e_h"], e_w = cfg["e_w"];
  const int K = cfg["K"], d = cfg["d"];

  std::vector<int> minor;
  if (in.contains("minor_classes")) {
    minor = get_or<std::vector<int>>(in, "minor_classes", {});
  } else {
    const int lo = *std::min_element(counts.begin(), counts.end());
    for (int k = 0; k < K; ++k)
      if (counts[static_cast<std::size_t>(k)] == lo) minor.push_back(k);
  }
  cfg["minor_classes"] = minor;

  PeeledProblem problem;
  if (lpm) {
    problem = make_lpm_problem(d, counts, e_h, e_w, derive_seed(seed, "classifier"));
  } else {
    const FixedClassifier clf = scale_classifier_uniform(generate_etf(d, K, derive_seed(seed, "etf")), e_w);
    problem = make_dlpm_problem(clf, counts, e_h);
  }
  const std::string init = cfg["init"];
  if (init == "optimum") {
    if (lpm) throw ConfigError("config: init 'optimum' needs mode dlpm");
    problem = place_at_optimum(problem);
  } else if (init == "random" || init == "theorem") {
    problem = init_features(problem, derive_seed(seed, "init"), init == "theorem");
  } else {
    throw ConfigError("config: 'init' must be random, theorem or optimum");
  }
  OptimizerConfig oc;
  oc.step_size = cfg["gamma"];
  oc.max_steps = cfg["steps"];
  oc.stop_tol = cfg["stop_tol"];
  oc.seed = seed;
  const std::string update = cfg["update"];
  if (update == "cyclic") {
    oc.mode = UpdateMode::Cyclic;
  } else if (update != "full") {
    throw ConfigError("config: 'update' must be full or cyclic");
  }

  const Trajectory traj = optimize(problem, loss, oc);

  RunDir dir(out);
  csv::Writer tw({"step", "loss", "gap", "grad_norm"});
  svg::Series loss_s{"loss", {}, {}}, gap_s{"gap", {}, {}}, grad_s{"grad_norm", {}, {}};
  for (const auto& r : traj.records) {
    tw.add_row({std::to_string(r.step), fmt(r.loss), fmt(r.gap), fmt(r.grad_norm)});
    loss_s.x.push_back(r.step);
    loss_s.y.push_back(r.loss);
    gap_s.x.push_back(r.step);
    gap_s.y.push_back(r.gap);
    grad_s.x.push_back(r.step);
    grad_s.y.push_back(r.grad_norm);
  }
  dir.write("trajectory.csv", tw.str());

  const auto& last = traj.records.back();
  json res;
  res["converged"] = traj.converged;
  res["steps"] = last.step;
  res["final_loss"] = last.loss;
  res["final_gap"] = std::isfinite(last.gap) ? json(last.gap) : json(nullptr);
  res["final_grad_norm"] = last.grad_norm;

  if (!lpm && std::isfinite(last.gap)) {
    std::vector<std::string> header{"step", "gap"};
    for (int k = 0; k < K; ++k) header.push_back("dist_" + std::to_string(k));
    csv::Writer gw(header);
    for (const auto& r : traj.records) {
      std::vector<std::string> row{std::to_string(r.step), fmt(r.gap)};
      for (double v : r.class_distance) row.push_back(fmt(v));
      gw.add_row(std::move(row));
    }
    dir.write("gap.csv", gw.str());
  }
  std::vector<int> all(static_cast<std::size_t>(K));
  std::iota(all.begin(), all.end(), 0);
  const ProbeResult fprobe = feature_mean_probe(traj.final_state, all);
  write_probe(dir, "feature_probe.csv", fprobe);
  res["feature_probe"] = probe_json(fprobe);
  if (lpm && minor.size() >= 2) {
    const ProbeResult probe = minority_collapse_probe(traj.final_state.classifier, minor);
    write_probe(dir, "probe.csv", probe);
    res["minority_probe"] = probe_json(probe);
  }
  dir.write("trajectory.svg",
            svg::line_chart(lpm ? std::vector<svg::Series>{loss_s, grad_s} : std::vector<svg::Series>{loss_s, gap_s},
                            {std::string(lpm ? "LPM " : "DLPM ") + to_string(loss), "step", "value", true}));

  json state = res;
  state["dim"] = d;
  state["num_samples"] = traj.final_state.total();
  state["labels"] = traj.final_state.labels;
  state["features"] = flat_row_major(traj.final_state.features.transpose());
  state["classifier"] = flat_row_major(traj.final_state.classifier.transpose());
  dir.write("final_state.json", state.dump() + "\n");
  dir.write("summary.json", res.dump(2) + "\n");
  dir.manifest("peeled", cfg, res);
  return {kOk, std::string("peeled: ") + (traj.converged ? "converged" : "stopped") + " after step " +
                   std::to_string(last.step),
          res.dump()};
}

// ---------------------------------------------------------------- regularity

struct GammaSpec {
  double value;
  bool reference;  // the sqrt(E_H/E_W) step
};

Outcome regularity_body(const std::string& text, const fs::path& out) {
  const json in = parse_config(text);
  json cfg;
  cfg["losses"] = list_or<std::string>(in, "losses", {"dr", "ce"});
  cfg["deltas"] = list_or<double>(in, "deltas", {0.01, 0.05, 0.1});
  cfg["trials"] = get_or<int>(in, "trials", 500);
  cfg["K"] = list_or<int>(in, "K", {4, 10});
  if (in.contains("d")) cfg["d"] = list_or<int>(in, "d", {});
  cfg["e_h"] = get_or<double>(in, "e_h", 1.0);
  cfg["e_w"] = get_or<double>(in, "e_w", 1.0);
  cfg["seed"] = get_or<std::uint64_t>(in, "seed", 0);
  cfg["gate"] = get_or<double>(in, "gate", 1e-3);
  cfg["adaptive"] = get_or<bool>(in, "adaptive", false);
  const double e_h = cfg["e_h"], e_w = cfg["e_w"];
  const double g_ref = std::sqrt(e_h / e_w);

  std::vector<GammaSpec> gammas;
  json gammas_cfg = json::array();
  const json graw = in.contains("gammas") ? in.at("gammas") : json::array({0.05, 0.1, 0.5, 1.0, "auto"});
  for (const auto& g : (graw.is_array() ? graw : json::array({graw}))) {
    if (g.is_string() && g.get<std::string>() == "auto") {
      gammas.push_back({g_ref, true});
    } else if (g.is_string()) {
      try {
        gammas.push_back({csv::parse_double(g.get<std::string>()), false});
      } catch (const IoError&) {
        throw ConfigError("config: bad 'gammas' entry '" + g.get<std::string>() + "'");
      }
    } else if (g.is_number()) {
      gammas.push_back({g.get<double>(), false});
    } else {
      throw ConfigError("config: 'gammas' entries must be numbers or \"auto\"");
    }
    gammas_cfg.push_back(g);
  }
  cfg["gammas"] = gammas_cfg;

  std::vector<LossKind> losses;
  for (const auto& s : cfg["losses"]) losses.push_back(parse_loss_kind(s.get<std::string>()));
  const bool has_dr = std::find(losses.begin(), losses.end(), LossKind::DR) != losses.end();
  const bool has_ce = std::find(losses.begin(), losses.end(), LossKind::CE) != losses.end();
  const int trials = cfg["trials"];
  if (trials < 0) throw ConfigError("config: 'trials' must be non-negative");
  const double gate = cfg["gate"];

  RunDir dir(out);
  csv::Writer rw({"K", "d", "loss", "gamma", "adaptive", "delta", "trial", "label", "cos_before", "ratio",
                  "step_ratio", "bound", "uniformity_deviation", "norm_sq_after", "cos_after", "at_optimum"});
  json bound = json::array();
  json dominance = json::array();
  bool bound_pass = true, dom_pass = true, dom_step_pass = true;

  const std::uint64_t seed = cfg["seed"];
  for (int K : cfg["K"].get<std::vector<int>>()) {
    // Without an explicit d both the tight (K-1) and a roomy (2K) embedding run.
    const std::vector<int> dims = cfg.contains("d") ? cfg["d"].get<std::vector<int>>() : std::vector<int>{K - 1, 2 * K};
    for (int d : dims) {
      const std::string tag = std::to_string(K) + "_" + std::to_string(d);
      const FixedClassifier clf = scale_classifier_uniform(generate_etf(d, K, derive_seed(seed, "etf_" + tag)), e_w);
      for (double delta : cfg["deltas"].get<std::vector<double>>()) {
        RegularityConfig rc;
        rc.delta = delta;
        rc.trials = trials;
        rc.e_h = e_h;
        rc.seed = derive_seed(seed, "trials_" + tag);

        auto emit = [&](const std::vector<RegularityRecord>& recs) {
          for (const auto& r : recs) {
            rw.add_row({std::to_string(K), std::to_string(d), to_string(r.loss), fmt(r.gamma), r.adaptive_step ? "1" : "0",
                        fmt(r.delta), std::to_string(r.trial), std::to_string(r.label), fmt(r.cos_before), fmt(r.ratio),
                        fmt(r.step_ratio), fmt(r.bound), fmt(r.uniformity_deviation), fmt(r.norm_sq_after),
                        fmt(r.cos_after), r.at_optimum ? "1" : "0"});
          }
        };

        std::vector<RegularityRecord> dr_ref;
        if (has_dr) {
          for (const auto& g : gammas) {
            rc.loss = LossKind::DR;
            rc.gamma = g.value;
            rc.adaptive_step = false;
            auto recs = run_regularity_experiment(clf, rc);
            emit(recs);
            if (g.reference && dr_ref.empty()) dr_ref = recs;
          }
          if (dr_ref.empty()) {
            rc.loss = LossKind::DR;
            rc.gamma = g_ref;
            dr_ref = run_regularity_experiment(clf, rc);
            emit(dr_ref);
          }
          const RegularitySummary s = summarize(dr_ref, e_h);
          json b;
          b["K"] = K;
          b["d"] = d;
          b["delta"] = delta;
          b["gamma"] = g_ref;
          b["accepted"] = s.accepted;
          b["max_excess"] = s.max_excess;
          b["mean_ratio"] = s.mean_ratio;
          b["sphere_preserved"] = s.sphere_preserved;
          b["cos_nonnegative"] = s.cos_nonnegative;
          b["no_data"] = s.accepted == 0;
          b["pass"] = s.max_excess <= 1e-9 && s.sphere_preserved && s.cos_nonnegative;
          bound_pass = bound_pass && b["pass"].get<bool>();
          bound.push_back(b);
        }
        if (has_ce) {
          std::vector<std::pair<GammaSpec, bool>> ce_runs;
          for (const auto& g : gammas) ce_runs.push_back({g, false});
          if (cfg["adaptive"].get<bool>()) ce_runs.push_back({{0.0, false}, true});
          for (const auto& [g, adaptive] : ce_runs) {
            rc.loss = LossKind::CE;
            rc.gamma = adaptive ? 1.0 : g.value;
            rc.adaptive_step = adaptive;
            const auto recs = run_regularity_experiment(clf, rc);
            emit(recs);
            if (!has_dr) continue;
            const DominanceResult dom = paired_dominance(dr_ref, recs, gate);
            json j;
            j["K"] = K;
            j["d"] = d;
            j["delta"] = delta;
            j["gamma"] = adaptive ? json("adaptive") : json(g.value);
            j["gated"] = dom.gated;
            j["no_data"] = dom.gated == 0;
            j["fraction"] = dom.gated ? json(dom.fraction()) : json(nullptr);
            j["step_fraction"] = dom.gated ? json(dom.step_fraction()) : json(nullptr);
            j["mean_ce"] = dom.gated ? json(dom.mean_ce) : json(nullptr);
            j["mean_dr"] = dom.gated ? json(dom.mean_dr) : json(nullptr);
            j["mean_ce_step"] = dom.gated ? json(dom.mean_ce_step) : json(nullptr);
            j["mean_dr_step"] = dom.gated ? json(dom.mean_dr_step) : json(nullptr);
            const bool per_trial = !dom.gated || dom.fraction() >= 0.99;
            const bool mean_ok = !dom.gated || dom.mean_ce >= dom.mean_dr;
            const bool step_ok = !dom.gated || (dom.step_fraction() >= 0.99 && dom.mean_ce_step >= dom.mean_dr_step);
            j["per_trial_pass"] = per_trial;
            j["mean_pass"] = mean_ok;
            j["step_pass"] = step_ok;
            // The adaptive step is informational; the check covers fixed steps.
            if (!adaptive) {
              dom_pass = dom_pass && per_trial && mean_ok;
              dom_step_pass = dom_step_pass && step_ok;
            }
            dominance.push_back(j);
          }
        }
      }
    }
  }
  dir.write("records.csv", rw.str());
  json res;
  res["no_data"] = trials == 0;
  res["bound_pass"] = bound_pass;
  res["dominance_pass"] = dom_pass;
  res["dominance_step_pass"] = dom_step_pass;
  res["bound"] = bound;
  res["dominance"] = dominance;
  dir.write("summary.json", res.dump(2) + "\n");
  dir.manifest("regularity", cfg, res);
  if (!bound_pass || !dom_pass) {
    return {kCheckFailed,
            std::string("regularity: ") + (bound_pass ? "bound holds" : "bound violated") + ", paired dominance " +
                (dom_pass ? "holds" : "fails"),
            res.dump()};
  }
  return {kOk, trials == 0 ? "regularity: no trials (no data)" : "regularity: all checks pass", res.dump()};
}

// ---------------------------------------------------------------- train

void apply_overrides(TrainConfig& c, const json& o, const std::string& path) {
  c.epochs = get_or<int>(o, "epochs", c.epochs, path);
  c.batch_size = get_or<int>(o, "batch_size", c.batch_size, path);
  c.learning_rate = get_or<double>(o, "learning_rate", c.learning_rate, path);
  c.milestones = get_or<std::vector<int>>(o, "milestones", c.milestones, path);
  c.decay = get_or<double>(o, "decay", c.decay, path);
  c.momentum = get_or<double>(o, "momentum", c.momentum, path);
  c.weight_decay = get_or<double>(o, "weight_decay", c.weight_decay, path);
  if (o.contains("classifier")) c.classifier = parse_classifier_kind(get_or<std::string>(o, "classifier", "", path));
  if (o.contains("loss")) c.loss = parse_train_loss(get_or<std::string>(o, "loss", "", path));
  if (o.contains("normalization")) c.normalization = parse_feature_norm(get_or<std::string>(o, "normalization", "", path));
  c.length_reg = get_or<double>(o, "length_reg", c.length_reg, path);
  c.class_weighted_lengths = get_or<bool>(o, "class_weighted_lengths", c.class_weighted_lengths, path);
  c.e_h = get_or<double>(o, "e_h", c.e_h, path);
  c.e_w = get_or<double>(o, "e_w", c.e_w, path);
  c.hidden = get_or<std::vector<int>>(o, "hidden", c.hidden, path);
  c.feature_dim = get_or<int>(o, "feature_dim", c.feature_dim, path);
  c.rectify_output = get_or<bool>(o, "rectify_output", c.rectify_output, path);
}

json train_config_json(const TrainConfig& c) {
  json j;
  j["regime"] = c.regime;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["milestones"] = c.milestones;
  j["decay"] = c.decay;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["classifier"] = to_string(c.classifier);
  j["loss"] = to_string(c.loss);
  j["normalization"] = to_string(c.normalization);
  j["length_reg"] = c.length_reg;
  j["class_weighted_lengths"] = c.class_weighted_lengths;
  j["e_h"] = c.e_h;
  j["e_w"] = c.e_w;
  j["hidden"] = c.hidden;
  j["feature_dim"] = c.feature_dim;
  j["rectify_output"] = c.rectify_output;
  j["seed"] = c.seed;
  return j;
}

std::string series_csv(const TrainLog& log) {
  csv::Writer w({"epoch", "split", "metric", "value"});
  for (const auto& e : log.epochs) {
    w.add_row({std::to_string(e.epoch), "test", "bal_acc", fmt(e.bal_acc)});
    w.add_row({std::to_string(e.epoch), "train", "loss", fmt(e.loss)});
    for (const auto& [split, rep] : {std::pair<const char*, const NcReport*>{"train", &e.train}, {"test", &e.test}}) {
      const auto vals = rep->values();
      for (std::size_t i = 0; i < vals.size(); ++i)
        w.add_row({std::to_string(e.epoch), split, NcReport::field_names()[i], fmt(vals[i])});
    }
  }
  return w.str();
}

struct Stats {
  double mean = kNaN;
  double std = kNaN;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(v / static_cast<double>(xs.size()));
  return s;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Outcome train_body(const std::string& text, const fs::path& out) {
  const json in = parse_config(text);
  const json ds_in = require<json>(in, "dataset");
  SyntheticDatasetSpec spec;
  spec.num_classes = require<int>(ds_in, "num_classes", "dataset.");
  spec.input_dim = require<int>(ds_in, "input_dim", "dataset.");
  spec.n_max = require<int>(ds_in, "n_max", "dataset.");
  spec.imbalance_ratio = require<double>(ds_in, "imbalance_ratio", "dataset.");
  spec.separation = get_or<double>(ds_in, "separation", spec.separation, "dataset.");
  spec.noise = get_or<double>(ds_in, "noise", spec.noise, "dataset.");
  spec.test_per_class = get_or<int>(ds_in, "test_per_class", spec.test_per_class, "dataset.");
  const auto regimes = list_or<std::string>(in, "regimes", {});
  if (regimes.empty()) throw ConfigError("config: missing required field 'regimes'");
  const auto seeds = list_or<std::uint64_t>(in, "seeds", {});
  if (seeds.empty()) throw ConfigError("config: missing required field 'seeds'");
  const int epochs = require<int>(in, "epochs");
  const json common = get_or<json>(in, "training", json::object());
  const json per_regime = get_or<json>(in, "overrides", json::object());

  json cfg;
  cfg["dataset"] = {{"num_classes", spec.num_classes}, {"input_dim", spec.input_dim},   {"n_max", spec.n_max},
                    {"imbalance_ratio", spec.imbalance_ratio}, {"separation", spec.separation},
                    {"noise", spec.noise},     {"test_per_class", spec.test_per_class}};
  cfg["regimes"] = regimes;
  cfg["seeds"] = seeds;
  cfg["epochs"] = epochs;
  cfg["training"] = common;
  cfg["overrides"] = per_regime;

  // Resolve every regime config before any training so errors surface early.
  std::vector<TrainConfig> resolved;
  json resolved_json;
  for (const auto& name : regimes) {
    TrainConfig c = regime_preset(name, epochs);
    apply_overrides(c, common, "training.");
    if (per_regime.contains(name)) apply_overrides(c, per_regime.at(name), "overrides." + name + ".");
    c.validate();
    resolved.push_back(c);
    resolved_json[name] = train_config_json(c);
  }
  cfg["resolved"] = resolved_json;

  RunDir top(out);
  json runs = json::array();
  std::map<std::string, std::vector<double>> accs, stds;
  std::vector<svg::Series> acc_series, std_series;
  for (std::uint64_t master : seeds) {
    SyntheticDatasetSpec s = spec;
    s.seed = derive_seed(master, "dataset");
    const DatasetPair data = make_imbalanced_dataset(s);
    for (TrainConfig c : resolved) {
      c.seed = derive_seed(master, "trainer");
      const TrainResult r = train(data, c);
      RunDir run(out / c.regime / ("seed_" + std::to_string(master)));
      run.write("trainlog.csv", r.log.to_csv());
      run.write("nc_series.csv", series_csv(r.log));
      run.write("model.json", r.model.to_json() + "\n");
      {
        std::vector<std::string> hdr{"class"};
        for (Eigen::Index i = 0; i < r.classifier.rows(); ++i) hdr.push_back("x" + std::to_string(i));
        csv::Writer cw(hdr);
        for (Eigen::Index k = 0; k < r.classifier.cols(); ++k) {
          std::vector<std::string> row{std::to_string(k)};
          for (Eigen::Index i = 0; i < r.classifier.rows(); ++i) row.push_back(fmt(r.classifier(i, k)));
          cw.add_row(std::move(row));
        }
        run.write("classifier.csv", cw.str());
      }
      svg::Series sa{c.regime + " seed " + std::to_string(master), {}, {}};
      svg::Series ss = sa;
      for (const auto& e : r.log.epochs) {
        sa.x.push_back(e.epoch);
        sa.y.push_back(e.bal_acc);
        ss.x.push_back(e.epoch);
        ss.y.push_back(0.5 * (e.train.cos_ff_std + e.train.cos_fc_std));
      }
      acc_series.push_back(sa);
      std_series.push_back(ss);

      const auto& fin = r.log.epochs.back();
      json res;
      res["regime"] = c.regime;
      res["seed"] = master;
      res["final_bal_acc"] = fin.bal_acc;
      res["final_loss"] = nullable(fin.loss);
      res["final_quarter_panel_std"] = nullable(r.log.final_quarter_panel_std());
      res["classifier_unchanged"] = c.classifier == ClassifierKind::FixedEtf ? json(r.classifier == r.initial_classifier)
                                                                             : json(nullptr);
      res["train_nc"] = json::parse(fin.train.to_json());
      res["test_nc"] = json::parse(fin.test.to_json());
      run.write("summary.json", res.dump(2) + "\n");
      json rcfg = train_config_json(c);
      rcfg["master_seed"] = master;
      rcfg["dataset"] = cfg["dataset"];
      rcfg["dataset"]["seed"] = s.seed;
      run.manifest("train_run", rcfg, res);
      runs.push_back(res);
      accs[c.regime].push_back(fin.bal_acc);
      stds[c.regime].push_back(r.log.final_quarter_panel_std());
    }
  }
  json per = json::array();
  for (const auto& name : regimes) {
    const Stats a = stats(accs[name]);
    const Stats p = stats(stds[name]);
    per.push_back({{"regime", name},
                   {"seeds", accs[name].size()},
                   {"bal_acc_mean", nullable(a.mean)},
                   {"bal_acc_std", nullable(a.std)},
                   {"panel_std_mean", nullable(p.mean)},
                   {"panel_std_std", nullable(p.std)}});
  }
  json res;
  res["regimes"] = per;
  res["runs"] = runs;
  top.write("summary.json", res.dump(2) + "\n");
  top.write("bal_acc.svg", svg::line_chart(acc_series, {"Balanced test accuracy", "epoch", "balanced accuracy", false}));
  top.write("panel_std.svg",
            svg::line_chart(std_series, {"Cosine-panel std (train)", "epoch", "mean of ff/fc std", false}));
  top.manifest("train", cfg, res);
  return {kOk, "train: " + std::to_string(runs.size()) + " runs complete", res.dump()};
}

// ---------------------------------------------------------------- report

Outcome report_body(const std::string& text, const fs::path& out) {
  const json in = parse_config(text);
  const auto dirs = list_or<std::string>(in, "runs", {});
  if (dirs.empty()) throw ConfigError("report: no run directories given");
  json cfg;
  cfg["runs"] = dirs;

  std::vector<fs::path> manifests;
  for (const auto& d : dirs) {
    const fs::path root(d);
    if (!fs::is_directory(root)) throw IoError("report: '" + d + "' is not a directory");
    std::size_t found = 0;
    if (fs::exists(root / "manifest.json")) {
      manifests.push_back(root / "manifest.json");
      ++found;
    }
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == "manifest.json" && entry.path() != root / "manifest.json") {
        manifests.push_back(entry.path());
        ++found;
      }
    }
    if (!found) throw IoError("report: no manifest.json under '" + d + "'");
  }
  std::sort(manifests.begin(), manifests.end());
  manifests.erase(std::unique(manifests.begin(), manifests.end()), manifests.end());

  struct Run {
    std::string regime;
    std::uint64_t seed;
    double acc;
    double pstd;
    fs::path dir;
  };
  std::vector<Run> runs;
  for (const auto& m : manifests) {
    json j;
    try {
      j = json::parse(csv::read_file(m));
    } catch (const json::exception& e) {
      throw IoError("report: unreadable manifest '" + m.string() + "': " + e.what());
    }
    if (j.value("command", "") != "train_run") continue;
    const json& r = j.at("results");
    auto num = [](const json& v) { return v.is_number() ? v.get<double>() : kNaN; };
    runs.push_back({r.at("regime").get<std::string>(), r.at("seed").get<std::uint64_t>(), num(r.at("final_bal_acc")),
                    num(r.at("final_quarter_panel_std")), m.parent_path()});
  }
  if (runs.empty()) throw IoError("report: no training-run manifests found");
  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    return a.regime != b.regime ? a.regime < b.regime : a.seed < b.seed;
  });

  RunDir dir(out);
  csv::Writer sw({"regime", "seeds", "bal_acc_mean", "bal_acc_std", "panel_std_mean", "panel_std_std"});
  csv::Writer lw({"regime", "seed", "epoch", "metric", "value"});
  json rows = json::array();
  for (std::size_t i = 0; i < runs.size();) {
    std::size_t j = i;
    std::vector<double> a, p;
    while (j < runs.size() && runs[j].regime == runs[i].regime) {
      a.push_back(runs[j].acc);
      p.push_back(runs[j].pstd);
      const csv::Table t = csv::load(runs[j].dir / "trainlog.csv");
      for (const auto& row : t.rows)
        for (std::size_t c = 1; c < t.header.size(); ++c)
          lw.add_row({runs[j].regime, std::to_string(runs[j].seed), row[0], t.header[c], row[c]});
      ++j;
    }
    const Stats sa = stats(a), sp = stats(p);
    sw.add_row({runs[i].regime, std::to_string(a.size()), fmt(sa.mean), fmt(sa.std), fmt(sp.mean), fmt(sp.std)});
    rows.push_back({{"regime", runs[i].regime},
                    {"seeds", a.size()},
                    {"bal_acc_mean", nullable(sa.mean)},
                    {"bal_acc_std", nullable(sa.std)},
                    {"panel_std_mean", nullable(sp.mean)},
                    {"panel_std_std", nullable(sp.std)}});
    i = j;
  }
  dir.write("summary.csv", sw.str());
  dir.write("long.csv", lw.str());
  json res;
  res["regimes"] = rows;
  dir.write("summary.json", res.dump(2) + "\n");
  dir.manifest("report", cfg, res);
  return {kOk, "report: " + std::to_string(rows.size()) + " regime rows from " + std::to_string(runs.size()) + " runs",
          res.dump()};
}

}  // namespace

Outcome cmd_etf(const std::string& c, const fs::path& o) {
  return guarded([&] { return etf_body(c, o); });
}
Outcome cmd_peeled(const std::string& c, const fs::path& o) {
  return guarded([&] { return peeled_body(c, o); });
}
Outcome cmd_regularity(const std::string& c, const fs::path& o) {
  return guarded([&] { return regularity_body(c, o); });
}
Outcome cmd_train(const std::string& c, const fs::path& o) {
  return guarded([&] { return train_body(c, o); });
}
Outcome cmd_report(const std::string& c, const fs::path& o) {
  return guarded([&] { return report_body(c, o); });
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"etf", "peeled", "regularity", "train", "report"};
  return names;
}

Outcome run_command(const std::string& name, const std::string& config_json, const fs::path& out) {
  if (name == "etf") return cmd_etf(config_json, out);
  if (name == "peeled") return cmd_peeled(config_json, out);
  if (name == "regularity") return cmd_regularity(config_json, out);
  if (name == "train") return cmd_train(config_json, out);
  if (name == "report") return cmd_report(config_json, out);
  return {kConfig, "unknown command '" + name + "'", ""};
}

}  // namespace etfc::experiments
