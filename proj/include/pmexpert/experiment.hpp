#ifndef PMEXPERT_EXPERIMENT_HPP
#define PMEXPERT_EXPERIMENT_HPP

// Experiment configuration files and the run / batch / sweep drivers behind
// the command-line tool.
//
// Configs are JSON objects; every key is checked and unknown keys are
// rejected. Expert indices in configs and CSV output are 1-based.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pmexpert/class_network.hpp"
#include "pmexpert/environment.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/evaluation.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/learner.hpp"

namespace pmexpert {

using json = nlohmann::json;

enum ExitCode : int { kExitOk = 0, kExitValidationFailure = 1, kExitConfigError = 2 };

struct ExperimentConfig {
  std::size_t experts = 0;
  std::size_t horizon = 0;
  json kernel_spec;
  LearnerConfig learner;
  LossProcess losses = LossProcess::iid({0.5}, 0.0, {});
  FeedbackProcess feedback = FeedbackProcess::full(1);
  CompetitorSpec competitor;
  std::uint64_t base_seed = 0;
  std::size_t seed_count = 1;
  std::string output = "out";
  std::vector<std::size_t> sweep_horizons;
  bool per_run_csv = false;

  Scenario scenario(std::optional<std::size_t> horizon_override = std::nullopt) const {
    Scenario sc;
    sc.learner = learner;
    sc.losses = losses;
    sc.feedback = feedback;
    sc.horizon = horizon_override.value_or(horizon);
    sc.competitor = competitor;
    sc.base_seed = base_seed;
    return sc;
  }
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, (path.empty() ? std::string() : path + ": ") + msg);
}

inline void allow_keys(const json& obj, const std::string& path, std::set<std::string> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [k, v] : obj.items())
    if (!keys.count(k)) fail(path, "unknown key \"" + k + "\"");
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path, "missing key \"" + key + "\"");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline std::size_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(path, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

/// 1-based expert index in the file, 0-based in memory.
inline std::size_t expert_index(const json& v, std::size_t experts, const std::string& path) {
  const std::size_t m = count(v, path);
  if (m < 1 || m > experts) fail(path, "expert index must lie in 1.." + std::to_string(experts));
  return m - 1;
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<double>> matrix(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < v.size(); ++i) rows.push_back(numbers(v[i], path + "[" + std::to_string(i) + "]"));
  return rows;
}

inline LossRange range(const json& v, const std::string& path) {
  const auto r = numbers(v, path);
  if (r.size() != 2) fail(path, "range must be [B, A]");
  if (!(r[0] < r[1])) fail(path, "range needs B < A");
  return {r[0], r[1]};
}

inline LossMatrix read_loss_csv(const std::filesystem::path& file, const std::string& path) {
  std::ifstream in(file);
  if (!in) fail(path, "cannot open loss file " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      fail(path, file.string() + " line " + std::to_string(line_no) + " is not numeric");
    }
    rows.push_back(std::move(row));
  }
  try {
    return LossMatrix(rows);
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

inline KernelPtr kernel(const json& v, std::size_t experts, const std::string& path) {
  allow_keys(v, path, {"type", "alpha", "prior", "classes", "transition"});
  const auto& type = require(v, "type", path);
  if (!type.is_string()) fail(path + ".type", "expected a string");
  const auto name = type.get<std::string>();
  KernelPtr k;
  try {
    if (name == "fixed") {
      if (v.size() != 1) fail(path, "fixed kernel takes no parameters");
      k = fixed_kernel(experts);
    } else if (name == "fixed_share") {
      const double alpha = number(require(v, "alpha", path), path + ".alpha");
      std::vector<double> prior;
      if (v.contains("prior")) prior = numbers(v.at("prior"), path + ".prior");
      if (v.contains("classes") || v.contains("transition")) fail(path, "fixed_share takes alpha and prior only");
      k = fixed_share_kernel(experts, alpha, prior);
    } else if (name == "custom") {
      if (v.contains("alpha")) fail(path, "custom kernel takes classes, prior and transition");
      const auto& cls = require(v, "classes", path);
      if (!cls.is_array()) fail(path + ".classes", "expected an array");
      std::vector<ClassId> classes;
      for (std::size_t i = 0; i < cls.size(); ++i) {
        const std::string p = path + ".classes[" + std::to_string(i) + "]";
        if (cls[i].is_object()) {
          allow_keys(cls[i], p, {"expert", "tag"});
          const std::size_t m = expert_index(require(cls[i], "expert", p), experts, p + ".expert");
          const std::uint64_t tag = cls[i].contains("tag") ? count(cls[i].at("tag"), p + ".tag") : 0;
          classes.push_back({m, tag});
        } else {
          classes.push_back({expert_index(cls[i], experts, p), 0});
        }
      }
      k = std::make_shared<TableKernel>(experts, classes, numbers(require(v, "prior", path), path + ".prior"),
                                        matrix(require(v, "transition", path), path + ".transition"));
    } else {
      fail(path + ".type", "unknown kernel type \"" + name + "\"");
    }
    validate(*k);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(path, e.what());
  }
  return k;
}

inline LossProcess losses(const json& v, std::size_t experts, const std::filesystem::path& base_dir,
                          const std::string& path) {
  const auto& type = require(v, "type", path);
  if (!type.is_string()) fail(path + ".type", "expected a string");
  const auto name = type.get<std::string>();
  const LossRange r = range(require(v, "range", path), path + ".range");
  try {
    if (name == "scripted") {
      allow_keys(v, path, {"type", "range", "values", "csv"});
      if (v.contains("values") == v.contains("csv")) fail(path, "scripted losses need exactly one of values, csv");
      LossMatrix m;
      if (v.contains("values")) {
        m = LossMatrix(matrix(v.at("values"), path + ".values"));
      } else {
        if (!v.at("csv").is_string()) fail(path + ".csv", "expected a file name");
        std::filesystem::path file = v.at("csv").get<std::string>();
        if (file.is_relative()) file = base_dir / file;
        m = read_loss_csv(file, path + ".csv");
      }
      if (m.experts() != experts)
        fail(path, "scripted losses have " + std::to_string(m.experts()) + " columns for " +
                       std::to_string(experts) + " experts");
      return LossProcess::scripted(std::move(m), r);
    }
    if (name == "iid") {
      allow_keys(v, path, {"type", "range", "means", "spread"});
      auto means = numbers(require(v, "means", path), path + ".means");
      if (means.size() != experts) fail(path + ".means", "need one mean per expert");
      return LossProcess::iid(std::move(means), number(require(v, "spread", path), path + ".spread"), r);
    }
    if (name == "piecewise") {
      allow_keys(v, path, {"type", "range", "boundaries", "best_experts", "gap", "spread"});
      auto bounds = numbers(require(v, "boundaries", path), path + ".boundaries");
      const auto& best = require(v, "best_experts", path);
      if (!best.is_array()) fail(path + ".best_experts", "expected an array");
      std::vector<std::size_t> best_experts;
      for (std::size_t i = 0; i < best.size(); ++i)
        best_experts.push_back(expert_index(best[i], experts, path + ".best_experts[" + std::to_string(i) + "]"));
      std::optional<double> gap, spread;
      if (v.contains("gap")) gap = number(v.at("gap"), path + ".gap");
      if (v.contains("spread")) spread = number(v.at("spread"), path + ".spread");
      return LossProcess::piecewise(std::move(bounds), std::move(best_experts), r, gap, spread);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(path, e.what());
  }
  fail(path + ".type", "unknown loss process \"" + name + "\"");
}

inline FeedbackProcess feedback(const json& v, std::size_t experts, const std::string& path) {
  allow_keys(v, path, {"mode", "matrix", "matrices"});
  const auto& mode = require(v, "mode", path);
  if (!mode.is_string()) fail(path + ".mode", "expected a string");
  const auto name = mode.get<std::string>();
  try {
    if (name == "full") {
      if (v.size() != 1) fail(path, "full feedback takes no matrix");
      return FeedbackProcess::full(experts);
    }
    if (name == "bandit") {
      if (v.size() != 1) fail(path, "bandit feedback takes no matrix");
      return FeedbackProcess::constant(FeedbackMatrix::bandit(experts));
    }
    if (name == "strict") {
      if (v.contains("matrix") == v.contains("matrices"))
        fail(path, "strict feedback needs exactly one of matrix, matrices");
      auto check_size = [&](const FeedbackMatrix& f, const std::string& p) {
        if (f.size() != experts) fail(p, "matrix is " + std::to_string(f.size()) + " wide for " +
                                             std::to_string(experts) + " experts");
      };
      if (v.contains("matrix")) {
        FeedbackMatrix f(matrix(v.at("matrix"), path + ".matrix"), FeedbackMode::strict);
        check_size(f, path + ".matrix");
        try {
          return FeedbackProcess::constant(std::move(f));
        } catch (const Error& e) {
          fail(path + ".matrix", e.what());
        }
      }
      const auto& ms = v.at("matrices");
      if (!ms.is_array()) fail(path + ".matrices", "expected an array of matrices");
      std::vector<FeedbackMatrix> seq;
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string p = path + ".matrices[" + std::to_string(i) + "]";
        seq.emplace_back(matrix(ms[i], p), FeedbackMode::strict);
        check_size(seq.back(), p);
        try {
          validate(seq.back());
        } catch (const Error& e) {
          fail(p, e.what());
        }
      }
      return FeedbackProcess::scripted(std::move(seq));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(path, e.what());
  }
  fail(path + ".mode", "unknown feedback mode \"" + name + "\"");
}

inline CompetitorSpec competitor(const json& v, std::size_t experts, const std::string& path) {
  allow_keys(v, path, {"type", "expert", "k", "experts"});
  const auto& type = require(v, "type", path);
  if (!type.is_string()) fail(path + ".type", "expected a string");
  const auto name = type.get<std::string>();
  if (name == "best_fixed") return CompetitorSpec::best_fixed();
  if (name == "fixed") return CompetitorSpec::fixed(expert_index(require(v, "expert", path), experts, path + ".expert"));
  if (name == "best_k_switch") return CompetitorSpec::best_k_switch(count(require(v, "k", path), path + ".k"));
  if (name == "sequence") {
    const auto& seq = require(v, "experts", path);
    if (!seq.is_array()) fail(path + ".experts", "expected an array");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < seq.size(); ++i)
      out.push_back(expert_index(seq[i], experts, path + ".experts[" + std::to_string(i) + "]"));
    return CompetitorSpec::sequence(std::move(out));
  }
  fail(path + ".type", "unknown competitor type \"" + name + "\"");
}

inline std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace config_detail

/// Parses a config document; relative file references resolve against base_dir.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using namespace config_detail;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("", "malformed JSON at " + locate(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  allow_keys(doc, "", {"experts", "horizon", "kernel", "W_budget", "gamma", "epsilon", "fixed_eta", "losses",
                       "feedback", "competitor", "seeds", "output", "sweep", "per_run_csv"});
  ExperimentConfig cfg;
  cfg.experts = count(require(doc, "experts", ""), "experts");
  if (cfg.experts == 0) fail("experts", "need at least one expert");
  cfg.horizon = count(require(doc, "horizon", ""), "horizon");
  if (cfg.horizon == 0) fail("horizon", "horizon must be at least 1");

  cfg.kernel_spec = require(doc, "kernel", "");
  LearnerConfig& lc = cfg.learner;
  lc.num_experts = cfg.experts;
  lc.kernel = kernel(cfg.kernel_spec, cfg.experts, "kernel");
  if (doc.contains("gamma")) {
    lc.gamma = number(doc.at("gamma"), "gamma");
    if (!(*lc.gamma > 0.0)) fail("gamma", "gamma must be positive");
  }
  if (doc.contains("epsilon")) {
    const auto& e = doc.at("epsilon");
    try {
      lc.epsilon_override = e.is_array() ? EpsilonSchedule::explicit_values(numbers(e, "epsilon"))
                                         : EpsilonSchedule::constant(number(e, "epsilon"));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ConfigError) throw;
      fail("epsilon", err.what());
    }
  }
  if (doc.contains("W_budget")) {
    lc.w_budget = number(doc.at("W_budget"), "W_budget");
    if (!(lc.w_budget > 0.0)) fail("W_budget", "W budget must be positive");
  } else if (!(lc.gamma && lc.epsilon_override)) {
    fail("", "missing key \"W_budget\" (required unless both gamma and epsilon are given)");
  }
  if (doc.contains("fixed_eta")) {
    lc.fixed_eta = number(doc.at("fixed_eta"), "fixed_eta");
    if (!(*lc.fixed_eta > 0.0)) fail("fixed_eta", "fixed eta must be positive");
  }

  cfg.losses = losses(require(doc, "losses", ""), cfg.experts, base_dir, "losses");
  if (cfg.losses.kind() == LossProcess::Kind::scripted && cfg.losses.scripted_losses().rounds() < cfg.horizon)
    fail("losses", "scripted losses cover " + std::to_string(cfg.losses.scripted_losses().rounds()) +
                       " rounds, horizon is " + std::to_string(cfg.horizon));
  cfg.feedback = feedback(require(doc, "feedback", ""), cfg.experts, "feedback");
  cfg.competitor = competitor(require(doc, "competitor", ""), cfg.experts, "competitor");
  if (cfg.competitor.kind == CompetitorSpec::Kind::sequence && cfg.competitor.experts.size() < cfg.horizon)
    fail("competitor.experts", "sequence is shorter than the horizon");

  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    allow_keys(s, "seeds", {"base", "count"});
    cfg.base_seed = count(require(s, "base", "seeds"), "seeds.base");
    cfg.seed_count = count(require(s, "count", "seeds"), "seeds.count");
    if (cfg.seed_count == 0) fail("seeds.count", "need at least one seed");
  }
  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) fail("output", "expected a directory name");
    cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    allow_keys(s, "sweep", {"horizons"});
    const auto& hs = require(s, "horizons", "sweep");
    if (!hs.is_array()) fail("sweep.horizons", "expected an array");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto h = count(hs[i], "sweep.horizons[" + std::to_string(i) + "]");
      if (h == 0) fail("sweep.horizons[" + std::to_string(i) + "]", "horizon must be at least 1");
      cfg.sweep_horizons.push_back(h);
    }
  }
  if (doc.contains("per_run_csv")) {
    if (!doc.at("per_run_csv").is_boolean()) fail("per_run_csv", "expected true or false");
    cfg.per_run_csv = doc.at("per_run_csv").get<bool>();
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.parent_path().empty() ? "." : file.parent_path());
}

/// %.17g rendering, identical across runs.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_round_csv_header(std::ostream& os, std::size_t experts) {
  os << "run,t,epsilon,eta,psi,V,D,i_t,loss,cum_loss,competitor_arm,competitor_loss,regret";
  for (std::size_t m = 1; m <= experts; ++m) os << ",q_" << m;
  os << '\n';
}

/// One row per round; `regret` is cumulative.
inline void write_round_csv_rows(std::ostream& os, std::size_t run, const GameTranscript& tr,
                                 const CompetitorSequence& comp, const LossMatrix& losses) {
  double cum = 0.0, cum_comp = 0.0;
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    const double comp_loss = losses(i, comp.expert_at(i));
    cum += r.selected_loss;
    cum_comp += comp_loss;
    os << run << ',' << r.t << ',' << format_double(r.epsilon) << ',' << format_double(r.eta) << ','
       << format_double(r.psi) << ',' << format_double(r.V) << ',' << format_double(r.D) << ','
       << r.selected + 1 << ',' << format_double(r.selected_loss) << ',' << format_double(cum) << ','
       << comp.expert_at(i) + 1 << ',' << format_double(comp_loss) << ',' << format_double(cum - cum_comp);
    for (double q : r.q) os << ',' << format_double(q);
    os << '\n';
  }
}

inline json diagnostics_json(const LemmaDiagnostics& d) {
  json out = json::object();
  for (const auto* c : d.all()) {
    json item = {{"passed", c->passed},
                 {"lhs", c->final_lhs},
                 {"rhs", c->final_rhs},
                 {"worst_slack", c->worst_slack},
                 {"worst_round", c->worst_round}};
    if (!c->detail.empty()) item["detail"] = c->detail;
    out[c->name] = item;
  }
  return out;
}

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json report_json(const ExperimentConfig& cfg, const RunArtifacts& a) {
  const auto& r = a.report;
  json out = {{"seed", a.seed},
              {"experts", cfg.experts},
              {"horizon", a.transcript.records.size()},
              {"cumulative_loss", r.cumulative_loss},
              {"competitor_loss", r.competitor_loss},
              {"realized_regret", r.realized_regret},
              {"normalized_regret", r.normalized_regret},
              {"loss_range", {cfg.losses.range().low, cfg.losses.range().high}},
              {"competitor_switches", switch_count(a.competitor)},
              {"complexity", finite_or_null(r.complexity)},
              {"W_budget", cfg.learner.w_budget},
              {"gamma", cfg.learner.gamma_value()},
              {"bound", {{"theorem", finite_or_null(r.bound_value)}, {"cleaner", finite_or_null(r.bound_cleaner)}}},
              {"warnings", r.warnings}};
  if (r.diagnostics) out["lemmas"] = diagnostics_json(*r.diagnostics);
  return out;
}

inline json batch_json(const ExperimentConfig& cfg, std::size_t horizon, const BatchSummary& s) {
  json runs = json::array();
  for (const auto& r : s.runs)
    runs.push_back({{"seed", r.seed},
                    {"regret", r.regret},
                    {"normalized_regret", r.normalized_regret},
                    {"complexity", finite_or_null(r.complexity)},
                    {"lemmas_passed", r.lemmas_passed}});
  return {{"experts", cfg.experts},
          {"horizon", horizon},
          {"n_seeds", s.n_seeds},
          {"base_seed", cfg.base_seed},
          {"mean_regret", s.mean_regret},
          {"std_error", s.std_error},
          {"std_error_defined", s.std_error_defined},
          {"ci95", {s.ci_low, s.ci_high}},
          {"mean_normalized_regret", s.mean_normalized_regret},
          {"normalized_std_error", s.normalized_std_error},
          {"normalized_ci95", {s.normalized_ci_low, s.normalized_ci_high}},
          {"max_complexity", finite_or_null(s.max_complexity)},
          {"bound", {{"theorem", finite_or_null(s.bound_value)}, {"cleaner", finite_or_null(s.bound_cleaner)}}},
          {"lemma_failures", s.lemma_failures},
          {"warnings", s.warnings},
          {"runs", runs}};
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + file.string());
  out << text;
}

struct CommandOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::size_t threads = 1;
  std::ostream* log = &std::cout;
};

inline std::filesystem::path output_dir(const ExperimentConfig& cfg, const CommandOptions& opt) {
  std::filesystem::path dir = opt.out_dir.value_or(std::filesystem::path(cfg.output));
  std::filesystem::create_directories(dir);
  return dir;
}

/// Single game: rounds.csv and summary.json.
inline int run_command(ExperimentConfig cfg, const CommandOptions& opt) {
  if (opt.seed) cfg.base_seed = *opt.seed;
  const auto dir = output_dir(cfg, opt);
  const auto a = run_scenario(cfg.scenario(), cfg.base_seed);

  std::ostringstream csv;
  write_round_csv_header(csv, cfg.experts);
  write_round_csv_rows(csv, 0, a.transcript, a.competitor, a.losses);
  write_text(dir / "rounds.csv", csv.str());

  const auto summary = report_json(cfg, a);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  *opt.log << "regret " << format_double(a.report.realized_regret) << " (normalized "
           << format_double(a.report.normalized_regret) << ", bound " << format_double(a.report.bound_value)
           << ")\n";
  for (const auto& w : a.report.warnings) *opt.log << "warning: " << w << '\n';
  return kExitOk;
}

/// Monte-Carlo over seeds: batch_summary.json, optionally runs.csv.
inline int batch_command(ExperimentConfig cfg, const CommandOptions& opt) {
  if (opt.seed) cfg.base_seed = *opt.seed;
  if (opt.runs) cfg.seed_count = *opt.runs;
  const auto dir = output_dir(cfg, opt);
  const auto sc = cfg.scenario();
  const auto s = monte_carlo(sc, cfg.seed_count, opt.threads);
  write_text(dir / "batch_summary.json", batch_json(cfg, cfg.horizon, s).dump(2) + "\n");
  if (cfg.per_run_csv) {
    std::ostringstream csv;
    write_round_csv_header(csv, cfg.experts);
    for (std::size_t i = 0; i < cfg.seed_count; ++i) {
      const auto a = run_scenario(sc, cfg.base_seed + i);
      write_round_csv_rows(csv, i, a.transcript, a.competitor, a.losses);
    }
    write_text(dir / "runs.csv", csv.str());
  }
  *opt.log << "mean regret " << format_double(s.mean_regret) << " +/- " << format_double(s.std_error)
           << " over " << s.n_seeds << " seeds; normalized 95% CI upper "
           << format_double(s.normalized_ci_high) << ", bound " << format_double(s.bound_value) << '\n';
  for (const auto& w : s.warnings) *opt.log << "warning: " << w << '\n';
  return kExitOk;
}

struct SweepResult {
  std::vector<std::size_t> horizons;
  std::vector<BatchSummary> batches;
  double slope = kNaN;
};

inline SweepResult sweep(const ExperimentConfig& cfg, std::size_t seeds, std::size_t threads) {
  if (cfg.sweep_horizons.empty()) throw Error(ErrorCode::ConfigError, "sweep: no horizons configured");
  SweepResult out;
  std::vector<ScalingPoint> points;
  for (auto h : cfg.sweep_horizons) {
    out.horizons.push_back(h);
    out.batches.push_back(monte_carlo(cfg.scenario(h), seeds, threads));
    points.push_back({static_cast<double>(h), out.batches.back().mean_regret});
  }
  out.slope = fit_scaling(points);
  return out;
}

/// Horizon sweep: scaling.csv and sweep_summary.json with the fitted slope.
inline int sweep_command(ExperimentConfig cfg, const CommandOptions& opt) {
  if (opt.seed) cfg.base_seed = *opt.seed;
  if (opt.runs) cfg.seed_count = *opt.runs;
  const auto dir = output_dir(cfg, opt);
  const auto res = sweep(cfg, cfg.seed_count, opt.threads);
  std::ostringstream csv;
  csv << "T,mean_regret,std_error,ci_low,ci_high,mean_normalized_regret,bound\n";
  json batches = json::array();
  for (std::size_t i = 0; i < res.horizons.size(); ++i) {
    const auto& b = res.batches[i];
    csv << res.horizons[i] << ',' << format_double(b.mean_regret) << ',' << format_double(b.std_error) << ','
        << format_double(b.ci_low) << ',' << format_double(b.ci_high) << ','
        << format_double(b.mean_normalized_regret) << ',' << format_double(b.bound_value) << '\n';
    auto j = batch_json(cfg, res.horizons[i], b);
    j.erase("runs");
    batches.push_back(j);
  }
  write_text(dir / "scaling.csv", csv.str());
  write_text(dir / "sweep_summary.json",
             json({{"slope", res.slope}, {"n_seeds", cfg.seed_count}, {"batches", batches}}).dump(2) + "\n");
  *opt.log << "log-log slope " << format_double(res.slope) << '\n';
  return kExitOk;
}

}  // namespace pmexpert

#endif  // PMEXPERT_EXPERIMENT_HPP
