// Command-line front end. Talks to the engine only through the C API.
#include "prefsdm/prefsdm.h"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  int exit_code;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string profile;
  bool resume = false;
  int jobs = 0;
};

int exit_code_for(psdm_status s) {
  return (s == PSDM_ERR_CONFIG || s == PSDM_ERR_INVALID_ARGUMENT) ? kExitUsage : kExitRuntime;
}

void check(psdm_status s, const std::string& what) {
  if (s == PSDM_OK) return;
  std::cerr << "prefsdm: " << what << ": " << psdm_status_name(s) << ": " << psdm_last_error() << '\n';
  throw Failure{exit_code_for(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "prefsdm: " << msg << '\n';
  throw Failure{kExitUsage};
}

struct StringDeleter {
  void operator()(char* s) const { psdm_string_free(s); }
};
using CString = std::unique_ptr<char, StringDeleter>;

struct ConfigDeleter {
  void operator()(psdm_config* c) const { psdm_config_free(c); }
};
struct DatasetDeleter {
  void operator()(psdm_dataset* d) const { psdm_dataset_free(d); }
};
struct FitDeleter {
  void operator()(psdm_fit* f) const { psdm_fit_free(f); }
};
using ConfigPtr = std::unique_ptr<psdm_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<psdm_dataset, DatasetDeleter>;
using FitPtr = std::unique_ptr<psdm_fit, FitDeleter>;

ConfigPtr make_config(const Common& c) {
  psdm_config* raw = nullptr;
  const char* profile = c.profile.empty() ? nullptr : c.profile.c_str();
  if (!c.config.empty()) {
    check(psdm_config_load(c.config.c_str(), profile, &raw), "loading " + c.config);
  } else {
    check(psdm_config_new(profile ? profile : "desk", &raw), "creating configuration");
  }
  ConfigPtr cfg(raw);
  if (c.seed) check(psdm_config_set_seed(cfg.get(), *c.seed), "setting seed");
  if (c.jobs > 0) check(psdm_config_set_jobs(cfg.get(), c.jobs), "setting jobs");
  return cfg;
}

std::uint64_t seed_of(const Common& c, const psdm_config* cfg) {
  if (c.seed) return *c.seed;
  // Fall back to the configured master seed, read back from the canonical text.
  char* text = nullptr;
  check(psdm_config_text(cfg, &text), "reading configuration");
  CString owned(text);
  const std::string s(text);
  const auto pos = s.find("master_seed = ");
  if (pos == std::string::npos) return 0;
  return std::stoull(s.substr(pos + 14));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out || !(out << text) || !out.flush()) {
    std::cerr << "prefsdm: cannot write " << p << '\n';
    throw Failure{kExitRuntime};
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << "prefsdm: cannot create " << dir << ": " << ec.message() << '\n';
    throw Failure{kExitRuntime};
  }
}

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "flat key = value configuration file")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the configuration)");
  cmd->add_option("--profile", c.profile, "study profile")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_flag("--resume", c.resume, "continue an interrupted experiment");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void log_line(const char* line, void*) { std::cerr << line << '\n'; }

int cmd_simulate(const Common& c, double range, double prop, int n, int replicate) {
  ConfigPtr cfg = make_config(c);
  psdm_dataset* raw = nullptr;
  check(psdm_simulate(cfg.get(), range, prop, n, replicate, &raw), "simulating");
  DatasetPtr d(raw);
  check(psdm_dataset_save(d.get(), c.out.c_str()), "saving dataset to " + c.out);
  int np = 0, nr = 0, nt = 0;
  check(psdm_dataset_counts(d.get(), &np, &nr, &nt), "reading dataset");
  std::cout << "wrote " << c.out << ": " << np << " preferential, " << nr << " random, " << nt << " test points\n";
  return kExitOk;
}

int cmd_fit(const Common& c, const std::string& dataset_dir, const std::string& model, int draws) {
  ConfigPtr cfg = make_config(c);
  psdm_dataset* raw = nullptr;
  check(psdm_dataset_load(dataset_dir.c_str(), &raw), "loading dataset " + dataset_dir);
  DatasetPtr d(raw);
  const std::uint64_t seed = seed_of(c, cfg.get());
  std::vector<std::string> models;
  if (model == "all") {
    models = {"geo", "pref", "mix"};
  } else {
    models = {model};
  }
  ensure_dir(c.out);
  for (const auto& m : models) {
    psdm_fit* fraw = nullptr;
    check(psdm_fit_model(cfg.get(), d.get(), m.c_str(), seed, &fraw), "fitting " + m);
    FitPtr f(fraw);
    char* fit_json = nullptr;
    check(psdm_fit_json(f.get(), &fit_json), "serializing fit");
    CString fj(fit_json);
    char* metrics_json = nullptr;
    check(psdm_fit_evaluate(f.get(), d.get(), draws, seed + 1, &metrics_json), "evaluating " + m);
    CString mj(metrics_json);
    const auto dir = std::filesystem::path(c.out);
    write_text(dir / ("fit_" + m + ".json"), std::string(fit_json) + '\n');
    write_text(dir / ("metrics_" + m + ".json"), std::string(metrics_json) + '\n');
    double ev = 0.0;
    check(psdm_fit_log_evidence(f.get(), &ev), "reading fit");
    std::cout << m << ": log evidence " << ev << '\n';
  }
  return kExitOk;
}

int cmd_experiment(const Common& c) {
  ConfigPtr cfg = make_config(c);
  int specs = 0;
  check(psdm_config_scenario_count(cfg.get(), &specs), "reading configuration");
  std::cerr << "running " << specs << " scenario replicates into " << c.out << '\n';
  char* summary = nullptr;
  check(psdm_run_experiment(cfg.get(), c.out.c_str(), c.resume ? 1 : 0, c.jobs, &log_line, nullptr, &summary),
        "experiment");
  CString s(summary);
  std::cout << summary << '\n';
  return kExitOk;
}

int cmd_report(const Common& c, std::string results) {
  if (!c.config.empty() || c.seed || !c.profile.empty() || c.resume || c.jobs > 0) {
    usage_error("report only takes --out and --results");
  }
  if (results.empty()) results = (std::filesystem::path(c.out) / "results.jsonl").string();
  char* listing = nullptr;
  check(psdm_report(results.c_str(), c.out.c_str(), &listing), "report");
  CString l(listing);
  std::cout << listing;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and inference for preferentially sampled species distribution data"};
  app.set_version_flag("--version", std::string(psdm_version()));
  app.require_subcommand(1);

  Common common;
  double range = 0.5, prop = 0.5;
  int n_total = 100, replicate = 0;
  auto* sim = app.add_subcommand("simulate", "simulate one dataset and write it to --out");
  add_common(sim, common, true);
  sim->add_option("--range", range, "practical range of the latent field")->check(CLI::PositiveNumber);
  sim->add_option("--prop-random", prop, "share of uniformly placed points")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--n-total", n_total, "number of training observations")->check(CLI::PositiveNumber);
  sim->add_option("--replicate", replicate, "replicate index")->check(CLI::NonNegativeNumber);

  std::string dataset_dir, model = "all";
  int draws = 1000;
  auto* fitc = app.add_subcommand("fit", "fit models to a saved dataset");
  add_common(fitc, common, true);
  fitc->add_option("--dataset", dataset_dir, "directory written by simulate")->required()->check(CLI::ExistingDirectory);
  fitc->add_option("--model", model, "geo, pref, mix or all")->check(CLI::IsMember({"geo", "pref", "mix", "all"}));
  fitc->add_option("--draws", draws, "posterior draws for the metrics")->check(CLI::Range(2, 1000000));

  auto* exp = app.add_subcommand("experiment", "run the factorial simulation study");
  add_common(exp, common, true);

  std::string results;
  auto* rep = app.add_subcommand("report", "summarize a results archive");
  add_common(rep, common, true);
  rep->add_option("--results", results, "results.jsonl (default: <out>/results.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common, range, prop, n_total, replicate);
    if (fitc->parsed()) return cmd_fit(common, dataset_dir, model, draws);
    if (exp->parsed()) return cmd_experiment(common);
    if (rep->parsed()) return cmd_report(common, results);
  } catch (const Failure& f) {
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "prefsdm: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
