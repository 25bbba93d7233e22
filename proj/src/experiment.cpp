#include "prefsdm/experiment.hpp"

#include "prefsdm/dataset_io.hpp"
#include "prefsdm/error.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace prefsdm {

namespace fs = std::filesystem;

std::vector<ScenarioSpec> scenario_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ScenarioSpec> out;
  for (double r : cfg.ranges) {
    for (double p : cfg.prop_random) {
      for (int n : cfg.n_total) {
        for (int rep = 0; rep < cfg.replicates; ++rep) {
          ScenarioSpec sc;
          sc.range = r;
          sc.prop_random = p;
          sc.n_total = n;
          sc.replicate = rep;
          sc.sim = cfg.sim;
          out.push_back(sc);
        }
      }
    }
  }
  return out;
}

namespace {

ScenarioResult blank_row(const ScenarioSpec& sc, ModelKind m) {
  ScenarioResult r;
  r.scenario_id = sc.id();
  r.range = sc.range;
  r.prop_random = sc.prop_random;
  r.n_total = sc.n_total;
  r.replicate = sc.replicate;
  r.model = m;
  return r;
}

std::string fit_stream(ModelKind m) { return "fit:" + std::string(to_string(m)); }
std::string draws_stream(ModelKind m) { return "draws:" + std::string(to_string(m)); }

}  // namespace

std::vector<ScenarioResult> evaluate_spec(const ScenarioSpec& sc, const ExperimentConfig& cfg,
                                          std::span<const ModelKind> models) {
  std::vector<ScenarioResult> rows;
  Dataset d;
  try {
    d = make_dataset(sc, cfg.master_seed);
  } catch (const Error& e) {
    for (ModelKind m : models) {
      ScenarioResult r = blank_row(sc, m);
      r.ok = false;
      r.error = std::string("simulation failed: ") + e.what();
      rows.push_back(std::move(r));
    }
    return rows;
  }
  const GridSpec grid = d.truth->grid;
  for (ModelKind m : models) {
    ScenarioResult r = blank_row(sc, m);
    try {
      const FitResult f = fit(m, d, grid, cfg.inference, derive_seed(cfg.master_seed, sc, fit_stream(m)));
      const ScenarioResult metrics =
          evaluate_fit(f, d, cfg.waic_draws, derive_seed(cfg.master_seed, sc, draws_stream(m)));
      r.waic = metrics.waic;
      r.p_eff = metrics.p_eff;
      r.rmse = metrics.rmse;
      r.abundance_est = metrics.abundance_est;
      r.abundance_true = metrics.abundance_true;
      r.abundance_ratio = metrics.abundance_ratio;
      r.log_evidence = metrics.log_evidence;
      r.converged = metrics.converged;
      r.n_obs = metrics.n_obs;
      r.hyper = metrics.hyper;
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const ScenarioResult& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["range"] = r.range;
  j["prop_random"] = r.prop_random;
  j["n_total"] = r.n_total;
  j["replicate"] = r.replicate;
  j["model"] = std::string(to_string(r.model));
  j["status"] = r.ok ? "ok" : "failed";
  j["error"] = r.error;
  j["waic"] = r.waic;
  j["p_eff"] = r.p_eff;
  j["rmse"] = r.rmse;
  j["abundance_est"] = r.abundance_est;
  j["abundance_true"] = r.abundance_true;
  j["abundance_ratio"] = r.abundance_ratio;
  j["log_evidence"] = r.log_evidence;
  j["converged"] = r.converged;
  j["n_obs"] = r.n_obs;
  j["eta"] = r.hyper.eta;
  j["eta_star"] = r.hyper.eta_star;
  j["beta"] = r.hyper.beta;
  j["alpha"] = r.hyper.alpha;
  j["range_hat"] = r.hyper.range();
  j["sigma_hat"] = r.hyper.sigma();
  j["tau_hat"] = r.hyper.tau();
  return j;
}

ScenarioResult result_from_json(const nlohmann::json& j) {
  try {
    ScenarioResult r;
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.range = j.at("range").get<double>();
    r.prop_random = j.at("prop_random").get<double>();
    r.n_total = j.at("n_total").get<int>();
    r.replicate = j.at("replicate").get<int>();
    r.model = parse_model_kind(j.at("model").get<std::string>());
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.value("error", "");
    r.waic = j.at("waic").get<double>();
    r.p_eff = j.at("p_eff").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.abundance_est = j.at("abundance_est").get<double>();
    r.abundance_true = j.at("abundance_true").get<double>();
    r.abundance_ratio = j.at("abundance_ratio").get<double>();
    r.log_evidence = j.at("log_evidence").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.n_obs = j.at("n_obs").get<int>();
    r.hyper.eta = j.at("eta").get<double>();
    r.hyper.eta_star = j.at("eta_star").get<double>();
    r.hyper.beta = j.at("beta").get<double>();
    r.hyper.alpha = j.at("alpha").get<double>();
    r.hyper.log_range = std::log(j.at("range_hat").get<double>());
    r.hyper.log_sigma = std::log(j.at("sigma_hat").get<double>());
    r.hyper.log_tau = std::log(j.at("tau_hat").get<double>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, std::string("malformed result row: ") + e.what());
  }
}

namespace {

// Reads complete lines only; a torn trailing line from an interrupted write is
// reported through `complete_bytes` so the caller can cut it off.
std::vector<ScenarioResult> read_rows(const fs::path& path, std::uintmax_t* complete_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto last_nl = text.rfind('\n');
  const std::size_t usable = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (complete_bytes) *complete_bytes = usable;

  std::vector<ScenarioResult> rows;
  std::size_t pos = 0;
  while (pos < usable) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(Errc::io, path.string() + ": unparsable row: " + e.what());
    }
    rows.push_back(result_from_json(j));
  }
  return rows;
}

void write_manifest(const ExperimentConfig& cfg, const fs::path& path) {
  nlohmann::ordered_json m;
  m["artifact"] = "prefsdm";
  m["version"] = PREFSDM_VERSION;
  m["profile"] = cfg.profile;
  m["config_hash"] = cfg.hash();
  m["config"] = cfg.to_text();
  m["specs"] = scenario_grid(cfg).size();
  std::ofstream out(path);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << m.dump(2) << '\n';
}

std::string manifest_hash(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, "malformed manifest " + path.string() + ": " + e.what());
  }
}

using RowKey = std::tuple<std::string, int, ModelKind>;

}  // namespace

std::vector<ScenarioResult> read_results(const fs::path& jsonl) { return read_rows(jsonl, nullptr); }

RunSummary run_experiment(const ExperimentConfig& cfg, const fs::path& outdir, const RunOptions& opts) {
  cfg.validate();
  const auto specs = scenario_grid(cfg);
  const fs::path results_path = outdir / kResultsFile;
  const fs::path manifest_path = outdir / kManifestFile;

  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) fail(Errc::io, "cannot create output directory " + outdir.string() + ": " + ec.message());

  std::set<RowKey> done;
  const bool archive_exists = fs::exists(results_path) && fs::file_size(results_path) > 0;
  if (archive_exists && !opts.resume) {
    fail(Errc::config, results_path.string() + " already exists; pass resume to continue it");
  }
  if (fs::exists(manifest_path)) {
    if (manifest_hash(manifest_path) != cfg.hash()) {
      fail(Errc::config, "configuration differs from the one recorded in " + manifest_path.string());
    }
  } else {
    write_manifest(cfg, manifest_path);
  }
  if (archive_exists) {
    std::uintmax_t complete = 0;
    for (const auto& r : read_rows(results_path, &complete)) done.insert({r.scenario_id, r.replicate, r.model});
    if (complete != fs::file_size(results_path)) fs::resize_file(results_path, complete);
  }

  std::ofstream out(results_path, std::ios::app | std::ios::binary);
  if (!out) fail(Errc::io, "cannot open " + results_path.string() + " for appending");

  RunSummary summary;
  summary.specs_total = static_cast<int>(specs.size());
  struct Work {
    const ScenarioSpec* spec;
    std::vector<ModelKind> models;
  };
  std::vector<Work> work;
  for (const auto& sc : specs) {
    Work w{&sc, {}};
    for (ModelKind m : kAllModels) {
      if (!done.contains({sc.id(), sc.replicate, m})) w.models.push_back(m);
    }
    if (w.models.empty()) {
      ++summary.specs_skipped;
    } else {
      work.push_back(std::move(w));
    }
  }
  if (opts.max_specs >= 0 && static_cast<int>(work.size()) > opts.max_specs) {
    work.resize(static_cast<std::size_t>(opts.max_specs));
  }

  const SpecEvaluator evaluator = opts.evaluator ? opts.evaluator : SpecEvaluator(evaluate_spec);
  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      const Work& w = work[i];
      try {
        auto rows = evaluator(*w.spec, cfg, w.models);
        if (cfg.archive_datasets) {
          const Dataset d = make_dataset(*w.spec, cfg.master_seed);
          char slug[96];
          std::snprintf(slug, sizeof slug, "r%.3f_p%.3f_n%d_rep%d", w.spec->range, w.spec->prop_random,
                        w.spec->n_total, w.spec->replicate);
          save_dataset(d, outdir / "datasets" / slug);
        }
        std::string block;
        int failed = 0;
        for (const auto& r : rows) {
          block += to_json(r).dump() + '\n';
          if (!r.ok) ++failed;
        }
        std::lock_guard lock(write_mutex);
        out << block;
        out.flush();
        if (!out) fail(Errc::io, "write to " + results_path.string() + " failed");
        summary.rows_written += static_cast<int>(rows.size());
        summary.failed_rows += failed;
        ++summary.specs_run;
        if (opts.log) {
          opts.log("[" + std::to_string(summary.specs_run) + "/" + std::to_string(work.size()) +
                   "] " + w.spec->id() + " rep=" + std::to_string(w.spec->replicate));
        }
      } catch (...) {
        std::lock_guard lock(write_mutex);
        if (!first_error) first_error = std::current_exception();
        next = work.size();
        return;
      }
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return summary;
}

std::string results_csv(const std::vector<ScenarioResult>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << kResultsCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.scenario_id << ',' << r.range << ',' << r.prop_random << ',' << r.n_total << ','
       << r.replicate << ',' << to_string(r.model) << ',' << (r.ok ? "ok" : "failed") << ','
       << r.waic << ',' << r.p_eff << ',' << r.rmse << ',' << r.abundance_est << ','
       << r.abundance_true << ',' << r.abundance_ratio << ',' << r.log_evidence << ','
       << (r.converged ? 1 : 0) << ',' << r.n_obs << ',' << r.hyper.eta << ',' << r.hyper.eta_star
       << ',' << r.hyper.beta << ',' << r.hyper.alpha << ',' << r.hyper.range() << ','
       << r.hyper.sigma() << ',' << r.hyper.tau() << '\n';
  }
  return os.str();
}

}  // namespace prefsdm
