#include "prefsdm/prefsdm.h"

#include "prefsdm/config.hpp"
#include "prefsdm/dataset_io.hpp"
#include "prefsdm/error.hpp"
#include "prefsdm/experiment.hpp"
#include "prefsdm/report.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

struct psdm_config {
  prefsdm::ExperimentConfig cfg;
};

struct psdm_dataset {
  prefsdm::Dataset d;
};

struct psdm_fit {
  prefsdm::FitResult f;
};

namespace {

thread_local std::string g_last_error;

psdm_status status_of(prefsdm::Errc c) {
  using prefsdm::Errc;
  switch (c) {
    case Errc::invalid_argument: return PSDM_ERR_INVALID_ARGUMENT;
    case Errc::domain: return PSDM_ERR_DOMAIN;
    case Errc::out_of_bounds: return PSDM_ERR_OUT_OF_BOUNDS;
    case Errc::numeric: return PSDM_ERR_NUMERIC;
    case Errc::factorization: return PSDM_ERR_FACTORIZATION;
    case Errc::io: return PSDM_ERR_IO;
    case Errc::config: return PSDM_ERR_CONFIG;
  }
  return PSDM_ERR_INTERNAL;
}

template <typename F>
psdm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PSDM_OK;
  } catch (const prefsdm::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return PSDM_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PSDM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PSDM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PSDM_ERR_INTERNAL;
  }
}

void require(bool cond, const char* what) {
  if (!cond) prefsdm::fail(prefsdm::Errc::invalid_argument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

prefsdm::GridSpec grid_for(const prefsdm::ExperimentConfig& cfg, const prefsdm::Dataset& d) {
  if (d.truth) return d.truth->grid;
  return prefsdm::GridSpec(cfg.sim.grid_nx, cfg.sim.grid_ny);
}

}  // namespace

extern "C" {

const char* psdm_version(void) { return PREFSDM_VERSION; }

const char* psdm_last_error(void) { return g_last_error.c_str(); }

const char* psdm_status_name(psdm_status s) {
  switch (s) {
    case PSDM_OK: return "ok";
    case PSDM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PSDM_ERR_DOMAIN: return "domain error";
    case PSDM_ERR_OUT_OF_BOUNDS: return "out of bounds";
    case PSDM_ERR_NUMERIC: return "numeric failure";
    case PSDM_ERR_FACTORIZATION: return "factorization failure";
    case PSDM_ERR_IO: return "i/o error";
    case PSDM_ERR_CONFIG: return "configuration error";
    case PSDM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void psdm_string_free(char* s) { std::free(s); }

psdm_status psdm_config_new(const char* profile, psdm_config** out) {
  return guarded([&] {
    require(profile && out, "null argument");
    auto* c = new psdm_config{prefsdm::ExperimentConfig::for_profile(profile)};
    *out = c;
  });
}

psdm_status psdm_config_load(const char* path, const char* profile, psdm_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    prefsdm::ExperimentConfig cfg = prefsdm::load_config(path, profile ? profile : "desk");
    if (profile && cfg.profile != profile) {
      prefsdm::fail(prefsdm::Errc::config, "profile '" + std::string(profile) + "' conflicts with profile '" +
                                               cfg.profile + "' in " + path);
    }
    *out = new psdm_config{std::move(cfg)};
  });
}

psdm_status psdm_config_set_seed(psdm_config* cfg, uint64_t master_seed) {
  return guarded([&] {
    require(cfg, "null config");
    cfg->cfg.master_seed = master_seed;
  });
}

psdm_status psdm_config_set_jobs(psdm_config* cfg, int jobs) {
  return guarded([&] {
    require(cfg, "null config");
    if (jobs < 1) prefsdm::fail(prefsdm::Errc::config, "jobs must be >= 1");
    cfg->cfg.jobs = jobs;
  });
}

psdm_status psdm_config_text(const psdm_config* cfg, char** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = dup_string(cfg->cfg.to_text());
  });
}

psdm_status psdm_config_hash(const psdm_config* cfg, char** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = dup_string(cfg->cfg.hash());
  });
}

psdm_status psdm_config_scenario_count(const psdm_config* cfg, int* out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = static_cast<int>(prefsdm::scenario_grid(cfg->cfg).size());
  });
}

void psdm_config_free(psdm_config* cfg) { delete cfg; }

psdm_status psdm_simulate(const psdm_config* cfg, double range, double prop_random, int n_total, int replicate,
                          psdm_dataset** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    prefsdm::ScenarioSpec sc;
    sc.range = range;
    sc.prop_random = prop_random;
    sc.n_total = n_total;
    sc.replicate = replicate;
    sc.sim = cfg->cfg.sim;
    *out = new psdm_dataset{prefsdm::make_dataset(sc, cfg->cfg.master_seed)};
  });
}

psdm_status psdm_dataset_save(const psdm_dataset* d, const char* dir) {
  return guarded([&] {
    require(d && dir, "null argument");
    prefsdm::save_dataset(d->d, dir);
  });
}

psdm_status psdm_dataset_load(const char* dir, psdm_dataset** out) {
  return guarded([&] {
    require(dir && out, "null argument");
    *out = new psdm_dataset{prefsdm::load_dataset(dir)};
  });
}

psdm_status psdm_dataset_counts(const psdm_dataset* d, int* n_preferential, int* n_random, int* n_test) {
  return guarded([&] {
    require(d, "null dataset");
    if (n_preferential) *n_preferential = d->d.count_preferential();
    if (n_random) *n_random = d->d.count_random();
    if (n_test) *n_test = static_cast<int>(d->d.test.size());
  });
}

void psdm_dataset_free(psdm_dataset* d) { delete d; }

psdm_status psdm_fit_model(const psdm_config* cfg, const psdm_dataset* d, const char* model, uint64_t seed,
                           psdm_fit** out) {
  return guarded([&] {
    require(cfg && d && model && out, "null argument");
    const prefsdm::ModelKind kind = prefsdm::parse_model_kind(model);
    *out = new psdm_fit{prefsdm::fit(kind, d->d, grid_for(cfg->cfg, d->d), cfg->cfg.inference, seed)};
  });
}

psdm_status psdm_fit_log_evidence(const psdm_fit* f, double* out) {
  return guarded([&] {
    require(f && out, "null argument");
    *out = f->f.log_evidence;
  });
}

psdm_status psdm_fit_json(const psdm_fit* f, char** out) {
  return guarded([&] {
    require(f && out, "null argument");
    *out = dup_string(prefsdm::to_json(f->f).dump(2));
  });
}

psdm_status psdm_fit_evaluate(const psdm_fit* f, const psdm_dataset* d, int n_draws, uint64_t seed,
                              char** json_out) {
  return guarded([&] {
    require(f && d && json_out, "null argument");
    const prefsdm::ScenarioResult r = prefsdm::evaluate_fit(f->f, d->d, n_draws, seed);
    nlohmann::ordered_json j;
    j["model"] = std::string(prefsdm::to_string(r.model));
    j["n_obs"] = r.n_obs;
    j["waic"] = r.waic;
    j["p_eff"] = r.p_eff;
    j["rmse"] = r.rmse;
    j["abundance_est"] = r.abundance_est;
    if (d->d.truth) {
      j["abundance_true"] = r.abundance_true;
      j["abundance_ratio"] = r.abundance_ratio;
    }
    j["log_evidence"] = r.log_evidence;
    j["converged"] = r.converged;
    *json_out = dup_string(j.dump(2));
  });
}

void psdm_fit_free(psdm_fit* f) { delete f; }

psdm_status psdm_run_experiment(const psdm_config* cfg, const char* outdir, int resume, int jobs, psdm_log_fn log,
                                void* user, char** summary_out) {
  return guarded([&] {
    require(cfg && outdir, "null argument");
    prefsdm::RunOptions opts;
    opts.resume = resume != 0;
    opts.jobs = jobs > 0 ? jobs : cfg->cfg.jobs;
    if (log) opts.log = [log, user](const std::string& line) { log(line.c_str(), user); };
    const prefsdm::RunSummary s = prefsdm::run_experiment(cfg->cfg, outdir, opts);
    if (summary_out) {
      nlohmann::ordered_json j;
      j["specs_total"] = s.specs_total;
      j["specs_skipped"] = s.specs_skipped;
      j["specs_run"] = s.specs_run;
      j["rows_written"] = s.rows_written;
      j["failed_rows"] = s.failed_rows;
      *summary_out = dup_string(j.dump());
    }
  });
}

psdm_status psdm_report(const char* results_path, const char* outdir, char** listing_out) {
  return guarded([&] {
    require(results_path && outdir, "null argument");
    const auto rows = prefsdm::read_results(results_path);
    const auto written = prefsdm::report(rows, outdir);
    if (listing_out) {
      std::string listing;
      for (const auto& p : written) listing += p.string() + '\n';
      *listing_out = dup_string(listing);
    }
  });
}

}  // extern "C"
