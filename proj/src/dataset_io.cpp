#include "prefsdm/dataset_io.hpp"

#include "prefsdm/error.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace prefsdm {

namespace fs = std::filesystem;

nlohmann::ordered_json to_json(const FieldRealization& f) {
  nlohmann::ordered_json j;
  const Rect& d = f.grid.domain();
  j["grid"] = {{"nx", f.grid.nx()}, {"ny", f.grid.ny()}, {"domain", {d.x0, d.y0, d.x1, d.y1}}};
  j["params"] = {{"range", f.params.range}, {"sigma", f.params.sigma}, {"nu", f.params.nu}};
  j["seed"] = f.seed;
  j["values"] = std::vector<double>(f.values.data(), f.values.data() + f.values.size());
  return j;
}

FieldRealization field_from_json(const nlohmann::json& j) {
  try {
    const auto& g = j.at("grid");
    const auto dom = g.at("domain").get<std::vector<double>>();
    if (dom.size() != 4) fail(Errc::io, "field domain must have 4 entries");
    const GridSpec grid(g.at("nx").get<int>(), g.at("ny").get<int>(), Rect{dom[0], dom[1], dom[2], dom[3]});
    const auto& p = j.at("params");
    const MaternParams params{p.at("range").get<double>(), p.at("sigma").get<double>(),
                              p.at("nu").get<double>()};
    const auto values = j.at("values").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != grid.size()) fail(Errc::io, "field length does not match grid");
    return {grid, Eigen::Map<const Eigen::VectorXd>(values.data(), grid.size()), params,
            j.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, std::string("malformed field document: ") + e.what());
  }
}

void save_dataset(const Dataset& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create " + dir.string() + ": " + ec.message());

  std::ofstream csv(dir / "dataset.csv");
  if (!csv) fail(Errc::io, "cannot write " + (dir / "dataset.csv").string());
  csv.precision(17);
  csv << kDatasetCsvHeader << '\n';
  for (const auto& o : d.train) {
    csv << o.location.x << ',' << o.location.y << ',' << o.y << ',' << o.a << ",train\n";
  }
  for (const auto& t : d.test) {
    csv << t.location.x << ',' << t.location.y << ',' << t.truth << ",0,test\n";
  }
  if (!csv) fail(Errc::io, "write failed for " + (dir / "dataset.csv").string());

  nlohmann::ordered_json meta;
  meta["sim"] = {{"eta", d.sim.eta}, {"tau", d.sim.tau}, {"alpha", d.sim.alpha}};
  if (d.truth) meta["field"] = to_json(*d.truth);
  std::ofstream js(dir / "field.json");
  if (!js) fail(Errc::io, "cannot write " + (dir / "field.json").string());
  js << meta.dump() << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  std::ifstream csv(dir / "dataset.csv");
  if (!csv) fail(Errc::io, "cannot read " + (dir / "dataset.csv").string());
  std::string line;
  std::getline(csv, line);
  if (line != kDatasetCsvHeader) fail(Errc::io, "unexpected dataset header '" + line + "'");
  int lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) fail(Errc::io, "dataset.csv line " + std::to_string(lineno) + ": expected 5 fields");
    try {
      const Point p{std::stod(cells[0]), std::stod(cells[1])};
      const double mark = std::stod(cells[2]);
      if (cells[4] == "train") {
        d.train.push_back({p, mark, std::stoi(cells[3])});
      } else if (cells[4] == "test") {
        d.test.push_back({p, mark});
      } else {
        fail(Errc::io, "dataset.csv line " + std::to_string(lineno) + ": unknown split '" + cells[4] + "'");
      }
    } catch (const std::logic_error&) {
      fail(Errc::io, "dataset.csv line " + std::to_string(lineno) + ": unparsable number");
    }
  }
  d.validate();

  std::ifstream js(dir / "field.json");
  if (js) {
    try {
      const auto meta = nlohmann::json::parse(js);
      const auto& sim = meta.at("sim");
      d.sim.eta = sim.at("eta").get<double>();
      d.sim.tau = sim.at("tau").get<double>();
      d.sim.alpha = sim.at("alpha").get<double>();
      if (meta.contains("field")) {
        d.truth = field_from_json(meta.at("field"));
        d.sim.field = d.truth->params;
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::io, std::string("malformed field.json: ") + e.what());
    }
  }
  return d;
}

nlohmann::ordered_json to_json(const FitResult& f) {
  nlohmann::ordered_json j;
  const HyperParams& h = f.hyper_hat;
  j["model"] = std::string(to_string(f.model));
  j["converged"] = f.converged;
  j["outer_converged"] = f.outer_converged;
  j["inner_converged"] = f.inner_converged;
  j["log_evidence"] = f.log_evidence;
  j["outer_evaluations"] = f.outer_evaluations;
  j["inner_iterations"] = f.inner_iterations;
  j["best_start"] = f.best_start;
  j["hyper"] = {{"eta", h.eta},         {"eta_star", h.eta_star}, {"beta", h.beta},
                {"alpha", h.alpha},     {"range", h.range()},     {"sigma", h.sigma()},
                {"tau", h.tau()}};
  j["grid"] = {{"nx", f.grid.nx()}, {"ny", f.grid.ny()}};
  j["u_mode"] = std::vector<double>(f.u_mode.data(), f.u_mode.data() + f.u_mode.size());
  return j;
}

}  // namespace prefsdm
