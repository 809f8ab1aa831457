// diqkd: command-line front end for simulation, projection, entropy bounds,
// key rates, optimization and threshold sweeps.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/errors.hpp"
#include "diqkd/estimation.hpp"
#include "diqkd/io.hpp"
#include "diqkd/keyrate.hpp"
#include "diqkd/reference_data.hpp"
#include "diqkd/spdc_model.hpp"

namespace {

using namespace diqkd;

enum Exit { kOk = 0, kConfig = 2, kData = 3, kSolver = 4 };

struct Shared {
  int m = 8;
  std::string level = "2+ABZ+AZZ";
  std::uint64_t seed = 0;
  double eps = reference::kEpsilon;
  double fe = 1.0;
  int jobs = 1;
  std::string out;
  std::string mode = "per-node";
  std::string final_node = "collision";
  double gap_tol = 1e-7;
  int localizing = 0;
  bool verbose = false;
};

void add_shared(CLI::App* app, Shared& s) {
  app->add_option("--m", s.m, "Gauss-Radau nodes")->capture_default_str();
  app->add_option("--level", s.level, "relaxation level, e.g. 2+ABZ+AZZ")->capture_default_str();
  app->add_option("--seed", s.seed, "random seed")->capture_default_str();
  app->add_option("--eps", s.eps, "error probability for the confidence interval")
      ->capture_default_str();
  app->add_option("--fe", s.fe, "error-correction efficiency")->capture_default_str();
  app->add_option("--jobs", s.jobs, "concurrent solver jobs")->capture_default_str();
  app->add_option("--out", s.out, "output file (default stdout)");
  app->add_option("--mode", s.mode, "per-node or joint")->capture_default_str();
  app->add_option("--final-node", s.final_node, "collision or dropped")->capture_default_str();
  app->add_option("--gap-tol", s.gap_tol, "solver relative gap tolerance")->capture_default_str();
  app->add_option("--localizing", s.localizing, "localizing level of the norm constraints")
      ->capture_default_str();
  app->add_flag("-v,--verbose", s.verbose, "progress on stderr");
}

BffConfig bff_config(const Shared& s) {
  BffConfig c;
  c.m = s.m;
  c.level = npa::LevelSpec::parse(s.level);
  c.mode = parse_bound_mode(s.mode);
  c.final_node = parse_final_node(s.final_node);
  c.solver.gap_tol = s.gap_tol;
  c.norm.localizing_level = s.localizing;
  c.jobs = s.jobs;
  c.validate();
  return c;
}

void emit(const Shared& s, const std::string& text) {
  if (s.out.empty()) {
    std::cout << text << '\n';
  } else {
    io::write_file(s.out, text);
  }
}

// Prefixes error messages with the pipeline stage, keeping the error class.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError(name + ": " + e.what());
  }
}

SpdcParams load_model(const std::string& path, const std::string& preset) {
  if (!path.empty() && !preset.empty()) throw ConfigError("give either --model or --preset");
  if (!path.empty()) return io::spdc_params_from_json(io::read_file(path));
  if (preset.empty() || preset == "20m") return reference::model_20m();
  if (preset == "chsh") return reference::chsh_model();
  throw ConfigError("unknown preset '" + preset + "' (20m, chsh)");
}

struct Source {
  std::string counts;
  int fiber = 20;
  std::string behavior;
  bool weighted = false;
};

void add_source(CLI::App* app, Source& src) {
  app->add_option("--counts", src.counts, "count CSV");
  app->add_option("--fiber", src.fiber, "fiber length selecting the CSV rows")
      ->capture_default_str();
  app->add_option("--behavior", src.behavior, "behavior JSON");
}

std::pair<Behavior, std::optional<io::CountRecord>> load_behavior(const Source& src) {
  if (src.counts.empty() == src.behavior.empty()) {
    throw ConfigError("give exactly one of --counts or --behavior");
  }
  if (!src.counts.empty()) {
    const auto records = io::read_counts_csv_file(src.counts);
    const auto& rec = io::select_fiber(records, src.fiber);
    return {from_counts(rec.counts), rec};
  }
  return {io::behavior_from_json(io::read_file(src.behavior)), std::nullopt};
}

ProjectionResult project(const Behavior& raw, const std::optional<io::CountRecord>& rec,
                         const std::string& level, bool weighted) {
  ProjectionConfig pc;
  pc.level = npa::LevelSpec::parse(level);
  if (weighted) {
    if (!rec) throw ConfigError("--weighted needs --counts");
    pc.setting_weights = count_weights(rec->counts);
  }
  return project_to_quantum(raw, pc);
}

double total_rounds(const CountTable& t) {
  double n = 0.0;
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) n += static_cast<double>(t.setting_total(x, y));
  }
  return n;
}

std::vector<double> eta_grid(std::vector<double> etas, double lo, double hi, double step) {
  if (!etas.empty()) return etas;
  if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("invalid efficiency range");
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int k = 0; k <= n; ++k) etas.push_back(lo + k * step);
  return etas;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device-independent QKD key-rate analysis"};
  app.require_subcommand(1);
  Shared s;

  std::string model_path, preset;
  auto* simulate = app.add_subcommand("simulate", "behavior of the source and detector model");
  simulate->add_option("--model", model_path, "model JSON");
  simulate->add_option("--preset", preset, "20m or chsh");
  add_shared(simulate, s);

  Source src;
  auto* ingest = app.add_subcommand("ingest", "relative frequencies from a count CSV");
  ingest->add_option("--counts", src.counts, "count CSV")->required();
  ingest->add_option("--fiber", src.fiber, "fiber length")->capture_default_str();
  add_shared(ingest, s);

  std::string proj_level = "2";
  auto* proj = app.add_subcommand("project", "least-squares projection onto the quantum set");
  add_source(proj, src);
  proj->add_option("--proj-level", proj_level, "relaxation level of the projection")
      ->capture_default_str();
  proj->add_flag("--weighted", src.weighted, "weight settings by their round counts");
  add_shared(proj, s);

  double p = 1.0, pn = 0.0;
  bool do_project = false;
  std::string certificate;
  auto* bound = app.add_subcommand("bound", "entropy lower bound for a behavior");
  auto* rate = app.add_subcommand("rate", "key rate for a behavior");
  for (auto* c : {bound, rate}) {
    add_source(c, src);
    c->add_option("--p", p, "post-selection keep probability")->capture_default_str();
    c->add_option("--pn", pn, "noisy-preprocessing flip probability")->capture_default_str();
    c->add_flag("--project", do_project, "project onto the quantum set first");
    c->add_option("--proj-level", proj_level, "relaxation level of the projection")
        ->capture_default_str();
    c->add_option("--certificate", certificate, "write the dual Bell functional here");
    add_shared(c, s);
  }

  auto* analyze = app.add_subcommand("analyze", "counts to key-rate report");
  analyze->add_option("--counts", src.counts, "count CSV")->required();
  analyze->add_option("--fiber", src.fiber, "fiber length")->capture_default_str();
  analyze->add_option("--p", p, "post-selection keep probability")->capture_default_str();
  analyze->add_option("--pn", pn, "noisy-preprocessing flip probability")->capture_default_str();
  analyze->add_option("--proj-level", proj_level, "relaxation level of the projection")
      ->capture_default_str();
  analyze->add_flag("--weighted", src.weighted, "weight settings by their round counts");
  analyze->add_option("--certificate", certificate, "write the dual Bell functional here");
  add_shared(analyze, s);

  OptimizerConfig oc;
  double eta = reference::kEtaA;
  bool no_pre = false;
  std::string screen_level = "2";
  int screen_m = 8;
  auto* optimize = app.add_subcommand("optimize", "search source, settings and preprocessing");
  auto* sweep = app.add_subcommand("sweep", "efficiency threshold sweep");
  for (auto* c : {optimize, sweep}) {
    c->add_option("--model", model_path, "template model JSON");
    c->add_option("--population", oc.population)->capture_default_str();
    c->add_option("--generations", oc.generations)->capture_default_str();
    c->add_option("--polish", oc.polish_evaluations, "simplex polish budget")->capture_default_str();
    c->add_option("--refine-fraction", oc.refine_fraction)->capture_default_str();
    c->add_option("--warm-spread", oc.warm_spread)->capture_default_str();
    c->add_option("--screen-m", screen_m)->capture_default_str();
    c->add_option("--screen-level", screen_level)->capture_default_str();
    c->add_flag("--no-preprocessing", no_pre, "fix p = 1 and p_N = 0");
    add_shared(c, s);
  }
  optimize->add_option("--eta", eta, "symmetric detection efficiency")->capture_default_str();
  std::vector<double> etas;
  double eta_lo = 0.84, eta_hi = 0.94, eta_step = 0.02, resolution = 1e-3;
  std::string csv_path;
  sweep->add_option("--etas", etas, "explicit efficiency grid");
  sweep->add_option("--eta-min", eta_lo)->capture_default_str();
  sweep->add_option("--eta-max", eta_hi)->capture_default_str();
  sweep->add_option("--eta-step", eta_step)->capture_default_str();
  sweep->add_option("--resolution", resolution, "bisection bracket width")->capture_default_str();
  sweep->add_option("--csv", csv_path, "write the (eta, rate) curve here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (simulate->parsed()) {
      const SpdcParams model = stage("simulate", [&] { return load_model(model_path, preset); });
      const Behavior b = behavior_from_model(model);
      emit(s, io::behavior_to_json(b));
    } else if (ingest->parsed()) {
      const auto records = io::read_counts_csv_file(src.counts);
      emit(s, io::behavior_to_json(from_counts(io::select_fiber(records, src.fiber).counts)));
    } else if (proj->parsed()) {
      const auto [raw, rec] = stage("ingest", [&] { return load_behavior(src); });
      const auto r = stage("project", [&] { return project(raw, rec, proj_level, src.weighted); });
      emit(s, io::projection_to_json(r));
    } else if (bound->parsed() || rate->parsed()) {
      const BffConfig cfg = stage("config", [&] { return bff_config(s); });
      auto [b, rec] = stage("ingest", [&] { return load_behavior(src); });
      if (do_project) {
        b = stage("project", [&] { return project(b, rec, proj_level, false).projected; });
      }
      KeyRateReport rep = stage("bound", [&] {
        return evaluate_rate(b, Scenario{}, PreprocessParams{p, pn}, cfg, s.fe);
      });
      rep.source = src.counts.empty() ? src.behavior : src.counts;
      if (rec) attach_confidence(rep, Scenario{}, s.eps, total_rounds(rec->counts));
      if (!certificate.empty()) io::write_file(certificate, io::certificate_to_json(rep.entropy.dual));
      if (bound->parsed()) {
        std::ostringstream os;
        os.precision(12);
        os << "{\n  \"bound\": " << rep.entropy.bound << ",\n  \"status\": \""
           << sdp::to_string(rep.entropy.status) << "\",\n  \"configuration\": \""
           << rep.entropy.configuration << "\",\n  \"fingerprint\": \"" << rep.fingerprint
           << "\"\n}";
        emit(s, os.str());
      } else {
        emit(s, io::report_to_json(rep));
      }
    } else if (analyze->parsed()) {
      const BffConfig cfg = stage("config", [&] { return bff_config(s); });
      const PreprocessParams pp{p, pn};
      stage("config", [&] { pp.validate(); return 0; });
      const auto records = stage("ingest", [&] { return io::read_counts_csv_file(src.counts); });
      const auto& rec = stage("ingest", [&]() -> const io::CountRecord& {
        return io::select_fiber(records, src.fiber);
      });
      const Behavior raw = stage("ingest", [&] { return from_counts(rec.counts); });
      const auto pr = stage("project", [&] { return project(raw, rec, proj_level, src.weighted); });
      if (s.verbose) std::fprintf(stderr, "projection distance %.3e\n", pr.distance);
      KeyRateReport rep = stage("bound", [&] {
        return evaluate_rate(pr.projected, Scenario{}, pp, cfg, s.fe);
      });
      rep.source = src.counts + "#" + std::to_string(src.fiber) + "m";
      stage("confidence", [&] {
        attach_confidence(rep, Scenario{}, s.eps, total_rounds(rec.counts));
        return 0;
      });
      if (!certificate.empty()) io::write_file(certificate, io::certificate_to_json(rep.entropy.dual));
      emit(s, io::report_to_json(rep));
    } else if (optimize->parsed() || sweep->parsed()) {
      oc.seed = s.seed;
      oc.f_e = s.fe;
      oc.preprocessing = !no_pre;
      oc.verbose = s.verbose;
      stage("config", [&] {
        oc.refinement = bff_config(s);
        oc.screening = oc.refinement;
        oc.screening.m = screen_m;
        oc.screening.level = npa::LevelSpec::parse(screen_level);
        oc.validate();
        return 0;
      });
      SpdcParams tmpl = stage("config", [&] {
        return model_path.empty() ? reference::realistic_model(eta) : load_model(model_path, "");
      });
      if (optimize->parsed()) {
        if (model_path.empty() || optimize->count("--eta") > 0) {
          tmpl.eta_a = eta;
          tmpl.eta_b = eta;
        }
        const auto r = stage("optimize", [&] {
          return optimize_params(tmpl, oc, {{PreprocessParams{0.96, 0.13}, tmpl}});
        });
        emit(s, io::report_to_json(r.report));
      } else {
        SweepConfig sc;
        sc.etas = stage("config", [&] { return eta_grid(etas, eta_lo, eta_hi, eta_step); });
        sc.resolution = resolution;
        sc.optimizer = oc;
        const auto r = stage("sweep", [&] { return threshold_sweep(tmpl, sc); });
        emit(s, io::sweep_to_json(r));
        if (!csv_path.empty()) {
          std::ofstream f(csv_path);
          if (!f) throw ConfigError("cannot write " + csv_path);
          io::write_sweep_csv(f, r);
        }
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  }
  return kOk;
}
