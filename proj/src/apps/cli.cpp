#include "smf/apps/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smf/apps/config.hpp"
#include "smf/apps/hsi.hpp"
#include "smf/apps/matrix_io.hpp"
#include "smf/apps/phantom.hpp"
#include "smf/apps/reports.hpp"
#include "smf/optimality.hpp"

namespace smf::apps {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec key '") + key + "': " + e.what());
  }
}

// Accepts a number, "inf", or null (= +inf).
double snr_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string() && (v == "inf" || v == "+inf")) return std::numeric_limits<double>::infinity();
  if (v.is_number()) return v.get<double>();
  throw ConfigError(std::string("spec key '") + key + "' must be a number, \"inf\" or null");
}

Matrix labels_as_matrix(const LabelImage& l) { return l.cast<double>(); }

struct SolveArgs {
  std::string config;
  std::string out;
};

int do_solve(const SolveArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (!a.out.empty()) cfg.output = a.out;
  const ProblemSpec p = build_problem(cfg, read_matrix(cfg.data));
  const fs::path dir = cfg.output;
  fs::create_directories(dir);

  bool numerical_failure = false;
  FactorModel model;
  json report;
  if (cfg.meta.enabled) {
    MetaConfig mc;
    mc.solver = cfg.solver;
    mc.max_rounds = cfg.meta.max_rounds;
    mc.polar_restarts = cfg.meta.polar_restarts;
    mc.seed = cfg.solver.seed;
    MetaResult res = run_meta(p, mc);
    for (const MetaRound& r : res.history) {
      if (r.action == MetaAction::LineSearchFailed) numerical_failure = true;
    }
    report["meta"] = to_json(res);
    model = std::move(res.model);
  } else {
    SolveResult res = run(p, cfg.solver);
    numerical_failure = res.trace.nonfinite;
    report["trace"] = to_json(res.trace);
    model = std::move(res.model);
  }
  if (!std::isfinite(objective(p, model))) numerical_failure = true;

  write_model(dir / "model", model);
  const int restarts = cfg.meta.polar_restarts;
  const CertificateReport cert =
      numerical_failure ? CertificateReport{} : check_certificate(p, model, restarts, cfg.solver.seed);
  report["certificate"] = to_json(cert);
  report["objective"] = objective(p, model);
  report["rank"] = model.rank();
  write_json(dir / "report.json", report);
  if (report.contains("trace")) write_json(dir / "trace.json", report["trace"]);
  write_json(dir / "certificate.json", report["certificate"]);
  const std::string summary = summarize(cert);
  write_text(dir / "summary.txt", summary);
  out << summary;
  return numerical_failure ? kNumerical : kOk;
}

struct CertifyArgs {
  std::string config;
  std::string model;
  std::string out;
  int restarts = 20;
  std::uint64_t seed = 0;
};

int do_certify(const CertifyArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  const ProblemSpec p = build_problem(cfg, read_matrix(cfg.data));
  const FactorModel m = read_model(a.model);
  if (m.U.rows() != p.x_rows() || m.V.rows() != p.x_cols()) {
    throw ConfigError("model shape does not match the problem");
  }
  if (!m.U.allFinite() || !m.V.allFinite()) {
    out << "model contains non-finite entries\n";
    return kNumerical;
  }
  const CertificateReport cert = check_certificate(p, m, a.restarts, a.seed);
  const fs::path dir = a.out.empty() ? cfg.output : fs::path(a.out);
  fs::create_directories(dir);
  write_json(dir / "certificate.json", to_json(cert));
  const std::string summary = summarize(cert);
  write_text(dir / "summary.txt", summary);
  out << summary;
  return kOk;
}

struct PhantomArgs {
  std::string spec;
  std::string out = "phantom_out";
  bool run = false;
};

int do_phantom(const PhantomArgs& a, std::ostream& out) {
  const json j = a.spec.empty() ? json::object() : read_json_file(a.spec);
  PhantomSpec spec;
  spec.height = field<Index>(j, "height", spec.height);
  spec.width = field<Index>(j, "width", spec.width);
  spec.frames = field<Index>(j, "frames", spec.frames);
  spec.n_regions = field<Index>(j, "n_regions", spec.n_regions);
  spec.spikes_per_region = field<Index>(j, "spikes_per_region", spec.spikes_per_region);
  spec.tau = field<double>(j, "tau", spec.tau);
  spec.dt = field<double>(j, "dt", spec.dt);
  spec.snr_db = snr_field(j, "snr_db", spec.snr_db);
  spec.seed = field<std::uint64_t>(j, "seed", spec.seed);
  spec.min_side = field<Index>(j, "min_side", spec.min_side);
  spec.max_side = field<Index>(j, "max_side", spec.max_side);
  spec.gap = field<Index>(j, "gap", spec.gap);

  const PhantomData data = gen_phantom(spec);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_smf1(dir / "Y.smf1", data.Y);
  write_smf1(dir / "U_true.smf1", data.U_true);
  write_smf1(dir / "V_true.smf1", data.V_true);
  write_smf1(dir / "labels_true.smf1", labels_as_matrix(data.labels));
  out << "phantom written to " << dir.string() << " (noise sigma " << data.noise_sigma << ")\n";
  if (!a.run) return kOk;

  PhantomRunSettings st;
  const std::string preset = field<std::string>(j, "preset", st.preset.name);
  auto found = presets::by_name(preset);
  if (!found) throw ConfigError("unknown preset '" + preset + "'");
  st.preset = *found;
  st.preset.lambda_scale = field<double>(j, "lambda_scale", st.preset.lambda_scale);
  const std::string init = field<std::string>(j, "init", "identity");
  const Index count = field<Index>(j, "init_count", 0);
  if (init == "identity") {
    st.init = init::IdentityColumns{count};
  } else if (init == "uniform") {
    st.init = init::UniformRandom{count > 0 ? count : spec.frames};
  } else {
    throw ConfigError("phantom init must be 'identity' or 'uniform'");
  }
  st.solver.max_iter = field<int>(j, "max_iter", st.solver.max_iter);
  st.solver.tol_rel_obj = field<double>(j, "tol_rel_obj", st.solver.tol_rel_obj);
  st.solver.seed = field<std::uint64_t>(j, "solver_seed", st.solver.seed);
  st.support_tol = field<double>(j, "support_tol", st.support_tol);
  st.overlap_thresh = field<double>(j, "overlap_thresh", st.overlap_thresh);

  const PhantomRunResult r = run_phantom(data, spec, st);
  write_model(dir / "model", r.solve.model);
  write_smf1(dir / "labels_found.smf1", labels_as_matrix(r.segmentation.labels));

  json regions = json::array();
  std::string table = "region  iou\n";
  for (std::size_t k = 0; k < r.region_iou.size(); ++k) {
    regions.push_back({{"region", k + 1}, {"iou", r.region_iou[k]}});
    table += std::to_string(k + 1) + "       " + std::to_string(r.region_iou[k]) + "\n";
  }
  json report{{"preset", st.preset.name},
              {"lambda", r.lambda},
              {"objective", r.objective},
              {"components", r.segmentation.components.size()},
              {"recovered", r.recovered},
              {"iou_threshold", st.iou_threshold},
              {"regions", regions},
              {"trace", to_json(r.solve.trace)}};
  write_json(dir / "report.json", report);
  table += "recovered " + std::to_string(r.recovered) + " of " + std::to_string(r.region_iou.size()) +
           " regions (IoU >= " + std::to_string(st.iou_threshold) + ")\n";
  write_text(dir / "summary.txt", table);
  out << table;
  return r.solve.trace.nonfinite ? kNumerical : kOk;
}

struct HsiArgs {
  std::string spec;
  std::string out = "hsi_out";
};

int do_hsi(const HsiArgs& a, std::ostream& out) {
  const json j = a.spec.empty() ? json::object() : read_json_file(a.spec);
  HsiSpec base;
  base.height = field<Index>(j, "height", base.height);
  base.width = field<Index>(j, "width", base.width);
  base.bands = field<Index>(j, "bands", base.bands);
  base.true_rank = field<Index>(j, "true_rank", base.true_rank);
  base.seed = field<std::uint64_t>(j, "seed", base.seed);

  std::vector<Index> ratios{field<Index>(j, "sample_ratio", 4)};
  if (j.contains("sample_ratios")) ratios = field<std::vector<Index>>(j, "sample_ratios", ratios);
  std::vector<std::optional<double>> snrs;
  if (j.contains("sampling_snr_db")) {
    const json& s = j.at("sampling_snr_db");
    const json list = s.is_array() ? s : json::array({s});
    for (const json& v : list) {
      if (v.is_null()) {
        snrs.emplace_back(std::nullopt);
      } else if (v.is_number()) {
        snrs.emplace_back(v.get<double>());
      } else {
        throw ConfigError("sampling_snr_db entries must be numbers or null");
      }
    }
  } else {
    snrs.emplace_back(std::nullopt);
  }

  HsiRunSettings st;
  st.columns = field<Index>(j, "columns", st.columns);
  st.lambda_rel = field<double>(j, "lambda_rel", st.lambda_rel);
  st.nu_tv = field<double>(j, "nu_tv", st.nu_tv);
  st.solver.max_iter = field<int>(j, "max_iter", st.solver.max_iter);
  st.solver.tol_rel_obj = field<double>(j, "tol_rel_obj", st.solver.tol_rel_obj);
  st.init_seed = field<std::uint64_t>(j, "init_seed", st.init_seed);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  json rows = json::array();
  std::string table = "ratio  snr_db  error\n";
  bool failure = false;
  for (Index ratio : ratios) {
    for (const auto& snr : snrs) {
      HsiSpec spec = base;
      spec.sample_ratio = ratio;
      spec.sampling_snr_db = snr;
      const HsiData data = hsi_simulate(spec);
      const HsiRunResult r = run_hsi(data, spec, st);
      failure = failure || r.solve.trace.nonfinite;
      const std::string tag = std::to_string(ratio) + "_" + (snr ? std::to_string(static_cast<int>(*snr)) : "inf");
      write_smf1(dir / ("X_true_" + tag + ".smf1"), data.X_true);
      write_smf1(dir / ("Y_" + tag + ".smf1"), data.Y);
      write_model(dir / ("model_" + tag), r.solve.model);
      rows.push_back({{"sample_ratio", ratio},
                      {"sampling_snr_db", snr ? json(*snr) : json(nullptr)},
                      {"lambda", r.lambda},
                      {"error", r.error},
                      {"iterations", r.solve.trace.iterations}});
      table += std::to_string(ratio) + ":1   " + (snr ? std::to_string(*snr) : std::string("none")) + "  " +
               std::to_string(r.error) + "\n";
    }
  }
  write_json(dir / "report.json", json{{"results", rows}});
  write_text(dir / "summary.txt", table);
  out << table;
  return failure ? kNumerical : kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured matrix factorization with optimality certificates", "smf"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Solve the problem described by a JSON config");
  solve->add_option("--config", solve_args.config, "Config file")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", solve_args.out, "Output directory (overrides output.directory)");

  CertifyArgs cert_args;
  auto* certify = app.add_subcommand("certify", "Check the optimality certificate of a saved model");
  certify->add_option("--config", cert_args.config, "Config file")->required()->check(CLI::ExistingFile);
  certify->add_option("--model", cert_args.model, "Model directory (U.smf1, V.smf1)")
      ->required()
      ->check(CLI::ExistingDirectory);
  certify->add_option("--out", cert_args.out, "Output directory");
  certify->add_option("--restarts", cert_args.restarts, "Polar restarts")->check(CLI::PositiveNumber);
  certify->add_option("--seed", cert_args.seed, "Polar seed");

  PhantomArgs ph_args;
  auto* phantom = app.add_subcommand("phantom", "Generate a calcium-imaging phantom, optionally solve and segment");
  phantom->add_option("--spec", ph_args.spec, "Phantom spec (JSON)")->check(CLI::ExistingFile);
  phantom->add_option("--out", ph_args.out, "Output directory");
  phantom->add_flag("--run", ph_args.run, "Solve and segment the generated data");

  HsiArgs hsi_args;
  auto* hsi = app.add_subcommand("hsi", "Simulate compressed hyperspectral sampling and recover it");
  hsi->add_option("--spec", hsi_args.spec, "HSI spec (JSON)")->check(CLI::ExistingFile);
  hsi->add_option("--out", hsi_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*solve) return do_solve(solve_args, out);
    if (*certify) return do_certify(cert_args, out);
    if (*phantom) return do_phantom(ph_args, out);
    if (*hsi) return do_hsi(hsi_args, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace smf::apps
