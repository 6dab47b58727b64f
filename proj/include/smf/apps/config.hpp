#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "smf/linops.hpp"
#include "smf/regularizers.hpp"
#include "smf/solver.hpp"

namespace smf::apps {

/// Malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GraphConfig {
  std::string type = "none";  // none | chain | lattice4 | lattice8 | edges
  Index height = 0;
  Index width = 0;
  Index nodes = 0;
  std::vector<Edge> edges;
};

struct GaugeConfig {
  double nu1 = 0.0;
  double nu_tv = 0.0;
  double nu2 = 1.0;
  bool nonneg = false;
  GraphConfig graph;
};

struct OperatorConfig {
  std::string type = "identity";  // identity | temporal_conv | random_phase_conv
  double tau = 1.3333;
  double dt = 0.1;
  Index height = 0;
  Index width = 0;
  Index sample_ratio = 1;
  std::uint64_t seed = 0;
};

struct MetaSettings {
  bool enabled = false;
  int max_rounds = 20;
  int polar_restarts = 20;
};

struct RunConfig {
  std::filesystem::path data;
  OperatorConfig op;
  bool background = false;
  double lambda = 1.0;
  RegularizerForm form = RegularizerForm::Product;
  GaugeConfig u_gauge;
  GaugeConfig v_gauge;
  SolverConfig solver;
  MetaSettings meta;
  std::filesystem::path output = "out";
};

/// Relative paths inside the document are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

LinearOperator build_operator(const OperatorConfig& op, Index frames);
/// Chain graphs take their length from `dim`.
GaugeSpec build_gauge(const GaugeConfig& g, Index dim);
ProblemSpec build_problem(const RunConfig& cfg, Matrix Y);

/// Regularization preset: lambda = lambda_scale * sigma, gauge weights
/// [nu1, nu_tv, nu2] for U and V.
struct RegPreset {
  std::string name;
  double lambda_scale;
  std::array<double, 3> nu_u;
  std::array<double, 3> nu_v;
  /// Scale lambda by the noise level instead of the data spread.
  bool noise_sigma = false;
};

namespace presets {
// In-vivo table, sigma = standard deviation of the data entries.
RegPreset sparse();
RegPreset sparse_low_rank();
RegPreset slrtv();
// Phantom experiment, sigma = noise standard deviation.
RegPreset phantom_slr();
RegPreset phantom_slrtv();
// Same structure, lambda retuned for the 32x32x60 desk-scale phantom.
RegPreset phantom_slrtv_desk();
std::optional<RegPreset> by_name(const std::string& name);
}  // namespace presets

}  // namespace smf::apps
