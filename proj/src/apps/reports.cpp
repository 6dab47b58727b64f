#include "smf/apps/reports.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "smf/apps/matrix_io.hpp"

namespace smf::apps {

using nlohmann::json;

namespace {

// JSON has no infinity; +inf bounds are written as null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json to_json(const SolveTrace& t) {
  json j;
  json obj = json::array();
  for (double f : t.objective) obj.push_back(number(f));
  j["objective"] = std::move(obj);
  j["iterations"] = t.iterations;
  j["restarts"] = t.restarts;
  j["L_U"] = number(t.L_U);
  j["L_V"] = number(t.L_V);
  j["L_Q"] = number(t.L_Q);
  j["final_t"] = t.final_t;
  j["max_t"] = t.max_t;
  j["converged"] = t.converged;
  j["nonfinite"] = t.nonfinite;
  j["prox_nonconverged"] = t.prox_nonconverged;
  j["pruned_columns"] = t.pruned_columns;
  j["diagnostic"] = t.diagnostic;
  return j;
}

json to_json(const PolarEstimate& p) {
  return json{{"value", number(p.value)}, {"exact", p.exact}, {"restarts_used", p.restarts_used}};
}

json to_json(const CertificateReport& r) {
  json j;
  j["status"] = to_string(r.status);
  j["objective"] = number(r.objective);
  j["cond_q_residual"] = number(r.cond_q_residual);
  json res = json::array();
  for (double v : r.cond_scaling_residuals) res.push_back(number(v));
  j["cond_scaling_residuals"] = std::move(res);
  j["polar"] = to_json(r.polar);
  j["gap_bound"] = number(r.gap_bound);
  j["m_X"] = r.m_X;
  j["m_Q"] = r.m_Q;
  return j;
}

json to_json(const MetaResult& m) {
  json rounds = json::array();
  for (const MetaRound& r : m.history) {
    rounds.push_back({{"round", r.round},
                      {"rank", r.rank},
                      {"objective_after_solve", number(r.objective_after_solve)},
                      {"objective_after_step", number(r.objective_after_step)},
                      {"action", to_string(r.action)},
                      {"polar", number(r.polar)},
                      {"solver_iterations", r.solver_iterations}});
  }
  json hist = json::array();
  for (double f : m.objective_history) hist.push_back(number(f));
  return json{{"rounds", std::move(rounds)},
              {"objective_history", std::move(hist)},
              {"cap_reached", m.cap_reached},
              {"certificate", to_json(m.certificate)}};
}

std::string summarize(const CertificateReport& r) {
  double worst = 0.0;
  for (double v : r.cond_scaling_residuals) worst = std::max(worst, v);
  std::ostringstream os;
  os << "status: " << to_string(r.status) << "\n"
     << "objective: " << r.objective << "\n"
     << "condition 1 residual: " << r.cond_q_residual << "\n"
     << "condition 2 worst residual: " << worst << " over " << r.cond_scaling_residuals.size()
     << " columns\n"
     << "polar: " << r.polar.value << (r.polar.exact ? " (exact)" : " (lower bound)") << "\n"
     << "gap bound: " << r.gap_bound << "\n";
  return os.str();
}

void write_model(const std::filesystem::path& dir, const FactorModel& m) {
  std::filesystem::create_directories(dir);
  write_smf1(dir / "U.smf1", m.U);
  write_smf1(dir / "V.smf1", m.V);
  if (m.Q) write_smf1(dir / "Q.smf1", *m.Q);
}

FactorModel read_model(const std::filesystem::path& dir) {
  FactorModel m{read_smf1(dir / "U.smf1"), read_smf1(dir / "V.smf1"), std::nullopt};
  if (std::filesystem::exists(dir / "Q.smf1")) m.Q = read_smf1(dir / "Q.smf1");
  if (m.U.cols() != m.V.cols()) throw std::runtime_error("model: U and V column counts differ");
  return m;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace smf::apps
