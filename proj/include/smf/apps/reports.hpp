#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "smf/optimality.hpp"
#include "smf/solver.hpp"

namespace smf::apps {

nlohmann::json to_json(const SolveTrace& trace);
nlohmann::json to_json(const PolarEstimate& polar);
nlohmann::json to_json(const CertificateReport& report);
nlohmann::json to_json(const MetaResult& result);

std::string summarize(const CertificateReport& report);

/// U.smf1, V.smf1 and (if present) Q.smf1 inside `dir`.
void write_model(const std::filesystem::path& dir, const FactorModel& m);
FactorModel read_model(const std::filesystem::path& dir);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace smf::apps
