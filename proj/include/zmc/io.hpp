#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "json.hpp"

#include "zmc/diagnostics.hpp"
#include "zmc/estimation.hpp"
#include "zmc/filter.hpp"
#include "zmc/intensity.hpp"
#include "zmc/observation.hpp"

namespace zmc {

/// 17 significant digits, shortest exponent form.
std::string format_double(double value);

/// One count column from CSV text. `column` selects by header name or
/// 0-based index; empty means the first column. A header row is detected
/// when the selected field of the first row is not an integer.
CountSeries read_counts_csv(std::istream& in, const std::string& column = "");
CountSeries read_counts_csv(const std::filesystem::path& path, const std::string& column = "");

/// Columns t,y and, when given, lambda.
void write_counts_csv(std::ostream& out, const CountSeries& series, const IntensityPath* intensity = nullptr);

/// Columns t,y,lambda_filtered,error_var,innovation.
void write_filter_csv(std::ostream& out, std::span<const std::int64_t> counts, const FilterPass& pass);

void write_residuals_csv(std::ostream& out, std::span<const double> residuals);
void write_prob_table_csv(std::ostream& out, const ProbTable& table);
/// Long format: series,lag,acf,pacf.
void write_acf_csv(std::ostream& out, const std::string& name, const AcfPacf& acf);

nlohmann::json to_json(const Params& params);
Params params_from_json(const nlohmann::json& j, const Params& defaults = {});

/// Reads {"family", "intensity", "c", "omega", "rho", "beta", "p", "a"}.
ModelStructure structure_from_json(const nlohmann::json& j);
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);

FitConfig fit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitConfig& config);

nlohmann::json fit_result_to_json(const FitResult& result, const ModelStructure& model);
/// Inverse of fit_result_to_json for the fields diagnostics need
/// (estimates, convergence flag and model structure).
FitResult fit_result_from_json(const nlohmann::json& j, ModelStructure& model);

/// FNV-1a over the compact dump of `config`.
std::string config_hash(const nlohmann::json& config);

/// Writes JSON with every floating value at 17 significant digits.
std::string dump_json(const nlohmann::json& j);

}  // namespace zmc
