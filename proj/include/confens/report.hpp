#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "confens/config.hpp"
#include "confens/experiment.hpp"

namespace confens {

/// CSV tables with a leading "#schema <name> v<version>" line.
std::string rows_csv(const std::vector<ReportRow>& rows, bool with_experiment = false);
std::string series_csv(const std::vector<NamedSeries>& series);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Writes rows.csv and, when present, experiments.csv, blocks.csv, series.csv,
/// sweep.csv and maps/<name>.fgrd, plus config.json and config.txt.
void write_report(const std::filesystem::path& dir, const SuiteReport& report, const RunConfig& cfg,
                  const std::string& command);

/// Resolved configuration files only.
void write_config_echo(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& command);

}  // namespace confens
