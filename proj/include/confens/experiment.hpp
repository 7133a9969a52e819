#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "confens/analysis.hpp"
#include "confens/depth.hpp"
#include "confens/metrics.hpp"
#include "confens/synthetic.hpp"

namespace confens {

/// Temporal decomposition of the test period.
struct BlockSpec {
    bool decadal = true;     // consecutive windows of `decade` test steps
    bool monthly = true;     // one block per calendar month
    std::size_t decade = 120;
    std::vector<std::pair<std::size_t, std::size_t>> custom;  // [first, last) test indices
};

struct ExperimentConfig {
    std::vector<AnalysisKind> analysis_kinds{AnalysisKind::EA};
    std::vector<DepthKind> depth_kinds{DepthKind::LinfDepth};
    double alpha = 0.1;
    SplitSpec split{800, 200};
    std::size_t n_test = 1000;       // white-noise test draws per repetition
    std::uint64_t seed = 0;
    std::size_t nlat = 30;
    std::size_t nlon = 50;
    std::size_t members = 30;
    std::size_t repetitions = 0;     // white noise; 0 means one per member
    std::size_t n_proj = 100;
    BlockSpec blocks;
    bool imv = true;
    bool imv_bc = true;
    std::size_t quantiles = 0;       // 0 picks the default level count
    TrainingOptions training;
    std::size_t window = 12;         // global-mean smoothing
    Weighting weighting = Weighting::Uniform;
    bool maps = true;
    bool series = true;
    std::size_t threads = 1;
    std::vector<std::size_t> sweep_sizes{50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
};

/// Rejects empty kind lists and levels that are infeasible for the calibration size.
void validate(const ExperimentConfig& cfg);

/// One table cell set. Aggregated rows carry standard errors across experiments.
struct ReportRow {
    std::string experiment;  // experiment id, or "all" for aggregates
    std::string analysis;
    std::string depth;       // "-" for baselines
    std::string method;      // CE, IMV, IMV(BC)
    std::string block;       // "all", "decade-k", "month-mm", "custom-k"
    std::optional<double> coverage;
    std::optional<double> mean_width;
    std::optional<double> sw;
    std::size_t n_eval = 0;
    std::optional<double> coverage_se;
    std::optional<double> width_se;
    std::optional<double> sw_se;
    std::size_t n_experiments = 1;
    std::string status = "ok";

    std::string label() const;
};

struct NamedField {
    std::string name;
    Field field;
};

struct NamedSeries {
    std::string experiment;
    std::string name;
    std::vector<SeriesPoint> points;
};

struct SweepRow {
    std::size_t n2 = 0;
    std::string analysis;
    std::string depth;
    double mean_sw = 0.0;
    std::optional<double> sw_se;
    std::size_t n_experiments = 0;
    std::string status = "ok";
};

struct SuiteReport {
    std::vector<ReportRow> rows;         // aggregated over experiments, block "all"
    std::vector<ReportRow> blocks;       // aggregated, one per block
    std::vector<ReportRow> experiments;  // per-experiment rows, block "all"
    std::vector<NamedField> maps;
    std::vector<NamedSeries> series;
    std::vector<SweepRow> sweep;
};

SuiteReport white_noise_control(const ExperimentConfig& cfg);

SuiteReport perfect_model_suite(const EnsembleCollection& data, const ExperimentConfig& cfg);

/// Total history n1 + n2 of cfg.split stays fixed; each size re-splits it,
/// retrains and recalibrates, and the test period after it is evaluated.
SuiteReport calibration_size_sweep(const EnsembleCollection& data, const ExperimentConfig& cfg,
                                   const std::vector<std::size_t>& sizes);

/// Sample mean and standard error (sd / sqrt(n)); the error is absent for n < 2.
std::pair<double, std::optional<double>> mean_and_se(const std::vector<double>& values);

}  // namespace confens
