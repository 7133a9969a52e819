#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "confens/analysis.hpp"
#include "confens/depth.hpp"

namespace confens {

/// Frozen calibration: residual pool, its self-depths and the central-region threshold.
struct ConformalCalibration {
    std::shared_ptr<const TrainedAnalysis> model;
    DepthKind depth_kind = DepthKind::LinfDepth;
    double alpha = 0.1;
    ResidualPool pool;
    DepthScores scores;
    double tau = 0.0;
    std::size_t k = 0;
    std::vector<std::size_t> kept;  // descending score
};

ConformalCalibration calibrate(std::shared_ptr<const TrainedAnalysis> model, const PairedDataset& cal,
                               DepthKind depth_kind, double alpha);

/// Rebuilds scores and threshold from a stored residual pool.
ConformalCalibration calibrate_from_pool(std::shared_ptr<const TrainedAnalysis> model, ResidualPool pool,
                                         DepthKind depth_kind, double alpha);

/// Kept residuals added to a given prediction, most central first.
std::vector<Field> conformal_members(const ConformalCalibration& calib, const Field& prediction);

std::vector<Field> conformal_ensemble(const ConformalCalibration& calib, const EnsembleSnapshot& snapshot);

/// Membership of y in the prediction set around a given prediction. The
/// candidate residual is scored against the pool together with itself.
bool covers_prediction(const ConformalCalibration& calib, const Field& prediction, const Field& y);

bool covers(const ConformalCalibration& calib, const EnsembleSnapshot& snapshot, const Field& y);

struct Band {
    Field lower;
    Field upper;
    double mean_width = 0.0;
};

Band prediction_band(std::span<const Field> ensemble);

/// Grid-averaged width of the band spanned by prediction + kept residuals;
/// independent of the prediction.
double conformal_band_width(const ConformalCalibration& calib);

}  // namespace confens
