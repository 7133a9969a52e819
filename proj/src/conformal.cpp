#include "confens/conformal.hpp"

#include <algorithm>
#include <limits>

#include "confens/error.hpp"

namespace confens {

ConformalCalibration calibrate_from_pool(std::shared_ptr<const TrainedAnalysis> model, ResidualPool pool,
                                         DepthKind depth_kind, double alpha) {
    require(model != nullptr, ErrorCode::Argument, "calibration needs a trained model");
    require(pool.size() > 0, ErrorCode::Argument, "calibration set is empty");
    require(same_grid(pool.grid_ptr(), model->grid_ptr()), ErrorCode::Argument,
            "calibration grid differs from the model grid");
    ConformalCalibration c;
    c.model = std::move(model);
    c.depth_kind = depth_kind;
    c.alpha = alpha;
    c.pool = std::move(pool);
    c.scores = depth_scores_self(depth_kind, c.pool);
    CentralRegion region = central_threshold(c.scores, alpha);
    c.tau = region.tau;
    c.k = region.k;
    c.kept = std::move(region.kept);
    return c;
}

ConformalCalibration calibrate(std::shared_ptr<const TrainedAnalysis> model, const PairedDataset& cal,
                               DepthKind depth_kind, double alpha) {
    require(model != nullptr, ErrorCode::Argument, "calibration needs a trained model");
    require(!cal.empty(), ErrorCode::Argument, "calibration set is empty");
    // fail early on infeasible levels before any prediction work
    require(conformal_rank(cal.size(), alpha) <= cal.size(), ErrorCode::Infeasible,
            "alpha " + std::to_string(alpha) + " is too small for n2 = " + std::to_string(cal.size()));
    std::vector<Field> residuals;
    residuals.reserve(cal.size());
    for (const auto& pair : cal) residuals.push_back(pair.target - predict(*model, pair.ensemble));
    return calibrate_from_pool(std::move(model), ResidualPool(std::move(residuals)), depth_kind, alpha);
}

std::vector<Field> conformal_members(const ConformalCalibration& calib, const Field& prediction) {
    require_same_grid(prediction, calib.pool[0], "conformal ensemble");
    std::vector<Field> out;
    out.reserve(calib.kept.size());
    for (std::size_t idx : calib.kept) out.push_back(prediction + calib.pool[idx]);
    return out;
}

std::vector<Field> conformal_ensemble(const ConformalCalibration& calib, const EnsembleSnapshot& snapshot) {
    return conformal_members(calib, predict(*calib.model, snapshot));
}

bool covers_prediction(const ConformalCalibration& calib, const Field& prediction, const Field& y) {
    require_same_grid(prediction, y, "coverage test");
    return depth_score_augmented(calib.depth_kind, y - prediction, calib.pool) >= calib.tau;
}

bool covers(const ConformalCalibration& calib, const EnsembleSnapshot& snapshot, const Field& y) {
    return covers_prediction(calib, predict(*calib.model, snapshot), y);
}

Band prediction_band(std::span<const Field> ensemble) {
    require(!ensemble.empty(), ErrorCode::Argument, "prediction band of an empty ensemble");
    const std::size_t p = ensemble.front().size();
    std::vector<double> lo(p, std::numeric_limits<double>::infinity());
    std::vector<double> hi(p, -std::numeric_limits<double>::infinity());
    for (const Field& f : ensemble) {
        require_same_grid(ensemble.front(), f, "prediction band");
        auto v = f.values();
        for (std::size_t s = 0; s < p; ++s) {
            lo[s] = std::min(lo[s], v[s]);
            hi[s] = std::max(hi[s], v[s]);
        }
    }
    double width = 0.0;
    for (std::size_t s = 0; s < p; ++s) width += hi[s] - lo[s];
    Band b;
    b.mean_width = width / static_cast<double>(p);
    b.lower = Field(ensemble.front().grid_ptr(), std::move(lo));
    b.upper = Field(ensemble.front().grid_ptr(), std::move(hi));
    return b;
}

double conformal_band_width(const ConformalCalibration& calib) {
    std::vector<Field> kept;
    kept.reserve(calib.kept.size());
    for (std::size_t idx : calib.kept) kept.push_back(calib.pool[idx]);
    return prediction_band(kept).mean_width;
}

}  // namespace confens
