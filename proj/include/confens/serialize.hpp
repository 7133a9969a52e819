#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "confens/analysis.hpp"
#include "confens/conformal.hpp"

namespace confens {

/// Versioned binary blobs: a magic tag, a format version, then the payload.
std::string encode_model(const TrainedAnalysis& model);
TrainedAnalysis decode_model(const std::string& bytes);

/// Stores the model and the residual pool; scores and threshold are recomputed on load.
std::string encode_calibration(const ConformalCalibration& calib);
ConformalCalibration decode_calibration(const std::string& bytes);

void save_model(const std::filesystem::path& path, const TrainedAnalysis& model);
TrainedAnalysis load_model(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const ConformalCalibration& calib);
ConformalCalibration load_calibration(const std::filesystem::path& path);

}  // namespace confens
