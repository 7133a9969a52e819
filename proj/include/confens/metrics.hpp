#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confens/field.hpp"

namespace confens {

/// Empirical q-quantile of ascending data: order statistic i sits at
/// (i - 1/2)/N, linear in between, clamped to the extremes.
double sorted_quantile(std::span<const double> sorted, double q);

/// 2-Wasserstein distance between two empirical distributions on the line.
double wasserstein1d(std::span<const double> a, std::span<const double> b);

/// Same, for inputs already sorted ascending.
double wasserstein1d_sorted(std::span<const double> a, std::span<const double> b);

/// n_proj unit directions in R^p, one per row, each uniform on the sphere.
/// Consecutive groups of p rows are mutually orthogonal.
using Directions = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
Directions slice_directions(std::size_t p, std::size_t n_proj, std::uint64_t seed);

/// Projections of a field cloud: column j holds the projections of field j.
using ProjectedCloud = Eigen::MatrixXd;

Eigen::VectorXd project_field(const Directions& dirs, const Field& f);
ProjectedCloud project_cloud(const Directions& dirs, std::span<const Field> cloud);

struct SlicedResult {
    double distance = 0.0;             // sqrt of the mean squared 1D distance
    std::vector<double> squared;       // per-direction W2^2
    double standard_error = 0.0;       // Monte-Carlo SE of the distance (delta method)
};

SlicedResult sliced_wasserstein_projected(const ProjectedCloud& p, const ProjectedCloud& q);

SlicedResult sliced_wasserstein_detail(std::span<const Field> p, std::span<const Field> q,
                                       std::size_t n_proj, std::uint64_t seed);

double sliced_wasserstein(std::span<const Field> p, std::span<const Field> q, std::size_t n_proj,
                          std::uint64_t seed);

struct MetricsRow {
    std::string label;
    std::optional<double> coverage;
    double mean_width = 0.0;
    std::optional<double> sw;
    std::size_t n_eval = 0;
};

/// Coverage, mean band width and sliced distance between the pooled ensemble
/// members and the pooled targets.
MetricsRow evaluate_projection(const std::vector<std::vector<Field>>& ensembles_per_time,
                               std::span<const Field> targets, const std::vector<bool>* coverage_flags,
                               std::size_t n_proj, std::uint64_t seed, std::string label = {});

Field pointwise_wasserstein_map(std::span<const Field> p, std::span<const Field> q);

Field quantile_change_map(std::span<const Field> proj, std::span<const Field> reference, double q);

enum class Weighting { Uniform, CosLatitude };

struct SeriesPoint {
    TimeIndex time;
    double raw = 0.0;       // grid mean at this time
    double smoothed = 0.0;  // trailing moving average
    bool partial = false;   // fewer than window values available
};

/// Grids without latitudes are taken as regular global grids with cell-centre latitudes.
double grid_mean(const Field& f, Weighting weighting = Weighting::Uniform);

/// Trailing moving average of a scalar series; the first window - 1 points are partial means.
std::vector<SeriesPoint> moving_average_series(std::span<const TimeIndex> times, std::span<const double> raw,
                                               std::size_t window);

std::vector<SeriesPoint> global_mean_series(std::span<const Field> fields, std::span<const TimeIndex> times,
                                            std::size_t window, Weighting weighting = Weighting::Uniform);

}  // namespace confens
