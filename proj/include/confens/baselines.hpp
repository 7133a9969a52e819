#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "confens/field.hpp"

namespace confens {

/// Members shifted so their pointwise mean equals center; deviations kept.
std::vector<Field> imv_ensemble(const EnsembleSnapshot& snapshot, const Field& center);

/// Per (member, location) empirical quantile breakpoints of model and observed histories.
class QuantileMapSet {
public:
    QuantileMapSet() = default;
    QuantileMapSet(GridPtr grid, std::size_t members, std::size_t levels, std::vector<double> model,
                   std::vector<double> observed);

    std::size_t members() const { return members_; }
    std::size_t levels() const { return levels_; }
    const GridPtr& grid_ptr() const { return grid_; }

    std::span<const double> model_breaks(std::size_t member, std::size_t cell) const;
    std::span<const double> observed_breaks(std::size_t member, std::size_t cell) const;

    const std::vector<double>& model_data() const { return model_; }
    const std::vector<double>& observed_data() const { return observed_; }

    /// Piecewise-linear inside the breakpoints, constant offset beyond them.
    double apply(std::size_t member, std::size_t cell, double value) const;

private:
    GridPtr grid_;
    std::size_t members_ = 0;
    std::size_t levels_ = 0;
    std::vector<double> model_;     // [member][cell][level]
    std::vector<double> observed_;  // same layout
};

/// Default level count: 100, or the history length if shorter.
std::size_t default_quantile_count(std::size_t history_length);

/// member_history[i][t] and obs_history[t] must be time aligned. n_q = 0 picks the default.
QuantileMapSet fit_quantile_maps(const std::vector<std::vector<Field>>& member_history,
                                 std::span<const Field> obs_history, std::size_t n_q = 0);

QuantileMapSet fit_quantile_maps(const PairedDataset& history, std::size_t n_q = 0);

std::vector<Field> imv_bc_ensemble(const EnsembleSnapshot& snapshot, const QuantileMapSet& maps,
                                   const Field& center);

}  // namespace confens
