#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "confens/field.hpp"

namespace confens {

enum class DepthKind {
    LinfDepth,        // 1 / (1 + E||r - R||_inf)
    IntegratedTukey,  // grid average of the univariate halfspace depth
    InvLinfNorm,      // 1 / (1 + ||r||_inf); a scoring rule, not a depth
};

std::string to_string(DepthKind kind);
DepthKind parse_depth_kind(const std::string& name);

/// Calibration residual fields on a common grid, with per-cell sorted
/// values cached for rank queries.
class ResidualPool {
public:
    ResidualPool() = default;
    explicit ResidualPool(std::vector<Field> residuals);

    std::size_t size() const { return residuals_.size(); }
    const Field& operator[](std::size_t i) const { return residuals_[i]; }
    const std::vector<Field>& fields() const { return residuals_; }
    const GridPtr& grid_ptr() const { return residuals_.front().grid_ptr(); }
    std::size_t cells() const { return residuals_.front().size(); }

    /// Pool values at one grid cell, ascending.
    std::span<const double> sorted_cell(std::size_t cell) const {
        return {sorted_.data() + cell * residuals_.size(), residuals_.size()};
    }

private:
    std::vector<Field> residuals_;
    std::vector<double> sorted_;  // cell-major, size() values per cell
};

struct DepthScores {
    std::vector<double> scores;  // aligned with pool order
};

/// Score of r with respect to the pool exactly as given.
double depth_score(DepthKind kind, const Field& r, const ResidualPool& pool);

/// Score of a new point r with respect to the pool augmented by r itself.
/// This is the counterpart of the calibration self-scores, where every
/// member is part of its own reference pool.
double depth_score_augmented(DepthKind kind, const Field& r, const ResidualPool& pool);

/// scores[i] = depth_score(kind, pool[i], pool).
DepthScores depth_scores_self(DepthKind kind, const ResidualPool& pool);

/// ceil((n2 + 1)(1 - alpha)).
std::size_t conformal_rank(std::size_t n2, double alpha);

struct CentralRegion {
    double tau = 0.0;               // k-th largest score
    std::size_t k = 0;              // conformal rank
    std::vector<std::size_t> kept;  // all i with score >= tau, by descending score
};

CentralRegion central_threshold(const DepthScores& scores, double alpha);

}  // namespace confens
