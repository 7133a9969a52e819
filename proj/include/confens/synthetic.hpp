#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "confens/field.hpp"

namespace confens {

/// m member series on one grid and one time axis.
struct EnsembleCollection {
    GridPtr grid;
    std::vector<TimeIndex> times;
    std::vector<std::vector<Field>> members;  // [member][time]

    std::size_t member_count() const { return members.size(); }
    std::size_t length() const { return times.size(); }
};

/// Checks shapes, grids and the monthly time axis.
void validate(const EnsembleCollection& c);

/// Pairs member `target` against the remaining members.
PairedDataset jackknife_dataset(const EnsembleCollection& c, std::size_t target);

/// Members share a linear warming trend, a seasonal cycle and a climatology.
/// Each member adds its own persistent spatial bias, seasonal amplitude and
/// internal variability: a fast and a slow AR(1) process of spatially smooth
/// fields. With drifting set, each member's bias also grows linearly in
/// time along a member-specific pattern, so the offset between any two members
/// changes over the record.
struct SyntheticOptions {
    std::size_t nlat = 30;
    std::size_t nlon = 50;
    std::size_t members = 8;
    std::size_t months = 840;
    TimeIndex start{1950, 1};
    bool drifting = true;
    std::uint64_t seed = 7;

    double trend_per_decade = 0.25;  // shared warming, scaled by a smooth pattern
    double seasonal_amplitude = 3.0;
    double seasonal_spread = 0.25;   // relative member spread of the seasonal amplitude
    double bias_amplitude = 1.5;     // persistent member bias
    double drift_per_decade = 0.4;   // member bias growth when drifting
    double fast_sd = 1.0;
    double fast_rho = 0.5;
    double slow_sd = 1.2;
    double slow_rho = 0.97;
    double noise_spread = 0.3;       // relative member spread of internal variability
    double length_scale = 3.0;       // grid cells
};

EnsembleCollection generate_synthetic(const SyntheticOptions& options);

/// Spatially smooth unit-variance field from a stream of normals.
std::vector<double> smooth_field(std::mt19937_64& rng, std::size_t nlat, std::size_t nlon, double length_scale);

}  // namespace confens
