#pragma once

#include <random>
#include <vector>

#include "confens/field.hpp"

namespace testing {

inline confens::Field constant(const confens::GridPtr& g, double v) { return confens::Field::constant(g, v); }

inline confens::Field from_values(const confens::GridPtr& g, std::vector<double> v) {
    return confens::Field(g, std::move(v));
}

inline confens::Field normal_field(const confens::GridPtr& g, std::mt19937_64& rng, double sd = 1.0, double mean = 0.0) {
    std::normal_distribution<double> n(mean, sd);
    std::vector<double> v(g->size());
    for (double& x : v) x = n(rng);
    return confens::Field(g, std::move(v));
}

// i.i.d. normal members and target, monthly from 2000-01
inline confens::PairedDataset noise_dataset(const confens::GridPtr& g, std::size_t n, std::size_t m,
                                            std::mt19937_64& rng) {
    std::vector<confens::PairedSample> pairs;
    for (std::size_t t = 0; t < n; ++t) {
        std::vector<confens::Field> members;
        for (std::size_t i = 0; i < m; ++i) members.push_back(normal_field(g, rng));
        pairs.push_back({confens::EnsembleSnapshot(confens::TimeIndex{2000, 1}.plus_months(static_cast<long long>(t)),
                                                   std::move(members)),
                         normal_field(g, rng)});
    }
    return confens::PairedDataset(std::move(pairs));
}

}  // namespace testing
