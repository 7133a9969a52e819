#include "confens/baselines.hpp"

#include <algorithm>

#include "confens/error.hpp"
#include "confens/metrics.hpp"

namespace confens {

std::vector<Field> imv_ensemble(const EnsembleSnapshot& snapshot, const Field& center) {
    require(same_grid(snapshot.grid_ptr(), center.grid_ptr()), ErrorCode::Argument,
            "IMV center grid differs from the ensemble grid");
    const Field shift = center - snapshot.mean();
    std::vector<Field> out;
    out.reserve(snapshot.member_count());
    for (const Field& f : snapshot.members()) out.push_back(f + shift);
    return out;
}

QuantileMapSet::QuantileMapSet(GridPtr grid, std::size_t members, std::size_t levels,
                               std::vector<double> model, std::vector<double> observed)
    : grid_(std::move(grid)), members_(members), levels_(levels), model_(std::move(model)),
      observed_(std::move(observed)) {
    require(grid_ != nullptr && members_ >= 1, ErrorCode::Argument, "invalid quantile map set");
    require(levels_ >= 2, ErrorCode::Argument, "quantile maps need at least 2 levels");
    const std::size_t expect = members_ * grid_->size() * levels_;
    require(model_.size() == expect && observed_.size() == expect, ErrorCode::Argument,
            "quantile map payload has the wrong size");
    for (std::size_t i = 0; i < members_; ++i)
        for (std::size_t s = 0; s < grid_->size(); ++s) {
            auto a = model_breaks(i, s);
            auto b = observed_breaks(i, s);
            require(std::is_sorted(a.begin(), a.end()) && std::is_sorted(b.begin(), b.end()),
                    ErrorCode::Argument, "quantile breakpoints must be non-decreasing");
        }
}

std::span<const double> QuantileMapSet::model_breaks(std::size_t member, std::size_t cell) const {
    return {model_.data() + (member * grid_->size() + cell) * levels_, levels_};
}

std::span<const double> QuantileMapSet::observed_breaks(std::size_t member, std::size_t cell) const {
    return {observed_.data() + (member * grid_->size() + cell) * levels_, levels_};
}

double QuantileMapSet::apply(std::size_t member, std::size_t cell, double value) const {
    auto m = model_breaks(member, cell);
    auto o = observed_breaks(member, cell);
    if (value <= m.front()) return value + (o.front() - m.front());
    if (value >= m.back()) return value + (o.back() - m.back());
    const auto j = static_cast<std::size_t>(std::upper_bound(m.begin(), m.end(), value) - m.begin()) - 1;
    const double t = (value - m[j]) / (m[j + 1] - m[j]);
    return o[j] + t * (o[j + 1] - o[j]);
}

std::size_t default_quantile_count(std::size_t history_length) {
    return std::min<std::size_t>(100, history_length);
}

QuantileMapSet fit_quantile_maps(const std::vector<std::vector<Field>>& member_history,
                                 std::span<const Field> obs_history, std::size_t n_q) {
    require(!member_history.empty() && !obs_history.empty(), ErrorCode::Argument,
            "quantile maps need nonempty histories");
    const std::size_t n = obs_history.size();
    for (const auto& series : member_history)
        require(series.size() == n, ErrorCode::Argument, "member and observed histories are not aligned");
    if (n_q == 0) n_q = default_quantile_count(n);
    require(n_q >= 2, ErrorCode::Argument, "quantile maps need n_q >= 2 (history too short?)");
    const GridPtr grid = obs_history.front().grid_ptr();
    const std::size_t p = grid->size();
    const std::size_t m = member_history.size();

    std::vector<double> levels(n_q);
    for (std::size_t j = 0; j < n_q; ++j) levels[j] = static_cast<double>(j) / static_cast<double>(n_q - 1);

    std::vector<double> model(m * p * n_q), observed(m * p * n_q);
    std::vector<double> column(n);
    std::vector<double> obs_breaks(p * n_q);
    for (std::size_t s = 0; s < p; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            require_same_grid(obs_history.front(), obs_history[t], "quantile map history");
            column[t] = obs_history[t][s];
        }
        std::sort(column.begin(), column.end());
        for (std::size_t j = 0; j < n_q; ++j) obs_breaks[s * n_q + j] = sorted_quantile(column, levels[j]);
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t s = 0; s < p; ++s) {
            for (std::size_t t = 0; t < n; ++t) {
                require_same_grid(obs_history.front(), member_history[i][t], "quantile map history");
                column[t] = member_history[i][t][s];
            }
            std::sort(column.begin(), column.end());
            const std::size_t base = (i * p + s) * n_q;
            for (std::size_t j = 0; j < n_q; ++j) {
                model[base + j] = sorted_quantile(column, levels[j]);
                observed[base + j] = obs_breaks[s * n_q + j];
            }
        }
    return QuantileMapSet(grid, m, n_q, std::move(model), std::move(observed));
}

QuantileMapSet fit_quantile_maps(const PairedDataset& history, std::size_t n_q) {
    require(!history.empty(), ErrorCode::Argument, "quantile maps need a nonempty history");
    std::vector<std::vector<Field>> members(history.member_count());
    std::vector<Field> obs;
    for (const auto& pair : history) {
        for (std::size_t i = 0; i < members.size(); ++i) members[i].push_back(pair.ensemble.members()[i]);
        obs.push_back(pair.target);
    }
    return fit_quantile_maps(members, obs, n_q);
}

std::vector<Field> imv_bc_ensemble(const EnsembleSnapshot& snapshot, const QuantileMapSet& maps,
                                   const Field& center) {
    require(maps.members() == snapshot.member_count(), ErrorCode::Argument,
            "quantile maps do not cover every ensemble member");
    require(maps.grid_ptr() && same_grid(maps.grid_ptr(), snapshot.grid_ptr()), ErrorCode::Argument,
            "quantile maps do not cover every grid location");
    const GridPtr& grid = snapshot.grid_ptr();
    std::vector<Field> mapped;
    mapped.reserve(snapshot.member_count());
    for (std::size_t i = 0; i < snapshot.member_count(); ++i) {
        auto v = snapshot.members()[i].values();
        std::vector<double> out(v.size());
        for (std::size_t s = 0; s < v.size(); ++s) out[s] = maps.apply(i, s, v[s]);
        mapped.emplace_back(grid, std::move(out));
    }
    return imv_ensemble(EnsembleSnapshot(snapshot.time(), std::move(mapped)), center);
}

}  // namespace confens
