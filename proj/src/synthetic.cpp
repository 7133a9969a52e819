#include "confens/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "confens/error.hpp"
#include "confens/random.hpp"

namespace confens {

void validate(const EnsembleCollection& c) {
    require(c.grid != nullptr, ErrorCode::Argument, "ensemble collection has no grid");
    require(!c.members.empty(), ErrorCode::Argument, "ensemble collection has no members");
    require(!c.times.empty(), ErrorCode::Argument, "ensemble collection has no time steps");
    for (std::size_t t = 1; t < c.times.size(); ++t)
        require(c.times[t - 1] < c.times[t], ErrorCode::Argument, "collection times must increase strictly");
    for (const auto& series : c.members) {
        require(series.size() == c.times.size(), ErrorCode::Argument,
                "every member series must cover the full time axis");
        for (const Field& f : series)
            require(*f.grid_ptr() == *c.grid, ErrorCode::Argument, "member field grid differs from the collection grid");
    }
}

PairedDataset jackknife_dataset(const EnsembleCollection& c, std::size_t target) {
    require(c.member_count() >= 2, ErrorCode::Config, "the perfect-model protocol needs at least 2 members");
    require(target < c.member_count(), ErrorCode::Argument, "jackknife target out of range");
    std::vector<PairedSample> pairs;
    pairs.reserve(c.length());
    for (std::size_t t = 0; t < c.length(); ++t) {
        std::vector<Field> ens;
        ens.reserve(c.member_count() - 1);
        for (std::size_t i = 0; i < c.member_count(); ++i)
            if (i != target) ens.push_back(c.members[i][t]);
        pairs.push_back(PairedSample{EnsembleSnapshot(c.times[t], std::move(ens)), c.members[target][t]});
    }
    return PairedDataset(std::move(pairs));
}

namespace {

// One pass of a truncated Gaussian filter along a strided line, weights
// renormalized to unit sum of squares at every position.
void smooth_line(const double* in, double* out, std::size_t n, std::size_t stride, double ell) {
    const auto radius = static_cast<long>(std::ceil(3.0 * ell));
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0, w2 = 0.0;
        for (long k = -radius; k <= radius; ++k) {
            const long j = static_cast<long>(i) + k;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            const double w = std::exp(-0.5 * static_cast<double>(k * k) / (ell * ell));
            acc += w * in[static_cast<std::size_t>(j) * stride];
            w2 += w * w;
        }
        out[i * stride] = acc / std::sqrt(w2);
    }
}

}  // namespace

std::vector<double> smooth_field(std::mt19937_64& rng, std::size_t nlat, std::size_t nlon, double length_scale) {
    std::vector<double> white(nlat * nlon), tmp(nlat * nlon), out(nlat * nlon);
    fill_normal(rng, white);
    if (length_scale <= 0.0) return white;
    for (std::size_t i = 0; i < nlat; ++i)
        smooth_line(white.data() + i * nlon, tmp.data() + i * nlon, nlon, 1, length_scale);
    for (std::size_t j = 0; j < nlon; ++j) smooth_line(tmp.data() + j, out.data() + j, nlat, nlon, length_scale);
    return out;
}

EnsembleCollection generate_synthetic(const SyntheticOptions& o) {
    require(o.members >= 1 && o.months >= 1, ErrorCode::Config, "synthetic suite needs members and months");
    EnsembleCollection c;
    c.grid = build_grid(static_cast<long long>(o.nlat), static_cast<long long>(o.nlon));
    const std::size_t p = c.grid->size();
    for (std::size_t t = 0; t < o.months; ++t) c.times.push_back(o.start.plus_months(static_cast<long long>(t)));

    constexpr std::uint64_t shared_id = 1u << 20;
    auto shared = make_stream(o.seed, shared_id, 0);
    const auto base = smooth_field(shared, o.nlat, o.nlon, o.length_scale);
    const auto trend_pattern = smooth_field(shared, o.nlat, o.nlon, o.length_scale);
    const auto season_pattern = smooth_field(shared, o.nlat, o.nlon, o.length_scale);

    c.members.resize(o.members);
    for (std::size_t i = 0; i < o.members; ++i) {
        auto rng = make_stream(o.seed, i, 1);
        std::normal_distribution<double> normal;
        const double amp = o.seasonal_amplitude * std::max(0.2, 1.0 + o.seasonal_spread * normal(rng));
        const double noise_scale = std::exp(o.noise_spread * normal(rng));
        const auto bias = smooth_field(rng, o.nlat, o.nlon, o.length_scale);
        const auto drift = smooth_field(rng, o.nlat, o.nlon, o.length_scale);

        auto noise_rng = make_stream(o.seed, i, 2);
        std::vector<double> fast = smooth_field(noise_rng, o.nlat, o.nlon, o.length_scale);
        std::vector<double> slow = smooth_field(noise_rng, o.nlat, o.nlon, o.length_scale);
        const double fast_innov = std::sqrt(1.0 - o.fast_rho * o.fast_rho);
        const double slow_innov = std::sqrt(1.0 - o.slow_rho * o.slow_rho);

        c.members[i].reserve(o.months);
        for (std::size_t t = 0; t < o.months; ++t) {
            if (t > 0) {
                const auto ef = smooth_field(noise_rng, o.nlat, o.nlon, o.length_scale);
                const auto es = smooth_field(noise_rng, o.nlat, o.nlon, o.length_scale);
                for (std::size_t s = 0; s < p; ++s) {
                    fast[s] = o.fast_rho * fast[s] + fast_innov * ef[s];
                    slow[s] = o.slow_rho * slow[s] + slow_innov * es[s];
                }
            }
            const double decades = static_cast<double>(t) / 120.0;
            const double season = std::cos(2.0 * std::numbers::pi * (c.times[t].month - 1) / 12.0);
            std::vector<double> v(p);
            for (std::size_t s = 0; s < p; ++s) {
                double x = 2.0 * base[s] + o.trend_per_decade * decades * (1.0 + 0.5 * trend_pattern[s]) +
                           amp * season * (1.0 + 0.3 * season_pattern[s]) + o.bias_amplitude * bias[s] +
                           noise_scale * (o.fast_sd * fast[s] + o.slow_sd * slow[s]);
                if (o.drifting) x += o.drift_per_decade * decades * drift[s];
                v[s] = x;
            }
            c.members[i].emplace_back(c.grid, std::move(v));
        }
    }
    return c;
}

}  // namespace confens
