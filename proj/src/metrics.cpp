#include "confens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "confens/error.hpp"

namespace confens {

double sorted_quantile(std::span<const double> sorted, double q) {
    require(!sorted.empty(), ErrorCode::Argument, "quantile of an empty sample");
    require(q >= 0.0 && q <= 1.0, ErrorCode::Argument, "quantile level outside [0, 1]");
    const double n = static_cast<double>(sorted.size());
    const double h = std::clamp(q * n + 0.5, 1.0, n);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo >= sorted.size() || frac == 0.0) return sorted[lo - 1];
    return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

double wasserstein1d_sorted(std::span<const double> a, std::span<const double> b) {
    require(!a.empty() && !b.empty(), ErrorCode::Argument, "Wasserstein distance of an empty sample");
    const std::size_t n = a.size(), m = b.size();
    double acc = 0.0;
    if (n == m) {
        for (std::size_t i = 0; i < n; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(acc / static_cast<double>(n));
    }
    const std::size_t k = std::max(n, m);
    // at a jump of the step quantile the two sides are averaged
    auto step = [](std::span<const double> x, double u) {
        const double pos = u * static_cast<double>(x.size());
        const double r = std::round(pos);
        if (std::abs(pos - r) < 1e-9 && r >= 1.0 && r < static_cast<double>(x.size())) {
            const auto i = static_cast<std::size_t>(r);
            return 0.5 * (x[i - 1] + x[i]);
        }
        const auto idx = static_cast<std::size_t>(std::ceil(pos));
        return x[std::clamp<std::size_t>(idx, 1, x.size()) - 1];
    };
    for (std::size_t j = 1; j <= k; ++j) {
        const double u = (static_cast<double>(j) - 0.5) / static_cast<double>(k);
        const double d = step(a, u) - step(b, u);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(k));
}

double wasserstein1d(std::span<const double> a, std::span<const double> b) {
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return wasserstein1d_sorted(sa, sb);
}

Directions slice_directions(std::size_t p, std::size_t n_proj, std::uint64_t seed) {
    require(p >= 1 && n_proj >= 1, ErrorCode::Argument, "slicing needs p >= 1 and n_proj >= 1");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    const auto dim = static_cast<Eigen::Index>(p);
    Directions d(static_cast<Eigen::Index>(n_proj), dim);
    for (Eigen::Index start = 0; start < d.rows();) {
        const Eigen::Index cols = std::min(dim, d.rows() - start);
        Eigen::MatrixXd g(dim, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        if ((qr.matrixQR().diagonal().head(cols).array() == 0.0).any()) continue;
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double sign = qr.matrixQR()(c, c) < 0.0 ? -1.0 : 1.0;
            d.row(start + c) = sign * q.col(c).transpose();
        }
        start += cols;
    }
    return d;
}

Eigen::VectorXd project_field(const Directions& dirs, const Field& f) {
    require(static_cast<Eigen::Index>(f.size()) == dirs.cols(), ErrorCode::Argument,
            "field size differs from the direction dimension");
    const Eigen::Map<const Eigen::VectorXd> v(f.values().data(), static_cast<Eigen::Index>(f.size()));
    return dirs * v;
}

ProjectedCloud project_cloud(const Directions& dirs, std::span<const Field> cloud) {
    require(!cloud.empty(), ErrorCode::Argument, "empty field cloud");
    ProjectedCloud out(dirs.rows(), static_cast<Eigen::Index>(cloud.size()));
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        require_same_grid(cloud.front(), cloud[j], "field cloud");
        out.col(static_cast<Eigen::Index>(j)) = project_field(dirs, cloud[j]);
    }
    return out;
}

SlicedResult sliced_wasserstein_projected(const ProjectedCloud& p, const ProjectedCloud& q) {
    require(p.rows() == q.rows() && p.rows() > 0, ErrorCode::Argument, "projection counts differ");
    require(p.cols() > 0 && q.cols() > 0, ErrorCode::Argument, "empty projected cloud");
    SlicedResult r;
    r.squared.resize(static_cast<std::size_t>(p.rows()));
    std::vector<double> a(static_cast<std::size_t>(p.cols())), b(static_cast<std::size_t>(q.cols()));
    for (Eigen::Index d = 0; d < p.rows(); ++d) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) a[static_cast<std::size_t>(j)] = p(d, j);
        for (Eigen::Index j = 0; j < q.cols(); ++j) b[static_cast<std::size_t>(j)] = q(d, j);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const double w = wasserstein1d_sorted(a, b);
        r.squared[static_cast<std::size_t>(d)] = w * w;
    }
    const double n = static_cast<double>(r.squared.size());
    double mean = 0.0;
    for (double v : r.squared) mean += v;
    mean /= n;
    r.distance = std::sqrt(mean);
    if (r.squared.size() > 1 && r.distance > 0.0) {
        double var = 0.0;
        for (double v : r.squared) var += (v - mean) * (v - mean);
        var /= n - 1.0;
        r.standard_error = std::sqrt(var / n) / (2.0 * r.distance);
    }
    return r;
}

SlicedResult sliced_wasserstein_detail(std::span<const Field> p, std::span<const Field> q,
                                       std::size_t n_proj, std::uint64_t seed) {
    require(!p.empty() && !q.empty(), ErrorCode::Argument, "empty field cloud");
    require_same_grid(p.front(), q.front(), "sliced Wasserstein");
    const Directions dirs = slice_directions(p.front().size(), n_proj, seed);
    return sliced_wasserstein_projected(project_cloud(dirs, p), project_cloud(dirs, q));
}

double sliced_wasserstein(std::span<const Field> p, std::span<const Field> q, std::size_t n_proj,
                          std::uint64_t seed) {
    return sliced_wasserstein_detail(p, q, n_proj, seed).distance;
}

MetricsRow evaluate_projection(const std::vector<std::vector<Field>>& ensembles_per_time,
                               std::span<const Field> targets, const std::vector<bool>* coverage_flags,
                               std::size_t n_proj, std::uint64_t seed, std::string label) {
    require(!targets.empty() && ensembles_per_time.size() == targets.size(), ErrorCode::Argument,
            "ensembles and targets are not time aligned");
    require(coverage_flags == nullptr || coverage_flags->size() == targets.size(), ErrorCode::Argument,
            "coverage flags are not time aligned");
    MetricsRow row;
    row.label = std::move(label);
    row.n_eval = targets.size();
    std::vector<Field> pooled;
    double width = 0.0;
    for (const auto& ens : ensembles_per_time) {
        require(!ens.empty(), ErrorCode::Argument, "empty ensemble");
        double lo_hi = 0.0;
        const std::size_t p = ens.front().size();
        for (std::size_t s = 0; s < p; ++s) {
            double lo = ens.front()[s], hi = lo;
            for (const Field& f : ens) {
                lo = std::min(lo, f[s]);
                hi = std::max(hi, f[s]);
            }
            lo_hi += hi - lo;
        }
        width += lo_hi / static_cast<double>(p);
        pooled.insert(pooled.end(), ens.begin(), ens.end());
    }
    row.mean_width = width / static_cast<double>(targets.size());
    if (coverage_flags) {
        const auto hits = std::count(coverage_flags->begin(), coverage_flags->end(), true);
        row.coverage = static_cast<double>(hits) / static_cast<double>(targets.size());
    }
    row.sw = sliced_wasserstein(pooled, targets, n_proj, seed);
    return row;
}

namespace {

std::vector<double> cell_column(std::span<const Field> cloud, std::size_t s) {
    std::vector<double> v(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) v[j] = cloud[j][s];
    std::sort(v.begin(), v.end());
    return v;
}

void check_clouds(std::span<const Field> p, std::span<const Field> q, const char* context) {
    require(!p.empty() && !q.empty(), ErrorCode::Argument, "empty field cloud");
    for (const Field& f : p) require_same_grid(p.front(), f, context);
    for (const Field& f : q) require_same_grid(p.front(), f, context);
}

}  // namespace

Field pointwise_wasserstein_map(std::span<const Field> p, std::span<const Field> q) {
    check_clouds(p, q, "pointwise Wasserstein map");
    const std::size_t n = p.front().size();
    std::vector<double> out(n);
    for (std::size_t s = 0; s < n; ++s) out[s] = wasserstein1d_sorted(cell_column(p, s), cell_column(q, s));
    return Field(p.front().grid_ptr(), std::move(out));
}

Field quantile_change_map(std::span<const Field> proj, std::span<const Field> reference, double q) {
    require(q > 0.0 && q < 1.0, ErrorCode::Argument, "quantile level must lie in (0, 1)");
    check_clouds(proj, reference, "quantile change map");
    const std::size_t n = proj.front().size();
    std::vector<double> out(n);
    for (std::size_t s = 0; s < n; ++s)
        out[s] = sorted_quantile(cell_column(proj, s), q) - sorted_quantile(cell_column(reference, s), q);
    return Field(proj.front().grid_ptr(), std::move(out));
}

double grid_mean(const Field& f, Weighting weighting) {
    const Grid& g = f.grid();
    auto v = f.values();
    if (weighting == Weighting::Uniform) {
        double sum = 0.0;
        for (double x : v) sum += x;
        return sum / static_cast<double>(v.size());
    }
    double sum = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < g.nlat; ++i) {
        const double lat = g.lat_deg.empty() ? -90.0 + (static_cast<double>(i) + 0.5) * 180.0 / static_cast<double>(g.nlat)
                                             : g.lat_deg[i];
        const double w = std::cos(lat * std::numbers::pi / 180.0);
        for (std::size_t j = 0; j < g.nlon; ++j) sum += w * v[i * g.nlon + j];
        wsum += w * static_cast<double>(g.nlon);
    }
    require(wsum > 0.0, ErrorCode::Argument, "latitude weights sum to zero");
    return sum / wsum;
}

std::vector<SeriesPoint> moving_average_series(std::span<const TimeIndex> times, std::span<const double> raw,
                                               std::size_t window) {
    require(!raw.empty(), ErrorCode::Argument, "moving average of an empty series");
    require(raw.size() == times.size(), ErrorCode::Argument, "values and times differ in length");
    require(window >= 1, ErrorCode::Argument, "smoothing window must be at least 1");
    std::vector<SeriesPoint> out(raw.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t u = first; u <= t; ++u) sum += raw[u];
        out[t].time = times[t];
        out[t].raw = raw[t];
        out[t].smoothed = sum / static_cast<double>(t - first + 1);
        out[t].partial = t + 1 < window;
    }
    return out;
}

std::vector<SeriesPoint> global_mean_series(std::span<const Field> fields, std::span<const TimeIndex> times,
                                            std::size_t window, Weighting weighting) {
    require(!fields.empty(), ErrorCode::Argument, "global mean series of an empty list");
    std::vector<double> raw(fields.size());
    for (std::size_t t = 0; t < fields.size(); ++t) raw[t] = grid_mean(fields[t], weighting);
    return moving_average_series(times, raw, window);
}

}  // namespace confens
