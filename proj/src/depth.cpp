#include "confens/depth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confens/error.hpp"

namespace confens {

std::string to_string(DepthKind kind) {
    switch (kind) {
        case DepthKind::LinfDepth: return "linf";
        case DepthKind::IntegratedTukey: return "tukey";
        case DepthKind::InvLinfNorm: return "norm";
    }
    return "?";
}

DepthKind parse_depth_kind(const std::string& name) {
    if (name == "linf") return DepthKind::LinfDepth;
    if (name == "tukey") return DepthKind::IntegratedTukey;
    if (name == "norm") return DepthKind::InvLinfNorm;
    fail(ErrorCode::Config, "unknown depth '" + name + "' (expected linf, tukey, norm)");
}

ResidualPool::ResidualPool(std::vector<Field> residuals) : residuals_(std::move(residuals)) {
    require(!residuals_.empty(), ErrorCode::Argument, "residual pool must be nonempty");
    for (const Field& f : residuals_) require_same_grid(residuals_.front(), f, "residual pool");
    const std::size_t n = residuals_.size();
    const std::size_t p = residuals_.front().size();
    sorted_.resize(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = residuals_[i].values();
        for (std::size_t s = 0; s < p; ++s) sorted_[s * n + i] = v[s];
    }
    for (std::size_t s = 0; s < p; ++s)
        std::sort(sorted_.begin() + static_cast<std::ptrdiff_t>(s * n),
                  sorted_.begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
}

namespace {

double linf_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double linf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double distance_sum(const Field& r, const ResidualPool& pool) {
    double sum = 0.0;
    for (const Field& R : pool.fields()) sum += linf_distance(r.values(), R.values());
    return sum;
}

// Sum over cells of min(#{R <= v}, #{R >= v}) + extra, divided by (n + extra).
double tukey_score(const Field& r, const ResidualPool& pool, std::size_t extra) {
    const std::size_t n = pool.size();
    auto v = r.values();
    double acc = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) {
        auto col = pool.sorted_cell(s);
        const auto below = static_cast<std::size_t>(
            std::upper_bound(col.begin(), col.end(), v[s]) - col.begin());
        const auto above =
            n - static_cast<std::size_t>(std::lower_bound(col.begin(), col.end(), v[s]) - col.begin());
        acc += static_cast<double>(std::min(below, above) + extra) / static_cast<double>(n + extra);
    }
    return acc / static_cast<double>(v.size());
}

}  // namespace

double depth_score(DepthKind kind, const Field& r, const ResidualPool& pool) {
    require(pool.size() > 0, ErrorCode::Argument, "empty residual pool");
    require_same_grid(r, pool[0], "depth score");
    switch (kind) {
        case DepthKind::LinfDepth:
            return 1.0 / (1.0 + distance_sum(r, pool) / static_cast<double>(pool.size()));
        case DepthKind::IntegratedTukey:
            return tukey_score(r, pool, 0);
        case DepthKind::InvLinfNorm:
            return 1.0 / (1.0 + linf_norm(r.values()));
    }
    return 0.0;
}

double depth_score_augmented(DepthKind kind, const Field& r, const ResidualPool& pool) {
    require(pool.size() > 0, ErrorCode::Argument, "empty residual pool");
    require_same_grid(r, pool[0], "depth score");
    switch (kind) {
        case DepthKind::LinfDepth:
            // the self-distance contributes a zero term
            return 1.0 / (1.0 + distance_sum(r, pool) / static_cast<double>(pool.size() + 1));
        case DepthKind::IntegratedTukey:
            return tukey_score(r, pool, 1);
        case DepthKind::InvLinfNorm:
            return 1.0 / (1.0 + linf_norm(r.values()));
    }
    return 0.0;
}

DepthScores depth_scores_self(DepthKind kind, const ResidualPool& pool) {
    const std::size_t n = pool.size();
    require(n > 0, ErrorCode::Argument, "empty residual pool");
    DepthScores out;
    out.scores.resize(n);
    if (kind == DepthKind::LinfDepth) {
        // Symmetric distance matrix; row sums in index order match depth_score bit for bit.
        std::vector<double> dist(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = linf_distance(pool[i].values(), pool[j].values());
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) sum += dist[i * n + j];
            out.scores[i] = 1.0 / (1.0 + sum / static_cast<double>(n));
        }
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out.scores[i] = depth_score(kind, pool[i], pool);
    return out;
}

std::size_t conformal_rank(std::size_t n2, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::Config, "alpha must lie in (0, 1)");
    const double x = static_cast<double>(n2 + 1) * (1.0 - alpha);
    // guard against products like 9.000000000000002
    return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

CentralRegion central_threshold(const DepthScores& scores, double alpha) {
    const std::size_t n = scores.scores.size();
    require(n >= 1, ErrorCode::Argument, "no calibration scores");
    const std::size_t k = conformal_rank(n, alpha);
    require(k <= n, ErrorCode::Infeasible,
            "ceil((n2+1)(1-alpha)) = " + std::to_string(k) + " exceeds n2 = " + std::to_string(n) +
                "; alpha too small for this calibration size");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.scores[a] > scores.scores[b];
    });
    CentralRegion region;
    region.k = std::max<std::size_t>(k, 1);
    region.tau = scores.scores[order[region.k - 1]];
    for (std::size_t idx : order)
        if (scores.scores[idx] >= region.tau) region.kept.push_back(idx);
    return region;
}

}  // namespace confens
