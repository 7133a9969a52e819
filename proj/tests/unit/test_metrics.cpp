#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "confens/error.hpp"
#include "confens/metrics.hpp"
#include "support.hpp"

using namespace confens;

namespace {

// step quantile functions compared at (j - 1/2)/K, K = max(N, M)
double w2_oracle(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t K = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        // level (2j+1)/(2K); a jump of x sits there when (2j+1)|x| is a multiple of 2K
        auto q = [&](const std::vector<double>& x) {
            const std::size_t num = (2 * j + 1) * x.size();
            const std::size_t idx = (num + 2 * K - 1) / (2 * K);
            if (num % (2 * K) == 0 && idx < x.size()) return 0.5 * (x[idx - 1] + x[idx]);
            return x[idx - 1];
        };
        const double qa = q(a), qb = q(b);
        acc += (qa - qb) * (qa - qb);
    }
    return std::sqrt(acc / static_cast<double>(K));
}

std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

std::vector<Field> cloud(const GridPtr& g, std::size_t n, std::mt19937_64& rng, double shift = 0.0) {
    std::vector<Field> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(testing::normal_field(g, rng, 1.0, shift));
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("one-dimensional distance examples") {
    const std::vector<double> a{0.0, 1.0, 2.0}, b{0.0, 2.0, 4.0};
    CHECK(wasserstein1d(a, a) == 0.0);
    CHECK(wasserstein1d(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
    CHECK(wasserstein1d(a, b) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
    CHECK(wasserstein1d(std::vector<double>{2.0, 0.0, 1.0}, std::vector<double>{4.0, 0.0, 2.0}) ==
          doctest::Approx(1.2909944487358056).epsilon(1e-15));

    std::mt19937_64 rng(80);
    const auto x = normals(37, rng);
    for (double c : {-3.5, 0.25, 10.0}) {
        std::vector<double> y(x);
        for (double& v : y) v += c;
        CHECK(wasserstein1d(x, y) == doctest::Approx(std::abs(c)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(wasserstein1d(std::vector<double>{}, x), Error);
}

TEST_CASE("unequal sizes follow the midpoint refinement") {
    std::mt19937_64 rng(81);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = normals(1 + trial % 13, rng);
        const auto b = normals(1 + (trial * 7) % 29, rng, 2.0);
        CHECK(wasserstein1d(a, b) == doctest::Approx(w2_oracle(a, b)).epsilon(1e-13));
    }
}

TEST_CASE("metric axioms on random triples") {
    std::mt19937_64 rng(82);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + trial % 20;
        const auto a = normals(n, rng), b = normals(n, rng, 2.0), c = normals(n, rng, 0.5);
        const double ab = wasserstein1d(a, b), ba = wasserstein1d(b, a);
        CHECK(ab == ba);
        CHECK(wasserstein1d(a, a) == 0.0);
        CHECK(ab > 0.0);
        CHECK(ab <= wasserstein1d(a, c) + wasserstein1d(c, b) + 1e-12);
    }
}

TEST_CASE("midpoint quantile rule") {
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i + 1;
    // position q*N + 1/2 = 95.5 sits halfway between the 95th and 96th order statistics
    CHECK(sorted_quantile(v, 0.95) == doctest::Approx(95.5).epsilon(1e-15));
    CHECK(sorted_quantile(v, 0.05) == doctest::Approx(5.5).epsilon(1e-15));
    CHECK(sorted_quantile(v, 0.5) == doctest::Approx(50.5).epsilon(1e-15));
    CHECK(sorted_quantile(v, 0.001) == 1.0);
    CHECK(sorted_quantile(v, 0.999) == 100.0);
    const std::vector<double> one{4.0};
    CHECK(sorted_quantile(one, 0.3) == 4.0);
}

TEST_CASE("sliced distance basics") {
    std::mt19937_64 rng(83);
    const auto g = build_grid(3, 4);
    const auto p = cloud(g, 30, rng), q = cloud(g, 45, rng, 0.4);
    CHECK(sliced_wasserstein(p, p, 50, 1) == 0.0);
    CHECK(sliced_wasserstein(p, q, 50, 9) == sliced_wasserstein(q, p, 50, 9));
    CHECK(sliced_wasserstein(p, q, 50, 9) == sliced_wasserstein(p, q, 50, 9));
    CHECK(sliced_wasserstein(p, q, 50, 9) != sliced_wasserstein(p, q, 50, 10));

    const auto g1 = build_grid(1, 1);
    const auto a = cloud(g1, 20, rng), b = cloud(g1, 33, rng, 1.0);
    std::vector<double> av, bv;
    for (const auto& f : a) av.push_back(f[0]);
    for (const auto& f : b) bv.push_back(f[0]);
    for (std::uint64_t seed : {1u, 2u, 99u})
        CHECK(sliced_wasserstein(a, b, 7, seed) == doctest::Approx(wasserstein1d(av, bv)).epsilon(1e-13));

    CHECK_THROWS_AS(sliced_wasserstein(p, cloud(build_grid(4, 3), 5, rng), 10, 1), Error);
    CHECK_THROWS_AS(sliced_wasserstein(p, q, 0, 1), Error);
}

TEST_CASE("directions are unit vectors") {
    const auto d = slice_directions(17, 40, 5);
    CHECK(d.rows() == 40);
    CHECK(d.cols() == 17);
    for (Eigen::Index i = 0; i < d.rows(); ++i) CHECK(d.row(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((slice_directions(17, 40, 5) - d).cwiseAbs().maxCoeff() == 0.0);
    // rows 0..16 and 17..33 form orthonormal frames
    for (Eigen::Index b : {0, 17}) {
        const Eigen::MatrixXd frame = d.middleRows(b, 17);
        CHECK((frame * frame.transpose() - Eigen::MatrixXd::Identity(17, 17)).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("direction coordinates have the spherical second moment") {
    // each coordinate squared has mean 1/p on the sphere
    const std::size_t p = 5;
    const auto d = slice_directions(p, 20000, 12);
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
        const double m = d.col(c).squaredNorm() / static_cast<double>(d.rows());
        CHECK(std::abs(m - 1.0 / p) < 0.01);
    }
    double first = 0.0;
    for (Eigen::Index r = 0; r < d.rows(); r += static_cast<Eigen::Index>(p)) first += d(r, 0) > 0.0 ? 1.0 : 0.0;
    CHECK(std::abs(first / (d.rows() / p) - 0.5) < 0.03);
}

TEST_CASE("shifted Gaussian clouds") {
    std::mt19937_64 rng(84);
    for (std::size_t p : {10u, 100u}) {
        const auto g = build_grid(1, static_cast<long long>(p));
        std::vector<Field> P, Q;
        std::normal_distribution<double> n01;
        std::vector<double> shift(p);
        for (double& s : shift) s = 3.0 * n01(rng);
        double norm = 0.0;
        for (double s : shift) norm += s * s;
        norm = std::sqrt(norm);
        for (int i = 0; i < 2000; ++i) {
            P.push_back(testing::normal_field(g, rng));
            Q.push_back(testing::normal_field(g, rng) + Field(g, shift));
        }
        const double expected = norm / std::sqrt(static_cast<double>(p));
        CHECK(std::abs(sliced_wasserstein(P, Q, 500, 17) - expected) <= 0.05 * expected);
    }
}

TEST_CASE("more directions stay within the Monte-Carlo error") {
    std::mt19937_64 rng(85);
    const auto g = build_grid(4, 5);
    const auto p = cloud(g, 200, rng), q = cloud(g, 200, rng, 0.3);
    const auto a = sliced_wasserstein_detail(p, q, 200, 3);
    const auto b = sliced_wasserstein_detail(p, q, 400, 3);
    CHECK(a.squared.size() == 200);
    CHECK(std::abs(a.distance - b.distance) < 2.0 * a.standard_error);
    CHECK(a.standard_error > 0.0);
}

TEST_CASE("projected evaluation") {
    std::mt19937_64 rng(86);
    const auto g = build_grid(2, 3);
    std::vector<std::vector<Field>> ens;
    std::vector<Field> targets;
    for (int t = 0; t < 10; ++t) {
        targets.push_back(testing::normal_field(g, rng));
        ens.push_back({targets.back()});
    }
    const std::vector<bool> all(10, true);
    auto row = evaluate_projection(ens, targets, &all, 30, 1, "x");
    CHECK(row.mean_width == 0.0);
    CHECK(*row.sw == 0.0);
    CHECK(*row.coverage == 1.0);
    CHECK(row.n_eval == 10);
    CHECK(row.label == "x");
    row = evaluate_projection(ens, targets, nullptr, 30, 1);
    CHECK_FALSE(row.coverage.has_value());

    std::vector<bool> half(10, false);
    for (int i = 0; i < 5; ++i) half[i] = true;
    ens[0].push_back(add_scalar(targets[0], 4.0));
    row = evaluate_projection(ens, targets, &half, 30, 1);
    CHECK(*row.coverage == 0.5);
    CHECK(row.mean_width == doctest::Approx(0.4));
    CHECK_THROWS_AS(evaluate_projection(ens, std::span<const Field>(targets).first(3), nullptr, 30, 1), Error);
}

TEST_CASE("pointwise maps") {
    std::mt19937_64 rng(87);
    const auto g = build_grid(2, 3);
    const auto p = cloud(g, 25, rng), q = cloud(g, 18, rng, 1.0);
    const Field z = pointwise_wasserstein_map(p, p);
    for (double v : z.values()) CHECK(v == 0.0);

    std::vector<double> bump(g->size(), 0.0);
    bump[4] = -2.5;
    std::vector<Field> moved;
    for (const auto& f : p) moved.push_back(f + Field(g, bump));
    const Field m = pointwise_wasserstein_map(p, moved);
    for (std::size_t s = 0; s < g->size(); ++s) CHECK(m[s] == doctest::Approx(s == 4 ? 2.5 : 0.0).epsilon(1e-12));

    const Field w = pointwise_wasserstein_map(p, q);
    for (std::size_t s = 0; s < g->size(); ++s) {
        std::vector<double> a, b;
        for (const auto& f : p) a.push_back(f[s]);
        for (const auto& f : q) b.push_back(f[s]);
        CHECK(w[s] == wasserstein1d(a, b));
    }
}

TEST_CASE("quantile change maps") {
    std::mt19937_64 rng(88);
    const auto g = build_grid(2, 2);
    const auto ref = cloud(g, 40, rng);
    const Field same = quantile_change_map(ref, ref, 0.95);
    for (double v : same.values()) CHECK(v == 0.0);
    std::vector<Field> up;
    for (const auto& f : ref) up.push_back(add_scalar(f, 2.0));
    for (double q : {0.95, 0.05}) {
        const Field d = quantile_change_map(up, ref, q);
        for (double v : d.values()) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }

    const auto proj = cloud(g, 30, rng, 0.5);
    std::vector<Field> shifted;
    for (const auto& f : proj) shifted.push_back(add_scalar(f, -1.25));
    const Field a = quantile_change_map(proj, ref, 0.9), b = quantile_change_map(shifted, ref, 0.9);
    for (std::size_t s = 0; s < g->size(); ++s) CHECK(b[s] == doctest::Approx(a[s] - 1.25).epsilon(1e-12));
    CHECK_THROWS_AS(quantile_change_map(proj, ref, 1.0), Error);
    CHECK_THROWS_AS(quantile_change_map(proj, ref, 0.0), Error);
}

TEST_CASE("global mean series") {
    const auto g = build_grid(3, 4);
    std::vector<Field> fields;
    std::vector<TimeIndex> times;
    for (int t = 0; t < 36; ++t) {
        fields.push_back(Field::constant(g, 3.0));
        times.push_back(TimeIndex{1980, 1}.plus_months(t));
    }
    for (std::size_t w : {1u, 5u, 12u, 40u})
        for (const auto& pt : global_mean_series(fields, times, w)) CHECK(pt.smoothed == doctest::Approx(3.0));

    std::mt19937_64 rng(89);
    std::vector<Field> noisy;
    for (int t = 0; t < 36; ++t) noisy.push_back(testing::normal_field(g, rng));
    const auto raw = global_mean_series(noisy, times, 1);
    for (std::size_t t = 0; t < raw.size(); ++t) {
        CHECK(raw[t].smoothed == raw[t].raw);
        CHECK_FALSE(raw[t].partial);
        CHECK(raw[t].raw == doctest::Approx(grid_mean(noisy[t])).epsilon(1e-15));
        CHECK(raw[t].time == times[t]);
    }

    std::vector<Field> season;
    for (int t = 0; t < 36; ++t) season.push_back(Field::constant(g, t % 2 == 0 ? 1.0 : -1.0));
    const auto sm = global_mean_series(season, times, 12);
    for (std::size_t t = 0; t < sm.size(); ++t) {
        CHECK(sm[t].partial == (t < 11));
        if (t >= 11) CHECK(std::abs(sm[t].smoothed) < 1e-15);
    }
    CHECK(sm[0].smoothed == 1.0);
    CHECK(sm[1].smoothed == 0.0);

    CHECK_THROWS_AS(global_mean_series(std::vector<Field>{}, std::vector<TimeIndex>{}, 3), Error);
    CHECK_THROWS_AS(global_mean_series(fields, times, 0), Error);
}

TEST_CASE("latitude weighting") {
    const auto g = build_grid(2, 1, {0.0, 60.0}, {10.0});
    const Field f(g, {1.0, 4.0});
    CHECK(grid_mean(f) == 2.5);
    CHECK(grid_mean(f, Weighting::CosLatitude) == doctest::Approx((1.0 + 0.5 * 4.0) / 1.5).epsilon(1e-14));
    // without latitudes, cell centres of a regular global grid
    const auto h = build_grid(2, 1);
    CHECK(grid_mean(Field(h, {1.0, 3.0}), Weighting::CosLatitude) == doctest::Approx(2.0).epsilon(1e-14));
}

}
