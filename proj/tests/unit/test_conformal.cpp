#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "confens/conformal.hpp"
#include "confens/error.hpp"
#include "support.hpp"

using namespace confens;

namespace {

std::shared_ptr<const TrainedAnalysis> ea_model(const PairedDataset& ds) {
    return std::make_shared<const TrainedAnalysis>(train_analysis(AnalysisKind::EA, ds));
}

constexpr DepthKind kAll[] = {DepthKind::LinfDepth, DepthKind::IntegratedTukey, DepthKind::InvLinfNorm};

}  // namespace

TEST_SUITE("conformal") {

TEST_CASE("perfect model keeps everything") {
    std::mt19937_64 rng(40);
    const auto g = build_grid(2, 3);
    auto noisy = testing::noise_dataset(g, 20, 3, rng);
    std::vector<PairedSample> exact;
    for (const auto& s : noisy) exact.push_back({s.ensemble, s.ensemble.mean()});
    const PairedDataset ds(exact);
    const auto calib = calibrate(ea_model(ds), ds, DepthKind::LinfDepth, 0.1);
    for (double s : calib.scores.scores) CHECK(s == 1.0);
    CHECK(calib.tau == 1.0);
    CHECK(calib.kept.size() == 20);
    CHECK(calib.k == 19);
}

TEST_CASE("calibration bookkeeping") {
    std::mt19937_64 rng(41);
    const auto g = build_grid(2, 2);
    const auto ds = testing::noise_dataset(g, 200, 3, rng);
    const auto model = ea_model(ds);
    for (auto kind : {DepthKind::LinfDepth, DepthKind::InvLinfNorm}) {
        const auto calib = calibrate(model, ds, kind, 0.1);
        CHECK(calib.k == 181);
        CHECK(calib.kept.size() == 181);
        CHECK(calib.pool.size() == 200);
        for (std::size_t t = 0; t < ds.size(); ++t) {
            const Field r = ds[t].target - predict(*model, ds[t].ensemble);
            for (std::size_t s = 0; s < g->size(); ++s) CHECK(calib.pool[t][s] == r[s]);
        }
        const auto again = calibrate_from_pool(model, calib.pool, kind, 0.1);
        CHECK(again.tau == calib.tau);
        CHECK(again.kept == calib.kept);

        const auto members = conformal_ensemble(calib, ds[0].ensemble);
        CHECK(members.size() == 181);
    }
    try {
        calibrate(model, ds.slice(0, 5), DepthKind::LinfDepth, 0.1);
        FAIL("expected an infeasible-level error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Infeasible);
    }
}

TEST_CASE("conformal ensemble structure") {
    std::mt19937_64 rng(42);
    const auto g = build_grid(3, 2);
    const auto ds = testing::noise_dataset(g, 60, 4, rng);
    const auto model = ea_model(ds);
    const auto calib = calibrate(model, ds.slice(0, 40), DepthKind::IntegratedTukey, 0.2);
    const auto& a = ds[45].ensemble;
    const auto& b = ds[50].ensemble;
    const Field fa = predict(*model, a), fb = predict(*model, b);
    const auto ea = conformal_ensemble(calib, a);
    const auto eb = conformal_ensemble(calib, b);
    REQUIRE(ea.size() == calib.kept.size());
    for (std::size_t j = 0; j < ea.size(); ++j) {
        const Field r = ea[j] - fa;
        const Field d = ea[j] - eb[j];
        for (std::size_t s = 0; s < g->size(); ++s) {
            CHECK(r[s] == doctest::Approx(calib.pool[calib.kept[j]][s]).epsilon(1e-14));
            CHECK(d[s] == doctest::Approx(fa[s] - fb[s]).epsilon(1e-12));
        }
    }
    for (std::size_t j = 1; j < calib.kept.size(); ++j)
        CHECK(calib.scores.scores[calib.kept[j - 1]] >= calib.scores.scores[calib.kept[j]]);
}

TEST_CASE("membership") {
    std::mt19937_64 rng(43);
    const auto g = build_grid(2, 3);
    const auto ds = testing::noise_dataset(g, 50, 3, rng);
    const auto model = ea_model(ds);
    for (auto kind : kAll) {
        const auto calib = calibrate(model, ds.slice(0, 30), kind, 0.1);
        for (std::size_t t = 30; t < 50; t += 5) {
            const auto& snap = ds[t].ensemble;
            for (const Field& y : conformal_ensemble(calib, snap)) CHECK(covers(calib, snap, y));
            std::vector<double> v(ds[t].target.values().begin(), ds[t].target.values().end());
            v[2] = 1e6;
            if (kind != DepthKind::IntegratedTukey) CHECK_FALSE(covers(calib, snap, Field(g, v)));
        }
        CHECK_THROWS_AS(covers(calib, ds[40].ensemble, Field::constant(build_grid(3, 2), 0.0)), Error);
    }
}

TEST_CASE("smaller sets at larger levels") {
    std::mt19937_64 rng(44);
    const auto g = build_grid(2, 2);
    const auto ds = testing::noise_dataset(g, 80, 3, rng);
    const auto model = ea_model(ds);
    for (auto kind : kAll) {
        double prev_width = INFINITY;
        std::vector<std::size_t> prev_kept;
        for (double alpha : {0.05, 0.1, 0.2, 0.3, 0.5}) {
            const auto calib = calibrate(model, ds, kind, alpha);
            const double w = conformal_band_width(calib);
            CHECK(w <= prev_width);
            for (auto i : calib.kept)
                if (!prev_kept.empty()) CHECK(std::find(prev_kept.begin(), prev_kept.end(), i) != prev_kept.end());
            prev_width = w;
            prev_kept = calib.kept;
        }
    }
}

TEST_CASE("shifting every target leaves decisions unchanged") {
    std::mt19937_64 rng(45);
    const auto g = build_grid(2, 3);
    const auto ds = testing::noise_dataset(g, 60, 3, rng);
    const Field c = testing::normal_field(g, rng, 3.0);
    std::vector<PairedSample> moved;
    for (const auto& s : ds) moved.push_back({s.ensemble, s.target + c});
    const PairedDataset ms(moved);
    for (auto kind : {DepthKind::LinfDepth, DepthKind::IntegratedTukey}) {
        const auto a = calibrate(ea_model(ds), ds.slice(0, 30), kind, 0.1);
        const auto b = calibrate(ea_model(ms), ms.slice(0, 30), kind, 0.1);
        for (std::size_t t = 30; t < 60; ++t)
            CHECK(covers(a, ds[t].ensemble, ds[t].target) == covers(b, ms[t].ensemble, ms[t].target));
    }
}

TEST_CASE("coverage on exchangeable data") {
    // one cell, n2 = 19, alpha = 0.1: coverage lies in [0.9, 0.9 + 1/19]
    std::mt19937_64 rng(46);
    const auto g = build_grid(1, 2);
    const int trials = 1500;
    for (auto kind : kAll) {
        int hits = 0;
        for (int trial = 0; trial < trials; ++trial) {
            const auto ds = testing::noise_dataset(g, 20, 2, rng);
            const auto calib = calibrate(ea_model(ds), ds.slice(0, 19), kind, 0.1);
            hits += covers(calib, ds[19].ensemble, ds[19].target) ? 1 : 0;
        }
        const double rate = static_cast<double>(hits) / trials;
        const double sd = std::sqrt(0.9 * 0.1 / trials);
        CHECK(rate >= 0.9 - 3.0 * sd);
        CHECK(rate <= 0.9 + 1.0 / 19.0 + 3.0 * sd);
    }
}

TEST_CASE("bands") {
    const auto g = build_grid(2, 2);
    std::mt19937_64 rng(47);
    const Field one = testing::normal_field(g, rng);
    const std::vector<Field> single{one};
    const Band b1 = prediction_band(single);
    CHECK(b1.mean_width == 0.0);
    for (std::size_t s = 0; s < g->size(); ++s) {
        CHECK(b1.lower[s] == one[s]);
        CHECK(b1.upper[s] == one[s]);
    }
    const std::vector<Field> two{Field::constant(g, 0.0), Field::constant(g, 2.0)};
    const Band b2 = prediction_band(two);
    CHECK(b2.mean_width == 2.0);
    for (std::size_t s = 0; s < g->size(); ++s) {
        CHECK(b2.lower[s] == 0.0);
        CHECK(b2.upper[s] == 2.0);
    }
    try {
        prediction_band(std::vector<Field>{});
        FAIL("expected an argument error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Argument);
    }
}

TEST_CASE("band width does not depend on the prediction") {
    std::mt19937_64 rng(48);
    const auto g = build_grid(2, 3);
    const auto ds = testing::noise_dataset(g, 40, 3, rng);
    const auto calib = calibrate(ea_model(ds), ds, DepthKind::LinfDepth, 0.1);
    const auto members = conformal_ensemble(calib, ds[3].ensemble);
    CHECK(prediction_band(members).mean_width == doctest::Approx(conformal_band_width(calib)).epsilon(1e-12));
}

}
