#include <doctest.h>

#include <algorithm>
#include <random>

#include "confens/error.hpp"
#include "confens/field.hpp"
#include "support.hpp"

using namespace confens;

TEST_SUITE("field") {

TEST_CASE("grid sizes") {
    CHECK(build_grid(2, 3)->size() == 6);
    CHECK(build_grid(30, 50)->size() == 1500);
    try {
        build_grid(0, 5);
        FAIL("expected a dimension error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Dimension);
    }
    CHECK_THROWS_AS(build_grid(3, -1), Error);
}

TEST_CASE("time index arithmetic") {
    const TimeIndex t{1999, 11};
    CHECK(t.plus_months(2) == TimeIndex{2000, 1});
    CHECK(t.plus_months(-11) == TimeIndex{1998, 12});
    CHECK(t.str() == "1999-11");
    CHECK(TimeIndex::parse("2024-03") == TimeIndex{2024, 3});
    CHECK_THROWS_AS(TimeIndex::parse("2024-13"), Error);
}

TEST_CASE("split sizes and order") {
    std::mt19937_64 rng(1);
    const auto g = build_grid(1, 2);
    const auto ds = testing::noise_dataset(g, 1000, 2, rng);
    const auto s = split_paired_dataset(ds, {800, 200});
    CHECK(s.train.size() == 800);
    CHECK(s.cal.size() == 200);
    CHECK(s.test.size() == 0);

    const auto small = testing::noise_dataset(g, 10, 2, rng);
    try {
        split_paired_dataset(small, {9, 2});
        FAIL("expected a split error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Split);
    }

    const auto five = testing::noise_dataset(g, 5, 2, rng);
    const auto p = split_paired_dataset(five, {3, 1});
    CHECK(p.train[0].ensemble.time() < p.cal[0].ensemble.time());
    CHECK(p.cal[0].ensemble.time() < p.test[0].ensemble.time());
}

TEST_CASE("split then concatenation reproduces the dataset") {
    std::mt19937_64 rng(2);
    const auto g = build_grid(2, 2);
    const auto ds = testing::noise_dataset(g, 17, 3, rng);
    for (std::size_t n1 = 1; n1 < 16; ++n1) {
        for (std::size_t n2 = 1; n1 + n2 <= 17; ++n2) {
            const auto s = split_paired_dataset(ds, {n1, n2});
            std::vector<const PairedSample*> all;
            for (const auto* part : {&s.train, &s.cal, &s.test})
                for (const auto& x : *part) all.push_back(&x);
            REQUIRE(all.size() == ds.size());
            for (std::size_t i = 0; i < ds.size(); ++i) {
                CHECK(all[i]->ensemble.time() == ds[i].ensemble.time());
                CHECK(std::equal(all[i]->target.values().begin(), all[i]->target.values().end(),
                                 ds[i].target.values().begin()));
            }
        }
    }
}

TEST_CASE("monthly climatology examples") {
    const auto g = build_grid(2, 3);
    std::vector<Field> fields;
    std::vector<TimeIndex> times;
    for (int t = 0; t < 24; ++t) {
        fields.push_back(Field::constant(g, 3.0));
        times.push_back(TimeIndex{2001, 1}.plus_months(t));
    }
    const auto clim = monthly_climatology(fields, times);
    for (int m = 1; m <= 12; ++m)
        for (double v : clim.at(m).values()) CHECK(v == 3.0);

    std::vector<Field> year(fields.begin(), fields.begin() + 12);
    std::vector<TimeIndex> ytimes(times.begin(), times.begin() + 12);
    for (int m = 0; m < 12; ++m) year[m] = Field::constant(g, m * 1.5 - 2.0);
    const auto one = monthly_climatology(year, ytimes);
    for (int m = 1; m <= 12; ++m) CHECK(one.at(m)[4] == (m - 1) * 1.5 - 2.0);
    CHECK(one.has(5));

    std::vector<Field> jan{Field::constant(g, 1.0), Field::constant(g, 3.0)};
    std::vector<TimeIndex> jt{{2001, 1}, {2002, 1}};
    const auto j = monthly_climatology(jan, jt);
    CHECK(j.at(1)[0] == 2.0);
    CHECK_FALSE(j.has(2));
    CHECK_THROWS_AS(j.at(2), Error);

    std::vector<TimeIndex> short_times{{2001, 1}};
    try {
        monthly_climatology(jan, short_times);
        FAIL("expected an argument error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Argument);
    }
}

TEST_CASE("climatology ignores the order of same-month entries") {
    std::mt19937_64 rng(3);
    const auto g = build_grid(3, 4);
    std::vector<Field> fields;
    std::vector<TimeIndex> times;
    for (int t = 0; t < 60; ++t) {
        fields.push_back(testing::normal_field(g, rng));
        times.push_back(TimeIndex{1990, 1}.plus_months(t));
    }
    const auto a = monthly_climatology(fields, times);
    std::vector<std::size_t> order(fields.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Field> f2;
    std::vector<TimeIndex> t2;
    for (auto i : order) {
        f2.push_back(fields[i]);
        t2.push_back(times[i]);
    }
    const auto b = monthly_climatology(f2, t2);
    for (int m = 1; m <= 12; ++m)
        for (std::size_t s = 0; s < g->size(); ++s) CHECK(a.at(m)[s] == doctest::Approx(b.at(m)[s]).epsilon(1e-14));
}

TEST_CASE("field arithmetic is elementwise and grid checked") {
    const auto g = build_grid(1, 3);
    const Field a(g, {1.0, 2.0, 3.0});
    const Field b(g, {0.5, -1.0, 4.0});
    const Field s = a + b, d = a - b, k = 2.0 * a;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s[i] == a[i] + b[i]);
        CHECK(d[i] == a[i] - b[i]);
        CHECK(k[i] == 2.0 * a[i]);
    }
    const Field c(build_grid(3, 1), {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(a + c, Error);
    CHECK_THROWS_AS(Field(g, {1.0, 2.0}), Error);
    // equal grids built separately are compatible
    const Field e(build_grid(1, 3), {1.0, 1.0, 1.0});
    CHECK((a + e)[2] == 4.0);
}

TEST_CASE("snapshots reject mixed grids") {
    const auto g = build_grid(2, 2);
    std::vector<Field> mixed{Field::constant(g, 0.0), Field::constant(build_grid(1, 4), 0.0)};
    CHECK_THROWS_AS(EnsembleSnapshot(TimeIndex{2000, 1}, mixed), Error);
    CHECK_THROWS_AS(EnsembleSnapshot(TimeIndex{2000, 1}, {}), Error);
}

}
