#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "confens/config.hpp"
#include "confens/error.hpp"
#include "confens/fgrd.hpp"
#include "confens/report.hpp"
#include "confens/serialize.hpp"
#include "support.hpp"

using namespace confens;
namespace fs = std::filesystem;

namespace {

FgrdData random_tensor(std::size_t nt, std::size_t nm, std::size_t nlat, std::size_t nlon, std::mt19937_64& rng) {
    const auto g = build_grid(static_cast<long long>(nlat), static_cast<long long>(nlon));
    std::vector<std::vector<Field>> f(nt);
    for (auto& row : f)
        for (std::size_t m = 0; m < nm; ++m) row.push_back(testing::normal_field(g, rng));
    return make_fgrd(TimeIndex{1987, 6}, f);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("confens_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("fgrd layout and roundtrip") {
    std::mt19937_64 rng(100);
    const auto t = random_tensor(2, 3, 4, 5, rng);
    const std::string bytes = encode_fgrd(t);
    const std::string header = "FGRD1\nnlat=4\nnlon=5\nntime=2\nnmember=3\nstart=1987-06\n\n";
    REQUIRE(bytes.size() == header.size() + 2 * 3 * 4 * 5 * 8);
    CHECK(bytes.substr(0, header.size()) == header);
    // [time][member][lat][lon], little endian
    double v;
    std::memcpy(&v, bytes.data() + header.size() + ((1 * 3 + 2) * 20 + 7) * 8, 8);
    CHECK(v == t.field(1, 2)[7]);

    const auto back = decode_fgrd(bytes);
    CHECK(back.ntime == 2);
    CHECK(back.nmember == 3);
    CHECK(back.start == TimeIndex{1987, 6});
    CHECK(back.values == t.values);
    CHECK(encode_fgrd(back) == bytes);

    const auto dir = scratch_dir("fgrd");
    write_fgrd(dir / "t.fgrd", t);
    CHECK(read_file(dir / "t.fgrd") == bytes);
    CHECK(read_fgrd(dir / "t.fgrd").values == t.values);
}

TEST_CASE("fgrd errors") {
    std::mt19937_64 rng(101);
    const std::string good = encode_fgrd(random_tensor(10, 1, 2, 2, rng));

    std::string bad = good;
    bad.replace(0, 4, "XXXX");
    try {
        decode_fgrd(bad);
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Format);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }

    CHECK(code_of([&] { decode_fgrd(good.substr(0, good.size() - 4 * 8)); }) == ErrorCode::Truncation);
    CHECK(code_of([&] { decode_fgrd(good + std::string(8, '\0')); }) == ErrorCode::Format);
    std::string nohead = good;
    nohead.replace(nohead.find("nlon"), 4, "nlox");
    CHECK(code_of([&] { decode_fgrd(nohead); }) == ErrorCode::Format);

    std::string nan = good;
    const double q = std::nan("");
    std::memcpy(nan.data() + good.find("\n\n") + 2 + 13 * 8, &q, 8);
    try {
        decode_fgrd(nan);
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Data);
        CHECK(std::string(e.what()).find("13") != std::string::npos);
    }
    CHECK(code_of([&] { read_fgrd("/nonexistent/confens.fgrd"); }) == ErrorCode::Io);
}

TEST_CASE("collections and pairing") {
    std::mt19937_64 rng(102);
    SyntheticOptions o;
    o.nlat = 2;
    o.nlon = 3;
    o.members = 3;
    o.months = 24;
    const auto c = generate_synthetic(o);
    const auto dir = scratch_dir("collection");
    write_collection(dir, c);
    CHECK(fs::exists(dir / "member_000.fgrd"));
    const auto back = read_collection(dir);
    CHECK(back.member_count() == 3);
    CHECK(back.times == c.times);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t t = 0; t < 24; ++t)
            for (std::size_t s = 0; s < 6; ++s) CHECK(back.members[i][t][s] == c.members[i][t][s]);

    const auto ens = random_tensor(6, 2, 2, 2, rng);
    const auto tgt = random_tensor(6, 1, 2, 2, rng);
    const auto ds = paired_from_fgrd(ens, tgt);
    CHECK(ds.size() == 6);
    CHECK(ds.member_count() == 2);
    CHECK(ds[4].target[3] == tgt.field(4, 0)[3]);
    CHECK(code_of([&] { paired_from_fgrd(ens, random_tensor(5, 1, 2, 2, rng)); }) == ErrorCode::Data);
    CHECK(code_of([&] { paired_from_fgrd(ens, random_tensor(6, 2, 2, 2, rng)); }) == ErrorCode::Data);
}

TEST_CASE("csv import") {
    const auto dir = scratch_dir("csv");
    {
        std::ofstream out(dir / "t.csv");
        out << "# time,member,values\n";
        out << "2001-01,0,1,2,3,4\n2001-01,1,5,6,7,8\n2001-02,0,0.5,0,0,0\n2001-02,1,-1,-2,-3,-4e2\n";
    }
    const auto t = read_csv_tensor(dir / "t.csv", 2, 2);
    CHECK(t.ntime == 2);
    CHECK(t.nmember == 2);
    CHECK(t.start == TimeIndex{2001, 1});
    CHECK(t.field(1, 1)[3] == -400.0);
    CHECK(t.field(0, 1)[0] == 5.0);
    {
        std::ofstream out(dir / "bad.csv");
        out << "2001-01,0,1,2,3\n";
    }
    CHECK_THROWS_AS(read_csv_tensor(dir / "bad.csv", 2, 2), Error);
}

TEST_CASE("configuration grammar") {
    const RunConfig d = parse_config_text("");
    CHECK(d.experiment.alpha == 0.1);
    CHECK(d.experiment.depth_kinds == std::vector<DepthKind>{DepthKind::LinfDepth});
    CHECK(d.experiment.analysis_kinds == std::vector<AnalysisKind>{AnalysisKind::EA});
    CHECK(d.experiment.n_proj == 100);
    CHECK(d.experiment.training.nngp_depth == 10);
    CHECK(d.experiment.training.ridge == 0.0);
    CHECK(d.experiment.split.n1 == 800);
    CHECK(d.experiment.split.n2 == 200);

    const RunConfig a = parse_config_text("alpha=0.05\n");
    CHECK(a.experiment.alpha == 0.05);
    CHECK(config_to_text(parse_config_text("alpha=0.1")) == config_to_text(d));

    try {
        parse_config_text("alhpa=0.1\n");
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
    CHECK(code_of([] { parse_config_text("alpha=abc"); }) == ErrorCode::Type);
    CHECK(code_of([] { parse_config_text("n1=-4"); }) == ErrorCode::Type);
    CHECK(code_of([] { parse_config_text("alpha=0.1\nalpha=0.2"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config_text("depth=median"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config_text("just a line"); }) == ErrorCode::Config);

    const RunConfig m = parse_config_text(
        "# comment\n analysis = ea, gp \ndepth=linf,tukey,norm\nweighting=coslat\nblocks=decadal\nseed=42\nridge=1e-6\n");
    CHECK(m.experiment.analysis_kinds == std::vector<AnalysisKind>{AnalysisKind::EA, AnalysisKind::GP});
    CHECK(m.experiment.depth_kinds.size() == 3);
    CHECK(m.experiment.weighting == Weighting::CosLatitude);
    CHECK(m.experiment.blocks.decadal);
    CHECK_FALSE(m.experiment.blocks.monthly);
    CHECK(m.experiment.seed == 42);
    CHECK(config_to_text(parse_config_text(config_to_text(m))) == config_to_text(m));
    CHECK(config_to_json(m)["alpha"] == "0.10000000000000001");
}

TEST_CASE("model blobs reproduce predictions") {
    std::mt19937_64 rng(103);
    const auto g = build_grid(2, 3);
    const auto ds = testing::noise_dataset(g, 30, 2, rng);
    TrainingOptions o;
    o.gp.max_evals = 30;
    for (auto kind : {AnalysisKind::EA, AnalysisKind::WA, AnalysisKind::Delta, AnalysisKind::LM, AnalysisKind::GP}) {
        const auto model = train_analysis(kind, ds, o);
        const std::string blob = encode_model(model);
        const auto back = decode_model(blob);
        CHECK(back.kind() == kind);
        CHECK(encode_model(back) == blob);
        for (std::size_t t : {0u, 17u}) {
            const Field a = predict(model, ds[t].ensemble), b = predict(back, ds[t].ensemble);
            for (std::size_t s = 0; s < g->size(); ++s) CHECK(a[s] == doctest::Approx(b[s]).epsilon(1e-12));
        }
    }
    CHECK(code_of([] { decode_model("CFMODEX\n"); }) == ErrorCode::Format);
    const std::string ea = encode_model(train_analysis(AnalysisKind::LM, ds));
    CHECK(code_of([&] { decode_model(ea.substr(0, ea.size() - 3)); }) == ErrorCode::Truncation);
}

TEST_CASE("calibration blobs") {
    std::mt19937_64 rng(104);
    const auto g = build_grid(2, 2);
    const auto ds = testing::noise_dataset(g, 40, 3, rng);
    const auto model = std::make_shared<const TrainedAnalysis>(train_analysis(AnalysisKind::WA, ds.slice(0, 20)));
    const auto calib = calibrate(model, ds.slice(20, 40), DepthKind::IntegratedTukey, 0.2);
    const auto dir = scratch_dir("calib");
    save_calibration(dir / "c.bin", calib);
    const auto back = load_calibration(dir / "c.bin");
    CHECK(back.tau == calib.tau);
    CHECK(back.kept == calib.kept);
    CHECK(back.k == calib.k);
    CHECK(back.alpha == calib.alpha);
    CHECK(back.depth_kind == calib.depth_kind);
    CHECK(back.model->kind() == AnalysisKind::WA);
    CHECK(encode_calibration(back) == encode_calibration(calib));
}

TEST_CASE("report tables") {
    ReportRow r;
    r.experiment = "e0";
    r.analysis = "GP";
    r.depth = "linf";
    r.method = "CE";
    r.block = "all";
    r.coverage = 0.5;
    r.mean_width = 2.0;
    r.n_eval = 7;
    CHECK(r.label() == "GP/CE-linf");
    const std::string csv = rows_csv({r});
    CHECK(csv.rfind("#schema confens-rows v1\nlabel,coverage,mean_width,sw,n_eval,", 0) == 0);
    CHECK(csv.find("GP/CE-linf,0.5,2,,7,GP,CE,linf,all,,,,1,ok") != std::string::npos);
    CHECK(rows_csv({r}, true).find("e0,GP/CE-linf") != std::string::npos);

    SweepRow s;
    s.n2 = 50;
    s.analysis = "EA";
    s.depth = "linf";
    s.mean_sw = 1.25;
    s.n_experiments = 4;
    CHECK(sweep_csv({s}).find("50,EA,linf,1.25,,4,ok") != std::string::npos);
    s.n_experiments = 0;
    CHECK(sweep_csv({s}).find("50,EA,linf,,,0,ok") != std::string::npos);

    const auto dir = scratch_dir("report");
    SuiteReport rep;
    rep.rows = {r};
    rep.maps.push_back({"w", Field::constant(build_grid(2, 2), 1.0)});
    write_report(dir, rep, RunConfig{}, "simulate-wn --seed 3");
    CHECK(fs::exists(dir / "rows.csv"));
    CHECK(fs::exists(dir / "config.json"));
    CHECK(fs::exists(dir / "config.txt"));
    CHECK(read_fgrd(dir / "maps" / "w.fgrd").grid->size() == 4);
    CHECK(config_to_text(parse_config_file(dir / "config.txt")) == config_to_text(RunConfig{}));
}

}
