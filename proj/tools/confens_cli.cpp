#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "confens/baselines.hpp"
#include "confens/config.hpp"
#include "confens/conformal.hpp"
#include "confens/error.hpp"
#include "confens/experiment.hpp"
#include "confens/fgrd.hpp"
#include "confens/metrics.hpp"
#include "confens/report.hpp"
#include "confens/serialize.hpp"
#include "confens/synthetic.hpp"

namespace fs = std::filesystem;
using namespace confens;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> sets;
    std::string invocation;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "key=value configuration file");
    cmd->add_option("--seed", c.seed, "overrides the configured seed");
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--set", c.sets, "extra key=value assignment, applied after the file");
}

RunConfig resolve(const Common& c, const std::string& command) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config_file(c.config);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(ErrorCode::Config, "--set expects key=value, got '" + s + "'");
        apply_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) cfg.experiment.seed = *c.seed;
    std::cout << "# " << command << " resolved configuration\n" << config_to_text(cfg) << std::flush;
    return cfg;
}

ReportRow summary_row(const std::string& analysis, const std::string& depth, const std::string& method) {
    ReportRow r;
    r.experiment = "all";
    r.analysis = analysis;
    r.depth = depth;
    r.method = method;
    r.block = "all";
    return r;
}

PairedDataset load_pairs(const RunConfig& cfg, const std::string& ensemble, const std::string& target) {
    return paired_from_fgrd(read_fgrd(resolve_input(cfg, ensemble)), read_fgrd(resolve_input(cfg, target)));
}

void write_rows(const fs::path& dir, const std::vector<ReportRow>& rows, const RunConfig& cfg,
                const std::string& command) {
    SuiteReport report;
    report.rows = rows;
    write_report(dir, report, cfg, command);
}

int run_train(const Common& c, const std::string& ensemble, const std::string& target, bool whole) {
    const RunConfig cfg = resolve(c, "train");
    const PairedDataset ds = load_pairs(cfg, ensemble, target);
    const PairedDataset train = whole ? ds : split_paired_dataset(ds, cfg.experiment.split).train;
    const AnalysisKind kind = cfg.experiment.analysis_kinds.front();
    const TrainedAnalysis model = train_analysis(kind, train, cfg.experiment.training);
    save_model(fs::path(c.out) / "model.bin", model);
    ReportRow r = summary_row(to_string(kind), "-", "fit");
    r.n_eval = train.size();
    write_rows(c.out, {r}, cfg, c.invocation);
    std::cout << "trained " << to_string(kind) << " on " << train.size() << " pairs -> "
              << (fs::path(c.out) / "model.bin").string() << "\n";
    return 0;
}

int run_calibrate(const Common& c, const std::string& model_path, const std::string& ensemble,
                  const std::string& target, bool whole) {
    const RunConfig cfg = resolve(c, "calibrate");
    auto model = std::make_shared<const TrainedAnalysis>(load_model(resolve_input(cfg, model_path)));
    const PairedDataset ds = load_pairs(cfg, ensemble, target);
    const PairedDataset cal = whole ? ds : split_paired_dataset(ds, cfg.experiment.split).cal;
    const DepthKind depth = cfg.experiment.depth_kinds.front();
    const ConformalCalibration calib = calibrate(model, cal, depth, cfg.experiment.alpha);
    save_calibration(fs::path(c.out) / "calibration.bin", calib);
    ReportRow r = summary_row(to_string(model->kind()), to_string(depth), "CE");
    r.mean_width = conformal_band_width(calib);
    r.n_eval = cal.size();
    write_rows(c.out, {r}, cfg, c.invocation);
    std::cout << "calibrated on " << cal.size() << " pairs: k = " << calib.k << ", kept = " << calib.kept.size()
              << ", tau = " << calib.tau << "\n";
    return 0;
}

int run_project(const Common& c, const std::string& calib_path, const std::string& ensemble) {
    const RunConfig cfg = resolve(c, "project");
    const ConformalCalibration calib = load_calibration(resolve_input(cfg, calib_path));
    const FgrdData ens = read_fgrd(resolve_input(cfg, ensemble));
    require(ens.nmember == calib.model->member_count(), ErrorCode::Data,
            "ensemble file member count differs from the trained model");
    std::vector<std::vector<Field>> members(ens.ntime), preds(ens.ntime), lower(ens.ntime), upper(ens.ntime);
    double width = 0.0;
    for (std::size_t t = 0; t < ens.ntime; ++t) {
        std::vector<Field> snap;
        for (std::size_t i = 0; i < ens.nmember; ++i) snap.push_back(ens.field(t, i));
        const Field pred = predict(*calib.model, EnsembleSnapshot(ens.time(t), std::move(snap)));
        members[t] = conformal_members(calib, pred);
        const Band band = prediction_band(members[t]);
        width += band.mean_width;
        preds[t] = {pred};
        lower[t] = {band.lower};
        upper[t] = {band.upper};
    }
    const fs::path out(c.out);
    write_fgrd(out / "ensemble.fgrd", make_fgrd(ens.start, members));
    write_fgrd(out / "prediction.fgrd", make_fgrd(ens.start, preds));
    write_fgrd(out / "band_lower.fgrd", make_fgrd(ens.start, lower));
    write_fgrd(out / "band_upper.fgrd", make_fgrd(ens.start, upper));
    ReportRow r = summary_row(to_string(calib.model->kind()), to_string(calib.depth_kind), "CE");
    r.mean_width = width / static_cast<double>(ens.ntime);
    r.n_eval = ens.ntime;
    write_rows(out, {r}, cfg, c.invocation);
    std::cout << "projected " << ens.ntime << " steps with " << calib.kept.size() << " members each\n";
    return 0;
}

int run_evaluate(const Common& c, const std::string& proj_dir, const std::string& target_path,
                 const std::string& calib_path) {
    const RunConfig cfg = resolve(c, "evaluate");
    const fs::path proj = resolve_input(cfg, proj_dir);
    const FgrdData ens = read_fgrd(proj / "ensemble.fgrd");
    const FgrdData target = read_fgrd(resolve_input(cfg, target_path));
    require(target.nmember == 1, ErrorCode::Data, "target file must hold exactly one member");
    require(*target.grid == *ens.grid, ErrorCode::Data, "target grid differs from the projection grid");
    // align the target window with the projection period
    const long long offset = (ens.start.year - target.start.year) * 12LL + (ens.start.month - target.start.month);
    require(offset >= 0 && static_cast<std::size_t>(offset) + ens.ntime <= target.ntime, ErrorCode::Data,
            "target series does not cover the projection period");
    const std::size_t p = ens.grid->size();
    const std::size_t T = ens.ntime, k = ens.nmember;
    std::vector<Field> targets;
    for (std::size_t t = 0; t < T; ++t) targets.push_back(target.field(static_cast<std::size_t>(offset) + t, 0));

    const Directions dirs = slice_directions(p, cfg.experiment.n_proj, cfg.experiment.seed);
    const ProjectedCloud PY = project_cloud(dirs, targets);
    ProjectedCloud PE(dirs.rows(), static_cast<Eigen::Index>(T * k));
    double width = 0.0;
    std::vector<double> lo(p), hi(p);
    for (std::size_t t = 0; t < T; ++t) {
        std::fill(lo.begin(), lo.end(), std::numeric_limits<double>::infinity());
        std::fill(hi.begin(), hi.end(), -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < k; ++i) {
            const double* v = ens.values.data() + (t * k + i) * p;
            PE.col(static_cast<Eigen::Index>(t * k + i)) = dirs * Eigen::Map<const Eigen::VectorXd>(v, static_cast<Eigen::Index>(p));
            for (std::size_t s = 0; s < p; ++s) {
                lo[s] = std::min(lo[s], v[s]);
                hi[s] = std::max(hi[s], v[s]);
            }
        }
        double w = 0.0;
        for (std::size_t s = 0; s < p; ++s) w += hi[s] - lo[s];
        width += w / static_cast<double>(p);
    }
    ReportRow r = summary_row("projection", "-", "ensemble");
    r.mean_width = width / static_cast<double>(T);
    r.sw = sliced_wasserstein_projected(PE, PY).distance;
    r.n_eval = T;
    if (!calib_path.empty()) {
        const ConformalCalibration calib = load_calibration(resolve_input(cfg, calib_path));
        const FgrdData pred = read_fgrd(proj / "prediction.fgrd");
        require(pred.ntime == T && pred.nmember == 1, ErrorCode::Data, "prediction.fgrd does not match ensemble.fgrd");
        std::size_t hits = 0;
        for (std::size_t t = 0; t < T; ++t)
            if (covers_prediction(calib, pred.field(t, 0), targets[t])) ++hits;
        r.coverage = static_cast<double>(hits) / static_cast<double>(T);
        r.analysis = to_string(calib.model->kind());
        r.depth = to_string(calib.depth_kind);
        r.method = "CE";
    }
    std::vector<double> wmap(p), cell(T * k), tcell(T);
    for (std::size_t s = 0; s < p; ++s) {
        for (std::size_t j = 0; j < T * k; ++j) cell[j] = ens.values[j * p + s];
        for (std::size_t t = 0; t < T; ++t) tcell[t] = targets[t][s];
        wmap[s] = wasserstein1d(cell, tcell);
    }
    SuiteReport report;
    report.rows = {r};
    report.maps.push_back(NamedField{"w_ensemble", Field(ens.grid, std::move(wmap))});
    write_report(c.out, report, cfg, c.invocation);
    std::cout << "evaluated " << T << " steps: mean width " << *r.mean_width << ", sw " << *r.sw << "\n";
    return 0;
}

int run_import_csv(const Common& c, const std::string& csv, std::size_t nlat, std::size_t nlon) {
    const RunConfig cfg = resolve(c, "import-csv");
    const FgrdData data = read_csv_tensor(resolve_input(cfg, csv), nlat, nlon);
    write_fgrd(fs::path(c.out) / "tensor.fgrd", data);
    ReportRow r = summary_row("-", "-", "import");
    r.n_eval = data.ntime * data.nmember;
    write_rows(c.out, {r}, cfg, c.invocation);
    std::cout << "imported " << data.ntime << " steps x " << data.nmember << " members -> "
              << (fs::path(c.out) / "tensor.fgrd").string() << "\n";
    return 0;
}

int run_white_noise(const Common& c) {
    const RunConfig cfg = resolve(c, "simulate-wn");
    const SuiteReport report = white_noise_control(cfg.experiment);
    write_report(c.out, report, cfg, c.invocation);
    for (const auto& r : report.rows)
        std::cout << r.label() << ": coverage " << (r.coverage ? std::to_string(*r.coverage) : "-") << ", width "
                  << (r.mean_width ? std::to_string(*r.mean_width) : "-") << " [" << r.status << "]\n";
    return 0;
}

int run_perfect_model(const Common& c, const std::string& ensemble) {
    const RunConfig cfg = resolve(c, "perfect-model");
    const EnsembleCollection data = read_collection(resolve_input(cfg, ensemble));
    const SuiteReport report = perfect_model_suite(data, cfg.experiment);
    write_report(c.out, report, cfg, c.invocation);
    for (const auto& r : report.rows)
        std::cout << r.label() << ": sw " << (r.sw ? std::to_string(*r.sw) : "-") << " (se "
                  << (r.sw_se ? std::to_string(*r.sw_se) : "-") << ") [" << r.status << "]\n";
    return 0;
}

int run_sweep(const Common& c, const std::string& ensemble) {
    const RunConfig cfg = resolve(c, "sweep-calibration");
    const EnsembleCollection data = read_collection(resolve_input(cfg, ensemble));
    const SuiteReport report = calibration_size_sweep(data, cfg.experiment, cfg.experiment.sweep_sizes);
    write_report(c.out, report, cfg, c.invocation);
    for (const auto& r : report.sweep)
        std::cout << "n2=" << r.n2 << " " << r.analysis << "/" << r.depth << ": sw " << r.mean_sw << " (se "
                  << (r.sw_se ? std::to_string(*r.sw_se) : "-") << ")\n";
    return 0;
}

int run_generate(const Common& c) {
    const RunConfig cfg = resolve(c, "generate");
    SyntheticOptions o;
    o.nlat = cfg.experiment.nlat;
    o.nlon = cfg.experiment.nlon;
    o.members = cfg.experiment.members;
    o.months = cfg.months;
    o.drifting = cfg.drifting;
    o.seed = cfg.experiment.seed;
    const EnsembleCollection data = generate_synthetic(o);
    write_collection(c.out, data);
    ReportRow r = summary_row("-", "-", "synthetic");
    r.n_eval = data.length() * data.member_count();
    write_rows(c.out, {r}, cfg, c.invocation);
    std::cout << "wrote " << data.member_count() << " member files of " << data.length() << " months to " << c.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal ensembles for multi-model gridded projections"};
    app.require_subcommand(1);

    Common common;
    std::string ensemble, target, model, calib, proj;
    bool whole = false;

    auto* wn = app.add_subcommand("simulate-wn", "white-noise control run");
    add_common(wn, common);

    auto* pm = app.add_subcommand("perfect-model", "jackknife perfect-model suite");
    add_common(pm, common);
    pm->add_option("--ensemble", ensemble, "member .fgrd file or directory of member files")->required();

    auto* sweep = app.add_subcommand("sweep-calibration", "calibration-size sensitivity sweep");
    add_common(sweep, common);
    sweep->add_option("--ensemble", ensemble, "member .fgrd file or directory of member files")->required();

    auto* train = app.add_subcommand("train", "fit an analysis function");
    add_common(train, common);
    train->add_option("--ensemble", ensemble, "ensemble .fgrd")->required();
    train->add_option("--target", target, "target .fgrd (one member)")->required();
    train->add_flag("--whole", whole, "train on the whole series instead of the first n1 pairs");

    auto* cal = app.add_subcommand("calibrate", "calibrate a trained model");
    add_common(cal, common);
    cal->add_option("--model", model, "model blob from train")->required();
    cal->add_option("--ensemble", ensemble, "ensemble .fgrd")->required();
    cal->add_option("--target", target, "target .fgrd (one member)")->required();
    cal->add_flag("--whole", whole, "calibrate on the whole series instead of pairs n1..n1+n2");

    auto* project = app.add_subcommand("project", "emit conformal ensembles and bands");
    add_common(project, common);
    project->add_option("--calib", calib, "calibration blob from calibrate")->required();
    project->add_option("--ensemble", ensemble, "ensemble .fgrd to project")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score a projection against targets");
    add_common(evaluate, common);
    evaluate->add_option("--proj", proj, "output directory of project")->required();
    evaluate->add_option("--target", target, "target .fgrd covering the projection period")->required();
    evaluate->add_option("--calib", calib, "calibration blob, enables the coverage column");

    auto* gen = app.add_subcommand("generate", "write a synthetic member suite");
    add_common(gen, common);

    auto* imp = app.add_subcommand("import-csv", "convert a CSV tensor to .fgrd");
    add_common(imp, common);
    std::string csv;
    std::size_t nlat = 0, nlon = 0;
    imp->add_option("--csv", csv, "lines of YYYY-MM,member,v0,v1,...")->required();
    imp->add_option("--nlat", nlat, "latitude count")->required();
    imp->add_option("--nlon", nlon, "longitude count")->required();

    for (int i = 1; i < argc; ++i) common.invocation += (i > 1 ? " " : "") + std::string(argv[i]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*wn) return run_white_noise(common);
        if (*pm) return run_perfect_model(common, ensemble);
        if (*sweep) return run_sweep(common, ensemble);
        if (*train) return run_train(common, ensemble, target, whole);
        if (*cal) return run_calibrate(common, model, ensemble, target, whole);
        if (*project) return run_project(common, calib, ensemble);
        if (*evaluate) return run_evaluate(common, proj, target, calib);
        if (*gen) return run_generate(common);
        if (*imp) return run_import_csv(common, csv, nlat, nlon);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
