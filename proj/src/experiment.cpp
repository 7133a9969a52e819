#include "confens/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <memory>
#include <thread>

#include "confens/baselines.hpp"
#include "confens/conformal.hpp"
#include "confens/error.hpp"
#include "confens/random.hpp"

namespace confens {

std::string ReportRow::label() const {
    return depth == "-" ? analysis + "/" + method : analysis + "/" + method + "-" + depth;
}

std::pair<double, std::optional<double>> mean_and_se(const std::vector<double>& values) {
    require(!values.empty(), ErrorCode::Argument, "mean of an empty list");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, std::nullopt};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(values.size()))};
}

void validate(const ExperimentConfig& cfg) {
    require(!cfg.analysis_kinds.empty(), ErrorCode::Config, "no analysis kinds configured");
    require(!cfg.depth_kinds.empty(), ErrorCode::Config, "no depth kinds configured");
    require(cfg.alpha > 0.0 && cfg.alpha < 1.0, ErrorCode::Config, "alpha must lie in (0, 1)");
    require(cfg.split.n1 >= 1 && cfg.split.n2 >= 1, ErrorCode::Config, "n1 and n2 must be at least 1");
    require(conformal_rank(cfg.split.n2, cfg.alpha) <= cfg.split.n2, ErrorCode::Config,
            "alpha " + std::to_string(cfg.alpha) + " is infeasible for n2 = " + std::to_string(cfg.split.n2));
    require(cfg.n_proj >= 1, ErrorCode::Config, "n_proj must be at least 1");
    require(cfg.window >= 1, ErrorCode::Config, "window must be at least 1");
    require(cfg.nlat >= 1 && cfg.nlon >= 1, ErrorCode::Config, "grid dimensions must be positive");
}

namespace {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index owns its
// output slot, so results do not depend on scheduling. The first failure by
// index is rethrown.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

bool recoverable(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Singular:
        case ErrorCode::Training:
        case ErrorCode::Numerical:
        case ErrorCode::Argument:
            return true;
        default:
            return false;
    }
}

ReportRow make_row(const std::string& experiment, AnalysisKind a, const std::string& depth,
                   const std::string& method, const std::string& block) {
    ReportRow r;
    r.experiment = experiment;
    r.analysis = to_string(a);
    r.depth = depth;
    r.method = method;
    r.block = block;
    return r;
}

std::string row_key(const ReportRow& r) { return r.analysis + "|" + r.depth + "|" + r.method + "|" + r.block; }

// Mean and standard error across experiments for rows sharing a key, in
// first-seen order.
std::vector<ReportRow> aggregate(const std::vector<std::vector<ReportRow>>& per_experiment) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ReportRow*>> groups;
    for (const auto& rows : per_experiment)
        for (const auto& r : rows) {
            const std::string key = row_key(r);
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(&r);
        }
    std::vector<ReportRow> out;
    for (const auto& key : order) {
        const auto& members = groups[key];
        ReportRow agg = *members.front();
        agg.experiment = "all";
        agg.coverage.reset();
        agg.mean_width.reset();
        agg.sw.reset();
        agg.coverage_se.reset();
        agg.width_se.reset();
        agg.sw_se.reset();
        agg.n_eval = 0;
        std::vector<double> cov, width, sw;
        std::size_t ok = 0;
        std::string failure;
        for (const ReportRow* r : members) {
            if (r->status != "ok") {
                if (failure.empty()) failure = r->status;
                continue;
            }
            ++ok;
            agg.n_eval += r->n_eval;
            if (r->coverage) cov.push_back(*r->coverage);
            if (r->mean_width) width.push_back(*r->mean_width);
            if (r->sw) sw.push_back(*r->sw);
        }
        agg.n_experiments = ok;
        if (ok == 0) {
            agg.status = failure.empty() ? "skipped" : failure;
        } else {
            agg.status = ok == members.size() ? "ok" : "partial: " + failure;
            if (!cov.empty()) std::tie(agg.coverage, agg.coverage_se) = mean_and_se(cov);
            if (!width.empty()) std::tie(agg.mean_width, agg.width_se) = mean_and_se(width);
            if (!sw.empty()) std::tie(agg.sw, agg.sw_se) = mean_and_se(sw);
        }
        out.push_back(std::move(agg));
    }
    return out;
}

std::vector<double> draw_values(std::mt19937_64& rng, std::size_t p) {
    std::vector<double> v(p);
    fill_normal(rng, v);
    return v;
}

PairedSample draw_white_pair(std::mt19937_64& rng, const GridPtr& grid, std::size_t m, TimeIndex time) {
    std::vector<Field> members;
    members.reserve(m);
    for (std::size_t i = 0; i < m; ++i) members.emplace_back(grid, draw_values(rng, grid->size()));
    Field target(grid, draw_values(rng, grid->size()));
    return PairedSample{EnsembleSnapshot(time, std::move(members)), std::move(target)};
}

PairedDataset draw_white_dataset(std::mt19937_64& rng, const GridPtr& grid, std::size_t m, std::size_t n,
                                 std::size_t offset) {
    std::vector<PairedSample> pairs;
    pairs.reserve(n);
    const TimeIndex origin{1, 1};
    for (std::size_t t = 0; t < n; ++t)
        pairs.push_back(draw_white_pair(rng, grid, m, origin.plus_months(static_cast<long long>(offset + t))));
    return PairedDataset(std::move(pairs));
}

}  // namespace

SuiteReport white_noise_control(const ExperimentConfig& cfg) {
    validate(cfg);
    require(cfg.members >= 1, ErrorCode::Config, "white noise needs at least one member");
    require(cfg.n_test >= 1, ErrorCode::Config, "white noise needs at least one test draw");
    const GridPtr grid = build_grid(static_cast<long long>(cfg.nlat), static_cast<long long>(cfg.nlon));
    const std::size_t reps = cfg.repetitions == 0 ? cfg.members : cfg.repetitions;
    const bool needs_train = std::any_of(cfg.analysis_kinds.begin(), cfg.analysis_kinds.end(),
                                         [](AnalysisKind k) { return k != AnalysisKind::EA; });
    const std::size_t na = cfg.analysis_kinds.size(), nd = cfg.depth_kinds.size();

    std::vector<std::vector<ReportRow>> per_rep(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t rep) {
        auto cal_rng = make_stream(cfg.seed, rep, 12);
        auto test_rng = make_stream(cfg.seed, rep, 13);
        PairedDataset train;
        if (needs_train) {
            auto train_rng = make_stream(cfg.seed, rep, 11);
            train = draw_white_dataset(train_rng, grid, cfg.members, cfg.split.n1, 0);
        } else {
            // EA ignores its training data; one pair fixes the grid and member count
            auto train_rng = make_stream(cfg.seed, rep, 11);
            train = draw_white_dataset(train_rng, grid, cfg.members, 1, 0);
        }
        const PairedDataset cal = draw_white_dataset(cal_rng, grid, cfg.members, cfg.split.n2, cfg.split.n1);

        std::vector<std::shared_ptr<const TrainedAnalysis>> models(na);
        std::vector<std::string> failures(na);
        std::vector<std::vector<ConformalCalibration>> calibs(na);
        for (std::size_t a = 0; a < na; ++a) {
            try {
                models[a] = std::make_shared<const TrainedAnalysis>(
                    train_analysis(cfg.analysis_kinds[a], train, cfg.training));
                for (DepthKind d : cfg.depth_kinds) calibs[a].push_back(calibrate(models[a], cal, d, cfg.alpha));
            } catch (const Error& e) {
                if (!recoverable(e)) throw;
                failures[a] = std::string("skipped: ") + e.what();
                models[a].reset();
                calibs[a].clear();
            }
        }
        train = PairedDataset();

        std::vector<std::size_t> hits(na * nd, 0);
        for (std::size_t t = 0; t < cfg.n_test; ++t) {
            const PairedSample pair = draw_white_pair(
                test_rng, grid, cfg.members, TimeIndex{1, 1}.plus_months(static_cast<long long>(cfg.split.n1 + cfg.split.n2 + t)));
            for (std::size_t a = 0; a < na; ++a) {
                if (!models[a]) continue;
                const Field pred = predict(*models[a], pair.ensemble);
                for (std::size_t d = 0; d < nd; ++d)
                    if (covers_prediction(calibs[a][d], pred, pair.target)) ++hits[a * nd + d];
            }
        }
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t d = 0; d < nd; ++d) {
                ReportRow r = make_row(std::to_string(rep), cfg.analysis_kinds[a], to_string(cfg.depth_kinds[d]), "CE", "all");
                if (!models[a]) {
                    r.status = failures[a];
                } else {
                    r.coverage = static_cast<double>(hits[a * nd + d]) / static_cast<double>(cfg.n_test);
                    r.mean_width = conformal_band_width(calibs[a][d]);
                    r.n_eval = cfg.n_test;
                }
                per_rep[rep].push_back(std::move(r));
            }
    });

    SuiteReport report;
    report.rows = aggregate(per_rep);
    for (auto& rows : per_rep)
        for (auto& r : rows) report.experiments.push_back(std::move(r));
    return report;
}

namespace {

struct Block {
    std::string name;
    std::vector<std::size_t> steps;  // test indices
};

std::vector<Block> make_blocks(const BlockSpec& spec, const std::vector<TimeIndex>& test_times) {
    const std::size_t n = test_times.size();
    std::vector<Block> blocks;
    Block all{"all", {}};
    for (std::size_t t = 0; t < n; ++t) all.steps.push_back(t);
    blocks.push_back(std::move(all));
    if (spec.decadal && spec.decade > 0) {
        for (std::size_t first = 0, k = 1; first < n; first += spec.decade, ++k) {
            Block b{"decade-" + std::to_string(k), {}};
            for (std::size_t t = first; t < std::min(n, first + spec.decade); ++t) b.steps.push_back(t);
            blocks.push_back(std::move(b));
        }
    }
    if (spec.monthly) {
        for (int month = 1; month <= 12; ++month) {
            Block b{std::string("month-") + (month < 10 ? "0" : "") + std::to_string(month), {}};
            for (std::size_t t = 0; t < n; ++t)
                if (test_times[t].month == month) b.steps.push_back(t);
            if (!b.steps.empty()) blocks.push_back(std::move(b));
        }
    }
    for (std::size_t k = 0; k < spec.custom.size(); ++k) {
        Block b{"custom-" + std::to_string(k + 1), {}};
        for (std::size_t t = spec.custom[k].first; t < std::min(n, spec.custom[k].second); ++t) b.steps.push_back(t);
        if (!b.steps.empty()) blocks.push_back(std::move(b));
    }
    return blocks;
}

// Sliced distance between a generated cloud and the projected targets of a block.
// gen(d, t, out) appends the projections onto direction d of every cloud member at step t.
template <class Gen>
double sliced_block(const ProjectedCloud& targets, const std::vector<std::size_t>& steps, Gen&& gen) {
    std::vector<double> a, b;
    double acc = 0.0;
    for (Eigen::Index d = 0; d < targets.rows(); ++d) {
        a.clear();
        b.clear();
        for (std::size_t t : steps) {
            gen(d, t, a);
            b.push_back(targets(d, static_cast<Eigen::Index>(t)));
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const double w = wasserstein1d_sorted(a, b);
        acc += w * w;
    }
    return std::sqrt(acc / static_cast<double>(targets.rows()));
}

double mean_of(const std::vector<double>& v, const std::vector<std::size_t>& steps) {
    double s = 0.0;
    for (std::size_t t : steps) s += v[t];
    return s / static_cast<double>(steps.size());
}

std::vector<double> sorted_column(const std::vector<double>& v) {
    std::vector<double> out = v;
    std::sort(out.begin(), out.end());
    return out;
}

// Band width of a set of fields, grid averaged.
double spread_width(const std::vector<Field>& fields) {
    const std::size_t p = fields.front().size();
    double acc = 0.0;
    for (std::size_t s = 0; s < p; ++s) {
        double lo = fields.front()[s], hi = lo;
        for (const Field& f : fields) {
            lo = std::min(lo, f[s]);
            hi = std::max(hi, f[s]);
        }
        acc += hi - lo;
    }
    return acc / static_cast<double>(p);
}

struct ExperimentOutput {
    std::vector<ReportRow> rows;  // every block
    std::vector<NamedField> maps;
    std::vector<NamedSeries> series;
};

struct SuiteContext {
    const ExperimentConfig& cfg;
    const Directions& dirs;
    std::size_t map_analysis;  // index into cfg.analysis_kinds
};

ExperimentOutput run_experiment(const EnsembleCollection& data, std::size_t j, const SuiteContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const std::string id = std::to_string(j);
    const PairedDataset ds = jackknife_dataset(data, j);
    const DatasetSplit split = split_paired_dataset(ds, cfg.split);
    require(!split.test.empty(), ErrorCode::Config, "no test period left after n1 + n2");
    const std::size_t T = split.test.size();
    const std::size_t p = data.grid->size();
    const std::size_t me = ds.member_count();

    std::vector<TimeIndex> test_times;
    std::vector<Field> targets;
    for (const auto& pair : split.test) {
        test_times.push_back(pair.ensemble.time());
        targets.push_back(pair.target);
    }
    const std::vector<Block> blocks = make_blocks(cfg.blocks, test_times);
    const ProjectedCloud PY = project_cloud(ctx.dirs, targets);
    const Eigen::Index nd = ctx.dirs.rows();

    // raw member projections [member](dir, t) and their mean
    std::vector<ProjectedCloud> PX(me, ProjectedCloud(nd, static_cast<Eigen::Index>(T)));
    std::vector<double> imv_width(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto& members = split.test[t].ensemble.members();
        for (std::size_t i = 0; i < me; ++i) PX[i].col(static_cast<Eigen::Index>(t)) = project_field(ctx.dirs, members[i]);
        imv_width[t] = spread_width(members);
    }
    ProjectedCloud PXm = ProjectedCloud::Zero(nd, static_cast<Eigen::Index>(T));
    for (const auto& px : PX) PXm += px;
    PXm /= static_cast<double>(me);

    std::optional<QuantileMapSet> qmaps;
    std::vector<std::vector<Field>> mapped;  // [t][member]
    std::vector<ProjectedCloud> PB;
    ProjectedCloud PBm;
    std::vector<double> bc_width(T);
    if (cfg.imv_bc) {
        qmaps = fit_quantile_maps(split.train, cfg.quantiles);
        PB.assign(me, ProjectedCloud(nd, static_cast<Eigen::Index>(T)));
        PBm = ProjectedCloud::Zero(nd, static_cast<Eigen::Index>(T));
        mapped.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            const auto& snap = split.test[t].ensemble;
            mapped[t] = imv_bc_ensemble(snap, *qmaps, snap.mean());
            for (std::size_t i = 0; i < me; ++i) PB[i].col(static_cast<Eigen::Index>(t)) = project_field(ctx.dirs, mapped[t][i]);
            bc_width[t] = spread_width(mapped[t]);
        }
        for (const auto& pb : PB) PBm += pb;
        PBm /= static_cast<double>(me);
    }

    ExperimentOutput out;
    for (std::size_t a = 0; a < cfg.analysis_kinds.size(); ++a) {
        const AnalysisKind kind = cfg.analysis_kinds[a];
        std::shared_ptr<const TrainedAnalysis> model;
        std::string failure;
        try {
            model = std::make_shared<const TrainedAnalysis>(train_analysis(kind, split.train, cfg.training));
        } catch (const Error& e) {
            if (!recoverable(e)) throw;
            failure = std::string("skipped: ") + e.what();
        }
        if (!model) {
            for (const Block& b : blocks) {
                for (DepthKind d : cfg.depth_kinds) {
                    ReportRow r = make_row(id, kind, to_string(d), "CE", b.name);
                    r.status = failure;
                    out.rows.push_back(std::move(r));
                }
                std::vector<std::string> baselines;
                if (cfg.imv) baselines.push_back("IMV");
                if (cfg.imv_bc) baselines.push_back("IMV(BC)");
                for (const auto& method : baselines) {
                    ReportRow r = make_row(id, kind, "-", method, b.name);
                    r.status = failure;
                    out.rows.push_back(std::move(r));
                }
            }
            continue;
        }

        std::vector<Field> residuals;
        for (const auto& pair : split.cal) residuals.push_back(pair.target - predict(*model, pair.ensemble));
        const ResidualPool pool(std::move(residuals));
        std::vector<Field> preds;
        for (const auto& pair : split.test) preds.push_back(predict(*model, pair.ensemble));
        const ProjectedCloud PF = project_cloud(ctx.dirs, preds);

        std::vector<ConformalCalibration> calibs;
        for (std::size_t di = 0; di < cfg.depth_kinds.size(); ++di) {
            const DepthKind d = cfg.depth_kinds[di];
            calibs.push_back(calibrate_from_pool(model, pool, d, cfg.alpha));
            const ConformalCalibration& calib = calibs.back();
            std::vector<Field> kept;
            for (std::size_t idx : calib.kept) kept.push_back(pool[idx]);
            const ProjectedCloud PR = project_cloud(ctx.dirs, kept);
            const double width = prediction_band(kept).mean_width;
            std::vector<double> flags(T);
            for (std::size_t t = 0; t < T; ++t) flags[t] = covers_prediction(calib, preds[t], targets[t]) ? 1.0 : 0.0;
            for (const Block& b : blocks) {
                ReportRow r = make_row(id, kind, to_string(d), "CE", b.name);
                r.coverage = mean_of(flags, b.steps);
                r.mean_width = width;
                r.n_eval = b.steps.size();
                r.sw = sliced_block(PY, b.steps, [&](Eigen::Index dir, std::size_t t, std::vector<double>& acc) {
                    const double f = PF(dir, static_cast<Eigen::Index>(t));
                    for (Eigen::Index i = 0; i < PR.cols(); ++i) acc.push_back(f + PR(dir, i));
                });
                out.rows.push_back(std::move(r));
            }
        }
        for (const Block& b : blocks) {
            if (cfg.imv) {
                ReportRow r = make_row(id, kind, "-", "IMV", b.name);
                r.mean_width = mean_of(imv_width, b.steps);
                r.n_eval = b.steps.size();
                r.sw = sliced_block(PY, b.steps, [&](Eigen::Index dir, std::size_t t, std::vector<double>& acc) {
                    const auto c = static_cast<Eigen::Index>(t);
                    const double shift = PF(dir, c) - PXm(dir, c);
                    for (const auto& px : PX) acc.push_back(px(dir, c) + shift);
                });
                out.rows.push_back(std::move(r));
            }
            if (cfg.imv_bc) {
                ReportRow r = make_row(id, kind, "-", "IMV(BC)", b.name);
                r.mean_width = mean_of(bc_width, b.steps);
                r.n_eval = b.steps.size();
                r.sw = sliced_block(PY, b.steps, [&](Eigen::Index dir, std::size_t t, std::vector<double>& acc) {
                    const auto c = static_cast<Eigen::Index>(t);
                    const double shift = PF(dir, c) - PBm(dir, c);
                    for (const auto& pb : PB) acc.push_back(pb(dir, c) + shift);
                });
                out.rows.push_back(std::move(r));
            }
        }

        if (a != ctx.map_analysis) continue;
        const ConformalCalibration& calib = calibs.front();
        const std::string tag = to_string(kind) + "_" + to_string(calib.depth_kind);
        if (cfg.maps) {
            std::vector<double> w_ce(p), w_imv(p), w_bc(p), q95_ce(p), q05_ce(p), q95_truth(p), q05_truth(p);
            std::vector<double> hist(split.train.size() + split.cal.size());
            std::vector<double> ce, tgt(T), imv, bc;
            for (std::size_t s = 0; s < p; ++s) {
                ce.clear();
                imv.clear();
                bc.clear();
                for (std::size_t t = 0; t < T; ++t) {
                    const double f = preds[t][s];
                    for (std::size_t idx : calib.kept) ce.push_back(f + pool[idx][s]);
                    tgt[t] = targets[t][s];
                    const auto& members = split.test[t].ensemble.members();
                    double mean = 0.0;
                    for (const Field& x : members) mean += x[s];
                    mean /= static_cast<double>(me);
                    for (const Field& x : members) imv.push_back(x[s] - mean + f);
                    if (cfg.imv_bc) {
                        double bm = 0.0;
                        for (const Field& x : mapped[t]) bm += x[s];
                        bm /= static_cast<double>(me);
                        for (const Field& x : mapped[t]) bc.push_back(x[s] - bm + f);
                    }
                }
                std::size_t h = 0;
                for (const auto& pair : split.train) hist[h++] = pair.target[s];
                for (const auto& pair : split.cal) hist[h++] = pair.target[s];
                std::sort(ce.begin(), ce.end());
                std::sort(imv.begin(), imv.end());
                std::sort(bc.begin(), bc.end());
                std::sort(hist.begin(), hist.end());
                const auto ts = sorted_column(tgt);
                w_ce[s] = wasserstein1d_sorted(ce, ts);
                w_imv[s] = wasserstein1d_sorted(imv, ts);
                if (cfg.imv_bc) w_bc[s] = wasserstein1d_sorted(bc, ts);
                q95_ce[s] = sorted_quantile(ce, 0.95) - sorted_quantile(hist, 0.95);
                q05_ce[s] = sorted_quantile(ce, 0.05) - sorted_quantile(hist, 0.05);
                q95_truth[s] = sorted_quantile(ts, 0.95) - sorted_quantile(hist, 0.95);
                q05_truth[s] = sorted_quantile(ts, 0.05) - sorted_quantile(hist, 0.05);
            }
            auto emit = [&](const std::string& name, std::vector<double> v) {
                out.maps.push_back(NamedField{name + "_" + tag, Field(data.grid, std::move(v))});
            };
            std::vector<double> d_imv(p), d_bc(p);
            for (std::size_t s = 0; s < p; ++s) {
                d_imv[s] = w_ce[s] - w_imv[s];
                d_bc[s] = w_ce[s] - w_bc[s];
            }
            emit("w_ce", w_ce);
            if (cfg.imv) {
                emit("w_imv", w_imv);
                emit("wdiff_ce_minus_imv", d_imv);
            }
            if (cfg.imv_bc) {
                emit("w_imvbc", w_bc);
                emit("wdiff_ce_minus_imvbc", d_bc);
            }
            emit("qchange_q95_ce", q95_ce);
            emit("qchange_q05_ce", q05_ce);
            emit("qchange_q95_truth", q95_truth);
            emit("qchange_q05_truth", q05_truth);
        }
        if (cfg.series) {
            std::vector<double> gm_r;
            for (std::size_t idx : calib.kept) gm_r.push_back(grid_mean(pool[idx], cfg.weighting));
            const double r_lo = *std::min_element(gm_r.begin(), gm_r.end());
            const double r_hi = *std::max_element(gm_r.begin(), gm_r.end());
            double r_mean = 0.0;
            for (double v : gm_r) r_mean += v;
            r_mean /= static_cast<double>(gm_r.size());
            std::vector<double> target_gm(T), pred_gm(T), lo(T), hi(T), center(T), imv_lo(T), imv_hi(T);
            for (std::size_t t = 0; t < T; ++t) {
                target_gm[t] = grid_mean(targets[t], cfg.weighting);
                pred_gm[t] = grid_mean(preds[t], cfg.weighting);
                center[t] = pred_gm[t] + r_mean;
                lo[t] = pred_gm[t] + r_lo;
                hi[t] = pred_gm[t] + r_hi;
                std::vector<double> dev;
                for (const Field& x : split.test[t].ensemble.members()) dev.push_back(grid_mean(x, cfg.weighting));
                double dm = 0.0;
                for (double v : dev) dm += v;
                dm /= static_cast<double>(dev.size());
                imv_lo[t] = pred_gm[t] + *std::min_element(dev.begin(), dev.end()) - dm;
                imv_hi[t] = pred_gm[t] + *std::max_element(dev.begin(), dev.end()) - dm;
            }
            auto emit = [&](const std::string& name, const std::vector<double>& v) {
                out.series.push_back(NamedSeries{id, name + "_" + tag, moving_average_series(test_times, v, cfg.window)});
            };
            out.series.push_back(NamedSeries{id, "target", moving_average_series(test_times, target_gm, cfg.window)});
            emit("prediction", pred_gm);
            emit("ce_center", center);
            emit("ce_lower", lo);
            emit("ce_upper", hi);
            if (cfg.imv) {
                emit("imv_lower", imv_lo);
                emit("imv_upper", imv_hi);
            }
        }
    }
    return out;
}

std::size_t pick_map_analysis(const ExperimentConfig& cfg) {
    for (std::size_t a = 0; a < cfg.analysis_kinds.size(); ++a)
        if (cfg.analysis_kinds[a] == AnalysisKind::GP) return a;
    return 0;
}

}  // namespace

SuiteReport perfect_model_suite(const EnsembleCollection& data, const ExperimentConfig& cfg) {
    validate(cfg);
    validate(data);
    require(data.member_count() >= 2, ErrorCode::Config, "the perfect-model protocol needs at least 2 members");
    require(cfg.split.n1 + cfg.split.n2 < data.length(), ErrorCode::Config,
            "n1 + n2 must leave a test period (series length " + std::to_string(data.length()) + ")");
    const Directions dirs = slice_directions(data.grid->size(), cfg.n_proj, cfg.seed);
    const SuiteContext ctx{cfg, dirs, pick_map_analysis(cfg)};
    const std::size_t m = data.member_count();

    std::vector<ExperimentOutput> outputs(m);
    parallel_for(m, cfg.threads, [&](std::size_t j) { outputs[j] = run_experiment(data, j, ctx); });

    SuiteReport report;
    std::vector<std::vector<ReportRow>> all_rows(m), block_rows(m);
    for (std::size_t j = 0; j < m; ++j)
        for (const ReportRow& r : outputs[j].rows) {
            if (r.block == "all") {
                all_rows[j].push_back(r);
                report.experiments.push_back(r);
            } else {
                block_rows[j].push_back(r);
            }
        }
    report.rows = aggregate(all_rows);
    report.blocks = aggregate(block_rows);

    // maps averaged over experiments, in first-seen order
    std::vector<std::string> names;
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
    for (const auto& o : outputs)
        for (const NamedField& nf : o.maps) {
            auto it = sums.find(nf.name);
            if (it == sums.end()) {
                names.push_back(nf.name);
                it = sums.emplace(nf.name, std::make_pair(std::vector<double>(nf.field.size(), 0.0), std::size_t{0})).first;
            }
            auto v = nf.field.values();
            for (std::size_t s = 0; s < v.size(); ++s) it->second.first[s] += v[s];
            ++it->second.second;
        }
    for (const auto& name : names) {
        auto& [sum, count] = sums[name];
        for (double& v : sum) v /= static_cast<double>(count);
        report.maps.push_back(NamedField{name, Field(data.grid, std::move(sum))});
    }
    for (auto& o : outputs)
        for (auto& s : o.series) report.series.push_back(std::move(s));
    return report;
}

SuiteReport calibration_size_sweep(const EnsembleCollection& data, const ExperimentConfig& cfg,
                                   const std::vector<std::size_t>& sizes) {
    validate(cfg);
    validate(data);
    require(data.member_count() >= 2, ErrorCode::Config, "the perfect-model protocol needs at least 2 members");
    require(!sizes.empty(), ErrorCode::Config, "no calibration sizes given");
    const std::size_t history = cfg.split.n1 + cfg.split.n2;
    require(history < data.length(), ErrorCode::Config, "n1 + n2 must leave a test period");
    for (std::size_t n2 : sizes) {
        require(n2 >= 1 && n2 < history, ErrorCode::Config,
                "calibration size " + std::to_string(n2) + " does not fit a history of " + std::to_string(history));
        require(conformal_rank(n2, cfg.alpha) <= n2, ErrorCode::Config,
                "calibration size " + std::to_string(n2) + " is infeasible for alpha " + std::to_string(cfg.alpha));
    }
    const Directions dirs = slice_directions(data.grid->size(), cfg.n_proj, cfg.seed);
    const std::size_t m = data.member_count();
    const std::size_t na = cfg.analysis_kinds.size(), nd = cfg.depth_kinds.size();

    // sw[j][(size, analysis, depth)], NaN when skipped
    std::vector<std::vector<double>> sw(m, std::vector<double>(sizes.size() * na * nd));
    std::vector<std::vector<std::string>> notes(m, std::vector<std::string>(sizes.size() * na * nd));
    parallel_for(m, cfg.threads, [&](std::size_t j) {
        const PairedDataset ds = jackknife_dataset(data, j);
        const PairedDataset test = ds.slice(history, ds.size());
        std::vector<Field> targets;
        for (const auto& pair : test) targets.push_back(pair.target);
        const ProjectedCloud PY = project_cloud(dirs, targets);
        std::vector<std::size_t> steps(test.size());
        for (std::size_t t = 0; t < steps.size(); ++t) steps[t] = t;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            const DatasetSplit split = split_paired_dataset(ds, SplitSpec{history - sizes[k], sizes[k]});
            for (std::size_t a = 0; a < na; ++a) {
                const std::size_t base = (k * na + a) * nd;
                std::shared_ptr<const TrainedAnalysis> model;
                try {
                    model = std::make_shared<const TrainedAnalysis>(
                        train_analysis(cfg.analysis_kinds[a], split.train, cfg.training));
                } catch (const Error& e) {
                    if (!recoverable(e)) throw;
                    for (std::size_t d = 0; d < nd; ++d) {
                        sw[j][base + d] = std::nan("");
                        notes[j][base + d] = std::string("skipped: ") + e.what();
                    }
                    continue;
                }
                std::vector<Field> residuals, preds;
                for (const auto& pair : split.cal) residuals.push_back(pair.target - predict(*model, pair.ensemble));
                const ResidualPool pool(std::move(residuals));
                for (const auto& pair : test) preds.push_back(predict(*model, pair.ensemble));
                const ProjectedCloud PF = project_cloud(dirs, preds);
                for (std::size_t d = 0; d < nd; ++d) {
                    const ConformalCalibration calib = calibrate_from_pool(model, pool, cfg.depth_kinds[d], cfg.alpha);
                    std::vector<Field> kept;
                    for (std::size_t idx : calib.kept) kept.push_back(pool[idx]);
                    const ProjectedCloud PR = project_cloud(dirs, kept);
                    sw[j][base + d] = sliced_block(PY, steps, [&](Eigen::Index dir, std::size_t t, std::vector<double>& acc) {
                        const double f = PF(dir, static_cast<Eigen::Index>(t));
                        for (Eigen::Index i = 0; i < PR.cols(); ++i) acc.push_back(f + PR(dir, i));
                    });
                }
            }
        }
    });

    SuiteReport report;
    for (std::size_t k = 0; k < sizes.size(); ++k)
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t d = 0; d < nd; ++d) {
                const std::size_t idx = (k * na + a) * nd + d;
                SweepRow row;
                row.n2 = sizes[k];
                row.analysis = to_string(cfg.analysis_kinds[a]);
                row.depth = to_string(cfg.depth_kinds[d]);
                std::vector<double> values;
                for (std::size_t j = 0; j < m; ++j) {
                    if (std::isnan(sw[j][idx])) {
                        if (row.status == "ok") row.status = notes[j][idx];
                    } else {
                        values.push_back(sw[j][idx]);
                    }
                }
                row.n_experiments = values.size();
                if (!values.empty()) std::tie(row.mean_sw, row.sw_se) = mean_and_se(values);
                ReportRow r = make_row("all", cfg.analysis_kinds[a], row.depth, "CE", "n2=" + std::to_string(row.n2));
                r.n_experiments = row.n_experiments;
                r.status = row.status;
                r.n_eval = (data.length() - history) * row.n_experiments;
                if (!values.empty()) {
                    r.sw = row.mean_sw;
                    r.sw_se = row.sw_se;
                }
                report.rows.push_back(std::move(r));
                report.sweep.push_back(std::move(row));
            }
    return report;
}

}  // namespace confens
