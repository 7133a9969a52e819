#include "confens/analysis.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

#include "confens/error.hpp"

namespace confens {

std::string to_string(AnalysisKind kind) {
    switch (kind) {
        case AnalysisKind::EA: return "EA";
        case AnalysisKind::WA: return "WA";
        case AnalysisKind::Delta: return "Delta";
        case AnalysisKind::LM: return "LM";
        case AnalysisKind::GP: return "GP";
    }
    return "?";
}

AnalysisKind parse_analysis_kind(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "ea") return AnalysisKind::EA;
    if (lower == "wa") return AnalysisKind::WA;
    if (lower == "delta") return AnalysisKind::Delta;
    if (lower == "lm") return AnalysisKind::LM;
    if (lower == "gp") return AnalysisKind::GP;
    fail(ErrorCode::Config, "unknown analysis '" + name + "' (expected ea, wa, delta, lm, gp)");
}

TrainedAnalysis::TrainedAnalysis(AnalysisKind kind, std::size_t members, GridPtr grid, Params params)
    : kind_(kind), members_(members), grid_(std::move(grid)), params_(std::move(params)) {
    require(members_ >= 1 && grid_ != nullptr, ErrorCode::Argument, "invalid trained analysis");
    const bool matches = (kind_ == AnalysisKind::EA && std::holds_alternative<EaParams>(params_)) ||
                         (kind_ == AnalysisKind::WA && std::holds_alternative<WaParams>(params_)) ||
                         (kind_ == AnalysisKind::Delta && std::holds_alternative<DeltaParams>(params_)) ||
                         (kind_ == AnalysisKind::LM && std::holds_alternative<LmParams>(params_)) ||
                         (kind_ == AnalysisKind::GP && std::holds_alternative<GpParams>(params_));
    require(matches, ErrorCode::Argument, "parameters do not match analysis kind");
}

namespace {

std::string location_name(const Grid& g, std::size_t s) {
    return "location " + std::to_string(s) + " (lat row " + std::to_string(s / g.nlon) +
           ", lon column " + std::to_string(s % g.nlon) + ")";
}

WaParams train_wa(const PairedDataset& train) {
    const std::size_t m = train.member_count();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (const auto& pair : train) {
        const auto& members = pair.ensemble.members();
        auto y = pair.target.values();
        for (std::size_t i = 0; i < m; ++i) {
            auto xi = members[i].values();
            double by = 0.0;
            for (std::size_t s = 0; s < y.size(); ++s) by += xi[s] * y[s];
            b(static_cast<Eigen::Index>(i)) += by;
            for (std::size_t j = i; j < m; ++j) {
                auto xj = members[j].values();
                double acc = 0.0;
                for (std::size_t s = 0; s < y.size(); ++s) acc += xi[s] * xj[s];
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += acc;
            }
        }
    }
    a.triangularView<Eigen::StrictlyLower>() = a.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12) {
        const double lambda = 1e-8 * std::max(a.trace() / static_cast<double>(m), 1e-300);
        Eigen::MatrixXd reg = a;
        reg.diagonal().array() += lambda;
        ldlt.compute(reg);
    }
    Eigen::VectorXd w = ldlt.solve(b);
    require(w.allFinite(), ErrorCode::Singular, "WA normal equations have no finite solution");
    return WaParams{std::vector<double>(w.data(), w.data() + w.size())};
}

DeltaParams train_delta(const PairedDataset& train) {
    std::vector<Field> targets, means;
    std::vector<TimeIndex> times;
    for (const auto& pair : train) {
        targets.push_back(pair.target);
        means.push_back(pair.ensemble.mean());
        times.push_back(pair.ensemble.time());
    }
    return DeltaParams{monthly_climatology(targets, times), monthly_climatology(means, times)};
}

LmParams train_lm(const PairedDataset& train, double ridge) {
    const std::size_t n = train.size();
    const std::size_t m = train.member_count();
    const std::size_t cols = m + 1;
    const Grid& grid = *train.grid_ptr();
    const std::size_t p = grid.size();
    require(ridge >= 0.0 && std::isfinite(ridge), ErrorCode::Config, "ridge must be non-negative");
    require(ridge > 0.0 || n > cols, ErrorCode::Argument,
            "LM needs more than m + 1 = " + std::to_string(cols) +
                " training samples without ridge, got " + std::to_string(n));
    const std::size_t extra = ridge > 0.0 ? m : 0;
    LmParams out;
    out.coeffs.resize(p * cols);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n + extra), static_cast<Eigen::Index>(cols));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n + extra));
    for (std::size_t s = 0; s < p; ++s) {
        design.setZero();
        rhs.setZero();
        for (std::size_t t = 0; t < n; ++t) {
            const auto& pair = train[t];
            design(static_cast<Eigen::Index>(t), 0) = 1.0;
            for (std::size_t i = 0; i < m; ++i)
                design(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i + 1)) =
                    pair.ensemble.members()[i][s];
            rhs(static_cast<Eigen::Index>(t)) = pair.target[s];
        }
        const double root = std::sqrt(ridge);
        for (std::size_t i = 0; i < extra; ++i)
            design(static_cast<Eigen::Index>(n + i), static_cast<Eigen::Index>(i + 1)) = root;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-12);
        if (qr.rank() < static_cast<Eigen::Index>(cols))
            fail(ErrorCode::Singular, "LM normal equations are singular at " + location_name(grid, s));
        Eigen::VectorXd beta = qr.solve(rhs);
        require(beta.allFinite(), ErrorCode::Singular,
                "LM produced non-finite coefficients at " + location_name(grid, s));
        std::copy(beta.data(), beta.data() + beta.size(), out.coeffs.begin() + static_cast<std::ptrdiff_t>(s * cols));
    }
    return out;
}

struct SearchContext {
    const NngpLossProblem* problem = nullptr;
    int depth = 1;
    bool use_trace = false;
    Eigen::Vector3d lower, upper;
    mutable int evaluations = 0;
};

NngpParams to_params(const Eigen::Vector3d& u, int depth) {
    return NngpParams{std::exp(u(0)), std::exp(u(1)), std::exp(u(2)), depth};
}

double search_objective(const gsl_vector* v, void* raw) {
    const auto& ctx = *static_cast<const SearchContext*>(raw);
    ++ctx.evaluations;
    Eigen::Vector3d u(gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2));
    const Eigen::Vector3d clamped = u.cwiseMax(ctx.lower).cwiseMin(ctx.upper);
    const double penalty = 1e3 * (u - clamped).squaredNorm();
    try {
        const NngpParams params = to_params(clamped, ctx.depth);
        const double loss = ctx.use_trace ? ctx.problem->loss_trace(params) : ctx.problem->loss(params);
        if (!std::isfinite(loss)) return std::numeric_limits<double>::max();
        return loss + penalty * (1.0 + std::abs(loss));
    } catch (const Error&) {
        return std::numeric_limits<double>::max();
    }
}

NngpParams search_nngp(const NngpLossProblem& problem, int depth, const GpSearchOptions& options,
                       double target_variance) {
    const double v = std::max(target_variance, 1e-12);
    SearchContext ctx;
    ctx.problem = &problem;
    ctx.depth = depth;
    ctx.use_trace = problem.locations() > problem.samples();
    ctx.lower = Eigen::Vector3d(std::log(1e-3), std::log(1e-8), std::log(1e-6 * v));
    ctx.upper = Eigen::Vector3d(std::log(1e3), std::log(1e2), std::log(10.0 * v));

    gsl_multimin_function fn{&search_objective, 3, &ctx};
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> start(gsl_vector_alloc(3), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(3), &gsl_vector_free);
    gsl_vector_set(start.get(), 0, 0.0);
    gsl_vector_set(start.get(), 1, std::log(1e-2));
    gsl_vector_set(start.get(), 2, std::log(0.5 * v));
    gsl_vector_set_all(step.get(), 1.0);

    const double initial = search_objective(start.get(), &ctx);
    if (!(initial < std::numeric_limits<double>::max()))
        fail(ErrorCode::Training, "NNGP loss is not finite at the starting point");

    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3),
        &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(solver.get(), &fn, start.get(), step.get());
    while (ctx.evaluations < options.max_evals) {
        if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), options.tolerance) ==
            GSL_SUCCESS)
            break;
    }
    if (!(solver->fval < std::numeric_limits<double>::max()))
        fail(ErrorCode::Training, "NNGP search ended at a non-finite loss");
    const gsl_vector* best = gsl_multimin_fminimizer_x(solver.get());
    Eigen::Vector3d u(gsl_vector_get(best, 0), gsl_vector_get(best, 1), gsl_vector_get(best, 2));
    return to_params(u.cwiseMax(ctx.lower).cwiseMin(ctx.upper), depth);
}

GpParams train_gp(const PairedDataset& train, const TrainingOptions& options) {
    GpDesign design = make_gp_design(train, options.gp.center_inputs);
    NngpParams prior;
    if (options.gp.fixed) {
        prior = *options.gp.fixed;
    } else {
        static std::once_flag gsl_quiet;
        std::call_once(gsl_quiet, [] { gsl_set_error_handler_off(); });
        const NngpLossProblem problem(design.products, design.targets);
        const double variance = design.targets.squaredNorm() /
                                static_cast<double>(design.targets.size());
        prior = search_nngp(problem, options.nngp_depth, options.gp, variance);
    }
    validate(prior);
    GpParams gp = assemble_gp(prior, std::move(design.inputs), std::move(design.input_mean),
                              std::move(design.targets), std::move(design.target_mean));
    return gp;
}

void require_compatible(const TrainedAnalysis& model, const EnsembleSnapshot& snapshot) {
    require(snapshot.member_count() == model.member_count(), ErrorCode::Argument,
            "snapshot has " + std::to_string(snapshot.member_count()) + " members, model expects " +
                std::to_string(model.member_count()));
    require(same_grid(snapshot.grid_ptr(), model.grid_ptr()), ErrorCode::Argument,
            "snapshot grid differs from the training grid");
}

}  // namespace

GpParams assemble_gp(NngpParams prior, Eigen::MatrixXd inputs, Eigen::VectorXd input_mean,
                     Eigen::MatrixXd targets, Eigen::VectorXd target_mean) {
    validate(prior);
    require(inputs.rows() == targets.rows() && inputs.rows() > 0 && inputs.cols() == input_mean.size() &&
                targets.cols() == target_mean.size(),
            ErrorCode::Argument, "GP design shape mismatch");
    GpParams gp;
    gp.prior = prior;
    const double q = static_cast<double>(inputs.cols());
    const Eigen::MatrixXd products = (inputs * inputs.transpose()) / q;
    gp.input_self = products.diagonal();
    Eigen::MatrixXd cov = nngp_gram(products, prior);
    cov.diagonal().array() += prior.sigma2;
    const auto llt = factor_spd(cov);
    gp.factor = llt.matrixL();
    gp.weights = llt.solve(targets);
    const Eigen::MatrixXd z = llt.matrixL().solve(targets);
    gp.final_loss = z.squaredNorm() + static_cast<double>(targets.cols()) * 2.0 *
                                          gp.factor.diagonal().array().log().sum();
    gp.inputs = std::move(inputs);
    gp.input_mean = std::move(input_mean);
    gp.targets = std::move(targets);
    gp.target_mean = std::move(target_mean);
    return gp;
}

TrainedAnalysis train_analysis(AnalysisKind kind, const PairedDataset& train,
                               const TrainingOptions& options) {
    require(!train.empty(), ErrorCode::Argument, "training set is empty");
    const std::size_t m = train.member_count();
    const GridPtr grid = train.grid_ptr();
    switch (kind) {
        case AnalysisKind::EA:
            return TrainedAnalysis(kind, m, grid, EaParams{});
        case AnalysisKind::WA:
            return TrainedAnalysis(kind, m, grid, train_wa(train));
        case AnalysisKind::Delta:
            return TrainedAnalysis(kind, m, grid, train_delta(train));
        case AnalysisKind::LM:
            return TrainedAnalysis(kind, m, grid, train_lm(train, options.ridge));
        case AnalysisKind::GP:
            return TrainedAnalysis(kind, m, grid, train_gp(train, options));
    }
    fail(ErrorCode::Argument, "unknown analysis kind");
}

Field predict(const TrainedAnalysis& model, const EnsembleSnapshot& snapshot) {
    require_compatible(model, snapshot);
    const GridPtr& grid = model.grid_ptr();
    const std::size_t p = grid->size();
    const std::size_t m = model.member_count();
    const auto& members = snapshot.members();
    switch (model.kind()) {
        case AnalysisKind::EA:
            return snapshot.mean();
        case AnalysisKind::WA: {
            const auto& w = model.as<WaParams>().weights;
            std::vector<double> out(p, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                auto x = members[i].values();
                for (std::size_t s = 0; s < p; ++s) out[s] += w[i] * x[s];
            }
            return Field(grid, std::move(out));
        }
        case AnalysisKind::Delta: {
            const auto& d = model.as<DeltaParams>();
            const int month = snapshot.time().month;
            return d.observed.at(month) + (snapshot.mean() - d.ensemble_mean.at(month));
        }
        case AnalysisKind::LM: {
            const auto& c = model.as<LmParams>().coeffs;
            std::vector<double> out(p);
            for (std::size_t s = 0; s < p; ++s) {
                const double* beta = c.data() + s * (m + 1);
                double v = beta[0];
                for (std::size_t i = 0; i < m; ++i) v += beta[i + 1] * members[i][s];
                out[s] = v;
            }
            return Field(grid, std::move(out));
        }
        case AnalysisKind::GP: {
            const auto& gp = model.as<GpParams>();
            const Eigen::VectorXd x = flatten_snapshot(snapshot) - gp.input_mean;
            const double q = static_cast<double>(x.size());
            const Eigen::VectorXd cross = (gp.inputs * x) / q;
            const double self = x.squaredNorm() / q;
            Eigen::VectorXd k(cross.size());
            for (Eigen::Index i = 0; i < k.size(); ++i)
                k(i) = nngp_kernel_from_products(cross(i), self, gp.input_self(i), gp.prior);
            const Eigen::VectorXd mean = gp.target_mean + gp.weights.transpose() * k;
            return Field(grid, std::vector<double>(mean.data(), mean.data() + mean.size()));
        }
    }
    fail(ErrorCode::Argument, "unknown analysis kind");
}

}  // namespace confens
