#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "confens/field.hpp"
#include "confens/nngp.hpp"

namespace confens {

enum class AnalysisKind { EA, WA, Delta, LM, GP };

std::string to_string(AnalysisKind kind);
AnalysisKind parse_analysis_kind(const std::string& name);

struct GpSearchOptions {
    int max_evals = 150;
    double tolerance = 1e-3;     // simplex size in log-parameter space
    bool center_inputs = true;
    std::optional<NngpParams> fixed;  // skip the search and use these
};

struct TrainingOptions {
    double ridge = 0.0;  // LM slope penalty; 0 = ordinary least squares
    int nngp_depth = 10;
    GpSearchOptions gp;
};

struct EaParams {};

struct WaParams {
    std::vector<double> weights;  // one per member, shared by every location
};

struct DeltaParams {
    MonthlyClimatology observed;
    MonthlyClimatology ensemble_mean;
};

struct LmParams {
    // location-major: coeffs[s * (m + 1)] is the intercept at s, followed by m slopes
    std::vector<double> coeffs;
};

struct GpParams {
    NngpParams prior;
    Eigen::MatrixXd inputs;        // n x q, centered
    Eigen::VectorXd input_mean;    // q
    Eigen::VectorXd input_self;    // n, x_i.x_i / q
    Eigen::MatrixXd targets;       // n x p, centered
    Eigen::VectorXd target_mean;   // p
    Eigen::MatrixXd factor;        // lower Cholesky factor of Sigma + sigma2 I
    Eigen::MatrixXd weights;       // n x p, (Sigma + sigma2 I)^-1 targets
    double final_loss = 0.0;
};

class TrainedAnalysis {
public:
    using Params = std::variant<EaParams, WaParams, DeltaParams, LmParams, GpParams>;

    TrainedAnalysis(AnalysisKind kind, std::size_t members, GridPtr grid, Params params);

    AnalysisKind kind() const { return kind_; }
    std::size_t member_count() const { return members_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const Params& params() const { return params_; }

    template <class T>
    const T& as() const { return std::get<T>(params_); }

private:
    AnalysisKind kind_;
    std::size_t members_;
    GridPtr grid_;
    Params params_;
};

TrainedAnalysis train_analysis(AnalysisKind kind, const PairedDataset& train,
                               const TrainingOptions& options = {});

Field predict(const TrainedAnalysis& model, const EnsembleSnapshot& snapshot);

/// Rebuilds a GP model from its prior, inputs and centered targets (refactorizes).
GpParams assemble_gp(NngpParams prior, Eigen::MatrixXd inputs, Eigen::VectorXd input_mean,
                     Eigen::MatrixXd targets, Eigen::VectorXd target_mean);

}  // namespace confens
