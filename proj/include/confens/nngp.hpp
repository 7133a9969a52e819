#pragma once

#include <Eigen/Dense>
#include <span>

#include "confens/field.hpp"

namespace confens {

/// Prior of an infinitely wide ReLU network: weight variance, bias variance,
/// observation noise variance, and hidden-layer count.
struct NngpParams {
    double sigma_w2 = 1.0;
    double sigma_b2 = 0.1;
    double sigma2 = 0.1;
    int depth = 10;
};

void validate(const NngpParams& params);

/// K^D(x, x2) by the arc-cosine recursion, with K^0 = sigma_b2 + sigma_w2 * x.x2 / q.
double nngp_kernel_value(std::span<const double> x, std::span<const double> x2,
                         const NngpParams& params);

/// Same recursion from the scaled layer-0 inner products x.x2/q, x.x/q and x2.x2/q.
double nngp_kernel_from_products(double cross, double self_a, double self_b,
                                 const NngpParams& params);

/// Gram matrix from scaled inner products (products(i, j) = x_i.x_j / q).
Eigen::MatrixXd nngp_gram(const Eigen::MatrixXd& products, const NngpParams& params);

/// Cholesky factor of a symmetric positive definite matrix. Retries with
/// growing diagonal jitter before giving up with a numerical error.
Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a);

/// Efficient Kronecker-structured negative log-likelihood
///   sum_p Y_p^T (Sigma + s2 I)^-1 Y_p + p log|Sigma + s2 I|
/// over training inputs (fixed) and per-location centered targets.
class NngpLossProblem {
public:
    /// products: n x n scaled inner products; targets: n x p, already centered.
    NngpLossProblem(Eigen::MatrixXd products, Eigen::MatrixXd targets);

    std::size_t samples() const { return static_cast<std::size_t>(targets_.rows()); }
    std::size_t locations() const { return static_cast<std::size_t>(targets_.cols()); }

    Eigen::MatrixXd covariance(const NngpParams& params) const;

    /// One factorization, one solve per location.
    double loss(const NngpParams& params) const;

    /// Same value through trace(K^-1 Y Y^T); cost independent of the location count.
    double loss_trace(const NngpParams& params) const;

private:
    Eigen::MatrixXd products_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd outer_;  // Y Y^T
};

/// Flattened ensemble inputs (rows) and per-location centered targets of a training set.
struct GpDesign {
    Eigen::MatrixXd inputs;          // n x q, centered by input_mean
    Eigen::VectorXd input_mean;      // q
    Eigen::MatrixXd targets;         // n x p, centered by target_mean
    Eigen::VectorXd target_mean;     // p
    Eigen::MatrixXd products;        // n x n, inputs * inputs^T / q
};

GpDesign make_gp_design(const PairedDataset& train, bool center_inputs);

Eigen::VectorXd flatten_snapshot(const EnsembleSnapshot& snapshot);

/// Loss of the training set with per-location centered targets.
double nngp_marginal_loss(const NngpParams& params, const PairedDataset& train);

}  // namespace confens
