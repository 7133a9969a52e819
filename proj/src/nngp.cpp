#include "confens/nngp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "confens/error.hpp"

namespace confens {

void validate(const NngpParams& params) {
    require(std::isfinite(params.sigma_w2) && params.sigma_w2 > 0.0, ErrorCode::Argument,
            "sigma_w2 must be positive and finite");
    require(std::isfinite(params.sigma_b2) && params.sigma_b2 >= 0.0, ErrorCode::Argument,
            "sigma_b2 must be non-negative and finite");
    require(std::isfinite(params.sigma2) && params.sigma2 > 0.0, ErrorCode::Argument,
            "sigma2 must be positive and finite");
    require(params.depth >= 1, ErrorCode::Argument, "NNGP depth must be at least 1");
}

namespace {

// One layer of the arc-cosine recursion given the previous cross and self values.
double arccos_layer(double c, double va, double vb, double sw, double sb) {
    const double scale = std::sqrt(va * vb);
    if (!(scale > 0.0)) return sb;
    const double cosine = std::clamp(c / scale, -1.0, 1.0);
    const double sine = std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
    const double angle = std::acos(cosine);
    return sb + sw / (2.0 * std::numbers::pi) * scale * (sine + (std::numbers::pi - angle) * cosine);
}

}  // namespace

double nngp_kernel_from_products(double cross, double self_a, double self_b,
                                 const NngpParams& params) {
    const double sw = params.sigma_w2;
    const double sb = params.sigma_b2;
    double c = sb + sw * cross;
    double va = sb + sw * self_a;
    double vb = sb + sw * self_b;
    for (int layer = 1; layer <= params.depth; ++layer) {
        c = arccos_layer(c, va, vb, sw, sb);
        va = sb + 0.5 * sw * va;
        vb = sb + 0.5 * sw * vb;
    }
    return c;
}

double nngp_kernel_value(std::span<const double> x, std::span<const double> x2,
                         const NngpParams& params) {
    require(x.size() == x2.size() && !x.empty(), ErrorCode::Argument,
            "kernel inputs must have equal nonzero length");
    require(params.depth >= 0, ErrorCode::Argument, "negative kernel depth");
    double cross = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(std::isfinite(x[i]) && std::isfinite(x2[i]), ErrorCode::Argument,
                "non-finite kernel input");
        cross += x[i] * x2[i];
        aa += x[i] * x[i];
        bb += x2[i] * x2[i];
    }
    const double q = static_cast<double>(x.size());
    return nngp_kernel_from_products(cross / q, aa / q, bb / q, params);
}

Eigen::MatrixXd nngp_gram(const Eigen::MatrixXd& products, const NngpParams& params) {
    const Eigen::Index n = products.rows();
    const int depth = std::max(params.depth, 0);
    const double sw = params.sigma_w2;
    const double sb = params.sigma_b2;
    // self values per layer, shared by every pair
    Eigen::MatrixXd self(depth + 1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        self(0, i) = sb + sw * products(i, i);
        for (int l = 1; l <= depth; ++l) self(l, i) = sb + 0.5 * sw * self(l - 1, i);
    }
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = nngp_kernel_from_products(products(i, i), products(i, i), products(i, i), params);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double c = sb + sw * products(i, j);
            for (int l = 1; l <= depth; ++l) c = arccos_layer(c, self(l - 1, i), self(l - 1, j), sw, sb);
            k(i, j) = c;
            k(j, i) = c;
        }
    }
    return k;
}

Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    auto ok = [](const Eigen::LLT<Eigen::MatrixXd>& f) {
        return f.info() == Eigen::Success && f.matrixLLT().diagonal().allFinite() &&
               (f.matrixLLT().diagonal().array() > 0.0).all();
    };
    if (ok(llt)) return llt;
    const double base = std::max(a.diagonal().cwiseAbs().mean(), 1e-300);
    double jitter = 1e-10 * base;
    for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd shifted = a;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (ok(llt)) return llt;
    }
    fail(ErrorCode::Numerical, "covariance matrix is not positive definite after jitter retries");
}

NngpLossProblem::NngpLossProblem(Eigen::MatrixXd products, Eigen::MatrixXd targets)
    : products_(std::move(products)), targets_(std::move(targets)) {
    require(products_.rows() == products_.cols() && products_.rows() == targets_.rows() &&
                targets_.rows() > 0 && targets_.cols() > 0,
            ErrorCode::Argument, "loss problem shape mismatch");
    outer_ = targets_ * targets_.transpose();
}

Eigen::MatrixXd NngpLossProblem::covariance(const NngpParams& params) const {
    Eigen::MatrixXd k = nngp_gram(products_, params);
    k.diagonal().array() += params.sigma2;
    return k;
}

namespace {

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double NngpLossProblem::loss(const NngpParams& params) const {
    validate(params);
    const auto llt = factor_spd(covariance(params));
    const Eigen::MatrixXd z = llt.matrixL().solve(targets_);
    double quad = 0.0;
    for (Eigen::Index p = 0; p < z.cols(); ++p) quad += z.col(p).squaredNorm();
    return quad + static_cast<double>(targets_.cols()) * log_det(llt);
}

double NngpLossProblem::loss_trace(const NngpParams& params) const {
    validate(params);
    const auto llt = factor_spd(covariance(params));
    const Eigen::Index n = products_.rows();
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const double quad = inv.cwiseProduct(outer_).sum();
    return quad + static_cast<double>(targets_.cols()) * log_det(llt);
}

Eigen::VectorXd flatten_snapshot(const EnsembleSnapshot& snapshot) {
    const std::size_t p = snapshot.members().front().size();
    Eigen::VectorXd x(static_cast<Eigen::Index>(p * snapshot.member_count()));
    Eigen::Index k = 0;
    for (const Field& f : snapshot.members())
        for (double v : f.values()) x(k++) = v;
    return x;
}

GpDesign make_gp_design(const PairedDataset& train, bool center_inputs) {
    require(!train.empty(), ErrorCode::Argument, "GP needs a nonempty training set");
    const auto n = static_cast<Eigen::Index>(train.size());
    const auto p = static_cast<Eigen::Index>(train.grid_ptr()->size());
    const auto q = p * static_cast<Eigen::Index>(train.member_count());
    GpDesign d;
    d.inputs.resize(n, q);
    d.targets.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.inputs.row(i) = flatten_snapshot(train[static_cast<std::size_t>(i)].ensemble).transpose();
        auto y = train[static_cast<std::size_t>(i)].target.values();
        for (Eigen::Index s = 0; s < p; ++s) d.targets(i, s) = y[static_cast<std::size_t>(s)];
    }
    d.input_mean = center_inputs ? Eigen::VectorXd(d.inputs.colwise().mean().transpose())
                                 : Eigen::VectorXd::Zero(q);
    d.inputs.rowwise() -= d.input_mean.transpose();
    d.target_mean = d.targets.colwise().mean().transpose();
    d.targets.rowwise() -= d.target_mean.transpose();
    d.products = (d.inputs * d.inputs.transpose()) / static_cast<double>(q);
    return d;
}

double nngp_marginal_loss(const NngpParams& params, const PairedDataset& train) {
    GpDesign d = make_gp_design(train, true);
    return NngpLossProblem(std::move(d.products), std::move(d.targets)).loss(params);
}

}  // namespace confens
