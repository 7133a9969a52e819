#include "confens/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "confens/error.hpp"
#include "confens/fgrd.hpp"

namespace confens {

namespace {

constexpr char kModelMagic[8] = {'C', 'F', 'M', 'O', 'D', 'E', 'L', '\n'};
constexpr char kCalibMagic[8] = {'C', 'F', 'C', 'A', 'L', 'I', 'B', '\n'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    void u64(std::uint64_t v) {
        for (int b = 0; b < 8; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void doubles(const double* p, std::size_t n) {
        u64(n);
        for (std::size_t i = 0; i < n; ++i) f64(p[i]);
    }
    void vec(const std::vector<double>& v) { doubles(v.data(), v.size()); }
    void field(const Field& f) { doubles(f.values().data(), f.size()); }
    void matrix(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
    void vector(const Eigen::VectorXd& v) { doubles(v.data(), static_cast<std::size_t>(v.size())); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size())
            fail(ErrorCode::Truncation, "blob ends early at offset " + std::to_string(pos_));
    }
    void expect(const char* magic, std::size_t n) {
        need(n);
        if (std::memcmp(bytes_.data() + pos_, magic, n) != 0) fail(ErrorCode::Format, "bad blob magic at offset 0");
        pos_ += n;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(b)]);
        pos_ += 8;
        return v;
    }
    double f64() {
        const double v = std::bit_cast<double>(u64());
        if (!std::isfinite(v)) fail(ErrorCode::Data, "non-finite value in blob at offset " + std::to_string(pos_ - 8));
        return v;
    }
    std::vector<double> vec() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    Field field(const GridPtr& grid) { return Field(grid, vec()); }
    Eigen::MatrixXd matrix() {
        const auto r = static_cast<Eigen::Index>(u64());
        const auto c = static_cast<Eigen::Index>(u64());
        need(static_cast<std::size_t>(r * c) * 8);
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = f64();
        return m;
    }
    Eigen::VectorXd vector() {
        const std::vector<double> v = vec();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    void done() const {
        if (pos_ != bytes_.size()) fail(ErrorCode::Format, "trailing bytes after blob at offset " + std::to_string(pos_));
    }
    std::size_t pos() const { return pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void write_climatology(Writer& w, const MonthlyClimatology& c) {
    for (int m = 1; m <= 12; ++m) {
        w.u64(c.has(m) ? 1 : 0);
        if (c.has(m)) w.field(c.at(m));
    }
}

MonthlyClimatology read_climatology(Reader& r, const GridPtr& grid) {
    MonthlyClimatology c;
    for (int m = 1; m <= 12; ++m)
        if (r.u64() != 0) c.months[static_cast<std::size_t>(m - 1)] = r.field(grid);
    return c;
}

void write_model(Writer& w, const TrainedAnalysis& model) {
    w.raw(kModelMagic, sizeof kModelMagic);
    w.u64(kVersion);
    w.u64(static_cast<std::uint64_t>(model.kind()));
    w.u64(model.member_count());
    w.u64(model.grid_ptr()->nlat);
    w.u64(model.grid_ptr()->nlon);
    switch (model.kind()) {
        case AnalysisKind::EA:
            break;
        case AnalysisKind::WA:
            w.vec(model.as<WaParams>().weights);
            break;
        case AnalysisKind::Delta:
            write_climatology(w, model.as<DeltaParams>().observed);
            write_climatology(w, model.as<DeltaParams>().ensemble_mean);
            break;
        case AnalysisKind::LM:
            w.vec(model.as<LmParams>().coeffs);
            break;
        case AnalysisKind::GP: {
            const auto& gp = model.as<GpParams>();
            w.f64(gp.prior.sigma_w2);
            w.f64(gp.prior.sigma_b2);
            w.f64(gp.prior.sigma2);
            w.u64(static_cast<std::uint64_t>(gp.prior.depth));
            w.matrix(gp.inputs);
            w.vector(gp.input_mean);
            w.matrix(gp.targets);
            w.vector(gp.target_mean);
            break;
        }
    }
}

TrainedAnalysis read_model(Reader& r) {
    r.expect(kModelMagic, sizeof kModelMagic);
    const auto version = r.u64();
    if (version != kVersion) fail(ErrorCode::Format, "unsupported model blob version " + std::to_string(version));
    const auto kind_tag = r.u64();
    if (kind_tag > static_cast<std::uint64_t>(AnalysisKind::GP)) fail(ErrorCode::Format, "unknown analysis tag in model blob");
    const auto kind = static_cast<AnalysisKind>(kind_tag);
    const std::size_t m = r.u64();
    const auto nlat = static_cast<long long>(r.u64());
    const auto nlon = static_cast<long long>(r.u64());
    const GridPtr grid = build_grid(nlat, nlon);
    const std::size_t p = grid->size();
    switch (kind) {
        case AnalysisKind::EA:
            return TrainedAnalysis(kind, m, grid, EaParams{});
        case AnalysisKind::WA: {
            WaParams wa{r.vec()};
            require(wa.weights.size() == m, ErrorCode::Format, "WA weight count differs from the member count");
            return TrainedAnalysis(kind, m, grid, std::move(wa));
        }
        case AnalysisKind::Delta: {
            DeltaParams d;
            d.observed = read_climatology(r, grid);
            d.ensemble_mean = read_climatology(r, grid);
            return TrainedAnalysis(kind, m, grid, std::move(d));
        }
        case AnalysisKind::LM: {
            LmParams lm{r.vec()};
            require(lm.coeffs.size() == p * (m + 1), ErrorCode::Format, "LM coefficient count is inconsistent");
            return TrainedAnalysis(kind, m, grid, std::move(lm));
        }
        case AnalysisKind::GP: {
            NngpParams prior;
            prior.sigma_w2 = r.f64();
            prior.sigma_b2 = r.f64();
            prior.sigma2 = r.f64();
            prior.depth = static_cast<int>(r.u64());
            Eigen::MatrixXd inputs = r.matrix();
            Eigen::VectorXd input_mean = r.vector();
            Eigen::MatrixXd targets = r.matrix();
            Eigen::VectorXd target_mean = r.vector();
            require(static_cast<std::size_t>(inputs.cols()) == p * m && static_cast<std::size_t>(targets.cols()) == p,
                    ErrorCode::Format, "GP design shape is inconsistent with the grid");
            return TrainedAnalysis(kind, m, grid,
                                   assemble_gp(prior, std::move(inputs), std::move(input_mean), std::move(targets),
                                               std::move(target_mean)));
        }
    }
    fail(ErrorCode::Format, "unknown analysis kind");
}

}  // namespace

std::string encode_model(const TrainedAnalysis& model) {
    Writer w;
    write_model(w, model);
    return w.take();
}

TrainedAnalysis decode_model(const std::string& bytes) {
    Reader r(bytes);
    TrainedAnalysis model = read_model(r);
    r.done();
    return model;
}

std::string encode_calibration(const ConformalCalibration& calib) {
    require(calib.model != nullptr, ErrorCode::Argument, "calibration has no model");
    Writer w;
    w.raw(kCalibMagic, sizeof kCalibMagic);
    w.u64(kVersion);
    w.u64(static_cast<std::uint64_t>(calib.depth_kind));
    w.f64(calib.alpha);
    w.u64(calib.pool.size());
    for (const Field& f : calib.pool.fields()) w.field(f);
    write_model(w, *calib.model);
    return w.take();
}

ConformalCalibration decode_calibration(const std::string& bytes) {
    Reader r(bytes);
    r.expect(kCalibMagic, sizeof kCalibMagic);
    const auto version = r.u64();
    if (version != kVersion) fail(ErrorCode::Format, "unsupported calibration blob version " + std::to_string(version));
    const auto depth_tag = r.u64();
    if (depth_tag > static_cast<std::uint64_t>(DepthKind::InvLinfNorm)) fail(ErrorCode::Format, "unknown depth tag");
    const double alpha = r.f64();
    const std::size_t n = r.u64();
    std::vector<std::vector<double>> raw(n);
    for (auto& v : raw) v = r.vec();
    auto model = std::make_shared<const TrainedAnalysis>(read_model(r));
    r.done();
    std::vector<Field> residuals;
    for (auto& v : raw) residuals.emplace_back(model->grid_ptr(), std::move(v));
    return calibrate_from_pool(model, ResidualPool(std::move(residuals)), static_cast<DepthKind>(depth_tag), alpha);
}

void save_model(const std::filesystem::path& path, const TrainedAnalysis& model) {
    write_file(path, encode_model(model));
}

TrainedAnalysis load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

void save_calibration(const std::filesystem::path& path, const ConformalCalibration& calib) {
    write_file(path, encode_calibration(calib));
}

ConformalCalibration load_calibration(const std::filesystem::path& path) {
    return decode_calibration(read_file(path));
}

}  // namespace confens
