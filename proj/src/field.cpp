#include "confens/field.hpp"

#include <cmath>
#include <cstdio>

#include "confens/error.hpp"

namespace confens {

GridPtr build_grid(long long nlat, long long nlon) {
    return build_grid(nlat, nlon, {}, {});
}

GridPtr build_grid(long long nlat, long long nlon, std::vector<double> lat_deg,
                   std::vector<double> lon_deg) {
    require(nlat >= 1 && nlon >= 1, ErrorCode::Dimension,
            "grid dimensions must be positive, got " + std::to_string(nlat) + "x" +
                std::to_string(nlon));
    require(lat_deg.empty() || lat_deg.size() == static_cast<std::size_t>(nlat),
            ErrorCode::Dimension, "latitude vector length does not match nlat");
    require(lon_deg.empty() || lon_deg.size() == static_cast<std::size_t>(nlon),
            ErrorCode::Dimension, "longitude vector length does not match nlon");
    for (double lat : lat_deg)
        require(lat >= -90.0 && lat <= 90.0, ErrorCode::Dimension,
                "latitude outside [-90, 90]");
    auto g = std::make_shared<Grid>();
    g->nlat = static_cast<std::size_t>(nlat);
    g->nlon = static_cast<std::size_t>(nlon);
    g->lat_deg = std::move(lat_deg);
    g->lon_deg = std::move(lon_deg);
    return g;
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

Field::Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)) {
    require(grid_ != nullptr, ErrorCode::Argument, "field without grid");
    require(values.size() == grid_->size(), ErrorCode::Argument,
            "field has " + std::to_string(values.size()) + " values, grid expects " +
                std::to_string(grid_->size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        require(std::isfinite(values[i]), ErrorCode::Data,
                "non-finite field value at index " + std::to_string(i));
    values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Field Field::constant(GridPtr grid, double value) {
    const std::size_t n = grid ? grid->size() : 0;
    return Field(std::move(grid), std::vector<double>(n, value));
}

bool same_grid(const Field& a, const Field& b) { return same_grid(a.grid_ptr(), b.grid_ptr()); }

void require_same_grid(const Field& a, const Field& b, const char* context) {
    require(!a.empty() && !b.empty() && same_grid(a, b), ErrorCode::Argument,
            std::string(context) + ": grid mismatch");
}

namespace {

template <class Op>
Field zip(const Field& a, const Field& b, const char* context, Op op) {
    require_same_grid(a, b, context);
    auto x = a.values();
    auto y = b.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(x[i], y[i]);
    return Field(a.grid_ptr(), std::move(out));
}

}  // namespace

Field operator+(const Field& a, const Field& b) {
    return zip(a, b, "field add", [](double u, double v) { return u + v; });
}

Field operator-(const Field& a, const Field& b) {
    return zip(a, b, "field subtract", [](double u, double v) { return u - v; });
}

Field operator*(double s, const Field& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v *= s;
    return Field(a.grid_ptr(), std::move(out));
}

Field add_scalar(const Field& a, double c) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v += c;
    return Field(a.grid_ptr(), std::move(out));
}

Field pointwise_mean(std::span<const Field> fields) {
    require(!fields.empty(), ErrorCode::Argument, "mean of an empty field list");
    const Field& first = fields.front();
    std::vector<double> acc(first.size(), 0.0);
    for (const Field& f : fields) {
        require_same_grid(first, f, "pointwise mean");
        auto v = f.values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(fields.size());
    for (double& v : acc) v *= inv;
    return Field(first.grid_ptr(), std::move(acc));
}

TimeIndex TimeIndex::plus_months(long long n) const {
    long long total = static_cast<long long>(year) * 12 + (month - 1) + n;
    long long y = total >= 0 ? total / 12 : -((-total + 11) / 12);
    long long mo = total - y * 12;
    return TimeIndex{static_cast<int>(y), static_cast<int>(mo) + 1};
}

std::string TimeIndex::str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
}

TimeIndex TimeIndex::parse(const std::string& text) {
    int y = 0, m = 0;
    char dash = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%d%c%d%n", &y, &dash, &m, &consumed) != 3 || dash != '-' ||
        static_cast<std::size_t>(consumed) != text.size() || m < 1 || m > 12)
        fail(ErrorCode::Format, "bad time index '" + text + "', expected YYYY-MM");
    return TimeIndex{y, m};
}

EnsembleSnapshot::EnsembleSnapshot(TimeIndex time, std::vector<Field> members)
    : time_(time), members_(std::move(members)) {
    require(!members_.empty(), ErrorCode::Argument, "ensemble snapshot needs at least one member");
    require(time_.month >= 1 && time_.month <= 12, ErrorCode::Argument, "month outside 1..12");
    for (const Field& f : members_) require_same_grid(members_.front(), f, "ensemble snapshot");
}

PairedDataset::PairedDataset(std::vector<PairedSample> pairs) : pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const auto& p = pairs_[i];
        require(p.ensemble.member_count() >= 1, ErrorCode::Argument, "pair without ensemble");
        require(same_grid(p.ensemble.grid_ptr(), p.target.grid_ptr()), ErrorCode::Argument,
                "ensemble grid differs from target grid at pair " + std::to_string(i));
        if (i > 0) {
            const auto& prev = pairs_[i - 1];
            require(prev.ensemble.time() < p.ensemble.time(), ErrorCode::Argument,
                    "time indices must be strictly increasing (pair " + std::to_string(i) + ")");
            require(prev.ensemble.member_count() == p.ensemble.member_count(),
                    ErrorCode::Argument, "member count changes at pair " + std::to_string(i));
            require(same_grid(prev.target.grid_ptr(), p.target.grid_ptr()), ErrorCode::Argument,
                    "grid changes at pair " + std::to_string(i));
        }
    }
}

std::size_t PairedDataset::member_count() const {
    require(!pairs_.empty(), ErrorCode::Argument, "empty dataset has no member count");
    return pairs_.front().ensemble.member_count();
}

const GridPtr& PairedDataset::grid_ptr() const {
    require(!pairs_.empty(), ErrorCode::Argument, "empty dataset has no grid");
    return pairs_.front().target.grid_ptr();
}

PairedDataset PairedDataset::slice(std::size_t first, std::size_t last) const {
    require(first <= last && last <= pairs_.size(), ErrorCode::Argument, "slice out of range");
    PairedDataset out;
    out.pairs_.assign(pairs_.begin() + static_cast<std::ptrdiff_t>(first),
                      pairs_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

DatasetSplit split_paired_dataset(const PairedDataset& ds, const SplitSpec& spec) {
    require(spec.n1 >= 1 && spec.n2 >= 1, ErrorCode::Split, "n1 and n2 must be at least 1");
    require(spec.n1 + spec.n2 <= ds.size(), ErrorCode::Split,
            "n1 + n2 = " + std::to_string(spec.n1 + spec.n2) + " exceeds dataset length " +
                std::to_string(ds.size()));
    return DatasetSplit{ds.slice(0, spec.n1), ds.slice(spec.n1, spec.n1 + spec.n2),
                        ds.slice(spec.n1 + spec.n2, ds.size())};
}

const Field& MonthlyClimatology::at(int month) const {
    require(month >= 1 && month <= 12, ErrorCode::Argument, "month outside 1..12");
    const auto& f = months[month - 1];
    require(f.has_value(), ErrorCode::Argument,
            "no climatology for month " + std::to_string(month));
    return *f;
}

MonthlyClimatology monthly_climatology(std::span<const Field> fields,
                                       std::span<const TimeIndex> times) {
    require(fields.size() == times.size(), ErrorCode::Argument,
            "climatology: fields and times differ in length");
    require(!fields.empty(), ErrorCode::Argument, "climatology of an empty series");
    std::array<std::vector<Field>, 12> buckets;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        require(times[i].month >= 1 && times[i].month <= 12, ErrorCode::Argument,
                "month outside 1..12");
        buckets[times[i].month - 1].push_back(fields[i]);
    }
    MonthlyClimatology out;
    for (std::size_t m = 0; m < 12; ++m)
        if (!buckets[m].empty()) out.months[m] = pointwise_mean(buckets[m]);
    return out;
}

}  // namespace confens
