#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace confens {

/// Regular latitude/longitude grid. Fields over it are flattened row-major,
/// latitude-major: index = ilat * nlon + ilon.
struct Grid {
    std::size_t nlat = 0;
    std::size_t nlon = 0;
    std::vector<double> lat_deg;  // empty or nlat entries
    std::vector<double> lon_deg;  // empty or nlon entries

    std::size_t size() const { return nlat * nlon; }

    bool operator==(const Grid&) const = default;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(long long nlat, long long nlon);
GridPtr build_grid(long long nlat, long long nlon, std::vector<double> lat_deg,
                   std::vector<double> lon_deg);

bool same_grid(const GridPtr& a, const GridPtr& b);

/// Immutable gridded scalar snapshot. Copies share the value buffer.
class Field {
public:
    Field() = default;
    Field(GridPtr grid, std::vector<double> values);

    static Field constant(GridPtr grid, double value);

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::span<const double> values() const { return *values_; }
    std::size_t size() const { return values_ ? values_->size() : 0; }
    double operator[](std::size_t i) const { return (*values_)[i]; }
    bool empty() const { return !values_; }

private:
    GridPtr grid_;
    std::shared_ptr<const std::vector<double>> values_;
};

bool same_grid(const Field& a, const Field& b);
void require_same_grid(const Field& a, const Field& b, const char* context);

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& a);
Field add_scalar(const Field& a, double c);

/// Pointwise mean of a nonempty list of fields on one grid.
Field pointwise_mean(std::span<const Field> fields);

struct TimeIndex {
    int year = 1;
    int month = 1;  // 1..12

    auto operator<=>(const TimeIndex&) const = default;

    TimeIndex plus_months(long long n) const;
    std::string str() const;  // "YYYY-MM"
    static TimeIndex parse(const std::string& text);
};

class EnsembleSnapshot {
public:
    EnsembleSnapshot() = default;
    EnsembleSnapshot(TimeIndex time, std::vector<Field> members);

    TimeIndex time() const { return time_; }
    const std::vector<Field>& members() const { return members_; }
    std::size_t member_count() const { return members_.size(); }
    const GridPtr& grid_ptr() const { return members_.front().grid_ptr(); }
    Field mean() const { return pointwise_mean(members_); }

private:
    TimeIndex time_;
    std::vector<Field> members_;
};

struct PairedSample {
    EnsembleSnapshot ensemble;
    Field target;
};

/// Time-ordered (ensemble, target) pairs with a common member count and grid.
class PairedDataset {
public:
    PairedDataset() = default;
    explicit PairedDataset(std::vector<PairedSample> pairs);

    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    const PairedSample& operator[](std::size_t i) const { return pairs_[i]; }
    const std::vector<PairedSample>& pairs() const { return pairs_; }
    auto begin() const { return pairs_.begin(); }
    auto end() const { return pairs_.end(); }

    std::size_t member_count() const;
    const GridPtr& grid_ptr() const;

    /// Pairs [first, last), order preserved.
    PairedDataset slice(std::size_t first, std::size_t last) const;

private:
    std::vector<PairedSample> pairs_;
};

struct SplitSpec {
    std::size_t n1 = 0;  // training size
    std::size_t n2 = 0;  // calibration size
};

struct DatasetSplit {
    PairedDataset train;
    PairedDataset cal;
    PairedDataset test;  // possibly empty
};

DatasetSplit split_paired_dataset(const PairedDataset& ds, const SplitSpec& spec);

/// Per-calendar-month pointwise means; months without data are absent.
struct MonthlyClimatology {
    std::array<std::optional<Field>, 12> months;

    bool has(int month) const { return months.at(month - 1).has_value(); }
    const Field& at(int month) const;
};

MonthlyClimatology monthly_climatology(std::span<const Field> fields,
                                       std::span<const TimeIndex> times);

}  // namespace confens
