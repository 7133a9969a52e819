#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "confens/field.hpp"
#include "confens/synthetic.hpp"

namespace confens {

/// In-memory FGRD tensor: values ordered [time][member][lat][lon].
struct FgrdData {
    GridPtr grid;
    TimeIndex start;
    std::size_t ntime = 0;
    std::size_t nmember = 0;
    std::vector<double> values;

    Field field(std::size_t time, std::size_t member) const;
    TimeIndex time(std::size_t t) const { return start.plus_months(static_cast<long long>(t)); }
};

/// Builds a tensor from fields[t][member] on one grid.
FgrdData make_fgrd(TimeIndex start, const std::vector<std::vector<Field>>& fields);

std::string encode_fgrd(const FgrdData& data);
FgrdData decode_fgrd(const std::string& bytes);

FgrdData read_fgrd(const std::filesystem::path& path);
void write_fgrd(const std::filesystem::path& path, const FgrdData& data);

/// Member series from one file, or from every *.fgrd file of a directory in name order.
EnsembleCollection read_collection(const std::filesystem::path& path);

/// Writes one single-member file per member: member_000.fgrd, member_001.fgrd, ...
void write_collection(const std::filesystem::path& dir, const EnsembleCollection& c);

/// Ensemble and single-member target files on matching grids and time axes.
PairedDataset paired_from_fgrd(const FgrdData& ensemble, const FgrdData& target);

/// Text fallback: one line per (time, member) as "YYYY-MM,member,v0,v1,...",
/// values in row-major lat/lon order. Lines starting with '#' are ignored.
FgrdData read_csv_tensor(const std::filesystem::path& path, std::size_t nlat, std::size_t nlon);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace confens
