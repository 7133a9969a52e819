#include "confens/fgrd.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "confens/error.hpp"

namespace confens {

namespace {

constexpr char kMagic[] = "FGRD1\n";
constexpr std::size_t kMagicLen = 6;

void put_double(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_double(const char* p) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(p[b]);
    return std::bit_cast<double>(bits);
}

// Parses "<key>=<digits>\n" at pos in canonical form (no sign, no leading zeros).
std::size_t header_count(const std::string& bytes, std::size_t& pos, const std::string& key) {
    const std::size_t start = pos;
    const std::string prefix = key + "=";
    if (bytes.compare(pos, prefix.size(), prefix) != 0)
        fail(ErrorCode::Format, "expected '" + prefix + "' at offset " + std::to_string(start));
    pos += prefix.size();
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos)
        fail(ErrorCode::Format, "unterminated header line at offset " + std::to_string(start));
    const std::string digits = bytes.substr(pos, eol - pos);
    std::size_t value = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || res.ec != std::errc() || res.ptr != digits.data() + digits.size() ||
        (digits.size() > 1 && digits[0] == '0'))
        fail(ErrorCode::Format, "bad value for " + key + " at offset " + std::to_string(pos));
    pos = eol + 1;
    return value;
}

}  // namespace

Field FgrdData::field(std::size_t time, std::size_t member) const {
    require(time < ntime && member < nmember, ErrorCode::Argument, "FGRD index out of range");
    const std::size_t p = grid->size();
    const auto first = values.begin() + static_cast<std::ptrdiff_t>((time * nmember + member) * p);
    return Field(grid, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(p)));
}

FgrdData make_fgrd(TimeIndex start, const std::vector<std::vector<Field>>& fields) {
    require(!fields.empty() && !fields.front().empty(), ErrorCode::Argument, "FGRD tensor needs data");
    FgrdData d;
    d.grid = fields.front().front().grid_ptr();
    d.start = start;
    d.ntime = fields.size();
    d.nmember = fields.front().size();
    d.values.reserve(d.ntime * d.nmember * d.grid->size());
    for (const auto& row : fields) {
        require(row.size() == d.nmember, ErrorCode::Argument, "member count changes across time");
        for (const Field& f : row) {
            require(f.grid_ptr() && f.grid().nlat == d.grid->nlat && f.grid().nlon == d.grid->nlon,
                    ErrorCode::Argument, "FGRD fields must share one grid");
            d.values.insert(d.values.end(), f.values().begin(), f.values().end());
        }
    }
    return d;
}

std::string encode_fgrd(const FgrdData& d) {
    require(d.grid != nullptr, ErrorCode::Argument, "FGRD tensor has no grid");
    require(d.values.size() == d.ntime * d.nmember * d.grid->size(), ErrorCode::Argument,
            "FGRD payload size does not match its dimensions");
    std::string out(kMagic, kMagicLen);
    out += "nlat=" + std::to_string(d.grid->nlat) + "\n";
    out += "nlon=" + std::to_string(d.grid->nlon) + "\n";
    out += "ntime=" + std::to_string(d.ntime) + "\n";
    out += "nmember=" + std::to_string(d.nmember) + "\n";
    out += "start=" + d.start.str() + "\n\n";
    out.reserve(out.size() + d.values.size() * 8);
    for (double v : d.values) put_double(out, v);
    return out;
}

FgrdData decode_fgrd(const std::string& bytes) {
    if (bytes.compare(0, kMagicLen, kMagic) != 0) {
        std::size_t off = 0;
        while (off < std::min(bytes.size(), kMagicLen) && bytes[off] == kMagic[off]) ++off;
        fail(ErrorCode::Format, "bad FGRD magic at offset " + std::to_string(off));
    }
    std::size_t pos = kMagicLen;
    const std::size_t nlat = header_count(bytes, pos, "nlat");
    const std::size_t nlon = header_count(bytes, pos, "nlon");
    const std::size_t ntime = header_count(bytes, pos, "ntime");
    const std::size_t nmember = header_count(bytes, pos, "nmember");
    const std::size_t start_at = pos;
    if (bytes.compare(pos, 6, "start=") != 0)
        fail(ErrorCode::Format, "expected 'start=' at offset " + std::to_string(pos));
    pos += 6;
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) fail(ErrorCode::Format, "unterminated start line at offset " + std::to_string(start_at));
    TimeIndex start;
    try {
        start = TimeIndex::parse(bytes.substr(pos, eol - pos));
    } catch (const Error&) {
        fail(ErrorCode::Format, "bad start time at offset " + std::to_string(pos));
    }
    if (start.str() != bytes.substr(pos, eol - pos))
        fail(ErrorCode::Format, "non-canonical start time at offset " + std::to_string(pos));
    pos = eol + 1;
    if (pos >= bytes.size() || bytes[pos] != '\n')
        fail(ErrorCode::Format, "expected blank line ending the header at offset " + std::to_string(pos));
    ++pos;
    if (nlat < 1 || nlon < 1) fail(ErrorCode::Format, "grid dimensions must be positive");

    FgrdData d;
    d.grid = build_grid(static_cast<long long>(nlat), static_cast<long long>(nlon));
    d.start = start;
    d.ntime = ntime;
    d.nmember = nmember;
    const std::size_t count = ntime * nmember * nlat * nlon;
    const std::size_t have = bytes.size() - pos;
    if (have != count * 8)
        fail(have < count * 8 ? ErrorCode::Truncation : ErrorCode::Format,
             "payload holds " + std::to_string(have) + " bytes, header implies " + std::to_string(count * 8));
    d.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        d.values[i] = get_double(bytes.data() + pos + 8 * i);
        if (!std::isfinite(d.values[i]))
            fail(ErrorCode::Data, "non-finite payload value at index " + std::to_string(i));
    }
    return d;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

FgrdData read_fgrd(const std::filesystem::path& path) {
    try {
        return decode_fgrd(read_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw;
        fail(e.code(), path.string() + ": " + e.what());
    }
}

void write_fgrd(const std::filesystem::path& path, const FgrdData& data) { write_file(path, encode_fgrd(data)); }

EnsembleCollection read_collection(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".fgrd") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        require(!files.empty(), ErrorCode::Io, "no .fgrd files in " + path.string());
    } else {
        files.push_back(path);
    }
    EnsembleCollection c;
    for (const auto& file : files) {
        const FgrdData d = read_fgrd(file);
        if (!c.grid) {
            c.grid = d.grid;
            for (std::size_t t = 0; t < d.ntime; ++t) c.times.push_back(d.time(t));
        }
        require(*d.grid == *c.grid && d.ntime == c.times.size() && d.start == c.times.front(), ErrorCode::Data,
                file.string() + ": grid or time axis differs from the first member file");
        for (std::size_t i = 0; i < d.nmember; ++i) {
            std::vector<Field> series;
            series.reserve(d.ntime);
            const std::size_t p = c.grid->size();
            for (std::size_t t = 0; t < d.ntime; ++t) {
                const auto first = d.values.begin() + static_cast<std::ptrdiff_t>((t * d.nmember + i) * p);
                series.emplace_back(c.grid, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(p)));
            }
            c.members.push_back(std::move(series));
        }
    }
    return c;
}

void write_collection(const std::filesystem::path& dir, const EnsembleCollection& c) {
    validate(c);
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < c.member_count(); ++i) {
        std::vector<std::vector<Field>> fields;
        for (const Field& f : c.members[i]) fields.push_back({f});
        char name[32];
        std::snprintf(name, sizeof name, "member_%03zu.fgrd", i);
        write_fgrd(dir / name, make_fgrd(c.times.front(), fields));
    }
}

PairedDataset paired_from_fgrd(const FgrdData& ensemble, const FgrdData& target) {
    require(target.nmember == 1, ErrorCode::Data, "target file must hold exactly one member");
    require(ensemble.nmember >= 1, ErrorCode::Data, "ensemble file holds no members");
    require(*ensemble.grid == *target.grid, ErrorCode::Data, "ensemble and target grids differ");
    require(ensemble.ntime == target.ntime && ensemble.start == target.start, ErrorCode::Data,
            "ensemble and target time axes differ");
    const GridPtr grid = ensemble.grid;
    std::vector<PairedSample> pairs;
    pairs.reserve(ensemble.ntime);
    for (std::size_t t = 0; t < ensemble.ntime; ++t) {
        std::vector<Field> members;
        for (std::size_t i = 0; i < ensemble.nmember; ++i) members.push_back(ensemble.field(t, i));
        Field y = target.field(t, 0);
        pairs.push_back(PairedSample{EnsembleSnapshot(ensemble.time(t), std::move(members)),
                                     Field(grid, std::vector<double>(y.values().begin(), y.values().end()))});
    }
    return PairedDataset(std::move(pairs));
}

FgrdData read_csv_tensor(const std::filesystem::path& path, std::size_t nlat, std::size_t nlon) {
    const GridPtr grid = build_grid(static_cast<long long>(nlat), static_cast<long long>(nlon));
    std::istringstream in(read_file(path));
    std::map<std::pair<TimeIndex, std::size_t>, std::vector<double>> cells;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> parts;
        std::stringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) parts.push_back(item);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        require(parts.size() == 2 + grid->size(), ErrorCode::Format,
                where + ": expected " + std::to_string(2 + grid->size()) + " columns");
        TimeIndex t;
        try {
            t = TimeIndex::parse(parts[0]);
        } catch (const Error&) {
            fail(ErrorCode::Format, where + ": bad time '" + parts[0] + "'");
        }
        std::size_t member = 0;
        auto res = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), member);
        require(res.ec == std::errc() && res.ptr == parts[1].data() + parts[1].size(), ErrorCode::Format,
                where + ": bad member index");
        std::vector<double> v(grid->size());
        for (std::size_t s = 0; s < v.size(); ++s) {
            try {
                std::size_t used = 0;
                v[s] = std::stod(parts[2 + s], &used);
                require(used == parts[2 + s].size(), ErrorCode::Format, "trailing characters");
            } catch (const std::exception&) {
                fail(ErrorCode::Format, where + ": bad value in column " + std::to_string(3 + s));
            }
            require(std::isfinite(v[s]), ErrorCode::Data, where + ": non-finite value");
        }
        require(cells.emplace(std::make_pair(t, member), std::move(v)).second, ErrorCode::Format,
                where + ": duplicate (time, member)");
    }
    require(!cells.empty(), ErrorCode::Format, path.string() + ": no data rows");
    std::size_t nmember = 0;
    for (const auto& [key, v] : cells) nmember = std::max(nmember, key.second + 1);
    const TimeIndex start = cells.begin()->first.first;
    const TimeIndex last = cells.rbegin()->first.first;
    const std::size_t ntime = static_cast<std::size_t>((last.year - start.year) * 12 + (last.month - start.month)) + 1;
    require(cells.size() == ntime * nmember, ErrorCode::Format,
            path.string() + ": rows must cover every month and member exactly once");
    FgrdData d;
    d.grid = grid;
    d.start = start;
    d.ntime = ntime;
    d.nmember = nmember;
    for (const auto& [key, v] : cells) d.values.insert(d.values.end(), v.begin(), v.end());
    return d;
}

}  // namespace confens
