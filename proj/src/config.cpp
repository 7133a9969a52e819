#include "confens/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "confens/error.hpp"
#include "confens/fgrd.hpp"

namespace confens {

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "alpha",     "depth",     "analysis",   "n1",      "n2",        "seed",         "n_proj",
        "ridge",     "nngp_depth", "quantiles", "blocks",  "weighting", "paths",        "nlat",
        "nlon",      "members",   "n_test",     "repetitions", "threads", "window",     "sweep_sizes",
        "gp_max_evals", "baselines", "maps",    "series",  "decade",    "months",       "drifting"};
    return keys;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    fail(ErrorCode::Type, "cannot parse " + key + "='" + value + "' as " + expected);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        bad_value(key, v, "a finite real number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "a boolean (true/false)");
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string blocks_text(const BlockSpec& b) {
    std::vector<std::string> parts;
    if (b.decadal) parts.push_back("decadal");
    if (b.monthly) parts.push_back("monthly");
    for (const auto& [first, last] : b.custom) parts.push_back(std::to_string(first) + "-" + std::to_string(last));
    return parts.empty() ? "none" : join(parts);
}

}  // namespace

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    ExperimentConfig& e = cfg.experiment;
    const std::string v = trim(value);
    if (key == "alpha") {
        e.alpha = parse_real(key, v);
        require(e.alpha > 0.0 && e.alpha < 1.0, ErrorCode::Config, "alpha must lie in (0, 1)");
    } else if (key == "depth") {
        e.depth_kinds.clear();
        for (const auto& item : split_list(v, ',')) e.depth_kinds.push_back(parse_depth_kind(lower(item)));
        require(!e.depth_kinds.empty(), ErrorCode::Config, "depth needs at least one kind");
    } else if (key == "analysis") {
        e.analysis_kinds.clear();
        for (const auto& item : split_list(v, ',')) e.analysis_kinds.push_back(parse_analysis_kind(item));
        require(!e.analysis_kinds.empty(), ErrorCode::Config, "analysis needs at least one kind");
    } else if (key == "n1") {
        e.split.n1 = parse_uint(key, v);
    } else if (key == "n2") {
        e.split.n2 = parse_uint(key, v);
    } else if (key == "seed") {
        e.seed = parse_uint(key, v);
    } else if (key == "n_proj") {
        e.n_proj = parse_uint(key, v);
    } else if (key == "ridge") {
        e.training.ridge = parse_real(key, v);
        require(e.training.ridge >= 0.0, ErrorCode::Config, "ridge must be non-negative");
    } else if (key == "nngp_depth") {
        e.training.nngp_depth = static_cast<int>(parse_uint(key, v));
        require(e.training.nngp_depth >= 1, ErrorCode::Config, "nngp_depth must be at least 1");
    } else if (key == "quantiles") {
        e.quantiles = parse_uint(key, v);
        require(e.quantiles == 0 || e.quantiles >= 2, ErrorCode::Config, "quantiles must be 0 (auto) or at least 2");
    } else if (key == "blocks") {
        BlockSpec b;
        b.decadal = b.monthly = false;
        b.decade = e.blocks.decade;
        for (const auto& item : split_list(v, ',')) {
            if (item == "decadal") {
                b.decadal = true;
            } else if (item == "monthly") {
                b.monthly = true;
            } else if (item == "none") {
            } else {
                const auto dash = item.find('-');
                if (dash == std::string::npos) bad_value(key, item, "decadal, monthly, none or first-last");
                const auto first = parse_uint(key, item.substr(0, dash));
                const auto last = parse_uint(key, item.substr(dash + 1));
                require(first < last, ErrorCode::Config, "custom block " + item + " is empty");
                b.custom.emplace_back(first, last);
            }
        }
        e.blocks = b;
    } else if (key == "weighting") {
        if (v == "uniform") e.weighting = Weighting::Uniform;
        else if (v == "coslat") e.weighting = Weighting::CosLatitude;
        else fail(ErrorCode::Config, "weighting must be uniform or coslat");
    } else if (key == "paths") {
        require(!v.empty(), ErrorCode::Config, "paths must name a directory");
        cfg.paths = v;
    } else if (key == "nlat") {
        e.nlat = parse_uint(key, v);
    } else if (key == "nlon") {
        e.nlon = parse_uint(key, v);
    } else if (key == "members") {
        e.members = parse_uint(key, v);
    } else if (key == "n_test") {
        e.n_test = parse_uint(key, v);
    } else if (key == "repetitions") {
        e.repetitions = parse_uint(key, v);
    } else if (key == "threads") {
        e.threads = std::max<std::uint64_t>(1, parse_uint(key, v));
    } else if (key == "window") {
        e.window = parse_uint(key, v);
    } else if (key == "sweep_sizes") {
        e.sweep_sizes.clear();
        for (const auto& item : split_list(v, ',')) e.sweep_sizes.push_back(parse_uint(key, item));
    } else if (key == "gp_max_evals") {
        e.training.gp.max_evals = static_cast<int>(parse_uint(key, v));
    } else if (key == "baselines") {
        e.imv = e.imv_bc = false;
        for (const auto& item : split_list(v, ',')) {
            if (item == "imv") e.imv = true;
            else if (item == "imv_bc") e.imv_bc = true;
            else if (item != "none") fail(ErrorCode::Config, "baselines accepts imv, imv_bc or none");
        }
    } else if (key == "maps") {
        e.maps = parse_bool(key, v);
    } else if (key == "series") {
        e.series = parse_bool(key, v);
    } else if (key == "decade") {
        e.blocks.decade = parse_uint(key, v);
        require(e.blocks.decade >= 1, ErrorCode::Config, "decade must be at least 1");
    } else if (key == "months") {
        cfg.months = parse_uint(key, v);
    } else if (key == "drifting") {
        cfg.drifting = parse_bool(key, v);
    } else {
        fail(ErrorCode::Config, "unknown configuration key '" + key + "'; valid keys: " + join(config_keys(), ", "));
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) fail(ErrorCode::Config, "duplicate configuration key '" + key + "'");
        apply_config_value(cfg, key, line.substr(eq + 1));
    }
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

std::string config_to_text(const RunConfig& cfg) {
    const ExperimentConfig& e = cfg.experiment;
    std::vector<std::string> depths, kinds, sizes, baselines;
    for (DepthKind d : e.depth_kinds) depths.push_back(to_string(d));
    for (AnalysisKind a : e.analysis_kinds) kinds.push_back(lower(to_string(a)));
    for (std::size_t s : e.sweep_sizes) sizes.push_back(std::to_string(s));
    if (e.imv) baselines.push_back("imv");
    if (e.imv_bc) baselines.push_back("imv_bc");
    std::ostringstream out;
    out << "alpha=" << fmt_real(e.alpha) << "\n"
        << "depth=" << join(depths) << "\n"
        << "analysis=" << join(kinds) << "\n"
        << "n1=" << e.split.n1 << "\n"
        << "n2=" << e.split.n2 << "\n"
        << "seed=" << e.seed << "\n"
        << "n_proj=" << e.n_proj << "\n"
        << "ridge=" << fmt_real(e.training.ridge) << "\n"
        << "nngp_depth=" << e.training.nngp_depth << "\n"
        << "quantiles=" << e.quantiles << "\n"
        << "blocks=" << blocks_text(e.blocks) << "\n"
        << "weighting=" << (e.weighting == Weighting::Uniform ? "uniform" : "coslat") << "\n"
        << "paths=" << cfg.paths << "\n"
        << "nlat=" << e.nlat << "\n"
        << "nlon=" << e.nlon << "\n"
        << "members=" << e.members << "\n"
        << "n_test=" << e.n_test << "\n"
        << "repetitions=" << e.repetitions << "\n"
        << "threads=" << e.threads << "\n"
        << "window=" << e.window << "\n"
        << "sweep_sizes=" << join(sizes) << "\n"
        << "gp_max_evals=" << e.training.gp.max_evals << "\n"
        << "baselines=" << (baselines.empty() ? "none" : join(baselines)) << "\n"
        << "maps=" << (e.maps ? "true" : "false") << "\n"
        << "series=" << (e.series ? "true" : "false") << "\n"
        << "decade=" << e.blocks.decade << "\n"
        << "months=" << cfg.months << "\n"
        << "drifting=" << (cfg.drifting ? "true" : "false") << "\n";
    return out.str();
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    std::istringstream in(config_to_text(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        j[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return j;
}

std::filesystem::path resolve_input(const RunConfig& cfg, const std::filesystem::path& p) {
    if (p.is_absolute()) return p;
    return std::filesystem::path(cfg.paths) / p;
}

}  // namespace confens
