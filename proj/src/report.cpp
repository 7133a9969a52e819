#include "confens/report.hpp"

#include <cstdio>
#include <sstream>

#include "confens/fgrd.hpp"

namespace confens {

namespace {

std::string num(const std::optional<double>& v) {
    if (!v) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace

std::string rows_csv(const std::vector<ReportRow>& rows, bool with_experiment) {
    std::ostringstream out;
    out << "#schema confens-rows v1\n";
    if (with_experiment) out << "experiment,";
    out << "label,coverage,mean_width,sw,n_eval,analysis,method,depth,block,coverage_se,width_se,sw_se,n_experiments,status\n";
    for (const ReportRow& r : rows) {
        if (with_experiment) out << quote(r.experiment) << ",";
        out << quote(r.label()) << "," << num(r.coverage) << "," << num(r.mean_width) << "," << num(r.sw) << ","
            << r.n_eval << "," << quote(r.analysis) << "," << quote(r.method) << "," << quote(r.depth) << ","
            << quote(r.block) << "," << num(r.coverage_se) << "," << num(r.width_se) << "," << num(r.sw_se) << ","
            << r.n_experiments << "," << quote(r.status) << "\n";
    }
    return out.str();
}

std::string series_csv(const std::vector<NamedSeries>& series) {
    std::ostringstream out;
    out << "#schema confens-series v1\n";
    out << "experiment,name,time,raw,smoothed,partial\n";
    for (const NamedSeries& s : series)
        for (const SeriesPoint& p : s.points)
            out << quote(s.experiment) << "," << quote(s.name) << "," << p.time.str() << "," << num(p.raw) << ","
                << num(p.smoothed) << "," << (p.partial ? 1 : 0) << "\n";
    return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "#schema confens-sweep v1\n";
    out << "n2,analysis,depth,mean_sw,sw_se,n_experiments,status\n";
    for (const SweepRow& r : rows)
        out << r.n2 << "," << quote(r.analysis) << "," << quote(r.depth) << ","
            << (r.n_experiments ? num(r.mean_sw) : std::string()) << "," << num(r.sw_se) << "," << r.n_experiments
            << "," << quote(r.status) << "\n";
    return out.str();
}

void write_config_echo(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& command) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_to_json(cfg);
    write_file(dir / "config.json", j.dump(2) + "\n");
    write_file(dir / "config.txt", config_to_text(cfg));
}

void write_report(const std::filesystem::path& dir, const SuiteReport& report, const RunConfig& cfg,
                  const std::string& command) {
    std::filesystem::create_directories(dir);
    write_config_echo(dir, cfg, command);
    if (!report.sweep.empty()) write_file(dir / "sweep.csv", sweep_csv(report.sweep));
    write_file(dir / "rows.csv", rows_csv(report.rows));
    if (!report.experiments.empty()) write_file(dir / "experiments.csv", rows_csv(report.experiments, true));
    if (!report.blocks.empty()) write_file(dir / "blocks.csv", rows_csv(report.blocks));
    if (!report.series.empty()) write_file(dir / "series.csv", series_csv(report.series));
    for (const NamedField& m : report.maps)
        write_fgrd(dir / "maps" / (m.name + ".fgrd"), make_fgrd(TimeIndex{1, 1}, {{m.field}}));
}

}  // namespace confens
