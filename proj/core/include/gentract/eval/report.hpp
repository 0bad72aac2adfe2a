#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gentract::eval {

struct MetricsReport {
    std::string run_id;
    std::string objective;
    int layers = 0;  // M
    int width = 0;   // n
    int steps = 0;   // sampler steps
    int count = 0;   // generated streamlines
    double precision = 0.0;
    int bundles_discovered = 0;
    int bundle_total = 0;
    double wall_clock_s = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// CSV with the fixed column order
/// run_id,objective,M,n,steps,count,precision,bundles_discovered,
/// bundle_total,wall_clock_s,seed,config_hash. Doubles are printed with 17
/// significant digits so a re-read reproduces them exactly. Byte output is
/// a pure function of the reports.
std::string metrics_csv(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> parse_metrics_csv(const std::string& text);

/// Self-contained SVG scatter of precision vs wall-clock seconds with
/// marker radius proportional to sampler steps.
std::string sweep_svg(const std::vector<MetricsReport>& reports);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace gentract::eval
