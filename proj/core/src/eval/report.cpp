#include "gentract/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gentract::eval {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kHeader =
    "run_id,objective,M,n,steps,count,precision,bundles_discovered,bundle_total,wall_clock_s,seed,config_hash";

}  // namespace

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("metrics_csv: no reports");
    std::ostringstream out;
    out << kHeader << "\n";
    for (const MetricsReport& r : reports) {
        out << r.run_id << ',' << r.objective << ',' << r.layers << ',' << r.width << ',' << r.steps << ','
            << r.count << ',' << fmt(r.precision) << ',' << r.bundles_discovered << ',' << r.bundle_total << ','
            << fmt(r.wall_clock_s) << ',' << r.seed << ',' << r.config_hash << "\n";
    }
    return out.str();
}

std::vector<MetricsReport> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw std::runtime_error("metrics csv: unexpected header");
    std::vector<MetricsReport> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 12) throw std::runtime_error("metrics csv: malformed row '" + line + "'");
        MetricsReport r;
        r.run_id = f[0];
        r.objective = f[1];
        r.layers = std::stoi(f[2]);
        r.width = std::stoi(f[3]);
        r.steps = std::stoi(f[4]);
        r.count = std::stoi(f[5]);
        r.precision = std::stod(f[6]);
        r.bundles_discovered = std::stoi(f[7]);
        r.bundle_total = std::stoi(f[8]);
        r.wall_clock_s = std::stod(f[9]);
        r.seed = std::stoull(f[10]);
        r.config_hash = f[11];
        out.push_back(std::move(r));
    }
    return out;
}

std::string sweep_svg(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("sweep_svg: no reports");
    const double w = 640, h = 420, ml = 70, mr = 30, mt = 40, mb = 60;
    double xmax = 0, steps_max = 1;
    for (const MetricsReport& r : reports) {
        xmax = std::max(xmax, r.wall_clock_s);
        steps_max = std::max(steps_max, static_cast<double>(r.steps));
    }
    if (xmax <= 0) xmax = 1;
    const auto px = [&](double t) { return ml + (w - ml - mr) * (t / (xmax * 1.05)); };
    const auto py = [&](double prec) { return h - mb - (h - mt - mb) * prec; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    s << "  <rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    s << "  <text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << "Precision vs generation time (marker size ~ sampler steps)</text>\n";
    s << "  <line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
    s << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
    s << "  <text x=\"" << (w / 2) << "\" y=\"" << h - 18
      << "\" text-anchor=\"middle\" font-size=\"13\">wall clock (s)</text>\n";
    s << "  <text x=\"20\" y=\"" << (h / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 " << (h / 2)
      << ")\">precision</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double prec = tick / 4.0;
        s << "  <text x=\"" << ml - 8 << "\" y=\"" << py(prec) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(prec) << "</text>\n";
    }
    for (const MetricsReport& r : reports) {
        const double radius = 4.0 + 10.0 * r.steps / steps_max;
        s << "  <circle cx=\"" << fmt(px(r.wall_clock_s)) << "\" cy=\"" << fmt(py(r.precision)) << "\" r=\""
          << fmt(radius) << "\" fill=\"steelblue\" fill-opacity=\"0.6\" stroke=\"navy\"/>\n";
        s << "  <text x=\"" << fmt(px(r.wall_clock_s)) << "\" y=\"" << fmt(py(r.precision) - radius - 4)
          << "\" text-anchor=\"middle\" font-size=\"11\">" << r.run_id << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace gentract::eval
