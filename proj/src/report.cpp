#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rrt/errors.hpp"
#include "rrt/harness.hpp"

namespace rrt {

namespace fs = std::filesystem;

namespace {

// shortest round-trip representation keeps files bit-stable
std::string num(double v) { return fmt::format("{}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

struct Axes {
    double x0, x1, y0, y1;
    double left = 70, right = 30, top = 40, bottom = 55;
    double width = 720, height = 460;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

std::string svg_open(const Axes& a, const std::string& title, const std::string& xlabel, const std::string& ylabel)
{
    std::string s = fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
        a.width, a.height, a.width / 2, title);
    // frame and ticks
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", a.left,
                     a.top, a.width - a.left - a.right, a.height - a.top - a.bottom);
    for (int k = 0; k <= 5; ++k) {
        const double xv = a.x0 + (a.x1 - a.x0) * k / 5.0;
        const double yv = a.y0 + (a.y1 - a.y0) * k / 5.0;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                         "text-anchor=\"middle\">{:.3g}</text>\n",
                         a.px(xv), a.height - a.bottom + 16, xv);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                         "text-anchor=\"end\">{:.3g}</text>\n",
                         a.left - 6, a.py(yv) + 4, yv);
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"13\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     (a.left + a.width - a.right) / 2, a.height - 14, xlabel);
    s += fmt::format("<text x=\"18\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 18 {:.2f})\">{}</text>\n",
                     (a.top + a.height - a.bottom) / 2, (a.top + a.height - a.bottom) / 2, ylabel);
    return s;
}

std::string polyline(const Axes& a, const std::vector<std::pair<double, double>>& pts, const char* colour,
                     const char* extra = "")
{
    if (pts.empty()) return {};
    std::string p;
    for (const auto& [x, y] : pts) p += fmt::format("{:.2f},{:.2f} ", a.px(x), a.py(y));
    p.pop_back();
    return fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" {}/>\n", p, colour,
                       extra);
}

void write_file(const fs::path& p, const std::string& content)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw ConfigError("write failed for '" + p.string() + "'");
}

} // namespace

std::vector<ReportFormat> parse_formats(const std::string& list)
{
    std::vector<ReportFormat> out;
    std::stringstream ss(list);
    for (std::string f; std::getline(ss, f, ',');) {
        if (f == "csv") out.push_back(ReportFormat::Csv);
        else if (f == "json") out.push_back(ReportFormat::Json);
        else if (f == "svg") out.push_back(ReportFormat::Svg);
        else if (!f.empty()) throw ConfigError("unknown report format '" + f + "'");
    }
    return out;
}

std::string survival_csv(const ResultRecord& r)
{
    std::string s = "u,x,empirical_survival,ci_lo,ci_hi,predicted_G\n";
    for (const auto& L : r.levels)
        for (const auto& row : L.survival)
            s += fmt::format("{},{},{},{},{},{}\n", num(L.u), num(row.x), num(row.empirical), num(row.ci_lo),
                             num(row.ci_hi), num(row.predicted));
    return s;
}

std::string ruin_prob_csv(const ResultRecord& r)
{
    std::string s = "u,empirical,se,predicted,ratio,ratio_se,exact,method,accepted,replicas\n";
    for (const auto& L : r.levels) {
        std::optional<double> ratio, ratio_se;
        if (L.predicted_ruin_prob && *L.predicted_ruin_prob > 0.0) {
            ratio = L.ruin_prob / *L.predicted_ruin_prob;
            ratio_se = L.ruin_prob_se / *L.predicted_ruin_prob;
        }
        s += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(L.u), num(L.ruin_prob), num(L.ruin_prob_se),
                         num(L.predicted_ruin_prob), num(ratio), num(ratio_se), num(L.exact_ruin_prob), L.method,
                         L.accepted, L.replicas);
    }
    return s;
}

std::string constant_rate_csv(const ResultRecord& r)
{
    std::string s = "x,S,H,se,H_over_S,rate,rate_se\n";
    for (const auto& c : r.constants)
        for (const auto& p : c.per_S)
            s += fmt::format("{},{},{},{},{},{},{}\n", num(c.x), num(p.S), num(p.value), num(p.se),
                             num(p.value / p.S), num(c.rate), num(c.rate_se));
    return s;
}

std::string survival_svg(const ResultRecord& r)
{
    double xmax = 1.0;
    for (double x : r.x_grid) xmax = std::max(xmax, x);
    Axes a{0.0, xmax, 0.0, 1.0};
    std::string s = svg_open(a, fmt::format("Recovery time survival P(R/Delta &gt;= x), case {}", r.regime),
                             "x", "survival");
    std::size_t k = 0;
    for (const auto& L : r.levels) {
        const char* col = kPalette[k++ % std::size(kPalette)];
        if (L.survival.empty()) continue;
        // confidence band
        std::string band;
        for (const auto& row : L.survival) band += fmt::format("{:.2f},{:.2f} ", a.px(row.x), a.py(row.ci_hi));
        for (auto it = L.survival.rbegin(); it != L.survival.rend(); ++it)
            band += fmt::format("{:.2f},{:.2f} ", a.px(it->x), a.py(it->ci_lo));
        band.pop_back();
        s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n", band, col);
        std::vector<std::pair<double, double>> emp, pred;
        for (const auto& row : L.survival) {
            emp.emplace_back(row.x, row.empirical);
            if (row.predicted) pred.emplace_back(row.x, *row.predicted);
        }
        s += polyline(a, emp, col);
        s += polyline(a, pred, col, "stroke-dasharray=\"6 4\"");
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                         "fill=\"{}\">u = {}</text>\n",
                         a.width - a.right - 90, a.top + 18 + 16.0 * static_cast<double>(k - 1), col, num(L.u));
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\">solid: empirical "
                     "with 95% band; dashed: limit G</text>\n",
                     a.left + 8, a.top + 16);
    s += "</svg>\n";
    return s;
}

std::string ruin_ratio_svg(const ResultRecord& r)
{
    std::vector<std::pair<double, double>> pts;
    std::vector<std::tuple<double, double, double>> bars;
    for (const auto& L : r.levels) {
        if (!L.predicted_ruin_prob || !(*L.predicted_ruin_prob > 0.0)) continue;
        const double ratio = L.ruin_prob / *L.predicted_ruin_prob;
        const double se = L.ruin_prob_se / *L.predicted_ruin_prob;
        pts.emplace_back(L.u, ratio);
        bars.emplace_back(L.u, ratio - 2 * se, ratio + 2 * se);
    }
    double u0 = r.levels.empty() ? 0.0 : r.levels.front().u;
    double u1 = r.levels.empty() ? 1.0 : r.levels.back().u;
    if (u1 <= u0) u1 = u0 + 1.0;
    const double pad = 0.05 * (u1 - u0);
    double y0 = 0.5, y1 = 1.5;
    for (const auto& [u, lo, hi] : bars) {
        y0 = std::min(y0, lo);
        y1 = std::max(y1, hi);
    }
    Axes a{u0 - pad, u1 + pad, std::max(0.0, y0), y1};
    std::string s = svg_open(a, "Empirical / asymptotic ruin probability", "u", "ratio");
    s += polyline(a, {{a.x0, 1.0}, {a.x1, 1.0}}, "#888888", "stroke-dasharray=\"4 4\"");
    for (const auto& [u, lo, hi] : bars)
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#1f77b4\"/>\n",
                         a.px(u), a.py(std::max(a.y0, lo)), a.py(std::min(a.y1, hi)));
    s += polyline(a, pts, "#1f77b4");
    for (const auto& [u, v] : pts)
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"#1f77b4\"/>\n", a.px(u), a.py(v));
    s += "</svg>\n";
    return s;
}

std::vector<std::string> emit_report(const ResultRecord& record, const std::vector<ReportFormat>& formats,
                                     const std::string& out_dir)
{
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw ConfigError("cannot create output directory '" + out_dir + "'");
    const fs::path dir(out_dir);
    std::vector<std::string> written;
    auto put = [&](const char* name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back((dir / name).string());
    };
    const bool constants = record.kind == ExperimentKind::ConstantRate;
    for (auto f : formats) {
        switch (f) {
        case ReportFormat::Csv:
            if (constants) {
                put("constant_rate.csv", constant_rate_csv(record));
            } else {
                put("survival.csv", survival_csv(record));
                put("ruin_prob.csv", ruin_prob_csv(record));
            }
            break;
        case ReportFormat::Json: put("record.json", record.to_json().dump(2) + "\n"); break;
        case ReportFormat::Svg:
            if (!constants) {
                put("survival.svg", survival_svg(record));
                put("ruin_ratio.svg", ruin_ratio_svg(record));
            }
            break;
        }
    }
    // wall time lives outside the record so that the record stays byte-stable
    write_file(dir / "timing.json",
               nlohmann::json{{"config_hash", record.config_hash}, {"wall_seconds", record.wall_seconds}}.dump(2) +
                   "\n");
    return written;
}

} // namespace rrt
