// SPDX-License-Identifier: Apache-2.0
#include <spectool/plot.hpp>
#include <spectool/error.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <map>

namespace spectool
{

namespace
{

constexpr double kWidth = 640;
constexpr double kHeight = 440;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 60;

using Row = std::vector<std::string>;

std::vector<Row> parse_csv(std::string_view text)
{
    std::vector<Row> rows;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (!line.empty())
        {
            Row row;
            std::size_t start = 0;
            while (true)
            {
                auto const comma = line.find(',', start);
                row.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
                if (comma == std::string_view::npos)
                    break;
                start = comma + 1;
            }
            rows.push_back(std::move(row));
        }
        pos = end + 1;
    }
    return rows;
}

double cell(const Row& row, std::size_t i)
{
    double v = 0;
    auto const& s = row.at(i);
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc {} || ptr != s.data() + s.size())
        throw Error(Errc::ConfigError, fmt::format("'{}' is not a number", s));
    return v;
}

std::string num(double v)
{
    if (std::fabs(v) < 1e-12)
        v = 0;
    return fmt::format("{:.4g}", v);
}

std::string header(const std::string& title)
{
    return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
                       "viewBox=\"0 0 {0} {1}\" font-family=\"DejaVu Sans, sans-serif\" font-size=\"12\">\n"
                       "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n"
                       "<text x=\"{2}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
                       kWidth, kHeight, (kLeft + kWidth - kRight) / 2, title);
}

std::string axis_labels(const std::string& x, const std::string& y)
{
    auto const midX = (kLeft + kWidth - kRight) / 2;
    auto const midY = (kTop + kHeight - kBottom) / 2;
    return fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n"
                       "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
                       midX, kHeight - 16, x, midY, midY, y);
}

std::string blend(double t)
{
    // White to dark blue.
    t = std::clamp(t, 0.0, 1.0);
    auto const mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
    return fmt::format("#{:02x}{:02x}{:02x}", mix(0xf7, 0x08), mix(0xfb, 0x30), mix(0xff, 0x6b));
}

std::vector<double> distinct(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

std::size_t index_of(const std::vector<double>& values, double v)
{
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
}

std::vector<PlotFile> heatmaps(const std::vector<Row>& rows)
{
    struct Point
    {
        double alpha, ratio, speedup;
    };
    std::map<double, std::vector<Point>> byT;
    double hi = 1.0;
    double lo = 1.0;
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        Point p { cell(rows[i], 0), cell(rows[i], 1), cell(rows[i], 3) };
        byT[cell(rows[i], 2)].push_back(p);
        hi = std::max(hi, p.speedup);
        lo = std::min(lo, p.speedup);
    }

    std::vector<PlotFile> files;
    for (auto const& [t, points]: byT)
    {
        std::vector<double> alphas;
        std::vector<double> ratios;
        for (auto const& p: points)
        {
            alphas.push_back(p.alpha);
            ratios.push_back(p.ratio);
        }
        alphas = distinct(alphas);
        ratios = distinct(ratios);
        auto const plotW = kWidth - kLeft - kRight;
        auto const plotH = kHeight - kTop - kBottom;
        auto const cw = plotW / static_cast<double>(alphas.size());
        auto const ch = plotH / static_cast<double>(ratios.size());
        bool const labels = alphas.size() <= 12 && ratios.size() <= 12;

        auto svg = header(fmt::format("speedup at T = {}", num(t)));
        for (auto const& p: points)
        {
            auto const x = kLeft + cw * static_cast<double>(index_of(alphas, p.alpha));
            auto const y = kTop + plotH - ch * static_cast<double>(index_of(ratios, p.ratio) + 1);
            auto const shade = hi > lo ? (p.speedup - lo) / (hi - lo) : 0.0;
            svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", x,
                               y, cw, ch, blend(shade));
            if (labels)
                svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                                   x + cw / 2, y + ch / 2 + 4, shade > 0.5 ? "#ffffff" : "#000000", num(p.speedup));
        }
        for (std::size_t i = 0; i < alphas.size(); ++i)
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                               kLeft + cw * (static_cast<double>(i) + 0.5), kTop + plotH + 18, num(alphas[i]));
        for (std::size_t i = 0; i < ratios.size(); ++i)
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6,
                               kTop + plotH - ch * (static_cast<double>(i) + 0.5) + 4, num(ratios[i]));
        // Legend bar.
        auto const lx = kWidth - kRight + 30;
        for (int i = 0; i < 20; ++i)
            svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"20\" height=\"{:.2f}\" fill=\"{}\"/>\n", lx,
                               kTop + plotH * (19 - i) / 20.0, plotH / 20.0, blend(i / 19.0));
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 26, kTop + 10, num(hi));
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 26, kTop + plotH, num(lo));
        svg += axis_labels("acceptance rate", "speculative / main latency");
        svg += "</svg>\n";
        files.push_back({ fmt::format("heatmap_T{}.svg", num(t)), std::move(svg) });
    }
    return files;
}

std::vector<PlotFile> line_charts(const std::vector<Row>& rows)
{
    static constexpr std::array kPalette { "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e" };
    struct Metric
    {
        const char* column;
        std::size_t index;
        const char* label;
    };
    static constexpr std::array kMetrics {
        Metric { "time_saved_pct", 7, "time saved (%)" },
        Metric { "throughput", 6, "throughput (tokens/s)" },
        Metric { "hit_rate", 8, "hit rate" },
    };

    std::vector<std::string> modes;
    std::vector<double> xs;
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        if (std::find(modes.begin(), modes.end(), rows[i].at(0)) == modes.end())
            modes.push_back(rows[i].at(0));
        xs.push_back(cell(rows[i], 4));
    }
    xs = distinct(xs);

    std::vector<PlotFile> files;
    for (auto const& metric: kMetrics)
    {
        // mode -> x -> (sum, count)
        std::map<std::string, std::map<double, std::pair<double, int>>> acc;
        double lo = 0;
        double hi = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
        {
            auto& slot = acc[rows[i].at(0)][cell(rows[i], 4)];
            slot.first += cell(rows[i], metric.index);
            ++slot.second;
        }
        for (auto const& [mode, series]: acc)
            for (auto const& [x, s]: series)
            {
                lo = std::min(lo, s.first / s.second);
                hi = std::max(hi, s.first / s.second);
            }
        if (hi <= lo)
            hi = lo + 1;
        auto const xlo = xs.front();
        auto const xhi = xs.back() > xs.front() ? xs.back() : xs.front() + 1;
        auto const plotW = kWidth - kLeft - kRight;
        auto const plotH = kHeight - kTop - kBottom;
        auto const px = [&](double x) { return kLeft + plotW * (x - xlo) / (xhi - xlo); };
        auto const py = [&](double y) { return kTop + plotH * (1 - (y - lo) / (hi - lo)); };

        auto svg = header(fmt::format("{} vs tool latency", metric.label));
        svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888888\"/>\n",
                           kLeft, kTop, plotW, plotH);
        for (int i = 0; i <= 4; ++i)
        {
            auto const y = lo + (hi - lo) * i / 4.0;
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6,
                               py(y) + 4, num(y));
        }
        for (double x: xs)
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", px(x),
                               kTop + plotH + 18, num(x));
        for (std::size_t m = 0; m < modes.size(); ++m)
        {
            auto const color = kPalette[m % kPalette.size()];
            std::string points;
            for (auto const& [x, s]: acc[modes[m]])
                points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", px(x), py(s.first / s.second));
            svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", points,
                               color);
            for (auto const& [x, s]: acc[modes[m]])
                svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(x),
                                   py(s.first / s.second), color);
            auto const ly = kTop + 14 + 20.0 * static_cast<double>(m);
            svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n",
                               kWidth - kRight + 16, ly - 4, color);
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kWidth - kRight + 36, ly, modes[m]);
        }
        svg += axis_labels("tool latency mean (s)", metric.label);
        svg += "</svg>\n";
        files.push_back({ fmt::format("{}.svg", metric.column), std::move(svg) });
    }
    return files;
}

} // namespace

std::vector<PlotFile> plot_csv(std::string_view csv)
{
    auto const rows = parse_csv(csv);
    if (rows.empty())
        throw Error(Errc::ConfigError, "CSV is empty");
    auto const& head = rows.front();
    std::string joined;
    for (std::size_t i = 0; i < head.size(); ++i)
        joined += (i ? "," : "") + head[i];
    auto const expected = [&](std::size_t columns) {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].size() != columns)
                throw Error(Errc::ConfigError, fmt::format("CSV row {} has {} fields, expected {}", i + 1,
                                                           rows[i].size(), columns));
        if (rows.size() < 2)
            throw Error(Errc::ConfigError, "CSV has a header but no rows");
    };
    if (joined == "alpha,g_over_G,T,speedup")
    {
        expected(4);
        return heatmaps(rows);
    }
    if (joined == "mode,agents,alpha,lambda,tool_mean,rep,throughput,time_saved_pct,hit_rate,extra_cost")
    {
        expected(10);
        return line_charts(rows);
    }
    throw Error(Errc::ConfigError, fmt::format("unrecognized CSV header '{}'", joined));
}

} // namespace spectool
