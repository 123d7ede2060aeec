#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "eauwseg/evaluation.hpp"

namespace fs = std::filesystem;

namespace eauwseg {

namespace {

std::ofstream open_out(const fs::path& path, const char* where) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, where, "cannot write " + path.string());
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const char* where) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::MissingFile, where, path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double to_double(const std::string& s, const char* where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::Io, where, "bad number '" + s + "'");
    }
}

} // namespace

void write_metrics_csv(const fs::path& path, const MetricsReport& r) {
    auto os = open_out(path, "write_metrics_csv");
    os << "image_id,dice,jaccard,accuracy,sensitivity,sensitivity_defined\n";
    for (const auto& row : r.rows) {
        os << row.image_id << ',' << row.dice << ',' << row.jaccard << ',' << row.accuracy << ',' << row.sensitivity
           << ',' << (row.sensitivity_defined ? 1 : 0) << '\n';
    }
    os << "mean," << r.mean_dice << ',' << r.mean_jaccard << ',' << r.mean_accuracy << ',' << r.mean_sensitivity
       << ",1\n";
    if (!os) throw Error(ErrorCode::Io, "write_metrics_csv", "write failed for " + path.string());
}

MetricsReport read_metrics_csv(const fs::path& path) {
    const auto rows = read_csv(path, "read_metrics_csv");
    std::vector<MetricRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != 6) throw Error(ErrorCode::Io, "read_metrics_csv", "expected 6 columns");
        if (c[0] == "mean") continue;
        MetricRow m;
        m.image_id = c[0];
        m.dice = to_double(c[1], "read_metrics_csv");
        m.jaccard = to_double(c[2], "read_metrics_csv");
        m.accuracy = to_double(c[3], "read_metrics_csv");
        m.sensitivity = to_double(c[4], "read_metrics_csv");
        m.sensitivity_defined = c[5] == "1";
        out.push_back(std::move(m));
    }
    return summarize(std::move(out));
}

void write_trimap_csv(const fs::path& path, const TrimapReport& r) {
    auto os = open_out(path, "write_trimap_csv");
    os << "width,boundary_dice_a,boundary_jaccard_a,boundary_dice_b,boundary_jaccard_b,"
          "interior_dice_a,interior_jaccard_a,interior_dice_b,interior_jaccard_b,"
          "delta_boundary_dice,delta_boundary_jaccard,delta_interior_dice,delta_interior_jaccard\n";
    for (const auto& t : r.rows) {
        os << t.width << ',' << t.boundary_dice_a << ',' << t.boundary_jaccard_a << ',' << t.boundary_dice_b << ','
           << t.boundary_jaccard_b << ',' << t.interior_dice_a << ',' << t.interior_jaccard_a << ','
           << t.interior_dice_b << ',' << t.interior_jaccard_b << ',' << t.delta_boundary_dice << ','
           << t.delta_boundary_jaccard << ',' << t.delta_interior_dice << ',' << t.delta_interior_jaccard << '\n';
    }
    if (!os) throw Error(ErrorCode::Io, "write_trimap_csv", "write failed for " + path.string());
}

TrimapReport read_trimap_csv(const fs::path& path) {
    const auto rows = read_csv(path, "read_trimap_csv");
    TrimapReport rep;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != 13) throw Error(ErrorCode::Io, "read_trimap_csv", "expected 13 columns");
        std::vector<double> v;
        for (std::size_t k = 1; k < c.size(); ++k) v.push_back(to_double(c[k], "read_trimap_csv"));
        TrimapRow t;
        t.width = static_cast<int>(to_double(c[0], "read_trimap_csv"));
        t.boundary_dice_a = v[0];
        t.boundary_jaccard_a = v[1];
        t.boundary_dice_b = v[2];
        t.boundary_jaccard_b = v[3];
        t.interior_dice_a = v[4];
        t.interior_jaccard_a = v[5];
        t.interior_dice_b = v[6];
        t.interior_jaccard_b = v[7];
        t.delta_boundary_dice = v[8];
        t.delta_boundary_jaccard = v[9];
        t.delta_interior_dice = v[10];
        t.delta_interior_jaccard = v[11];
        rep.rows.push_back(t);
    }
    return rep;
}

void write_cost_csv(const fs::path& path, const std::vector<CostRow>& rows) {
    auto os = open_out(path, "write_cost_csv");
    os << "kind,images,mean_clicks,ratio_vs_dense\n";
    for (const auto& r : rows) os << r.kind << ',' << r.images << ',' << r.mean_clicks << ',' << r.ratio_vs_dense << '\n';
    if (!os) throw Error(ErrorCode::Io, "write_cost_csv", "write failed for " + path.string());
}

void write_line_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series) {
    constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    auto os = open_out(path, "write_line_plot");
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n"
       << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << x_label << "</text>\n"
       << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
       << ")\" text-anchor=\"middle\" font-size=\"12\">" << y_label << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << yv
           << "</text>\n"
           << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\" font-size=\"10\">" << xv
           << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = colors[si % 6];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        os << "\"/>\n"
           << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (si + 1) << "\" font-size=\"11\" fill=\"" << color
           << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) throw Error(ErrorCode::Io, "write_line_plot", "write failed for " + path.string());
}

void emit_trimap_report(const fs::path& out_dir, const TrimapReport& r) {
    write_trimap_csv(out_dir / "trimap.csv", r);
    Series a{"boundary a", {}, {}}, b{"boundary b", {}, {}}, ia{"interior a", {}, {}}, ib{"interior b", {}, {}};
    for (const auto& t : r.rows) {
        const double w = t.width;
        a.x.push_back(w);
        a.y.push_back(t.boundary_jaccard_a);
        b.x.push_back(w);
        b.y.push_back(t.boundary_jaccard_b);
        if (t.interior_jaccard_a != kEmptyRegion) {
            ia.x.push_back(w);
            ia.y.push_back(t.interior_jaccard_a);
        }
        if (t.interior_jaccard_b != kEmptyRegion) {
            ib.x.push_back(w);
            ib.y.push_back(t.interior_jaccard_b);
        }
    }
    write_line_plot(out_dir / "trimap_jaccard.svg", "Trimap Jaccard", "band width (px)", "Jaccard", {a, b, ia, ib});
}

void plot_loss_log(const fs::path& loss_csv, const fs::path& svg) {
    const auto rows = read_csv(loss_csv, "plot_loss_log");
    Series lc{"l_c", {}, {}}, total{"total", {}, {}};
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 8) continue;
        const double step = to_double(rows[i][0], "plot_loss_log");
        lc.x.push_back(step);
        lc.y.push_back(to_double(rows[i][2], "plot_loss_log"));
        total.x.push_back(step);
        total.y.push_back(to_double(rows[i][7], "plot_loss_log"));
    }
    write_line_plot(svg, "Training loss", "step", "loss", {lc, total});
}

} // namespace eauwseg
