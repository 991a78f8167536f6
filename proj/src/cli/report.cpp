#include "chatpcg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace chatpcg::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
}

std::string pm(const MeanSd& s) { return fmt(s.mean) + " ± " + fmt(s.sd); }

std::string dash_if_empty(const std::string& s) { return s.empty() || s == "none" ? "-" : s; }

// UTF-8 code points, so "±" takes one column.
std::size_t display_width(const std::string& s) {
    std::size_t cols = 0;
    for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
    return cols;
}

std::string pad(const std::string& s, std::size_t width) {
    const std::size_t cols = display_width(s);
    return s + std::string(width > cols ? width - cols : 0, ' ');
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

MeanSd mean_sd(std::span<const double> values) {
    MeanSd s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

std::vector<ReportRow> summarize_reports(const std::vector<EvalReport>& reports) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<const EvalReport*>> groups;
    for (const auto& r : reports) groups[{r.generator, r.pe_mode, r.reward}].push_back(&r);
    std::vector<ReportRow> rows;
    for (const auto& [key, members] : groups) {
        ReportRow row;
        std::tie(row.generator, row.pe_mode, row.reward) = key;
        row.runs = static_cast<int>(members.size());
        std::vector<double> ctr, div, tbs;
        for (const EvalReport* r : members) {
            ctr.push_back(r->ctr);
            div.push_back(r->div);
            tbs.push_back(r->tbs);
        }
        row.ctr = mean_sd(ctr);
        row.div = mean_sd(div);
        row.tbs = mean_sd(tbs);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
    const std::vector<std::string> header{"Generator", "PE mode", "Reward", "Runs", "Ctr", "Div", "Tbs"};
    std::vector<std::vector<std::string>> cells{header};
    for (const auto& r : rows) {
        cells.push_back({r.generator, dash_if_empty(r.pe_mode), dash_if_empty(r.reward), std::to_string(r.runs), pm(r.ctr),
                         pm(r.div), pm(r.tbs)});
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
    }
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) out += pad(cells[i][c], width[c] + 2);
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) total += w + 2;
            out += std::string(total - 2, '-') + '\n';
        }
    }
    return out;
}

std::string report_csv_header() {
    return "generator,pe_mode,reward,runs,ctr_mean,ctr_sd,div_mean,div_sd,tbs_mean,tbs_sd";
}

std::string report_csv_row(const ReportRow& r) {
    std::ostringstream ss;
    ss.precision(17);
    ss << r.generator << ',' << r.pe_mode << ',' << r.reward << ',' << r.runs << ',' << r.ctr.mean << ',' << r.ctr.sd
       << ',' << r.div.mean << ',' << r.div.sd << ',' << r.tbs.mean << ',' << r.tbs.sd;
    return ss.str();
}

std::string curves_svg(const std::string& title, const std::vector<std::pair<std::string, TrainingCurve>>& curves) {
    const double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
    double max_step = 1.0, max_err = 1e-9;
    for (const auto& [name, curve] : curves) {
        for (const auto& p : curve) {
            max_step = std::max(max_step, static_cast<double>(p.step));
            max_err = std::max(max_err, p.mean_winrate_error);
        }
    }
    auto x = [&](double s) { return left + (w - left - right) * s / max_step; };
    auto y = [&](double e) { return h - bottom - (h - top - bottom) * e / max_err; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double e = max_err * i / 4.0;
        const double st = max_step * i / 4.0;
        s << "<text x=\"" << left - 6 << "\" y=\"" << y(e) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3) << e
          << "</text>\n";
        s << "<text x=\"" << x(st) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << std::setprecision(0)
          << st << "</text>\n"
          << std::setprecision(2);
    }
    s << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">step</text>\n";
    s << "<text x=\"16\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (top + h - bottom) / 2 << ")\">|goal - winrate|</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : curves[i].second) s << x(static_cast<double>(p.step)) << ',' << y(p.mean_winrate_error) << ' ';
        s << "\"/>\n";
        s << "<text x=\"" << w - right - 4 << "\" y=\"" << top + 14 * (i + 1) << "\" text-anchor=\"end\" fill=\"" << color
          << "\">" << curves[i].first << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

ReportResult cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& out) {
    const RunLayout layout{config.output_dir};
    const fs::path runs_dir = options.runs_dir.empty() ? layout.eval_dir() : options.runs_dir;
    std::vector<fs::path> files;
    if (fs::is_directory(runs_dir)) {
        for (const auto& entry : fs::directory_iterator(runs_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<EvalReport> reports;
    for (const auto& f : files) {
        std::ifstream in(f);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("ctr") || !j.contains("generator")) continue;
        reports.push_back(eval_report_from_json(j));
    }
    if (reports.empty()) throw UsageError("no reports found in " + runs_dir.string());

    ReportResult result;
    result.rows = summarize_reports(reports);
    const std::string table = format_report_table(result.rows);
    std::string csv = report_csv_header() + '\n';
    for (const auto& r : result.rows) csv += report_csv_row(r) + '\n';
    result.table_text = layout.report_dir() / "table.txt";
    result.table_csv = layout.report_dir() / "table.csv";
    write_text(result.table_text, table);
    write_text(result.table_csv, csv);
    out << table;

    const fs::path curves_dir = options.curves_dir.empty() ? layout.train_dir() : options.curves_dir;
    if (options.plots && fs::is_directory(curves_dir)) {
        std::vector<fs::path> labels;
        for (const auto& entry : fs::directory_iterator(curves_dir)) {
            if (entry.is_directory()) labels.push_back(entry.path());
        }
        std::sort(labels.begin(), labels.end());
        for (const auto& label_dir : labels) {
            std::vector<fs::path> run_dirs;
            for (const auto& entry : fs::directory_iterator(label_dir)) {
                if (entry.is_directory() && fs::exists(entry.path() / "curve.csv")) run_dirs.push_back(entry.path());
            }
            if (run_dirs.empty()) continue;
            std::sort(run_dirs.begin(), run_dirs.end());
            std::vector<std::pair<std::string, TrainingCurve>> curves;
            for (const auto& d : run_dirs) curves.emplace_back(d.filename().string(), read_training_curve(d / "curve.csv"));
            const std::string label = label_dir.filename().string();
            const fs::path plot = layout.report_dir() / "plots" / (label + "_winrate_error.svg");
            write_text(plot, curves_svg(label + ": |goal - winrate| during training", curves));
            result.plots.push_back(plot);
        }
    }
    out << "wrote " << result.table_text.string() << ", " << result.table_csv.string();
    if (!result.plots.empty()) out << " and " << result.plots.size() << " plot(s)";
    out << '\n';
    write_manifest(layout.root);
    return result;
}

}  // namespace chatpcg::cli
