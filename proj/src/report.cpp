#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "mcqa/error.hpp"
#include "mcqa/experiment.hpp"
#include "mcqa/metrics.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::string fmt2(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

std::string fmt_signed2(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%+.2f", v);
    std::string out = buffer;
    if (out == "-0.00") out = "+0.00";
    return out;
}

std::string fmt4(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4f", v);
    return buffer;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    out << content;
}

std::string sanitize_label(std::string label) {
    std::replace(label.begin(), label.end(), '/', '-');
    return label;
}

struct CellData {
    const CellStatus* status = nullptr;
    std::optional<EvalReport> report;
};

// all loaded cells for one run, addressed by (model, method, perturbation)
struct RunData {
    RunManifest manifest;
    std::map<std::string, CellData> cells;  // by cell id

    const CellData* find(const std::string& model, const std::string& method,
                         const std::string& perturbation) const {
        ScoringMethod m = scoring_method_from_label(method);
        const auto it = cells.find(cell_id(model, m, perturbation));
        return it == cells.end() ? nullptr : &it->second;
    }
};

RunData load_run(const std::filesystem::path& out_dir) {
    RunData run;
    run.manifest = RunManifest::load(out_dir / "manifest.json");
    for (const CellStatus& cell : run.manifest.cells) {
        CellData data;
        data.status = &cell;
        const std::filesystem::path report_path = out_dir / "reports" / (cell.id + ".json");
        std::ifstream in(report_path, std::ios::binary);
        if (in) {
            std::stringstream buffer;
            buffer << in.rdbuf();
            try {
                data.report = EvalReport::from_json(json::parse(buffer.str()));
            } catch (const std::exception&) {
                data.report.reset();
            }
        }
        run.cells.emplace(cell.id, std::move(data));
    }
    return run;
}

// ranking over one (method, perturbation) column; nullopt when any model's
// report is missing
std::optional<RankingTable> column_ranking(const RunData& run, const std::string& method,
                                           const std::string& perturbation) {
    std::vector<EvalReport> reports;
    for (const std::string& model : run.manifest.models) {
        const CellData* cell = run.find(model, method, perturbation);
        if (cell == nullptr || !cell->report) return std::nullopt;
        reports.push_back(*cell->report);
    }
    if (reports.size() < 2) return std::nullopt;
    return rank_models(reports);
}

std::optional<DeltaReport> cell_delta(const CellData* baseline, const CellData* cell) {
    if (baseline == nullptr || cell == nullptr || !baseline->report || !cell->report) {
        return std::nullopt;
    }
    try {
        return delta_report(*baseline->report, *cell->report);
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string svg_delta_chart(const std::string& title,
                            const std::vector<std::pair<std::string, double>>& deltas) {
    const int bar_width = 48;
    const int slot = 80;
    const int width = 120 + slot * static_cast<int>(deltas.size());
    const int height = 260;
    const int axis_y = 130;
    double max_abs = 1.0;
    for (const auto& [model, delta] : deltas) {
        max_abs = std::max(max_abs, std::fabs(delta));
    }
    const double scale = 90.0 / max_abs;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"12\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << title
        << "</text>\n";
    svg << "<line x1=\"40\" y1=\"" << axis_y << "\" x2=\"" << (width - 20) << "\" y2=\"" << axis_y
        << "\" stroke=\"#888\"/>\n";
    int x = 60;
    for (const auto& [model, delta] : deltas) {
        const int bar = static_cast<int>(std::lround(std::fabs(delta) * scale));
        const int y = delta >= 0 ? axis_y - bar : axis_y;
        const char* fill = delta >= 0 ? "#4a7c59" : "#b54a4a";
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_width << "\" height=\""
            << std::max(bar, 1) << "\" fill=\"" << fill << "\"/>\n";
        svg << "<text x=\"" << (x + bar_width / 2) << "\" y=\"" << (axis_y + 110)
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << model
            << "</text>\n";
        svg << "<text x=\"" << (x + bar_width / 2) << "\" y=\""
            << (delta >= 0 ? y - 6 : axis_y + bar + 14)
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
            << fmt_signed2(delta) << "</text>\n";
        x += slot;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

int write_reports(const std::filesystem::path& out_dir, bool with_charts) {
    const RunData run = load_run(out_dir);
    const RunManifest& manifest = run.manifest;
    const bool with_baseline = !manifest.baseline.empty();
    if (with_baseline &&
        std::find(manifest.perturbations.begin(), manifest.perturbations.end(),
                  manifest.baseline) == manifest.perturbations.end()) {
        throw Error(ErrorKind::MissingBaseline,
                    "baseline '" + manifest.baseline + "' is not a perturbation of this run");
    }

    bool partial = false;
    for (const CellStatus& cell : manifest.cells) {
        partial = partial || cell.status == "failed" || cell.unscored > 0;
    }

    std::ostringstream md;
    md << "# " << manifest.experiment << "\n\n";
    md << "- items per cell: " << manifest.universe_items << "\n";
    md << "- models: " << manifest.models.size() << ", methods: " << manifest.methods.size()
       << ", perturbations: " << manifest.perturbations.size() << "\n";
    if (with_baseline) md << "- baseline: " << manifest.baseline << "\n";
    md << "- config hash: " << manifest.config_hash << ", tool version: "
       << manifest.code_version << "\n";
    if (partial) md << "- **partial run**: some cells failed or left items unscored\n";
    md << "\n";

    // long-form export over every cell
    std::ostringstream long_csv;
    long_csv << "model,method,perturbation,status,n_items,n_scored,unscored,ties,"
                "acc_pp,rstd_pp,delta_acc_pp,delta_rstd_pp\n";

    for (const std::string& method : manifest.methods) {
        std::optional<RankingTable> baseline_ranking;
        if (with_baseline) baseline_ranking = column_ranking(run, method, manifest.baseline);

        std::ostringstream acc_csv;
        std::ostringstream rstd_csv;
        acc_csv << "model";
        rstd_csv << "model";
        for (const std::string& perturbation : manifest.perturbations) {
            acc_csv << ',' << csv_field(perturbation);
            rstd_csv << ',' << csv_field(perturbation);
        }
        acc_csv << '\n';
        rstd_csv << '\n';

        md << "## " << method << "\n\n";
        md << "Acc (ΔAcc) in percentage points:\n\n";
        md << "| model |";
        for (const std::string& perturbation : manifest.perturbations) {
            md << ' ' << perturbation << " |";
        }
        md << "\n|---|";
        for (std::size_t i = 0; i < manifest.perturbations.size(); ++i) md << "---|";
        md << "\n";

        for (const std::string& model : manifest.models) {
            acc_csv << csv_field(model);
            rstd_csv << csv_field(model);
            md << "| " << model << " |";
            const CellData* baseline_cell =
                with_baseline ? run.find(model, method, manifest.baseline) : nullptr;

            for (const std::string& perturbation : manifest.perturbations) {
                const CellData* cell = run.find(model, method, perturbation);
                std::string acc_text = "-";
                std::string rstd_text = "-";
                if (cell != nullptr && cell->report) {
                    const EvalReport& report = *cell->report;
                    acc_text = fmt2(report.accuracy * 100.0);
                    rstd_text = report.rstd_pp ? fmt2(*report.rstd_pp) : "-";
                    const bool is_baseline = with_baseline && perturbation == manifest.baseline;
                    if (with_baseline && !is_baseline) {
                        const auto delta = cell_delta(baseline_cell, cell);
                        if (delta) {
                            acc_text += " (" + fmt_signed2(delta->delta_acc_pp) + ")";
                            if (delta->delta_rstd_pp && rstd_text != "-") {
                                rstd_text += " (" + fmt_signed2(*delta->delta_rstd_pp) + ")";
                            }
                        }
                    }
                }
                acc_csv << ',' << csv_field(acc_text);
                rstd_csv << ',' << csv_field(rstd_text);
                md << ' ' << acc_text << " |";
            }
            acc_csv << '\n';
            rstd_csv << '\n';
            md << '\n';
        }

        // ranking agreement against the baseline column
        if (with_baseline) {
            acc_csv << "k_tau";
            md << "| k_tau |";
            for (const std::string& perturbation : manifest.perturbations) {
                std::string value = "-";
                if (baseline_ranking) {
                    const auto ranking = column_ranking(run, method, perturbation);
                    if (ranking) {
                        value = fmt4(kendall_k_tau(*baseline_ranking, *ranking));
                    }
                }
                acc_csv << ',' << value;
                md << ' ' << value << " |";
            }
            acc_csv << '\n';
            md << '\n';
        }
        md << '\n';

        const std::string method_file = sanitize_label(method);
        write_text(out_dir / ("acc_" + method_file + ".csv"), acc_csv.str());
        write_text(out_dir / ("rstd_" + method_file + ".csv"), rstd_csv.str());

        // rank movement between baseline and each other column
        if (with_baseline && baseline_ranking) {
            std::ostringstream shift_csv;
            shift_csv << "perturbation,model,old_rank,new_rank,delta\n";
            for (const std::string& perturbation : manifest.perturbations) {
                if (perturbation == manifest.baseline) continue;
                const auto ranking = column_ranking(run, method, perturbation);
                if (!ranking) continue;
                for (const RankShift& shift : rank_shift(*baseline_ranking, *ranking)) {
                    shift_csv << csv_field(perturbation) << ',' << csv_field(shift.model) << ','
                              << shift.old_rank << ',' << shift.new_rank << ','
                              << (shift.delta() >= 0 ? "+" : "") << shift.delta() << '\n';
                }
            }
            write_text(out_dir / ("rank_shift_" + method_file + ".csv"), shift_csv.str());
        }

        if (with_charts && with_baseline) {
            std::filesystem::create_directories(out_dir / "charts");
            for (const std::string& perturbation : manifest.perturbations) {
                if (perturbation == manifest.baseline) continue;
                std::vector<std::pair<std::string, double>> deltas;
                for (const std::string& model : manifest.models) {
                    const auto delta = cell_delta(run.find(model, method, manifest.baseline),
                                                  run.find(model, method, perturbation));
                    if (delta) deltas.emplace_back(model, delta->delta_acc_pp);
                }
                if (deltas.empty()) continue;
                const std::string title = "ΔAcc pp, " + method + ", " + perturbation;
                write_text(out_dir / "charts" /
                               ("delta_acc_" + method_file + "_" + sanitize_label(perturbation) +
                                ".svg"),
                           svg_delta_chart(title, deltas));
            }
        }

        for (const std::string& model : manifest.models) {
            const CellData* baseline_cell =
                with_baseline ? run.find(model, method, manifest.baseline) : nullptr;
            for (const std::string& perturbation : manifest.perturbations) {
                const CellData* cell = run.find(model, method, perturbation);
                if (cell == nullptr) continue;
                const CellStatus& status = *cell->status;
                long_csv << csv_field(model) << ',' << csv_field(method) << ','
                         << csv_field(perturbation) << ',' << status.status << ','
                         << status.n_items << ',' << status.n_scored << ',' << status.unscored
                         << ',' << status.tie_count << ',';
                if (cell->report) {
                    const EvalReport& report = *cell->report;
                    long_csv << fmt2(report.accuracy * 100.0) << ','
                             << (report.rstd_pp ? fmt2(*report.rstd_pp) : "");
                } else {
                    long_csv << ',';
                }
                std::optional<DeltaReport> delta;
                if (perturbation != manifest.baseline) delta = cell_delta(baseline_cell, cell);
                long_csv << ',' << (delta ? fmt_signed2(delta->delta_acc_pp) : "") << ','
                         << (delta && delta->delta_rstd_pp ? fmt_signed2(*delta->delta_rstd_pp)
                                                           : "")
                         << '\n';
            }
        }
    }

    write_text(out_dir / "cells.csv", long_csv.str());
    write_text(out_dir / "report.md", md.str());
    return partial ? 2 : 0;
}

std::vector<std::pair<std::string, double>> read_leaderboard_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot read " + path.string());
    }
    std::vector<std::pair<std::string, double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw Error(ErrorKind::MalformedRow, path.string() + ": no comma in '" + line + "'");
        }
        std::string name = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        if (!name.empty() && name.front() == '"' && name.back() == '"' && name.size() > 1) {
            name = name.substr(1, name.size() - 2);
        }
        try {
            rows.emplace_back(name, std::stod(value));
        } catch (const std::exception&) {
            if (first) {
                first = false;
                continue;  // header line
            }
            throw Error(ErrorKind::MalformedRow,
                        path.string() + ": non-numeric score '" + value + "'");
        }
        first = false;
    }
    if (rows.size() < 2) {
        throw Error(ErrorKind::MalformedRow,
                    path.string() + ": need at least 2 model rows, got " +
                        std::to_string(rows.size()));
    }
    return rows;
}

}  // namespace mcqa
