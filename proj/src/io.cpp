#include "mvcwm/io.hpp"

#include "mvcwm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace mvcwm {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
            field.pop_back();
        }
        std::size_t start = 0;
        while (start < field.size() && field[start] == ' ') {
            ++start;
        }
        out.push_back(field.substr(start));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

long parse_index(const std::string& s, std::size_t line_no, const char* what) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
        throw ValidationError("line " + std::to_string(line_no) + ": bad " + what + " '" + s +
                              "' (expected a positive integer)");
    }
    return v;
}

double parse_value(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line_no) + ": bad value '" + s + "'");
    }
    return v;
}

struct Cell {
    long obs;
    int block;  // 0 = Y, 1 = X
    long row;
    long col;
    bool operator<(const Cell& o) const {
        return std::tie(obs, block, row, col) < std::tie(o.obs, o.block, o.row, o.col);
    }
};

std::string cell_name(long obs, int block, long row, long col) {
    return "(obs " + std::to_string(obs) + ", block " + (block == 0 ? "Y" : "X") + ", row " +
           std::to_string(row) + ", col " + std::to_string(col) + ")";
}

std::string entry_status(const SelectionEntry& e) {
    return e.ok ? "ok" : "failed";
}

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c == '\n' || c == '\r' ? ' ' : c;
    }
    return out + "\"";
}

// Splits a CSV line honouring double quotes.
std::vector<std::string> split_quoted(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

double parse_report_double(const std::string& s) {
    if (s.empty()) {
        return 0.0;
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw ValidationError("summary: bad number '" + s + "'");
    }
    return v;
}

int parse_report_int(const std::string& s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError("summary: bad integer '" + s + "'");
    }
    return v;
}

// Non-finite doubles have no JSON literal; they are written as strings.
json number_json(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---- long CSV ----

ThreeWayData read_long_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::map<Cell, double> cells;
    long n = 0, p = 0, q = 0, r = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split_csv_line(line);
        if (!header_seen) {
            if (f.size() != 5 || f[0] != "obs" || f[1] != "block" || f[2] != "row" ||
                f[3] != "col" || f[4] != "value") {
                throw ValidationError("expected header obs,block,row,col,value");
            }
            header_seen = true;
            continue;
        }
        if (f.size() != 5) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected 5 fields");
        }
        Cell c{};
        c.obs = parse_index(f[0], line_no, "obs");
        if (f[1] == "Y" || f[1] == "y") {
            c.block = 0;
        } else if (f[1] == "X" || f[1] == "x") {
            c.block = 1;
        } else {
            throw ValidationError("line " + std::to_string(line_no) + ": block must be Y or X");
        }
        c.row = parse_index(f[2], line_no, "row");
        c.col = parse_index(f[3], line_no, "col");
        const double v = parse_value(f[4], line_no);
        if (!cells.emplace(c, v).second) {
            throw ValidationError("duplicate cell " + cell_name(c.obs, c.block, c.row, c.col));
        }
        n = std::max(n, c.obs);
        r = std::max(r, c.col);
        (c.block == 0 ? p : q) = std::max(c.block == 0 ? p : q, c.row);
    }
    if (!header_seen) {
        throw ValidationError("empty data file");
    }
    if (cells.empty() || p == 0) {
        throw DimensionError("data file holds no response cells");
    }
    MatrixXd y(p, r * n);
    MatrixXd x(q, r * n);
    for (long i = 1; i <= n; ++i) {
        for (int b = 0; b < 2; ++b) {
            const long rows = b == 0 ? p : q;
            MatrixXd& dst = b == 0 ? y : x;
            for (long j = 1; j <= r; ++j) {
                for (long k = 1; k <= rows; ++k) {
                    const auto it = cells.find(Cell{i, b, k, j});
                    if (it == cells.end()) {
                        throw ValidationError("missing cell " + cell_name(i, b, k, j));
                    }
                    dst(k - 1, (i - 1) * r + (j - 1)) = it->second;
                }
            }
        }
    }
    return ThreeWayData(std::move(y), std::move(x), r);
}

ThreeWayData read_long_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open data file " + path);
    }
    return read_long_csv(in);
}

void write_long_csv(const ThreeWayData& data, std::ostream& out) {
    out << "obs,block,row,col,value\n";
    const Index r = data.r();
    for (Index i = 0; i < data.n(); ++i) {
        for (int b = 0; b < 2; ++b) {
            const MatrixXd& src = b == 0 ? data.y_stack() : data.x_stack();
            for (Index j = 0; j < r; ++j) {
                for (Index k = 0; k < src.rows(); ++k) {
                    out << i + 1 << ',' << (b == 0 ? 'Y' : 'X') << ',' << k + 1 << ',' << j + 1
                        << ',' << format_double(src(k, i * r + j)) << '\n';
                }
            }
        }
    }
}

void write_long_csv(const ThreeWayData& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write " + path);
    }
    write_long_csv(data, out);
}

// ---- JSON ----

json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(number_json(m(i, j)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array()) {
        throw ValidationError("matrix must be an array of rows");
    }
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols) {
            throw DimensionError("ragged matrix in JSON");
        }
        for (Index k = 0; k < cols; ++k) {
            const json& v = j[i][k];
            m(i, k) = v.is_string() ? parse_report_double(v.get<std::string>()) : v.get<double>();
        }
    }
    return m;
}

json to_json(const TailParams& tail) {
    json j;
    j["family"] = std::string(family_code(family_of(tail)));
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, SkewTTail>) {
                j["nu"] = t.nu;
            } else if constexpr (std::is_same_v<T, GhTail>) {
                j["lambda"] = t.lambda;
                j["omega"] = t.omega;
            } else if constexpr (std::is_same_v<T, VgTail>) {
                j["gamma"] = t.gamma;
            } else if constexpr (std::is_same_v<T, NigTail>) {
                j["kappa"] = t.kappa;
            }
        },
        tail);
    return j;
}

TailParams tail_from_json(const json& j) {
    switch (parse_family(j.at("family").get<std::string>())) {
        case Family::Normal:
            return NormalTail{};
        case Family::SkewT:
            return SkewTTail{j.at("nu").get<double>()};
        case Family::GeneralizedHyperbolic:
            return GhTail{j.at("lambda").get<double>(), j.at("omega").get<double>()};
        case Family::VarianceGamma:
            return VgTail{j.at("gamma").get<double>()};
        case Family::NormalInverseGaussian:
            return NigTail{j.at("kappa").get<double>()};
    }
    return NormalTail{};
}

json to_json(const ModelSpec& spec) {
    return json{{"covariate_family", std::string(family_code(spec.covariate_family))},
                {"response_family", std::string(family_code(spec.response_family))},
                {"G", spec.G},
                {"p", spec.p},
                {"q", spec.q},
                {"r", spec.r},
                {"fmr", spec.fmr},
                {"pair", spec.pair_name()}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.covariate_family = parse_family(j.at("covariate_family").get<std::string>());
    s.response_family = parse_family(j.at("response_family").get<std::string>());
    s.G = j.at("G").get<int>();
    s.p = j.at("p").get<int>();
    s.q = j.at("q").get<int>();
    s.r = j.at("r").get<int>();
    s.fmr = j.at("fmr").get<bool>();
    return s;
}

json to_json(const ModelParams& params) {
    json comps = json::array();
    for (const auto& c : params.components) {
        comps.push_back(json{{"pi", c.pi},
                             {"M_X", to_json(c.M_X)},
                             {"A_X", to_json(c.A_X)},
                             {"Sigma_X", to_json(c.Sigma_X)},
                             {"Psi_X", to_json(c.Psi_X)},
                             {"tail_X", to_json(c.tail_X)},
                             {"B", to_json(c.B)},
                             {"A_Y", to_json(c.A_Y)},
                             {"Sigma_Y", to_json(c.Sigma_Y)},
                             {"Psi_Y", to_json(c.Psi_Y)},
                             {"tail_Y", to_json(c.tail_Y)}});
    }
    return json{{"spec", to_json(params.spec)}, {"components", std::move(comps)}};
}

ModelParams params_from_json(const json& j) {
    ModelParams p;
    p.spec = spec_from_json(j.at("spec"));
    for (const auto& c : j.at("components")) {
        ComponentParams cp;
        cp.pi = c.at("pi").get<double>();
        cp.M_X = matrix_from_json(c.at("M_X"));
        cp.A_X = matrix_from_json(c.at("A_X"));
        cp.Sigma_X = matrix_from_json(c.at("Sigma_X"));
        cp.Psi_X = matrix_from_json(c.at("Psi_X"));
        cp.tail_X = tail_from_json(c.at("tail_X"));
        cp.B = matrix_from_json(c.at("B"));
        cp.A_Y = matrix_from_json(c.at("A_Y"));
        cp.Sigma_Y = matrix_from_json(c.at("Sigma_Y"));
        cp.Psi_Y = matrix_from_json(c.at("Psi_Y"));
        cp.tail_Y = tail_from_json(c.at("tail_Y"));
        p.components.push_back(std::move(cp));
    }
    return p;
}

json to_json(const FitResult& result) {
    json trace = json::array();
    for (double v : result.loglik_trace) {
        trace.push_back(number_json(v));
    }
    return json{{"params", to_json(result.params)},
                {"loglik", number_json(result.loglik)},
                {"bic", number_json(result.bic)},
                {"n_params", result.n_params},
                {"n_iterations", result.n_iterations},
                {"converged", result.converged},
                {"start", result.start_label},
                {"loglik_trace", std::move(trace)},
                {"hard_labels", result.hard_labels},
                {"responsibilities", to_json(result.responsibilities)},
                {"notes", result.notes}};
}

// ---- selection summary ----

void write_summary_csv(const SelectionReport& report, std::ostream& out) {
    std::vector<std::size_t> order(report.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    // ok before failed, then BIC descending; stable so ties keep grid order
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = report.entries[a];
        const auto& eb = report.entries[b];
        if (ea.ok != eb.ok) return ea.ok;
        if (!ea.ok) return false;
        if (ea.converged != eb.converged) return ea.converged;
        return ea.bic > eb.bic;
    });
    out << "rank,pair,G,fmr,status,converged,loglik,n_params,bic,best,error\n";
    int rank = 1;
    for (std::size_t idx : order) {
        const auto& e = report.entries[idx];
        out << rank++ << ',' << csv_field(e.pair) << ',' << e.G << ',' << (e.fmr ? 1 : 0) << ','
            << entry_status(e) << ',' << (e.converged ? 1 : 0) << ',' << format_double(e.loglik)
            << ',' << e.n_params << ',' << format_double(e.bic) << ','
            << (static_cast<int>(idx) == report.best ? 1 : 0) << ',' << csv_field(e.error)
            << '\n';
    }
}

SelectionReport read_summary_csv(std::istream& in) {
    SelectionReport report;
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("empty summary");
    }
    const auto header = split_quoted(line);
    if (header.size() != 11 || header[0] != "rank" || header[10] != "error") {
        throw ValidationError("unexpected summary header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split_quoted(line);
        if (f.size() != 11) {
            throw ValidationError("summary row with " + std::to_string(f.size()) + " fields");
        }
        SelectionEntry e;
        e.pair = f[1];
        e.G = parse_report_int(f[2]);
        e.fmr = f[3] == "1";
        e.ok = f[4] == "ok";
        e.converged = f[5] == "1";
        e.loglik = parse_report_double(f[6]);
        e.n_params = parse_report_int(f[7]);
        e.bic = parse_report_double(f[8]);
        e.error = f[10];
        if (f[9] == "1") {
            report.best = static_cast<int>(report.entries.size());
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

json to_json(const SelectionReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back(json{{"pair", e.pair},
                               {"G", e.G},
                               {"fmr", e.fmr},
                               {"ok", e.ok},
                               {"converged", e.converged},
                               {"loglik", number_json(e.loglik)},
                               {"bic", number_json(e.bic)},
                               {"n_params", e.n_params},
                               {"error", e.error}});
    }
    return json{{"entries", std::move(entries)}, {"best", report.best}};
}

// ---- studies ----

json to_json(const RecoveryReport& report) {
    json mse = json::array();
    for (const auto& m : report.mse) {
        mse.push_back(to_json(m));
    }
    return json{{"kind", "recovery"},
                {"scenario", report.scenario},
                {"replicates", report.replicates},
                {"failed", report.failed},
                {"used", report.used},
                {"excluded", report.excluded},
                {"mse", std::move(mse)}};
}

json to_json(const ClassificationReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back(json{{"pair", r.pair},
                            {"selected_g", r.selected_g},
                            {"best_ari", r.best_ari},
                            {"selection_counts", r.selection_counts},
                            {"mean_ari", r.mean_ari},
                            {"failed_fits", r.failed_fits}});
    }
    return json{{"kind", "classification"},
                {"epsilon", report.epsilon},
                {"replicates", report.replicates},
                {"true_g", report.true_g},
                {"g_min", report.g_min},
                {"g_max", report.g_max},
                {"rows", std::move(rows)}};
}

void write_recovery_csv(const RecoveryReport& report, std::ostream& out) {
    out << "scenario,component,row,col,mse\n";
    for (std::size_t g = 0; g < report.mse.size(); ++g) {
        const MatrixXd& m = report.mse[g];
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) {
                out << csv_field(report.scenario) << ',' << g + 1 << ',' << i + 1 << ',' << j + 1
                    << ',' << format_double(m(i, j)) << '\n';
            }
        }
    }
}

void write_classification_csv(const ClassificationReport& report, std::ostream& out) {
    out << "epsilon,pair";
    for (int g = report.g_min; g <= report.g_max; ++g) {
        out << ",selected_G" << g;
    }
    out << ",mean_ari,failed_fits\n";
    for (const auto& r : report.rows) {
        out << format_double(report.epsilon) << ',' << csv_field(r.pair);
        for (int c : r.selection_counts) {
            out << ',' << c;
        }
        out << ',' << format_double(r.mean_ari) << ',' << r.failed_fits << '\n';
    }
}

}  // namespace mvcwm
