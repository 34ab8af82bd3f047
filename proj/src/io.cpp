#include "zmc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "zmc/errors.hpp"

namespace zmc {

using nlohmann::json;

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (const char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

bool parse_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec == std::errc() && res.ptr == last) return true;
    // Accept integral values written as floats, e.g. "3.0".
    double d = 0.0;
    const auto resd = std::from_chars(first, last, d);
    if (resd.ec != std::errc() || resd.ptr != last || d != std::floor(d)) return false;
    out = static_cast<std::int64_t>(d);
    return true;
}

bool is_index(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

}  // namespace

CountSeries read_counts_csv(std::istream& in, const std::string& column) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw ParseError("counts file is empty");

    std::size_t col = 0;
    bool header = false;
    if (is_index(column)) {
        col = std::stoul(column);
    } else if (!column.empty()) {
        const auto& names = rows.front();
        const auto it = std::find(names.begin(), names.end(), column);
        if (it == names.end()) throw ParseError("column '" + column + "' not found in header");
        col = static_cast<std::size_t>(it - names.begin());
        header = true;
    }
    std::int64_t probe = 0;
    if (!header && (col >= rows.front().size() || !parse_int(rows.front()[col], probe))) header = true;

    CountSeries series;
    for (std::size_t i = header ? 1 : 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (col >= row.size()) throw ParseError("row " + std::to_string(i + 1) + " has no column " + std::to_string(col));
        std::int64_t y = 0;
        if (!parse_int(row[col], y)) throw ParseError("row " + std::to_string(i + 1) + ": '" + row[col] + "' is not an integer");
        if (y < 0) throw ParseError("row " + std::to_string(i + 1) + ": negative count");
        series.counts.push_back(y);
    }
    if (series.empty()) throw ParseError("counts file has no data rows");
    return series;
}

CountSeries read_counts_csv(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_counts_csv(in, column);
}

void write_counts_csv(std::ostream& out, const CountSeries& series, const IntensityPath* intensity) {
    out << (intensity ? "t,y,lambda\n" : "t,y\n");
    for (std::size_t t = 0; t < series.size(); ++t) {
        out << t + 1 << ',' << series.counts[t];
        if (intensity) out << ',' << format_double((*intensity)[t]);
        out << '\n';
    }
}

void write_filter_csv(std::ostream& out, std::span<const std::int64_t> counts, const FilterPass& pass) {
    out << "t,y,lambda_filtered,error_var,innovation\n";
    for (std::size_t t = 0; t < pass.size(); ++t) {
        out << t + 1 << ',' << counts[t] << ',' << format_double(pass.states[t].lambda_filtered) << ','
            << format_double(pass.states[t].error_var) << ',' << format_double(pass.steps[t].innovation) << '\n';
    }
}

void write_residuals_csv(std::ostream& out, std::span<const double> residuals) {
    out << "t,residual\n";
    for (std::size_t t = 0; t < residuals.size(); ++t) out << t + 1 << ',' << format_double(residuals[t]) << '\n';
}

void write_prob_table_csv(std::ostream& out, const ProbTable& table) {
    out << "k,fitted,empirical\n";
    for (std::size_t k = 0; k < table.fitted.size(); ++k) {
        out << k << ',' << format_double(table.fitted[k]) << ','
            << format_double(k < table.empirical.size() ? table.empirical[k] : 0.0) << '\n';
    }
}

void write_acf_csv(std::ostream& out, const std::string& name, const AcfPacf& acf) {
    for (std::size_t k = 0; k < acf.acf.size(); ++k) {
        out << name << ',' << k << ',' << format_double(acf.acf[k]) << ','
            << (k == 0 ? std::string("") : format_double(acf.pacf[k - 1])) << '\n';
    }
}

json to_json(const Params& q) {
    return json{{"omega", q.omega}, {"rho", q.rho}, {"beta", q.beta}, {"p", q.p}, {"a", q.a}, {"c", q.c},
                {"mu_lambda", q.mu()}, {"sigma2_lambda", q.sigma2()}};
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

Params params_from_json(const json& j, const Params& d) {
    if (!j.is_object()) throw ParseError("parameter block must be a JSON object");
    Params q;
    q.omega = get_or(j, "omega", d.omega);
    q.rho = get_or(j, "rho", d.rho);
    q.beta = get_or(j, "beta", d.beta);
    q.p = get_or(j, "p", d.p);
    q.a = get_or(j, "a", d.a);
    q.c = get_or(j, "c", d.c);
    return q;
}

ModelStructure structure_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("model block must be a JSON object");
    ModelStructure m;
    try {
        m.family = parse_count_family(get_or<std::string>(j, "family", "ZMP"));
        m.intensity = parse_intensity_family(get_or<std::string>(j, "intensity", "GAR1"));
    } catch (const InvalidSpec& e) {
        throw ParseError(e.what());
    }
    m.c = get_or(j, "c", 1);
    if (m.c != 0 && m.c != 1) throw ParseError("model.c must be 0 or 1");
    return m;
}

ModelSpec model_from_json(const json& j) {
    const auto m = structure_from_json(j);
    Params q = params_from_json(j);
    q.c = m.c;
    if (m.intensity == IntensityFamily::EAR1 && !j.contains("p")) q.p = 1.0;
    return ModelSpec::make(m.family, m.intensity, q);
}

json to_json(const ModelSpec& spec) {
    json j = to_json(spec.params);
    j["family"] = std::string(to_string(spec.family));
    j["intensity"] = std::string(to_string(spec.intensity.family));
    return j;
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ParseError("fit block must be a JSON object");
    c.tol = get_or(j, "tol", c.tol);
    c.ef_tol = get_or(j, "ef_tol", c.ef_tol);
    c.max_iter = get_or(j, "max_iter", c.max_iter);
    c.jacobian_step = get_or(j, "jacobian_step", c.jacobian_step);
    c.max_halvings = get_or(j, "max_halvings", c.max_halvings);
    c.max_step = get_or(j, "max_step", c.max_step);
    c.lambda_clamp = get_or(j, "lambda_clamp", c.lambda_clamp);
    c.a_max = get_or(j, "a_max", c.a_max);
    c.rho_max = get_or(j, "rho_max", c.rho_max);
    c.omega_max = get_or(j, "omega_max", c.omega_max);
    c.omega_margin = get_or(j, "omega_margin", c.omega_margin);
    c.floor = get_or(j, "floor", c.floor);
    if (j.contains("restart_rho")) c.restart_rho = j.at("restart_rho").get<std::vector<double>>();
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        auto axis = [&](const char* key, GridAxis& ax) {
            if (!g.contains(key)) return;
            const auto& a = g.at(key);
            if (!a.is_array() || a.size() != 3) throw ParseError(std::string("grid.") + key + " must be [lo, hi, steps]");
            ax = {a[0].get<double>(), a[1].get<double>(), a[2].get<int>()};
        };
        axis("rho", c.grid.rho);
        axis("omega", c.grid.omega);
        axis("beta", c.grid.beta);
        axis("p", c.grid.p);
        axis("a", c.grid.a);
    }
    return c;
}

json to_json(const FitConfig& c) {
    auto axis = [](const GridAxis& a) { return json::array({a.lo, a.hi, a.steps}); };
    return json{{"tol", c.tol},
                {"ef_tol", c.ef_tol},
                {"max_iter", c.max_iter},
                {"jacobian_step", c.jacobian_step},
                {"max_halvings", c.max_halvings},
                {"max_step", c.max_step},
                {"lambda_clamp", c.lambda_clamp},
                {"a_max", c.a_max},
                {"rho_max", c.rho_max},
                {"omega_max", c.omega_max},
                {"omega_margin", c.omega_margin},
                {"floor", c.floor},
                {"restart_rho", c.restart_rho},
                {"grid",
                 {{"rho", axis(c.grid.rho)},
                  {"omega", axis(c.grid.omega)},
                  {"beta", axis(c.grid.beta)},
                  {"p", axis(c.grid.p)},
                  {"a", axis(c.grid.a)}}}};
}

json fit_result_to_json(const FitResult& r, const ModelStructure& model) {
    json trace = json::array();
    for (const auto& q : r.trace) trace.push_back(to_json(q));
    json j{{"model",
            {{"family", std::string(to_string(model.family))},
             {"intensity", std::string(to_string(model.intensity))},
             {"c", model.c}}},
           {"estimates", to_json(r.params_hat)},
           {"converged", r.converged},
           {"iterations", r.iterations},
           {"ef_norm", r.ef_norm},
           {"projections", r.projections},
           {"clamped_steps", r.filtered.clamped},
           {"init_source", r.init_source},
           {"starts", r.starts},
           {"init", to_json(r.init)},
           {"deflation", r.params_hat.omega < 0.0},
           {"trace", trace}};
    j["se"] = r.se ? to_json(*r.se) : json(nullptr);
    return j;
}

FitResult fit_result_from_json(const json& j, ModelStructure& model) {
    if (!j.contains("estimates") || !j.contains("model")) throw ParseError("fit JSON lacks estimates or model");
    model = structure_from_json(j.at("model"));
    FitResult r;
    r.params_hat = params_from_json(j.at("estimates"));
    r.params_hat.c = model.c;
    r.converged = get_or(j, "converged", false);
    r.iterations = get_or(j, "iterations", 0);
    return r;
}

std::string config_hash(const json& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

namespace {

void dump_value(std::ostringstream& out, const json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out << "{}";
            return;
        }
        out << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out << ",\n";
            first = false;
            out << inner << json(it.key()).dump() << ": ";
            dump_value(out, it.value(), indent + 1);
        }
        out << '\n' << pad << '}';
    } else if (j.is_array()) {
        if (j.empty()) {
            out << "[]";
            return;
        }
        out << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out << ",\n";
            out << inner;
            dump_value(out, j[i], indent + 1);
        }
        out << '\n' << pad << ']';
    } else if (j.is_number_float()) {
        const double v = j.get<double>();
        out << (std::isfinite(v) ? format_double(v) : std::string("null"));
    } else {
        out << j.dump();
    }
}

}  // namespace

std::string dump_json(const json& j) {
    std::ostringstream out;
    dump_value(out, j, 0);
    out << '\n';
    return out.str();
}

}  // namespace zmc
