#include "simspline/io.hpp"
#include <cstdio>
#include <fstream>
#include <sstream>

namespace simspline {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open input file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw UsageError(path + ": empty file, expected a header row");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    int y_col = -1;
    std::vector<int> x_cols, z_cols;  // x_cols[j] = column of x{j+1}
    for (size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h == "y") {
            y_col = (int)c;
        } else if (h.size() > 1 && h[0] == 'x') {
            int j = std::atoi(h.c_str() + 1);
            if (j >= 1) {
                if ((int)x_cols.size() < j) x_cols.resize(j, -1);
                x_cols[j - 1] = (int)c;
            }
        } else if (h.size() > 1 && h[0] == 'z') {
            int j = std::atoi(h.c_str() + 1);
            if (j >= 1) {
                if ((int)z_cols.size() < j) z_cols.resize(j, -1);
                z_cols[j - 1] = (int)c;
            }
        }
    }
    if (y_col < 0) throw UsageError(path + ": header is missing column 'y'");
    if (x_cols.empty())
        throw UsageError(path + ": header has no x1..xp columns");
    for (size_t j = 0; j < x_cols.size(); ++j)
        if (x_cols[j] < 0)
            throw UsageError(path + ": missing column x" + std::to_string(j + 1));
    for (size_t j = 0; j < z_cols.size(); ++j)
        if (z_cols[j] < 0)
            throw UsageError(path + ": missing column z" + std::to_string(j + 1));

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw UsageError(path + ":" + std::to_string(lineno) +
                             ": wrong number of fields");
        std::vector<double> row(cells.size());
        for (size_t c = 0; c < cells.size(); ++c) {
            std::string v = trim(cells[c]);
            if (v.empty())
                throw UsageError(path + ":" + std::to_string(lineno) +
                                 ": missing cell in column " + header[c]);
            char* end = nullptr;
            row[c] = std::strtod(v.c_str(), &end);
            if (end == v.c_str() || *end != '\0')
                throw UsageError(path + ":" + std::to_string(lineno) +
                                 ": cannot parse '" + v + "' in column " +
                                 header[c]);
        }
        rows.push_back(std::move(row));
    }

    const int n = (int)rows.size();
    const int p = (int)x_cols.size(), q = (int)z_cols.size();
    Dataset d;
    d.y.resize(n);
    d.x.resize(n, p);
    d.z.resize(n, q);
    for (int i = 0; i < n; ++i) {
        d.y(i) = rows[i][y_col];
        for (int j = 0; j < p; ++j) d.x(i, j) = rows[i][x_cols[j]];
        for (int j = 0; j < q; ++j) d.z(i, j) = rows[i][z_cols[j]];
    }
    return d;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void emit(std::ostream& os, const nlohmann::json& j, int indent, int depth) {
    std::string pad(depth * indent, ' ');
    std::string pad1((depth + 1) * indent, ' ');
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) os << ",\n";
                first = false;
                os << pad1 << nlohmann::json(it.key()).dump() << ": ";
                emit(os, it.value(), indent, depth + 1);
            }
            os << "\n" << pad << "}";
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            os << "[\n";
            bool first = true;
            for (const auto& el : j) {
                if (!first) os << ",\n";
                first = false;
                os << pad1;
                emit(os, el, indent, depth + 1);
            }
            os << "\n" << pad << "]";
            return;
        }
        case nlohmann::json::value_t::number_float:
            os << format_double(j.get<double>());
            return;
        default:
            os << j.dump();
            return;
    }
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
    return v;
}

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json vals = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) vals.push_back(m(r, c));
    return nlohmann::json{
        {"rows", (int)m.rows()}, {"cols", (int)m.cols()}, {"data", vals}};
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
    int rows = j.at("rows").get<int>(), cols = j.at("cols").get<int>();
    Eigen::MatrixXd m(rows, cols);
    const auto& vals = j.at("data");
    size_t k = 0;
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = vals[k++].get<double>();
    return m;
}

} // namespace

void write_json(std::ostream& os, const nlohmann::json& j, int indent) {
    emit(os, j, indent, 0);
    os << "\n";
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open output file: " + path);
    write_json(out, j);
}

nlohmann::json fit_to_json(const SingleIndexFit& f) {
    nlohmann::json j;
    j["schema"] = "sim-spline/1";
    j["type"] = "fit";
    j["n"] = f.n;
    j["p"] = (int)f.beta.size();
    j["q"] = (int)f.gamma.size();
    j["a"] = vec_to_json(f.a);
    j["beta"] = vec_to_json(f.beta);
    j["gamma"] = vec_to_json(f.gamma);
    j["lambda"] = f.lambda;
    j["interval"] = {{"lo", f.interval.lo}, {"hi", f.interval.hi}};
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["objective_trace"] = f.objective_trace;
    j["gcv"] = f.gcv;
    j["eigensystem"] = {
        {"m", f.eig.m},
        {"v", f.eig.v},
        {"interval", {{"lo", f.eig.interval.lo}, {"hi", f.eig.interval.hi}}},
        {"rho", vec_to_json(f.eig.rho)},
        {"basis",
         {{"lo", f.eig.basis.lo},
          {"hi", f.eig.basis.hi},
          {"num_basis", f.eig.basis.num_basis},
          {"degree", f.eig.basis.degree}}},
        {"coef", mat_to_json(f.eig.coef)}};
    j["config"] = {{"m", f.config.m},
                   {"num_basis", f.config.num_basis},
                   {"v", f.config.v},
                   {"lambda", f.config.lambda},
                   {"gcv_grid_size", f.config.gcv_grid_size},
                   {"gcv_lo", f.config.gcv_lo},
                   {"gcv_hi", f.config.gcv_hi},
                   {"max_outer_iter", f.config.max_outer_iter},
                   {"tol", f.config.tol},
                   {"n_init_directions", f.config.n_init_directions},
                   {"n_starts", f.config.n_starts},
                   {"seed", f.config.seed},
                   {"v_grid", f.config.v_grid},
                   {"density_grid", f.config.density_grid}};
    return j;
}

SingleIndexFit fit_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "sim-spline/1" || j.value("type", "") != "fit")
        throw UsageError("fit json: unrecognized schema");
    SingleIndexFit f;
    f.n = j.at("n").get<int>();
    f.a = vec_from_json(j.at("a"));
    f.beta = vec_from_json(j.at("beta"));
    f.gamma = vec_from_json(j.at("gamma"));
    f.lambda = j.at("lambda").get<double>();
    f.interval = {j.at("interval").at("lo").get<double>(),
                  j.at("interval").at("hi").get<double>()};
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.at("iterations").get<int>();
    f.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    f.gcv = j.at("gcv").get<double>();
    const auto& e = j.at("eigensystem");
    f.eig.m = e.at("m").get<int>();
    f.eig.v = e.at("v").get<int>();
    f.eig.interval = {e.at("interval").at("lo").get<double>(),
                      e.at("interval").at("hi").get<double>()};
    f.eig.rho = vec_from_json(e.at("rho"));
    const auto& b = e.at("basis");
    f.eig.basis = BSplineBasis(b.at("lo").get<double>(),
                               b.at("hi").get<double>(),
                               b.at("num_basis").get<int>(),
                               b.at("degree").get<int>());
    f.eig.coef = mat_from_json(e.at("coef"));
    const auto& c = j.at("config");
    f.config.m = c.at("m").get<int>();
    f.config.num_basis = c.at("num_basis").get<int>();
    f.config.v = c.at("v").get<int>();
    f.config.lambda = c.at("lambda").get<double>();
    f.config.gcv_grid_size = c.at("gcv_grid_size").get<int>();
    f.config.gcv_lo = c.at("gcv_lo").get<double>();
    f.config.gcv_hi = c.at("gcv_hi").get<double>();
    f.config.max_outer_iter = c.at("max_outer_iter").get<int>();
    f.config.tol = c.at("tol").get<double>();
    f.config.n_init_directions = c.at("n_init_directions").get<int>();
    f.config.n_starts = c.value("n_starts", 1);
    f.config.seed = c.at("seed").get<std::uint64_t>();
    f.config.v_grid = c.at("v_grid").get<std::vector<int>>();
    f.config.density_grid = c.at("density_grid").get<int>();
    return f;
}

void write_band_csv(const std::string& path, const Eigen::VectorXd& grid,
                    const Eigen::VectorXd& center, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open output file: " + path);
    out << "s,center,lower,upper\n";
    for (int i = 0; i < grid.size(); ++i)
        out << format_double(grid(i)) << "," << format_double(center(i)) << ","
            << format_double(lower(i)) << "," << format_double(upper(i))
            << "\n";
}

} // namespace simspline
