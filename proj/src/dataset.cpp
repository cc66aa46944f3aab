#include "ivv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ivv {

Dataset make_dataset(Vec y, std::vector<int> d, Mat x, const std::vector<double>& z_raw, Vec w,
                     std::vector<std::string>* warnings) {
    const auto n = static_cast<std::size_t>(y.size());
    if (n < 2) throw DataError("dataset needs at least 2 observations");
    if (d.size() != n || z_raw.size() != n || static_cast<std::size_t>(x.rows()) != n)
        throw DataError("dataset columns have inconsistent lengths");
    if (w.size() == 0) w = Vec::Ones(static_cast<Eigen::Index>(n));
    if (static_cast<std::size_t>(w.size()) != n) throw DataError("weight column has the wrong length");

    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (d[i] != 0 && d[i] != 1)
            throw DataError("observation " + std::to_string(i + 1) + ": d=" + std::to_string(d[i]) + " is not binary");
        if (!std::isfinite(y[ii])) throw DataError("observation " + std::to_string(i + 1) + ": y is not finite");
        if (!std::isfinite(w[ii]) || w[ii] <= 0.0)
            throw DataError("observation " + std::to_string(i + 1) + ": weight must be positive");
        if (!std::isfinite(z_raw[i]) || z_raw[i] != std::round(z_raw[i]) || z_raw[i] < 0)
            throw DataError("observation " + std::to_string(i + 1) + ": z is not a nonnegative integer code");
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (!std::isfinite(x(ii, j)))
                throw DataError("observation " + std::to_string(i + 1) + ": x column " + std::to_string(j + 1) +
                                " is not finite");
    }

    Dataset ds;
    std::vector<long long> codes;
    for (double v : z_raw) codes.push_back(static_cast<long long>(v));
    std::vector<long long> uniq = codes;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    ds.z.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ds.z[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), codes[i]) - uniq.begin());
    ds.z_codes = uniq;
    ds.y = std::move(y);
    ds.d = std::move(d);
    ds.x = std::move(x);
    ds.w = std::move(w);
    ds.weighted = (ds.w.array() != 1.0).any();
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) ds.x_names.push_back("x" + std::to_string(j + 1));

    if (warnings) {
        if (ds.levels() < 2) warnings->push_back("instrument has a single level; the test needs at least two");
        std::vector<int> treated(ds.levels(), 0), untreated(ds.levels(), 0);
        for (std::size_t i = 0; i < n; ++i) (ds.d[i] ? treated : untreated)[ds.z[i]]++;
        for (int k = 0; k < ds.levels(); ++k)
            if (treated[k] == 0 || untreated[k] == 0)
                warnings->push_back("instrument level " + std::to_string(ds.z_codes[k]) +
                                    " lacks treated or untreated observations");
    }
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw DataError("unterminated quote");
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "."; }

double parse_number(const std::string& s, std::size_t line, const std::string& col) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (...) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size())
        throw DataError("line " + std::to_string(line) + ", column '" + col + "': cannot parse '" + s + "'");
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header;
    try {
        header = split_csv_line(line);
    } catch (const DataError& e) {
        throw DataError(path + ": header: " + e.what());
    }
    for (auto& h : header) h = trim(h);

    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": column '" + name + "' not found");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t cy = column(schema.y), cd = column(schema.d), cz = column(schema.z);
    std::vector<std::size_t> cx;
    for (const auto& name : schema.x) cx.push_back(column(name));
    const bool has_w = !schema.weight.empty();
    const std::size_t cw = has_w ? column(schema.weight) : 0;

    std::vector<double> ys, zs, ws;
    std::vector<int> ds;
    std::vector<std::vector<double>> xs;
    LoadReport local;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        try {
            f = split_csv_line(line);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (f.size() != header.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(f.size()));
        for (auto& s : f) s = trim(s);
        bool missing = is_missing(f[cy]) || is_missing(f[cd]) || is_missing(f[cz]) || (has_w && is_missing(f[cw]));
        for (auto c : cx) missing = missing || is_missing(f[c]);
        if (missing) {
            local.dropped_lines.push_back(lineno);
            continue;
        }
        ys.push_back(parse_number(f[cy], lineno, schema.y));
        const double dv = parse_number(f[cd], lineno, schema.d);
        if (dv != 0.0 && dv != 1.0)
            throw DataError("line " + std::to_string(lineno) + ": d=" + f[cd] + " is not binary");
        ds.push_back(static_cast<int>(dv));
        const double zv = parse_number(f[cz], lineno, schema.z);
        if (zv != std::round(zv) || zv < 0)
            throw DataError("line " + std::to_string(lineno) + ": z=" + f[cz] + " is not a nonnegative integer code");
        zs.push_back(zv);
        std::vector<double> row;
        for (std::size_t j = 0; j < cx.size(); ++j) row.push_back(parse_number(f[cx[j]], lineno, schema.x[j]));
        xs.push_back(std::move(row));
        if (has_w) {
            const double wv = parse_number(f[cw], lineno, schema.weight);
            if (!(wv > 0.0)) throw DataError("line " + std::to_string(lineno) + ": weight must be positive");
            ws.push_back(wv);
        }
    }
    if (!local.dropped_lines.empty())
        local.warnings.push_back(std::to_string(local.dropped_lines.size()) +
                                 " row(s) with missing values deleted listwise");

    const auto n = static_cast<Eigen::Index>(ys.size());
    Mat x(n, static_cast<Eigen::Index>(cx.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = xs[i][j];
    Vec w = has_w ? Eigen::Map<Vec>(ws.data(), n) : Vec();
    Dataset out = make_dataset(Eigen::Map<Vec>(ys.data(), n), std::move(ds), std::move(x), zs, w, &local.warnings);
    out.x_names = schema.x;
    if (report) *report = std::move(local);
    return out;
}

Mat load_columns(const std::string& path, const std::vector<std::string>& names, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": column '" + name + "' not found");
        cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<std::vector<double>> rows;
    LoadReport local;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        try {
            f = split_csv_line(line);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (f.size() != header.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(f.size()));
        bool missing = false;
        for (auto c : cols) missing = missing || is_missing(trim(f[c]));
        if (missing) {
            local.dropped_lines.push_back(lineno);
            continue;
        }
        std::vector<double> row;
        for (std::size_t j = 0; j < cols.size(); ++j) row.push_back(parse_number(trim(f[cols[j]]), lineno, names[j]));
        rows.push_back(std::move(row));
    }
    if (!local.dropped_lines.empty())
        local.warnings.push_back(std::to_string(local.dropped_lines.size()) +
                                 " row(s) with missing values deleted listwise");
    Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (report) *report = std::move(local);
    return out;
}

std::vector<SubsampleView> split_by_instrument(const Dataset& ds) {
    std::vector<SubsampleView> views(ds.levels());
    const double total = ds.w.sum();
    for (int k = 0; k < ds.levels(); ++k) {
        views[k].parent = &ds;
        views[k].level = k;
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto& v = views[ds.z[i]];
        v.indices.push_back(i);
        v.count += ds.w[static_cast<Eigen::Index>(i)];
    }
    for (auto& v : views) v.lambda = v.count / total;
    return views;
}

PairView make_pair_view(const Dataset& ds, int lo) {
    if (lo < 0 || lo + 1 >= ds.levels()) throw DataError("instrument pair out of range");
    PairView pv;
    pv.lo = lo;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.z[i] != lo && ds.z[i] != lo + 1) continue;
        const int g = ds.z[i] - lo;
        pv.indices.push_back(i);
        pv.group.push_back(g);
        (g ? pv.n1 : pv.n0) += ds.w[static_cast<Eigen::Index>(i)];
    }
    pv.lambda = pv.n1 / (pv.n0 + pv.n1);
    return pv;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.y.resize(m);
    out.x.resize(m, ds.x.cols());
    out.w.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto i = static_cast<Eigen::Index>(rows[r]);
        out.y[r] = ds.y[i];
        out.x.row(r) = ds.x.row(i);
        out.w[r] = ds.w[i];
        out.d.push_back(ds.d[rows[r]]);
        out.z.push_back(ds.z[rows[r]]);
    }
    out.z_codes = ds.z_codes;
    out.x_names = ds.x_names;
    out.weighted = ds.weighted;
    return out;
}

}  // namespace ivv
