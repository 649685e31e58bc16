#include "emx/tda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace emx {

namespace {

std::string fmt6(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double sq(double v) { return v * v; }

} // namespace

Scaling identity_scaling() { return Scaling{}; }

Scaling month_standard_scaling(const MonthRecord& record) {
    std::vector<double> xs, ys;
    for (int day = 2; day <= static_cast<int>(record.days.size()); ++day) {
        PointCloud cloud = build_point_cloud(record, day, Scaling{});
        for (const CloudPoint& p : cloud.points) {
            xs.push_back(p.x_raw);
            ys.push_back(p.y_raw);
        }
    }
    Scaling s;
    auto fit = [](const std::vector<double>& v, double& shift, double& scale) {
        if (v.empty()) return;
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += sq(x - mean);
        var /= static_cast<double>(v.size());
        double sd = std::sqrt(var);
        shift = mean;
        scale = sd > 1e-12 ? sd : 1.0;
    };
    fit(xs, s.x_shift, s.x_scale);
    fit(ys, s.y_shift, s.y_scale);
    return s;
}

PointCloud build_point_cloud(const MonthRecord& record, int day, const Scaling& scaling) {
    if (day < 2 || day > static_cast<int>(record.days.size()))
        fail(Errc::DayOutOfRange, "point cloud needs a day in 2..last, got " + std::to_string(day));
    const DayRecord& today = record.days[static_cast<std::size_t>(day - 1)];

    std::map<std::string, std::int64_t> traded;
    for (const auto& [token, result] : today.results) {
        (void)token;
        for (const Fill& f : result.fills)
            if (f.qty > 0) traded[f.account] += f.qty;
    }

    PointCloud cloud;
    cloud.day = day;
    for (std::size_t i = 0; i < record.students.size(); ++i) {
        const std::string& id = record.students[i];
        double volume = static_cast<double>(traded.count(id) ? traded.at(id) : 0);
        double used = record.usage_kwh_on(day, i);
        if (volume <= 0 && used <= 0) continue; // neither traded nor consumed
        CloudPoint p;
        p.user = id;
        p.x_raw = volume;
        p.y_raw = used - record.usage_kwh_on(day - 1, i);
        p.x = (p.x_raw - scaling.x_shift) / scaling.x_scale;
        p.y = (p.y_raw - scaling.y_shift) / scaling.y_scale;
        cloud.points.push_back(std::move(p));
    }
    return cloud;
}

PointCloud cloud_from_xy(const std::vector<std::array<double, 2>>& xy, int day) {
    PointCloud cloud;
    cloud.day = day;
    char buf[32];
    for (std::size_t i = 0; i < xy.size(); ++i) {
        std::snprintf(buf, sizeof buf, "p%02zu", i);
        cloud.points.push_back(CloudPoint{buf, xy[i][0], xy[i][1], xy[i][0], xy[i][1]});
    }
    return cloud;
}

namespace {

double dist2(const CloudPoint& a, const CloudPoint& b) { return sq(a.x - b.x) + sq(a.y - b.y); }

/* Minimal enclosing circle radius of three points: the diameter circle of
 * the longest side when it already covers the third point (right/obtuse or
 * degenerate), else the circumradius.
 */
double triangle_value(const CloudPoint& a, const CloudPoint& b, const CloudPoint& c) {
    const CloudPoint* p[3] = {&a, &b, &c};
    double d_ab = dist2(a, b), d_ac = dist2(a, c), d_bc = dist2(b, c);
    int u = 0, v = 1, w = 2;
    double longest = d_ab;
    if (d_ac > longest) { longest = d_ac; u = 0; v = 2; w = 1; }
    if (d_bc > longest) { longest = d_bc; u = 1; v = 2; w = 0; }

    double cx = (p[u]->x + p[v]->x) / 2, cy = (p[u]->y + p[v]->y) / 2;
    double r2 = longest / 4;
    double d3 = sq(p[w]->x - cx) + sq(p[w]->y - cy);
    if (d3 <= r2 * (1 + 1e-12)) return std::sqrt(longest) / 2;

    double ax = a.x, ay = a.y, bx = b.x, by = b.y, cx2 = c.x, cy2 = c.y;
    double d = 2 * (ax * (by - cy2) + bx * (cy2 - ay) + cx2 * (ay - by));
    if (d == 0) return std::sqrt(longest) / 2; // numerically collinear
    double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx2 * cx2 + cy2 * cy2;
    double ux = (a2 * (by - cy2) + b2 * (cy2 - ay) + c2 * (ay - by)) / d;
    double uy = (a2 * (cx2 - bx) + b2 * (ax - cx2) + c2 * (bx - ax)) / d;
    return std::sqrt(sq(ax - ux) + sq(ay - uy));
}

} // namespace

std::vector<FilteredSimplex> cech_filtration(const PointCloud& cloud) {
    const int n = static_cast<int>(cloud.points.size());
    if (n > kMaxCloudPoints)
        fail(Errc::TooManyPoints,
             "cloud has " + std::to_string(n) + " points; limit is " + std::to_string(kMaxCloudPoints));
    for (const CloudPoint& p : cloud.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            fail(Errc::TooManyPoints, "non-finite coordinate for user " + p.user);

    std::vector<FilteredSimplex> out;
    out.reserve(static_cast<std::size_t>(n) * (n + 1) / 2 + static_cast<std::size_t>(n) * n * n / 6);

    for (int i = 0; i < n; ++i) out.push_back(FilteredSimplex{0, {i, -1, -1}, 0.0});

    std::vector<std::vector<double>> half(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double v = std::sqrt(dist2(cloud.points[static_cast<std::size_t>(i)], cloud.points[static_cast<std::size_t>(j)])) / 2;
            half[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
            out.push_back(FilteredSimplex{1, {i, j, -1}, v});
        }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                double v = triangle_value(cloud.points[static_cast<std::size_t>(i)],
                                          cloud.points[static_cast<std::size_t>(j)],
                                          cloud.points[static_cast<std::size_t>(k)]);
                // guard the face bound against rounding
                v = std::max({v, half[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                              half[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                              half[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]});
                out.push_back(FilteredSimplex{2, {i, j, k}, v});
            }

    std::sort(out.begin(), out.end(), [](const FilteredSimplex& a, const FilteredSimplex& b) {
        if (a.value != b.value) return a.value < b.value;
        if (a.dim != b.dim) return a.dim < b.dim;
        return a.vertices < b.vertices;
    });
    return out;
}

namespace {

// xor two sorted index lists (symmetric difference)
std::vector<int> xor_cols(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace

std::vector<PersistencePair> compute_persistence(const std::vector<FilteredSimplex>& filtration) {
    const std::size_t n = filtration.size();
    std::map<std::array<int, 3>, std::size_t> position;
    std::vector<std::vector<int>> cols(n);

    for (std::size_t i = 0; i < n; ++i) {
        const FilteredSimplex& s = filtration[i];
        if (!(s.value >= 0) || !std::isfinite(s.value))
            fail(Errc::NonMonotoneFiltration, "simplex " + std::to_string(i) + " has an invalid value");
        if (i > 0 && s.value < filtration[i - 1].value)
            fail(Errc::NonMonotoneFiltration, "filtration not sorted at index " + std::to_string(i));
        if (s.dim < 0 || s.dim > 2)
            fail(Errc::NonMonotoneFiltration, "simplex " + std::to_string(i) + " has unsupported dimension");
        int card = s.dim + 1;
        for (int a = 0; a < card; ++a) {
            if (s.vertices[static_cast<std::size_t>(a)] < 0)
                fail(Errc::NonMonotoneFiltration, "simplex " + std::to_string(i) + " is missing vertices");
            if (a > 0 && s.vertices[static_cast<std::size_t>(a)] <= s.vertices[static_cast<std::size_t>(a - 1)])
                fail(Errc::NonMonotoneFiltration, "simplex " + std::to_string(i) + " vertices not ascending");
        }

        std::vector<int> faces;
        if (s.dim >= 1) {
            for (int drop = 0; drop < card; ++drop) {
                std::array<int, 3> face{-1, -1, -1};
                int t = 0;
                for (int a = 0; a < card; ++a)
                    if (a != drop) face[static_cast<std::size_t>(t++)] = s.vertices[static_cast<std::size_t>(a)];
                auto it = position.find(face);
                if (it == position.end())
                    fail(Errc::NonMonotoneFiltration,
                         "face of simplex " + std::to_string(i) + " missing or out of order");
                faces.push_back(static_cast<int>(it->second));
            }
            std::sort(faces.begin(), faces.end());
        }
        cols[i] = std::move(faces);
        if (!position.emplace(s.vertices, i).second)
            fail(Errc::NonMonotoneFiltration, "duplicate simplex at index " + std::to_string(i));
    }

    std::vector<std::ptrdiff_t> pivot_owner(n, -1);
    std::vector<char> killed(n, 0);
    std::vector<PersistencePair> pairs;

    for (std::size_t j = 0; j < n; ++j) {
        std::vector<int>& col = cols[j];
        while (!col.empty()) {
            std::ptrdiff_t owner = pivot_owner[static_cast<std::size_t>(col.back())];
            if (owner < 0) break;
            col = xor_cols(col, cols[static_cast<std::size_t>(owner)]);
        }
        if (col.empty()) continue; // j creates a class; paired later or essential
        std::size_t i = static_cast<std::size_t>(col.back());
        pivot_owner[i] = static_cast<std::ptrdiff_t>(j);
        killed[i] = 1;
        int dim = filtration[i].dim;
        if (dim <= 1) {
            PersistencePair p;
            p.dim = dim;
            p.birth = filtration[i].value;
            p.death = filtration[j].value;
            p.robustness = p.death - p.birth;
            p.essential = false;
            p.zero = p.death == p.birth;
            pairs.push_back(p);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (killed[i] || !cols[i].empty()) continue; // only unkilled creators survive
        if (filtration[i].dim > 1) continue;
        PersistencePair p;
        p.dim = filtration[i].dim;
        p.birth = filtration[i].value;
        p.death = kInfiniteDeath;
        p.robustness = kInfiniteDeath;
        p.essential = true;
        p.zero = false;
        pairs.push_back(p);
    }

    std::sort(pairs.begin(), pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
        if (a.dim != b.dim) return a.dim < b.dim;
        if (a.birth != b.birth) return a.birth < b.birth;
        return a.death < b.death;
    });
    return pairs;
}

std::vector<PersistencePair> robust_cavities(const std::vector<PersistencePair>& pairs, double theta) {
    std::vector<PersistencePair> out;
    for (const PersistencePair& p : pairs)
        if (p.dim == 1 && p.robustness > 0 && p.robustness >= theta) out.push_back(p);
    std::sort(out.begin(), out.end(), [](const PersistencePair& a, const PersistencePair& b) {
        if (a.robustness != b.robustness) return a.robustness > b.robustness;
        if (a.birth != b.birth) return a.birth < b.birth;
        return a.death < b.death;
    });
    return out;
}

std::string diagram_csv_header() { return "day,dim,birth,death,robustness\n"; }

std::string diagram_rows(const std::vector<PersistencePair>& pairs, int day) {
    std::string out;
    for (const PersistencePair& p : pairs) {
        out += std::to_string(day);
        out += ',';
        out += std::to_string(p.dim);
        out += ',';
        out += fmt6(p.birth);
        out += ',';
        out += fmt6(p.death);
        out += ',';
        out += fmt6(p.robustness);
        out += '\n';
    }
    return out;
}

std::string export_diagram(const std::vector<PersistencePair>& pairs, int day) {
    return diagram_csv_header() + diagram_rows(pairs, day);
}

DiagramsByDay parse_diagram(const std::string& csv) {
    DiagramsByDay out;
    std::istringstream in(csv);
    std::string line;
    int lineno = 0;
    auto num = [&](const std::string& field) -> double {
        if (field == "inf") return kInfiniteDeath;
        std::size_t used = 0;
        double v = std::stod(field, &used);
        if (used != field.size())
            fail(Errc::ParseError, "diagram line " + std::to_string(lineno) + ": bad number '" + field + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line + "\n" != diagram_csv_header())
                fail(Errc::ParseError, "diagram header mismatch: '" + line + "'");
            continue;
        }
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (f.size() != 5)
            fail(Errc::ParseError, "diagram line " + std::to_string(lineno) + ": expected 5 fields");
        try {
            PersistencePair p;
            int day = static_cast<int>(std::stol(f[0]));
            p.dim = static_cast<int>(std::stol(f[1]));
            p.birth = num(f[2]);
            p.death = num(f[3]);
            p.robustness = num(f[4]);
            p.essential = std::isinf(p.death);
            p.zero = !p.essential && p.death == p.birth;
            out[day].push_back(p);
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            fail(Errc::ParseError, "diagram line " + std::to_string(lineno) + ": malformed row");
        }
    }
    return out;
}

std::string cloud_csv_header() { return "day,user,x_raw,y_raw,x_scaled,y_scaled\n"; }

std::string cloud_rows(const PointCloud& cloud) {
    std::string out;
    for (const CloudPoint& p : cloud.points) {
        out += std::to_string(cloud.day);
        out += ',';
        out += p.user;
        out += ',';
        out += fmt6(p.x_raw);
        out += ',';
        out += fmt6(p.y_raw);
        out += ',';
        out += fmt6(p.x);
        out += ',';
        out += fmt6(p.y);
        out += '\n';
    }
    return out;
}

} // namespace emx
