#pragma once

#include <array>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "emx/lifecycle.hpp"

namespace emx {

struct CloudPoint {
    std::string user;
    double x_raw = 0; // tokens traded by this user that day (both kinds, both sides)
    double y_raw = 0; // kWh used that day minus the day before
    double x = 0;     // after scaling
    double y = 0;
};

struct PointCloud {
    int day = 0;
    std::vector<CloudPoint> points;
};

// Per-axis affine map: scaled = (raw - shift) / scale.
struct Scaling {
    double x_shift = 0;
    double x_scale = 1;
    double y_shift = 0;
    double y_scale = 1;
};

Scaling identity_scaling();

// Mean and standard deviation per axis, pooled over every point of every
// eligible day (2..end), so a radius is comparable across the month. An axis
// with (near-)zero spread keeps scale 1.
Scaling month_standard_scaling(const MonthRecord& record);

// One point per student active on `day` (traded or consumed). Needs day >= 2
// for the usage delta.
PointCloud build_point_cloud(const MonthRecord& record, int day, const Scaling& scaling);

// Bare-coordinate cloud for geometry work: raw == scaled.
PointCloud cloud_from_xy(const std::vector<std::array<double, 2>>& xy, int day = 0);

constexpr int kMaxCloudPoints = 64;

struct FilteredSimplex {
    int dim = 0;                              // 0, 1 or 2
    std::array<int, 3> vertices{-1, -1, -1};  // ascending point indices; unused = -1
    double value = 0;                         // radius at which the simplex enters
};

/* Every vertex (at 0), edge (at half the distance) and triangle (at the
 * minimal enclosing circle radius), sorted by (value, dim, vertices). The
 * value of a simplex never falls below any face's value.
 */
std::vector<FilteredSimplex> cech_filtration(const PointCloud& cloud);

constexpr double kInfiniteDeath = std::numeric_limits<double>::infinity();

struct PersistencePair {
    int dim = 0;
    double birth = 0;
    double death = kInfiniteDeath;
    double robustness = kInfiniteDeath; // death - birth
    bool essential = false;             // never dies
    bool zero = false;                  // born and dead at the same radius

    bool operator==(const PersistencePair&) const = default;
};

/* Column reduction of the boundary matrix over GF(2), in filtration order.
 * Emits H0 and H1 pairs, zero-persistence ones flagged, plus the essential
 * classes (one H0 per component of the final complex). Pairs come back
 * sorted by (dim, birth, death).
 */
std::vector<PersistencePair> compute_persistence(const std::vector<FilteredSimplex>& filtration);

// H1 pairs with robustness >= theta (and > 0), most robust first.
std::vector<PersistencePair> robust_cavities(const std::vector<PersistencePair>& pairs, double theta);

using DiagramsByDay = std::map<int, std::vector<PersistencePair>>;

std::string diagram_csv_header(); // "day,dim,birth,death,robustness\n"
std::string diagram_rows(const std::vector<PersistencePair>& pairs, int day);
std::string export_diagram(const std::vector<PersistencePair>& pairs, int day); // header + rows
DiagramsByDay parse_diagram(const std::string& csv);

std::string cloud_csv_header(); // "day,user,x_raw,y_raw,x_scaled,y_scaled\n"
std::string cloud_rows(const PointCloud& cloud);

} // namespace emx
