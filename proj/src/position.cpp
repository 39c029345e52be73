#include "emk/position.hpp"

#include <cmath>
#include <stdexcept>

namespace emk {

GridGeometry grid_geometry(int n) {
    if (n < 1)
        throw std::invalid_argument("grid_geometry: n must be >= 1");
    GridGeometry geom;
    geom.n = n;
    geom.center = 0.5 * (n + 1);
    geom.rho_max = std::sqrt(2.0) * 0.5 * (n - 1);
    return geom;
}

int flat_index(const GridGeometry& geom, GridPos p) {
    if (p.i < 1 || p.i > geom.n || p.j < 1 || p.j > geom.n)
        throw std::out_of_range("grid position outside the n x n grid");
    return (p.i - 1) * geom.n + (p.j - 1);
}

double rho(const GridGeometry& geom, GridPos p) {
    flat_index(geom, p);
    const double di = p.i - geom.center;
    const double dj = p.j - geom.center;
    return std::sqrt(di * di + dj * dj);
}

double theta(const GridGeometry& geom, GridPos p) {
    flat_index(geom, p);
    return std::atan2(p.j - geom.center, p.i - geom.center);
}

double center_weight(const GridGeometry& geom, GridPos p) {
    const double r = rho(geom, p);
    if (r == 0.0)
        return 1.0;
    const double t = r / geom.rho_max;
    return std::exp(-t * t);
}

namespace {

void kronecker(const double* a, int na, const double* b, int nb, double* out) {
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j)
            out[i * nb + j] = a[i] * b[j];
}

} // namespace

std::vector<double> encode_position(CoordSystem system, const GridGeometry& geom,
                                    const FeatureMapSpec& first, const FeatureMapSpec& second,
                                    GridPos p) {
    if (first.s != second.s)
        throw std::invalid_argument("encode_position: feature maps must share s");
    flat_index(geom, p);

    double alpha_first = 0.0;
    double alpha_second = 0.0;
    if (system == CoordSystem::cartesian) {
        const auto axis = AngleMapping::linear(1.0, geom.n);
        alpha_first = to_angle(axis, p.i);
        alpha_second = to_angle(axis, p.j);
    } else {
        const auto radial = AngleMapping::linear(0.0, geom.rho_max);
        alpha_first = to_angle(radial, rho(geom, p));
        alpha_second = theta(geom, p);
    }

    const int dim = first.dim();
    std::vector<double> fa(static_cast<std::size_t>(dim));
    std::vector<double> fb(static_cast<std::size_t>(dim));
    embed(first, alpha_first, fa.data());
    embed(second, alpha_second, fb.data());

    std::vector<double> out(static_cast<std::size_t>(dim) * dim);
    kronecker(fa.data(), dim, fb.data(), dim, out.data());
    return out;
}

PositionTable build_position_table(CoordSystem system, const GridGeometry& geom,
                                   const FeatureMapSpec& first, const FeatureMapSpec& second,
                                   bool weighted) {
    if (first.s != second.s)
        throw std::invalid_argument("build_position_table: feature maps must share s");

    PositionTable table;
    table.system = system;
    table.n = geom.n;
    table.s = first.s;
    table.weighted = weighted;

    const int e = table.row_dim();
    const int n2 = geom.n * geom.n;
    table.rows.resize(static_cast<std::size_t>(n2) * e);
    table.weights.resize(static_cast<std::size_t>(n2));

    for (int i = 1; i <= geom.n; ++i) {
        for (int j = 1; j <= geom.n; ++j) {
            const GridPos p{i, j};
            const int flat = flat_index(geom, p);
            const double w = center_weight(geom, p);
            table.weights[static_cast<std::size_t>(flat)] = w;
            auto enc = encode_position(system, geom, first, second, p);
            double* dst = table.rows.data() + static_cast<std::size_t>(flat) * e;
            const double scale = weighted ? w : 1.0;
            for (int k = 0; k < e; ++k)
                dst[k] = scale * enc[static_cast<std::size_t>(k)];
        }
    }
    return table;
}

} // namespace emk
