#pragma once

#include "emk/featuremap.hpp"

#include <vector>

namespace emk {

// Positions live on an n x n grid, 1-based: p = (i, j) with i, j in [1, n].
// Flat row index is (i-1)*n + (j-1); every matrix in the project that is
// indexed by grid position uses this order.
struct GridPos {
    int i = 1;
    int j = 1;
};

struct GridGeometry {
    int n = 1;
    double center = 1.0;    // (n+1)/2
    double rho_max = 0.0;   // distance from center to a grid corner
};

GridGeometry grid_geometry(int n);

int flat_index(const GridGeometry& geom, GridPos p); // throws std::out_of_range off-grid

double rho(const GridGeometry& geom, GridPos p);
double theta(const GridGeometry& geom, GridPos p);

// exp(-(rho_p/rho_max)^2); the radius is normalized so the weight is a soft
// importance over the whole grid rather than vanishing off-center.
double center_weight(const GridGeometry& geom, GridPos p);

enum class CoordSystem { cartesian, polar };

// Spatial embedding of one grid position: the Kronecker product of two
// feature-map embeddings, first-factor-major. Cartesian maps x and y over
// [1, n]; polar maps rho over [0, rho_max] and uses theta directly.
std::vector<double> encode_position(CoordSystem system, const GridGeometry& geom,
                                    const FeatureMapSpec& first, const FeatureMapSpec& second,
                                    GridPos p);

// Precomputed position-encoding matrix: one row per grid position, holding
// the (optionally center-weighted) spatial embedding.
struct PositionTable {
    CoordSystem system = CoordSystem::cartesian;
    int n = 0;
    int s = 0;
    bool weighted = false;
    std::vector<double> rows;     // n^2 x (2s+1)^2, row-major
    std::vector<double> weights;  // n^2 center weights (stored even when unweighted)

    int row_dim() const { return (2 * s + 1) * (2 * s + 1); }
    const double* row(int flat) const { return rows.data() + static_cast<std::size_t>(flat) * row_dim(); }
};

PositionTable build_position_table(CoordSystem system, const GridGeometry& geom,
                                   const FeatureMapSpec& first, const FeatureMapSpec& second,
                                   bool weighted);

} // namespace emk
