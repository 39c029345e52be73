#pragma once

#include "emk/position.hpp"
#include "emk/tensor.hpp"

#include <string>
#include <vector>

namespace emk {

// Spatial-encoding variants. Cartesian tolerates translation misalignment,
// polar tolerates rotation/scale, combined concatenates both encodings.
enum class Variant { xy, rhotheta, combined };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct Descriptor {
    std::vector<double> raw;
    std::vector<double> normalized;
    double gamma = 0.0; // 1/||raw||

    int dim() const { return static_cast<int>(raw.size()); }
};

// Throws numerical_error when raw is zero or non-finite.
Descriptor make_descriptor(std::vector<double> raw);

// Learnable whitening head for one spatial-encoding variant.
// projection is D x E row-major with E = d(2s+1)^2 for xy/rhotheta and
// 2d(2s+1)^2 for combined.
struct DescriptorHead {
    Variant variant = Variant::xy;
    int out_dim = 0;  // D
    int enc_dim = 0;  // E
    std::vector<double> projection; // D*E
    std::vector<double> offset;     // D

    long long parameter_count() const {
        return static_cast<long long>(out_dim) * enc_dim + out_dim;
    }
};

int encoding_dim(Variant v, int d, int s);
DescriptorHead make_descriptor_head(Variant v, int out_dim, int d, int s);

// FC layer reshaped as n^2 blocks of D x d; the conventional deep-descriptor
// head.
struct FcHead {
    int out_dim = 0; // D
    int n = 0;
    int d = 0;
    std::vector<double> weight; // D x (n^2 d), row-major
    std::vector<double> bias;   // D
};

FcHead make_fc_head(int out_dim, int n, int d);

// Everything needed to evaluate one spatial variant on an n x n grid: the
// grid geometry and the precomputed position table(s). Tables are derived
// deterministically from this config and never serialized.
struct SpatialConfig {
    Variant variant = Variant::xy;
    int n = 8;
    int s = 2;
    bool weighted = true;
    double kappa_x = 8.0;
    double kappa_y = 8.0;
    double kappa_rho = 8.0;
    double kappa_theta = 8.0;
};

struct SpatialContext {
    SpatialConfig config;
    GridGeometry geom;
    PositionTable cartesian; // populated unless variant == rhotheta
    PositionTable polar;     // populated unless variant == xy
};

SpatialContext make_spatial_context(const SpatialConfig& config);

// --- Descriptor construction -----------------------------------------------

// psi = W vec(Phi) + w.
Descriptor describe_fc(const FcHead& head, const FeatureTensor& phi);

// Same value through the per-position split psi = sum_p W_p phi^p + n^2 w',
// w' = w/n^2.
Descriptor describe_fc_split(const FcHead& head, const FeatureTensor& phi);

// psi = M (sum_p w_p phi^p (x) enc(p)) + n^2 m, evaluated position by
// position with the full Kronecker vector materialized for each p.
// Combined variant reads the cartesian block from phi and the polar block
// from phi_tilde; passing phi_tilde = nullptr reuses phi for both.
Descriptor describe_spatial_naive(const DescriptorHead& head, const SpatialContext& ctx,
                                  const FeatureTensor& phi,
                                  const FeatureTensor* phi_tilde = nullptr);

// Identical value through psi = M vec(Phi^T F) + n^2 m; transient storage is
// one d x (2s+1)^2 product per coordinate system instead of the n^2 full
// encodings.
Descriptor describe_spatial_efficient(const DescriptorHead& head, const SpatialContext& ctx,
                                      const FeatureTensor& phi,
                                      const FeatureTensor* phi_tilde = nullptr);

// Transient-number ratio between the unreduced and the reduced evaluation.
double memory_reduction_factor(int n, int d, int s);

// Baselines: spatial sum pooling (dimension d) and plain vectorization
// (dimension n^2 d).
Descriptor describe_sum(const FeatureTensor& phi);
Descriptor describe_cat(const FeatureTensor& phi);

// --- Match-kernel decomposition --------------------------------------------

// Pairwise encoded similarities over all position pairs. map[p][q] is the
// inner product of the per-position encoded vectors; their sum equals the
// inner product of the raw descriptors.
struct MatchKernelResult {
    int n2 = 0;
    double total = 0.0;
    std::vector<double> map; // n^2 x n^2 row-major

    double at(int p, int q) const { return map[static_cast<std::size_t>(p) * n2 + q]; }
};

MatchKernelResult match_kernel_similarity(const FcHead& head, const FeatureTensor& phi_a,
                                          const FeatureTensor& phi_b);
MatchKernelResult match_kernel_similarity(const DescriptorHead& head, const SpatialContext& ctx,
                                          const FeatureTensor& phi_a, const FeatureTensor& phi_b,
                                          const FeatureTensor* phi_a_tilde = nullptr,
                                          const FeatureTensor* phi_b_tilde = nullptr);

// Row p of the pairwise map reshaped to n x n and affinely rescaled to
// [0, 1]; a constant row maps to all zeros.
std::vector<double> heatmap_from_map(const MatchKernelResult& result, const GridGeometry& geom,
                                     GridPos p);
std::vector<double> similarity_heatmap(const FcHead& head, const FeatureTensor& phi_a,
                                       const FeatureTensor& phi_b, GridPos p);
std::vector<double> similarity_heatmap(const DescriptorHead& head, const SpatialContext& ctx,
                                       const FeatureTensor& phi_a, const FeatureTensor& phi_b,
                                       GridPos p, const FeatureTensor* phi_a_tilde = nullptr,
                                       const FeatureTensor* phi_b_tilde = nullptr);

// --- Parameter accounting ---------------------------------------------------

struct ConvLayerShape {
    int in = 0;
    int out = 0;
};

// The six-layer 3x3 architecture shared by every model configuration.
std::vector<ConvLayerShape> reference_conv_shapes();

long long conv_parameters(const std::vector<ConvLayerShape>& shapes);
long long fc_head_parameters(int out_dim, int n, int d, bool bias);
long long spatial_head_parameters(Variant v, int out_dim, int d, int s);

struct ModelParameterRow {
    std::string model;
    long long conv = 0;
    long long conv_tilde = 0;
    long long head = 0;
    long long total = 0;
};

// Parameter counts for every reference configuration (d = D = 128).
std::vector<ModelParameterRow> parameter_table();

} // namespace emk
