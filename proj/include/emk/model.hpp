#pragma once

#include "emk/aggregation.hpp"
#include "emk/backend.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emk {

// Descriptor construction selected by a model file. The spatial variants
// carry a whitening head; sum and cat are parameter-free baselines.
enum class DescribeVariant { xy, rhotheta, combined, sum, cat };

const char* describe_variant_name(DescribeVariant v);
DescribeVariant describe_variant_from_name(const std::string& name);
bool is_spatial(DescribeVariant v);
Variant head_variant(DescribeVariant v); // throws for sum/cat

struct ModelConfig {
    DescribeVariant variant = DescribeVariant::xy;
    int n = 8;   // grid side the model is declared for
    int d = 128; // tensor channels
    int out_dim = 128;
    int s = 2;
    double kappa_x = 8.0;
    double kappa_y = 8.0;
    double kappa_rho = 8.0;
    double kappa_theta = 8.0;
    bool weighted = true;
    bool separate_fcn = false; // combined variant with its own second FCN
    bool pixel_standardization = false;
    double bn_epsilon = 1e-5;
    std::vector<ConvLayerSpec> conv;       // may be empty: tensor-import only
    std::vector<ConvLayerSpec> conv_tilde; // populated iff separate_fcn
};

struct Model {
    ModelConfig config;
    ConvNet net;
    ConvNet net_tilde;
    DescriptorHead head; // spatial variants only

    bool has_conv() const { return !net.layers.empty(); }
};

// Model file: magic "EMKM", u32 manifest length, JSON manifest, then
// little-endian blobs (f32 for conv weights/BN stats and the head, f64 for
// the Fourier coefficient vectors) at the offsets the manifest declares.
void write_model_file(const std::filesystem::path& path, const Model& model);
Model read_model_file(const std::filesystem::path& path);

// Conv weights orthogonally initialized per layer, BN pass-through, head
// projection orthogonal, offset zero. Deterministic per seed.
Model make_random_model(const ModelConfig& config, std::uint64_t seed);

SpatialConfig spatial_config_of(const ModelConfig& config);

// Descriptor for one tensor (plus the optional second-FCN tensor for the
// combined variant). ctx must come from spatial_config_of for spatial
// variants; sum/cat ignore it.
Descriptor model_describe(const Model& model, const SpatialContext* ctx, const FeatureTensor& phi,
                          const FeatureTensor* phi_tilde = nullptr);

// Output dimension of descriptors this model produces.
int model_output_dim(const Model& model);

} // namespace emk
