#pragma once

#include "emk/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace emk {

// One 3x3 convolution stage: conv (pad 1, stride 1 or 2, no bias) followed
// by inference-mode batch norm and ReLU.
struct ConvLayerSpec {
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
};

struct ConvLayer {
    ConvLayerSpec spec;
    std::vector<double> weight;   // out x (in*9), row per output channel
    std::vector<double> bn_mean;  // out
    std::vector<double> bn_var;   // out
    std::vector<double> bn_scale; // out
    std::vector<double> bn_shift; // out
};

struct ConvNet {
    std::vector<ConvLayer> layers;
    double bn_epsilon = 1e-5;

    int input_channels() const { return layers.empty() ? 0 : layers.front().spec.in_channels; }
    int output_channels() const { return layers.empty() ? 0 : layers.back().spec.out_channels; }
};

// Spatial side after one layer: floor((size + 2 - 3)/stride) + 1.
int conv_output_size(int input_size, int stride);
int net_output_size(const ConvNet& net, int input_size);

// Identity-initialized layer (weights zero, BN pass-through stats).
ConvLayer make_conv_layer(const ConvLayerSpec& spec);

// The paper-scale six-layer network: channels 1-32-32-64-64-128-128,
// strides (1,1,2,1,2,1), mapping N=32 to n=8 and N=64 to n=16.
std::vector<ConvLayerSpec> reference_architecture();

// Grayscale square patch with values in [0, 1].
struct Patch {
    int n = 0;
    std::vector<double> pixels; // row-major n*n
};

Patch make_patch(int n);

// 8-bit binary PGM (P5); values are scaled by 1/255 on read.
Patch read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const std::vector<double>& values, int width,
               int height); // values clamped to [0,1], scaled by 255

FeatureTensor forward(const ConvNet& net, const Patch& patch);

// rows x cols matrix with orthonormal rows when rows <= cols (orthonormal
// columns otherwise), from the QR factorization of a seeded Gaussian draw.
// Deterministic for a given seed on any platform.
std::vector<double> random_orthogonal(int rows, int cols, std::uint64_t seed);

// Deterministic standard-normal stream: Box-Muller over a seeded
// mt19937_64, so the same seed yields the same values on any standard
// library. Shared by initializers and fixture generators.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
    double next();

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace emk
