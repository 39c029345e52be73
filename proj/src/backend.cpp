#include "emk/backend.hpp"

#include "emk/error.hpp"
#include "emk/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace emk {

int conv_output_size(int input_size, int stride) {
    return (input_size + 2 - 3) / stride + 1;
}

int net_output_size(const ConvNet& net, int input_size) {
    int size = input_size;
    for (const auto& layer : net.layers)
        size = conv_output_size(size, layer.spec.stride);
    return size;
}

ConvLayer make_conv_layer(const ConvLayerSpec& spec) {
    if (spec.in_channels < 1 || spec.out_channels < 1)
        throw std::invalid_argument("conv layer channels must be >= 1");
    if (spec.stride != 1 && spec.stride != 2)
        throw std::invalid_argument("conv layer stride must be 1 or 2");
    ConvLayer layer;
    layer.spec = spec;
    layer.weight.assign(static_cast<std::size_t>(spec.out_channels) * spec.in_channels * 9, 0.0);
    layer.bn_mean.assign(static_cast<std::size_t>(spec.out_channels), 0.0);
    layer.bn_var.assign(static_cast<std::size_t>(spec.out_channels), 1.0);
    layer.bn_scale.assign(static_cast<std::size_t>(spec.out_channels), 1.0);
    layer.bn_shift.assign(static_cast<std::size_t>(spec.out_channels), 0.0);
    return layer;
}

std::vector<ConvLayerSpec> reference_architecture() {
    return {
        {1, 32, 1}, {32, 32, 1}, {32, 64, 2}, {64, 64, 1}, {64, 128, 2}, {128, 128, 1},
    };
}

Patch make_patch(int n) {
    if (n < 1)
        throw std::invalid_argument("make_patch: n must be >= 1");
    Patch patch;
    patch.n = n;
    patch.pixels.assign(static_cast<std::size_t>(n) * n, 0.0);
    return patch;
}

namespace {

int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = in.get();
    while (in) {
        if (c == '#') {
            while (in && c != '\n')
                c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (!in)
        throw format_error("truncated PGM header");
    int value = 0;
    bool any = false;
    while (in && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any)
        throw format_error("malformed PGM header");
    return value;
}

} // namespace

Patch read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw format_error("cannot open patch file: " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw format_error("patch file is not binary PGM (P5): " + path.string());
    const int width = read_pnm_token(in);
    const int height = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (width != height)
        throw format_error("patch must be square: " + path.string());
    if (maxval != 255)
        throw format_error("patch PGM must be 8-bit (maxval 255): " + path.string());

    Patch patch = make_patch(width);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in)
        throw format_error("truncated PGM pixel data: " + path.string());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        patch.pixels[i] = bytes[i] / 255.0;
    return patch;
}

void write_pgm(const std::filesystem::path& path, const std::vector<double>& values, int width,
               int height) {
    if (static_cast<std::size_t>(width) * height != values.size())
        throw std::invalid_argument("write_pgm: size disagrees with dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw format_error("cannot create PGM file: " + path.string());
    out << "P5\n" << width << " " << height << "\n255\n";
    for (double v : values) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
    if (!out)
        throw format_error("failed to write PGM file: " + path.string());
}

FeatureTensor forward(const ConvNet& net, const Patch& patch) {
    if (net.layers.empty())
        throw std::invalid_argument("forward: network has no layers");
    if (net.input_channels() != 1)
        throw std::invalid_argument("forward: first layer must take one channel");

    int size = patch.n;
    std::vector<double> activ = patch.pixels; // channel-major planes
    int channels = 1;

    std::vector<double> window; // gathered 3x3 x in window, channel-major
    for (const auto& layer : net.layers) {
        if (layer.spec.in_channels != channels)
            throw std::invalid_argument("forward: layer input channels disagree");
        const int out_size = conv_output_size(size, layer.spec.stride);
        if (out_size < 1)
            throw std::invalid_argument("forward: patch too small for architecture");
        const int out_ch = layer.spec.out_channels;
        std::vector<double> next(static_cast<std::size_t>(out_ch) * out_size * out_size);
        window.assign(static_cast<std::size_t>(channels) * 9, 0.0);

        std::vector<double> bn_a(static_cast<std::size_t>(out_ch));
        std::vector<double> bn_b(static_cast<std::size_t>(out_ch));
        for (int oc = 0; oc < out_ch; ++oc) {
            const double inv_sigma = 1.0 / std::sqrt(layer.bn_var[oc] + net.bn_epsilon);
            bn_a[oc] = layer.bn_scale[oc] * inv_sigma;
            bn_b[oc] = layer.bn_shift[oc] - bn_a[oc] * layer.bn_mean[oc];
        }

        for (int oy = 0; oy < out_size; ++oy) {
            for (int ox = 0; ox < out_size; ++ox) {
                // Gather the padded 3x3 window across input channels.
                const int iy0 = oy * layer.spec.stride - 1;
                const int ix0 = ox * layer.spec.stride - 1;
                for (int ic = 0; ic < channels; ++ic) {
                    const double* plane = activ.data() + static_cast<std::size_t>(ic) * size * size;
                    double* w = window.data() + static_cast<std::size_t>(ic) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = iy0 + ky;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ix0 + kx;
                            w[ky * 3 + kx] = (iy >= 0 && iy < size && ix >= 0 && ix < size)
                                                 ? plane[static_cast<std::size_t>(iy) * size + ix]
                                                 : 0.0;
                        }
                    }
                }
                for (int oc = 0; oc < out_ch; ++oc) {
                    const double conv = kern::dot(
                        layer.weight.data() + static_cast<std::size_t>(oc) * channels * 9,
                        window.data(), window.size());
                    const double bn = bn_a[oc] * conv + bn_b[oc];
                    next[static_cast<std::size_t>(oc) * out_size * out_size +
                         static_cast<std::size_t>(oy) * out_size + ox] = std::max(bn, 0.0);
                }
            }
        }
        activ = std::move(next);
        size = out_size;
        channels = out_ch;
    }

    FeatureTensor tensor = make_feature_tensor(size, channels);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double* dst = tensor.at(i * size + j);
            for (int c = 0; c < channels; ++c)
                dst[c] = activ[static_cast<std::size_t>(c) * size * size +
                               static_cast<std::size_t>(i) * size + j];
        }
    return tensor;
}

double NormalSampler::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on uniforms in (0, 1].
    const double inv = 1.0 / (static_cast<double>(engine_.max()) + 1.0);
    const double u1 = (static_cast<double>(engine_()) + 1.0) * inv;
    const double u2 = (static_cast<double>(engine_()) + 1.0) * inv;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
}

namespace {

// Householder QR of a tall column-major matrix; returns the thin Q with the
// sign convention that makes the R diagonal positive.
void householder_thin_q(std::vector<double>& a, int rows, int cols) {
    std::vector<double> tau(static_cast<std::size_t>(cols), 0.0);
    std::vector<double> v(static_cast<std::size_t>(rows));

    auto at = [&a, rows](int r, int c) -> double& {
        return a[static_cast<std::size_t>(c) * rows + r];
    };

    std::vector<std::vector<double>> reflectors;
    std::vector<double> diag_sign(static_cast<std::size_t>(cols), 1.0);

    for (int k = 0; k < cols; ++k) {
        double norm_sq = 0.0;
        for (int r = k; r < rows; ++r)
            norm_sq += at(r, k) * at(r, k);
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0)
            throw numerical_error("householder: rank-deficient random draw");
        const double alpha = at(k, k) >= 0.0 ? -norm : norm;
        diag_sign[k] = alpha < 0.0 ? -1.0 : 1.0; // R[k][k] = alpha

        std::vector<double> h(static_cast<std::size_t>(rows - k), 0.0);
        h[0] = at(k, k) - alpha;
        for (int r = k + 1; r < rows; ++r)
            h[r - k] = at(r, k);
        double h_sq = 0.0;
        for (double x : h)
            h_sq += x * x;

        if (h_sq > 0.0) {
            // Apply the reflector to the remaining columns.
            for (int c = k; c < cols; ++c) {
                double proj = 0.0;
                for (int r = k; r < rows; ++r)
                    proj += h[r - k] * at(r, c);
                const double scale = 2.0 * proj / h_sq;
                for (int r = k; r < rows; ++r)
                    at(r, c) -= scale * h[r - k];
            }
        }
        reflectors.push_back(std::move(h));
        tau[k] = h_sq;
    }

    // Accumulate the thin Q by applying reflectors to the leading identity
    // block, last reflector first.
    std::vector<double> q(static_cast<std::size_t>(rows) * cols, 0.0);
    auto qat = [&q, rows](int r, int c) -> double& {
        return q[static_cast<std::size_t>(c) * rows + r];
    };
    for (int c = 0; c < cols; ++c)
        qat(c, c) = 1.0;
    for (int k = cols - 1; k >= 0; --k) {
        const auto& h = reflectors[static_cast<std::size_t>(k)];
        const double h_sq = tau[k];
        if (h_sq == 0.0)
            continue;
        for (int c = 0; c < cols; ++c) {
            double proj = 0.0;
            for (int r = k; r < rows; ++r)
                proj += h[r - k] * qat(r, c);
            const double scale = 2.0 * proj / h_sq;
            for (int r = k; r < rows; ++r)
                qat(r, c) -= scale * h[r - k];
        }
    }
    // Fix signs so Q matches the positive-diagonal convention.
    for (int c = 0; c < cols; ++c)
        if (diag_sign[c] < 0.0)
            for (int r = 0; r < rows; ++r)
                qat(r, c) = -qat(r, c);
    a = std::move(q);
}

} // namespace

std::vector<double> random_orthogonal(int rows, int cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("random_orthogonal: dimensions must be >= 1");

    const int tall = std::max(rows, cols);
    const int thin = std::min(rows, cols);

    NormalSampler sampler(seed);
    // Column-major tall x thin Gaussian draw. Each orthonormalized vector of
    // the output consumes one contiguous block of the stream.
    std::vector<double> a(static_cast<std::size_t>(tall) * thin);
    for (int c = 0; c < thin; ++c)
        for (int r = 0; r < tall; ++r)
            a[static_cast<std::size_t>(c) * tall + r] = sampler.next();

    householder_thin_q(a, tall, thin);

    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    if (rows <= cols) {
        // Orthonormal rows: out = Q^T with Q tall (cols x rows).
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                out[static_cast<std::size_t>(r) * cols + c] =
                    a[static_cast<std::size_t>(r) * tall + c];
    } else {
        // Orthonormal columns.
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                out[static_cast<std::size_t>(r) * cols + c] =
                    a[static_cast<std::size_t>(c) * tall + r];
    }
    return out;
}

} // namespace emk
