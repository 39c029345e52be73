#include "emk/aggregation.hpp"

#include "emk/error.hpp"
#include "emk/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace emk {

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::xy: return "xy";
    case Variant::rhotheta: return "rhotheta";
    case Variant::combined: return "combined";
    }
    return "unknown";
}

Variant variant_from_name(const std::string& name) {
    if (name == "xy") return Variant::xy;
    if (name == "rhotheta") return Variant::rhotheta;
    if (name == "combined") return Variant::combined;
    throw std::invalid_argument("unknown variant: " + name);
}

Descriptor make_descriptor(std::vector<double> raw) {
    for (double v : raw)
        if (!std::isfinite(v))
            throw numerical_error("descriptor has non-finite components");
    const double norm_sq = kern::sum_sq(raw.data(), raw.size());
    if (norm_sq == 0.0)
        throw numerical_error("cannot normalize a zero descriptor");
    Descriptor desc;
    desc.gamma = 1.0 / std::sqrt(norm_sq);
    desc.normalized.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        desc.normalized[i] = desc.gamma * raw[i];
    desc.raw = std::move(raw);
    return desc;
}

int encoding_dim(Variant v, int d, int s) {
    const int e = (2 * s + 1) * (2 * s + 1);
    return v == Variant::combined ? 2 * d * e : d * e;
}

DescriptorHead make_descriptor_head(Variant v, int out_dim, int d, int s) {
    if (out_dim < 1 || d < 1 || s < 1)
        throw std::invalid_argument("make_descriptor_head: dimensions must be >= 1");
    DescriptorHead head;
    head.variant = v;
    head.out_dim = out_dim;
    head.enc_dim = encoding_dim(v, d, s);
    head.projection.assign(static_cast<std::size_t>(out_dim) * head.enc_dim, 0.0);
    head.offset.assign(static_cast<std::size_t>(out_dim), 0.0);
    return head;
}

FcHead make_fc_head(int out_dim, int n, int d) {
    if (out_dim < 1 || n < 1 || d < 1)
        throw std::invalid_argument("make_fc_head: dimensions must be >= 1");
    FcHead head;
    head.out_dim = out_dim;
    head.n = n;
    head.d = d;
    head.weight.assign(static_cast<std::size_t>(out_dim) * n * n * d, 0.0);
    head.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
    return head;
}

SpatialContext make_spatial_context(const SpatialConfig& config) {
    if (config.s < 1)
        throw std::invalid_argument("make_spatial_context: s must be >= 1");
    SpatialContext ctx;
    ctx.config = config;
    ctx.geom = grid_geometry(config.n);
    if (config.variant != Variant::rhotheta) {
        const auto fx = build_feature_map_spec(config.kappa_x, config.s);
        const auto fy = build_feature_map_spec(config.kappa_y, config.s);
        ctx.cartesian = build_position_table(CoordSystem::cartesian, ctx.geom, fx, fy,
                                             config.weighted);
    }
    if (config.variant != Variant::xy) {
        const auto frho = build_feature_map_spec(config.kappa_rho, config.s);
        const auto ftheta = build_feature_map_spec(config.kappa_theta, config.s);
        ctx.polar = build_position_table(CoordSystem::polar, ctx.geom, frho, ftheta,
                                         config.weighted);
    }
    return ctx;
}

namespace {

void check_fc_shapes(const FcHead& head, const FeatureTensor& phi) {
    if (phi.n != head.n || phi.d != head.d)
        throw std::invalid_argument("fc head and tensor shapes disagree");
}

struct SpatialInputs {
    const PositionTable* first = nullptr;  // cartesian unless variant == rhotheta
    const PositionTable* second = nullptr; // polar block of the combined variant
    const FeatureTensor* phi = nullptr;
    const FeatureTensor* phi_second = nullptr;
    int d = 0;
    int e = 0; // (2s+1)^2
};

SpatialInputs check_spatial_shapes(const DescriptorHead& head, const SpatialContext& ctx,
                                   const FeatureTensor& phi, const FeatureTensor* phi_tilde) {
    if (head.variant != ctx.config.variant)
        throw std::invalid_argument("head and context variants disagree");
    if (phi.n != ctx.geom.n)
        throw std::invalid_argument("tensor grid side disagrees with context");
    if (head.enc_dim != encoding_dim(head.variant, phi.d, ctx.config.s))
        throw std::invalid_argument("head encoding dimension disagrees with tensor channels");
    if (phi_tilde != nullptr) {
        if (head.variant != Variant::combined)
            throw std::invalid_argument("second tensor is only meaningful for the combined variant");
        if (phi_tilde->n != phi.n || phi_tilde->d != phi.d)
            throw std::invalid_argument("the two tensors of the combined variant must share shape");
    }

    SpatialInputs in;
    in.phi = &phi;
    in.d = phi.d;
    const int dim = 2 * ctx.config.s + 1;
    in.e = dim * dim;
    switch (head.variant) {
    case Variant::xy:
        in.first = &ctx.cartesian;
        break;
    case Variant::rhotheta:
        in.first = &ctx.polar;
        break;
    case Variant::combined:
        in.first = &ctx.cartesian;
        in.second = &ctx.polar;
        in.phi_second = phi_tilde ? phi_tilde : &phi;
        break;
    }
    return in;
}

} // namespace

Descriptor describe_fc(const FcHead& head, const FeatureTensor& phi) {
    check_fc_shapes(head, phi);
    const std::size_t cols = phi.data.size();
    std::vector<double> raw(static_cast<std::size_t>(head.out_dim));
    for (int t = 0; t < head.out_dim; ++t)
        raw[t] = kern::dot(head.weight.data() + static_cast<std::size_t>(t) * cols,
                           phi.data.data(), cols) +
                 head.bias[t];
    return make_descriptor(std::move(raw));
}

Descriptor describe_fc_split(const FcHead& head, const FeatureTensor& phi) {
    check_fc_shapes(head, phi);
    const int n2 = phi.positions();
    const int d = phi.d;
    const std::size_t cols = static_cast<std::size_t>(n2) * d;
    std::vector<double> raw(static_cast<std::size_t>(head.out_dim), 0.0);
    for (int p = 0; p < n2; ++p) {
        const double* block_col = head.weight.data() + static_cast<std::size_t>(p) * d;
        const double* v = phi.at(p);
        for (int t = 0; t < head.out_dim; ++t)
            raw[t] += kern::dot(block_col + static_cast<std::size_t>(t) * cols, v, d);
    }
    for (int t = 0; t < head.out_dim; ++t) {
        const double split_bias = head.bias[t] / n2;
        raw[t] += n2 * split_bias;
    }
    return make_descriptor(std::move(raw));
}

Descriptor describe_spatial_naive(const DescriptorHead& head, const SpatialContext& ctx,
                                  const FeatureTensor& phi, const FeatureTensor* phi_tilde) {
    const auto in = check_spatial_shapes(head, ctx, phi, phi_tilde);
    const int n2 = phi.positions();
    std::vector<double> raw(static_cast<std::size_t>(head.out_dim), 0.0);
    std::vector<double> enc(static_cast<std::size_t>(head.enc_dim));

    for (int p = 0; p < n2; ++p) {
        // Materialize the full Kronecker encoding of this position.
        const double* row = in.first->row(p);
        const double* v = in.phi->at(p);
        for (int c = 0; c < in.d; ++c)
            for (int k = 0; k < in.e; ++k)
                enc[static_cast<std::size_t>(c) * in.e + k] = v[c] * row[k];
        if (in.second) {
            const std::size_t half = static_cast<std::size_t>(in.d) * in.e;
            const double* row2 = in.second->row(p);
            const double* v2 = in.phi_second->at(p);
            for (int c = 0; c < in.d; ++c)
                for (int k = 0; k < in.e; ++k)
                    enc[half + static_cast<std::size_t>(c) * in.e + k] = v2[c] * row2[k];
        }
        for (int t = 0; t < head.out_dim; ++t)
            raw[t] += kern::dot(head.projection.data() + static_cast<std::size_t>(t) * head.enc_dim,
                                enc.data(), enc.size());
    }
    for (int t = 0; t < head.out_dim; ++t)
        raw[t] += static_cast<double>(n2) * head.offset[t];
    return make_descriptor(std::move(raw));
}

Descriptor describe_spatial_efficient(const DescriptorHead& head, const SpatialContext& ctx,
                                      const FeatureTensor& phi, const FeatureTensor* phi_tilde) {
    const auto in = check_spatial_shapes(head, ctx, phi, phi_tilde);
    const int n2 = phi.positions();

    // vec(Phi^T F), laid out channel-major so it coincides with the
    // concatenated per-position Kronecker encodings.
    std::vector<double> acc(static_cast<std::size_t>(head.enc_dim), 0.0);
    for (int p = 0; p < n2; ++p)
        kern::outer_acc(1.0, in.phi->at(p), in.d, in.first->row(p), in.e, acc.data());
    if (in.second) {
        double* half = acc.data() + static_cast<std::size_t>(in.d) * in.e;
        for (int p = 0; p < n2; ++p)
            kern::outer_acc(1.0, in.phi_second->at(p), in.d, in.second->row(p), in.e, half);
    }

    std::vector<double> raw(static_cast<std::size_t>(head.out_dim));
    kern::gemv(head.projection.data(), head.out_dim, head.enc_dim, acc.data(), raw.data());
    for (int t = 0; t < head.out_dim; ++t)
        raw[t] += static_cast<double>(n2) * head.offset[t];
    return make_descriptor(std::move(raw));
}

double memory_reduction_factor(int n, int d, int s) {
    const double e = static_cast<double>((2 * s + 1) * (2 * s + 1));
    const double n2 = static_cast<double>(n) * n;
    return (n2 * d * e) / (n2 * (d + e));
}

Descriptor describe_sum(const FeatureTensor& phi) {
    std::vector<double> raw(static_cast<std::size_t>(phi.d), 0.0);
    for (int p = 0; p < phi.positions(); ++p)
        kern::axpy(1.0, phi.at(p), raw.data(), phi.d);
    return make_descriptor(std::move(raw));
}

Descriptor describe_cat(const FeatureTensor& phi) {
    return make_descriptor(phi.data);
}

namespace {

// Per-position encoded vectors h_p = M g_p + m (spatial) or W_p phi^p + w/n^2
// (fc); the additive constant is attributed per position so the pairwise map
// sums exactly to the raw inner product.
std::vector<double> fc_encoded(const FcHead& head, const FeatureTensor& phi) {
    const int n2 = phi.positions();
    const int d = phi.d;
    const std::size_t cols = static_cast<std::size_t>(n2) * d;
    std::vector<double> enc(static_cast<std::size_t>(n2) * head.out_dim);
    for (int p = 0; p < n2; ++p) {
        const double* block_col = head.weight.data() + static_cast<std::size_t>(p) * d;
        const double* v = phi.at(p);
        double* h = enc.data() + static_cast<std::size_t>(p) * head.out_dim;
        for (int t = 0; t < head.out_dim; ++t)
            h[t] = kern::dot(block_col + static_cast<std::size_t>(t) * cols, v, d) +
                   head.bias[t] / n2;
    }
    return enc;
}

std::vector<double> spatial_encoded(const DescriptorHead& head, const SpatialInputs& in,
                                    int n2) {
    std::vector<double> enc(static_cast<std::size_t>(n2) * head.out_dim);
    std::vector<double> g(static_cast<std::size_t>(head.enc_dim));
    for (int p = 0; p < n2; ++p) {
        const double* row = in.first->row(p);
        const double* v = in.phi->at(p);
        for (int c = 0; c < in.d; ++c)
            for (int k = 0; k < in.e; ++k)
                g[static_cast<std::size_t>(c) * in.e + k] = v[c] * row[k];
        if (in.second) {
            const std::size_t half = static_cast<std::size_t>(in.d) * in.e;
            const double* row2 = in.second->row(p);
            const double* v2 = in.phi_second->at(p);
            for (int c = 0; c < in.d; ++c)
                for (int k = 0; k < in.e; ++k)
                    g[half + static_cast<std::size_t>(c) * in.e + k] = v2[c] * row2[k];
        }
        double* h = enc.data() + static_cast<std::size_t>(p) * head.out_dim;
        kern::gemv(head.projection.data(), head.out_dim, head.enc_dim, g.data(), h);
        for (int t = 0; t < head.out_dim; ++t)
            h[t] += head.offset[t];
    }
    return enc;
}

MatchKernelResult pairwise_map(const std::vector<double>& enc_a, const std::vector<double>& enc_b,
                               int n2, int dim) {
    MatchKernelResult result;
    result.n2 = n2;
    result.map.resize(static_cast<std::size_t>(n2) * n2);
    double total = 0.0;
    for (int p = 0; p < n2; ++p) {
        const double* ha = enc_a.data() + static_cast<std::size_t>(p) * dim;
        for (int q = 0; q < n2; ++q) {
            const double* hb = enc_b.data() + static_cast<std::size_t>(q) * dim;
            const double sim = kern::dot(ha, hb, dim);
            result.map[static_cast<std::size_t>(p) * n2 + q] = sim;
            total += sim;
        }
    }
    result.total = total;
    return result;
}

} // namespace

MatchKernelResult match_kernel_similarity(const FcHead& head, const FeatureTensor& phi_a,
                                          const FeatureTensor& phi_b) {
    check_fc_shapes(head, phi_a);
    check_fc_shapes(head, phi_b);
    const int n2 = phi_a.positions();
    return pairwise_map(fc_encoded(head, phi_a), fc_encoded(head, phi_b), n2, head.out_dim);
}

MatchKernelResult match_kernel_similarity(const DescriptorHead& head, const SpatialContext& ctx,
                                          const FeatureTensor& phi_a, const FeatureTensor& phi_b,
                                          const FeatureTensor* phi_a_tilde,
                                          const FeatureTensor* phi_b_tilde) {
    const auto in_a = check_spatial_shapes(head, ctx, phi_a, phi_a_tilde);
    const auto in_b = check_spatial_shapes(head, ctx, phi_b, phi_b_tilde);
    if (phi_a.d != phi_b.d)
        throw std::invalid_argument("tensors must share channel count");
    const int n2 = phi_a.positions();
    return pairwise_map(spatial_encoded(head, in_a, n2), spatial_encoded(head, in_b, n2),
                        n2, head.out_dim);
}

std::vector<double> heatmap_from_map(const MatchKernelResult& result, const GridGeometry& geom,
                                     GridPos p) {
    if (result.n2 != geom.n * geom.n)
        throw std::invalid_argument("heatmap: map size disagrees with grid");
    const int flat = flat_index(geom, p);
    const double* row = result.map.data() + static_cast<std::size_t>(flat) * result.n2;

    double lo = row[0];
    double hi = row[0];
    for (int q = 1; q < result.n2; ++q) {
        lo = std::min(lo, row[q]);
        hi = std::max(hi, row[q]);
    }
    std::vector<double> out(static_cast<std::size_t>(result.n2), 0.0);
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (int q = 0; q < result.n2; ++q)
            out[q] = (row[q] - lo) * inv;
    }
    return out;
}

std::vector<double> similarity_heatmap(const FcHead& head, const FeatureTensor& phi_a,
                                       const FeatureTensor& phi_b, GridPos p) {
    const auto result = match_kernel_similarity(head, phi_a, phi_b);
    return heatmap_from_map(result, grid_geometry(phi_a.n), p);
}

std::vector<double> similarity_heatmap(const DescriptorHead& head, const SpatialContext& ctx,
                                       const FeatureTensor& phi_a, const FeatureTensor& phi_b,
                                       GridPos p, const FeatureTensor* phi_a_tilde,
                                       const FeatureTensor* phi_b_tilde) {
    const auto result =
        match_kernel_similarity(head, ctx, phi_a, phi_b, phi_a_tilde, phi_b_tilde);
    return heatmap_from_map(result, ctx.geom, p);
}

std::vector<ConvLayerShape> reference_conv_shapes() {
    return {{1, 32}, {32, 32}, {32, 64}, {64, 64}, {64, 128}, {128, 128}};
}

long long conv_parameters(const std::vector<ConvLayerShape>& shapes) {
    long long total = 0;
    for (const auto& shape : shapes)
        total += static_cast<long long>(shape.in) * shape.out * 9;
    return total;
}

long long fc_head_parameters(int out_dim, int n, int d, bool bias) {
    long long count = static_cast<long long>(out_dim) * n * n * d;
    if (bias)
        count += out_dim;
    return count;
}

long long spatial_head_parameters(Variant v, int out_dim, int d, int s) {
    return static_cast<long long>(out_dim) * encoding_dim(v, d, s) + out_dim;
}

std::vector<ModelParameterRow> parameter_table() {
    const long long conv = conv_parameters(reference_conv_shapes());
    const int d = 128;
    const int out = 128;

    std::vector<ModelParameterRow> rows;
    auto add = [&rows](std::string model, long long c, long long ct, long long head) {
        rows.push_back({std::move(model), c, ct, head, c + ct + head});
    };

    add("hardnet_n32", conv, 0, fc_head_parameters(out, 8, d, false));
    add("hardnet_n64", conv, 0, fc_head_parameters(out, 16, d, false));
    for (int s : {1, 2}) {
        add("xy_s" + std::to_string(s), conv, 0, spatial_head_parameters(Variant::xy, out, d, s));
        add("rhotheta_s" + std::to_string(s), conv, 0,
            spatial_head_parameters(Variant::rhotheta, out, d, s));
    }
    for (int s : {1, 2})
        add("combined_s" + std::to_string(s), conv, 0,
            spatial_head_parameters(Variant::combined, out, d, s));
    for (int s : {1, 2})
        add("combined_separate_s" + std::to_string(s), conv, conv,
            spatial_head_parameters(Variant::combined, out, d, s));
    return rows;
}

} // namespace emk
