#include "emk/model.hpp"

#include "emk/binary_io.hpp"
#include "emk/error.hpp"
#include "emk/featuremap.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace emk {

using nlohmann::json;

const char* describe_variant_name(DescribeVariant v) {
    switch (v) {
    case DescribeVariant::xy: return "xy";
    case DescribeVariant::rhotheta: return "rhotheta";
    case DescribeVariant::combined: return "combined";
    case DescribeVariant::sum: return "sum";
    case DescribeVariant::cat: return "cat";
    }
    return "unknown";
}

DescribeVariant describe_variant_from_name(const std::string& name) {
    if (name == "xy") return DescribeVariant::xy;
    if (name == "rhotheta") return DescribeVariant::rhotheta;
    if (name == "combined") return DescribeVariant::combined;
    if (name == "sum") return DescribeVariant::sum;
    if (name == "cat") return DescribeVariant::cat;
    throw std::invalid_argument("unknown describe variant: " + name);
}

bool is_spatial(DescribeVariant v) {
    return v == DescribeVariant::xy || v == DescribeVariant::rhotheta ||
           v == DescribeVariant::combined;
}

Variant head_variant(DescribeVariant v) {
    switch (v) {
    case DescribeVariant::xy: return Variant::xy;
    case DescribeVariant::rhotheta: return Variant::rhotheta;
    case DescribeVariant::combined: return Variant::combined;
    default:
        throw std::invalid_argument("variant has no whitening head");
    }
}

namespace {

constexpr char kModelMagic[4] = {'E', 'M', 'K', 'M'};
constexpr int kFormatVersion = 1;

struct BlobEntry {
    std::string name;
    std::string dtype; // "f32" or "f64"
    std::uint64_t count = 0;
    std::uint64_t offset = 0;
};

class BlobWriter {
public:
    void add_f32(const std::string& name, const std::vector<double>& values) {
        entries_.push_back({name, "f32", values.size(), cursor_});
        io::put_f32_array(buffer_, values);
        cursor_ += values.size() * 4;
    }

    void add_f64(const std::string& name, const std::vector<double>& values) {
        entries_.push_back({name, "f64", values.size(), cursor_});
        io::put_f64_array(buffer_, values);
        cursor_ += values.size() * 8;
    }

    json manifest_entries() const {
        json arr = json::array();
        for (const auto& e : entries_)
            arr.push_back({{"name", e.name},
                           {"dtype", e.dtype},
                           {"count", e.count},
                           {"offset", e.offset}});
        return arr;
    }

    std::string bytes() const { return buffer_.str(); }

private:
    std::ostringstream buffer_;
    std::uint64_t cursor_ = 0;
    std::vector<BlobEntry> entries_;
};

class BlobReader {
public:
    BlobReader(std::istream& in, std::streampos blob_start, const json& entries)
        : in_(in), blob_start_(blob_start) {
        for (const auto& e : entries) {
            BlobEntry entry;
            entry.name = e.at("name").get<std::string>();
            entry.dtype = e.at("dtype").get<std::string>();
            entry.count = e.at("count").get<std::uint64_t>();
            entry.offset = e.at("offset").get<std::uint64_t>();
            entries_[entry.name] = entry;
        }
    }

    std::vector<double> read(const std::string& name, const std::string& dtype,
                             std::uint64_t expected_count) {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw format_error("model file is missing blob: " + name);
        const BlobEntry& entry = it->second;
        if (entry.dtype != dtype)
            throw format_error("model blob has wrong dtype: " + name);
        if (entry.count != expected_count)
            throw format_error("model blob has wrong element count: " + name);
        in_.seekg(blob_start_ + static_cast<std::streamoff>(entry.offset));
        if (!in_)
            throw format_error("model blob offset out of range: " + name);
        return dtype == "f32" ? io::get_f32_array(in_, entry.count)
                              : io::get_f64_array(in_, entry.count);
    }

private:
    std::istream& in_;
    std::streampos blob_start_;
    std::map<std::string, BlobEntry> entries_;
};

json conv_to_json(const std::vector<ConvLayerSpec>& specs) {
    json arr = json::array();
    for (const auto& s : specs)
        arr.push_back({{"in", s.in_channels}, {"out", s.out_channels}, {"stride", s.stride}});
    return arr;
}

std::vector<ConvLayerSpec> conv_from_json(const json& arr) {
    std::vector<ConvLayerSpec> specs;
    for (const auto& e : arr)
        specs.push_back({e.at("in").get<int>(), e.at("out").get<int>(), e.at("stride").get<int>()});
    return specs;
}

void add_net_blobs(BlobWriter& writer, const std::string& prefix, const ConvNet& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        const std::string base = prefix + "." + std::to_string(l) + ".";
        writer.add_f32(base + "weight", layer.weight);
        writer.add_f32(base + "bn_mean", layer.bn_mean);
        writer.add_f32(base + "bn_var", layer.bn_var);
        writer.add_f32(base + "bn_scale", layer.bn_scale);
        writer.add_f32(base + "bn_shift", layer.bn_shift);
    }
}

ConvNet read_net_blobs(BlobReader& reader, const std::string& prefix,
                       const std::vector<ConvLayerSpec>& specs, double bn_epsilon) {
    ConvNet net;
    net.bn_epsilon = bn_epsilon;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        ConvLayer layer = make_conv_layer(specs[l]);
        const std::string base = prefix + "." + std::to_string(l) + ".";
        const auto out = static_cast<std::uint64_t>(specs[l].out_channels);
        layer.weight = reader.read(base + "weight", "f32",
                                   out * static_cast<std::uint64_t>(specs[l].in_channels) * 9);
        layer.bn_mean = reader.read(base + "bn_mean", "f32", out);
        layer.bn_var = reader.read(base + "bn_var", "f32", out);
        layer.bn_scale = reader.read(base + "bn_scale", "f32", out);
        layer.bn_shift = reader.read(base + "bn_shift", "f32", out);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct FmapChannels {
    FeatureMapSpec x, y, rho, theta;
};

FmapChannels build_fmaps(const ModelConfig& config) {
    FmapChannels f;
    f.x = build_feature_map_spec(config.kappa_x, config.s);
    f.y = build_feature_map_spec(config.kappa_y, config.s);
    f.rho = build_feature_map_spec(config.kappa_rho, config.s);
    f.theta = build_feature_map_spec(config.kappa_theta, config.s);
    return f;
}

} // namespace

SpatialConfig spatial_config_of(const ModelConfig& config) {
    if (!is_spatial(config.variant))
        throw std::invalid_argument("variant has no spatial context");
    SpatialConfig sc;
    sc.variant = head_variant(config.variant);
    sc.n = config.n;
    sc.s = config.s;
    sc.weighted = config.weighted;
    sc.kappa_x = config.kappa_x;
    sc.kappa_y = config.kappa_y;
    sc.kappa_rho = config.kappa_rho;
    sc.kappa_theta = config.kappa_theta;
    return sc;
}

void write_model_file(const std::filesystem::path& path, const Model& model) {
    const ModelConfig& config = model.config;

    BlobWriter blobs;
    if (!model.net.layers.empty())
        add_net_blobs(blobs, "conv", model.net);
    if (!model.net_tilde.layers.empty())
        add_net_blobs(blobs, "conv_tilde", model.net_tilde);
    if (is_spatial(config.variant)) {
        blobs.add_f32("head.projection", model.head.projection);
        blobs.add_f32("head.offset", model.head.offset);
        const auto fmaps = build_fmaps(config);
        blobs.add_f64("fmap.x.u", fmaps.x.u);
        blobs.add_f64("fmap.y.u", fmaps.y.u);
        blobs.add_f64("fmap.rho.u", fmaps.rho.u);
        blobs.add_f64("fmap.theta.u", fmaps.theta.u);
    }

    json manifest{
        {"format_version", kFormatVersion},
        {"variant", describe_variant_name(config.variant)},
        {"n", config.n},
        {"d", config.d},
        {"D", config.out_dim},
        {"s", config.s},
        {"kappa",
         {{"x", config.kappa_x},
          {"y", config.kappa_y},
          {"rho", config.kappa_rho},
          {"theta", config.kappa_theta}}},
        {"weighted", config.weighted},
        {"separate_fcn", config.separate_fcn},
        {"pixel_standardization", config.pixel_standardization},
        {"bn_epsilon", config.bn_epsilon},
        {"conv", conv_to_json(config.conv)},
        {"blobs", blobs.manifest_entries()},
    };
    if (config.separate_fcn)
        manifest["conv_tilde"] = conv_to_json(config.conv_tilde);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw format_error("cannot create model file: " + path.string());
    io::put_magic(out, kModelMagic);
    const std::string manifest_text = manifest.dump();
    io::put_u32(out, static_cast<std::uint32_t>(manifest_text.size()));
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    const std::string blob_bytes = blobs.bytes();
    out.write(blob_bytes.data(), static_cast<std::streamsize>(blob_bytes.size()));
    if (!out)
        throw format_error("failed to write model file: " + path.string());
}

Model read_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw format_error("cannot open model file: " + path.string());
    io::expect_magic(in, kModelMagic, "model file");
    const std::uint32_t manifest_len = io::get_u32(in);
    std::string manifest_text(manifest_len, '\0');
    in.read(manifest_text.data(), manifest_len);
    if (!in)
        throw format_error("truncated model manifest: " + path.string());
    const std::streampos blob_start = in.tellg();

    json manifest;
    try {
        manifest = json::parse(manifest_text);
    } catch (const json::exception& e) {
        throw format_error(std::string("model manifest is not valid JSON: ") + e.what());
    }

    Model model;
    try {
        if (manifest.at("format_version").get<int>() != kFormatVersion)
            throw format_error("unsupported model format version");
        ModelConfig& config = model.config;
        config.variant = describe_variant_from_name(manifest.at("variant").get<std::string>());
        config.n = manifest.at("n").get<int>();
        config.d = manifest.at("d").get<int>();
        config.out_dim = manifest.at("D").get<int>();
        config.s = manifest.at("s").get<int>();
        const auto& kappa = manifest.at("kappa");
        config.kappa_x = kappa.at("x").get<double>();
        config.kappa_y = kappa.at("y").get<double>();
        config.kappa_rho = kappa.at("rho").get<double>();
        config.kappa_theta = kappa.at("theta").get<double>();
        config.weighted = manifest.at("weighted").get<bool>();
        config.separate_fcn = manifest.at("separate_fcn").get<bool>();
        config.pixel_standardization = manifest.at("pixel_standardization").get<bool>();
        config.bn_epsilon = manifest.at("bn_epsilon").get<double>();
        config.conv = conv_from_json(manifest.at("conv"));
        if (config.separate_fcn)
            config.conv_tilde = conv_from_json(manifest.at("conv_tilde"));

        if (config.pixel_standardization)
            throw format_error("per-patch pixel standardization is not supported");
        if (config.n < 1 || config.d < 1 || config.out_dim < 1)
            throw format_error("model manifest has invalid dimensions");

        BlobReader reader(in, blob_start, manifest.at("blobs"));
        if (!config.conv.empty())
            model.net = read_net_blobs(reader, "conv", config.conv, config.bn_epsilon);
        if (!config.conv_tilde.empty())
            model.net_tilde =
                read_net_blobs(reader, "conv_tilde", config.conv_tilde, config.bn_epsilon);

        if (is_spatial(config.variant)) {
            if (config.s < 1)
                throw format_error("spatial model requires s >= 1");
            model.head = make_descriptor_head(head_variant(config.variant), config.out_dim,
                                              config.d, config.s);
            model.head.projection =
                reader.read("head.projection", "f32",
                            static_cast<std::uint64_t>(model.head.out_dim) * model.head.enc_dim);
            model.head.offset =
                reader.read("head.offset", "f32", static_cast<std::uint64_t>(model.head.out_dim));

            // The stored Fourier coefficients must match what the manifest
            // parameters regenerate; the position tables are always rebuilt,
            // never deserialized.
            const auto fmaps = build_fmaps(config);
            const struct {
                const char* name;
                const std::vector<double>* u;
            } channels[] = {{"fmap.x.u", &fmaps.x.u},
                            {"fmap.y.u", &fmaps.y.u},
                            {"fmap.rho.u", &fmaps.rho.u},
                            {"fmap.theta.u", &fmaps.theta.u}};
            for (const auto& ch : channels) {
                const auto stored = reader.read(ch.name, "f64", ch.u->size());
                for (std::size_t i = 0; i < stored.size(); ++i)
                    if (stored[i] != (*ch.u)[i])
                        throw format_error(std::string("stored Fourier coefficients disagree "
                                                       "with manifest parameters: ") +
                                           ch.name);
            }
        }

        if (!config.conv.empty()) {
            if (model.net.output_channels() != config.d)
                throw format_error("conv architecture does not produce d channels");
        }
        if (config.separate_fcn && !config.conv_tilde.empty()) {
            if (model.net_tilde.output_channels() != config.d)
                throw format_error("second conv architecture does not produce d channels");
        }
    } catch (const json::exception& e) {
        throw format_error(std::string("model manifest is malformed: ") + e.what());
    }
    return model;
}

Model make_random_model(const ModelConfig& config, std::uint64_t seed) {
    Model model;
    model.config = config;

    std::uint64_t stream = seed;
    auto init_net = [&stream, &config](const std::vector<ConvLayerSpec>& specs) {
        ConvNet net;
        net.bn_epsilon = config.bn_epsilon;
        for (const auto& spec : specs) {
            ConvLayer layer = make_conv_layer(spec);
            layer.weight = random_orthogonal(spec.out_channels, spec.in_channels * 9, ++stream);
            net.layers.push_back(std::move(layer));
        }
        return net;
    };

    if (!config.conv.empty())
        model.net = init_net(config.conv);
    if (config.separate_fcn && !config.conv_tilde.empty())
        model.net_tilde = init_net(config.conv_tilde);

    if (is_spatial(config.variant)) {
        model.head = make_descriptor_head(head_variant(config.variant), config.out_dim, config.d,
                                          config.s);
        model.head.projection =
            random_orthogonal(model.head.out_dim, model.head.enc_dim, ++stream);
    }
    return model;
}

int model_output_dim(const Model& model) {
    switch (model.config.variant) {
    case DescribeVariant::sum:
        return model.config.d;
    case DescribeVariant::cat:
        return model.config.n * model.config.n * model.config.d;
    default:
        return model.config.out_dim;
    }
}

Descriptor model_describe(const Model& model, const SpatialContext* ctx, const FeatureTensor& phi,
                          const FeatureTensor* phi_tilde) {
    switch (model.config.variant) {
    case DescribeVariant::sum:
        return describe_sum(phi);
    case DescribeVariant::cat:
        return describe_cat(phi);
    default:
        if (ctx == nullptr)
            throw std::invalid_argument("spatial variants need a spatial context");
        return describe_spatial_efficient(model.head, *ctx, phi, phi_tilde);
    }
}

} // namespace emk
