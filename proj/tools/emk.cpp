// Command-line front end: build models, describe patches, export similarity
// heat-maps, evaluate metrics, report parameter counts, and run the built-in
// consistency checks.
//
// Exit codes: 0 success, 1 usage, 2 data/format, 3 numerical failure.

#include "emk/aggregation.hpp"
#include "emk/backend.hpp"
#include "emk/error.hpp"
#include "emk/evaluation.hpp"
#include "emk/featuremap.hpp"
#include "emk/kernels.hpp"
#include "emk/learning.hpp"
#include "emk/model.hpp"
#include "emk/tensor.hpp"
#include "emk/threading.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

json load_config(const std::string& path) {
    if (path.empty())
        return json::object();
    std::ifstream in(path);
    if (!in)
        throw emk::format_error("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw emk::format_error(std::string("config file is not valid JSON: ") + e.what());
    }
}

// Flags override config-file values: a config key fills an option only when
// the flag was not given on the command line.
template <typename T>
void config_fill(const CLI::App* cmd, const json& cfg, const std::string& flag,
                 const std::string& key, T& value) {
    if (cmd->count(flag) == 0 && cfg.contains(key))
        value = cfg.at(key).get<T>();
}

std::vector<fs::path> collect_inputs(const std::string& input, const std::string& extension) {
    std::vector<fs::path> files;
    const fs::path path(input);
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == extension)
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    }
    if (files.empty())
        throw emk::format_error("no " + extension + " inputs found at: " + input);
    return files;
}

void write_json_report(const std::string& out, const json& report) {
    if (out.empty() || out == "-") {
        std::cout << report.dump(2) << "\n";
        return;
    }
    std::ofstream file(out);
    if (!file)
        throw emk::format_error("cannot create report file: " + out);
    file << report.dump(2) << "\n";
}

std::vector<emk::ConvLayerSpec> architecture_for(int n) {
    // The reference six-layer network maps N=32 -> n=8 and N=64 -> n=16.
    if (n != 8 && n != 16)
        throw std::invalid_argument(
            "conv architecture is only defined for n = 8 or 16; use --no-conv otherwise");
    return emk::reference_architecture();
}

// --- init -------------------------------------------------------------------

struct InitOptions {
    std::string out;
    std::string config_path;
    std::string variant = "xy";
    int n = 8;
    int d = 128;
    int out_dim = 128;
    int s = 2;
    double kappa = 8.0;
    bool unweighted = false;
    bool separate_fcn = false;
    bool no_conv = false;
    std::uint64_t seed = 1;
};

int run_init(const CLI::App* cmd, InitOptions& opt) {
    const json cfg = load_config(opt.config_path);
    config_fill(cmd, cfg, "--variant", "variant", opt.variant);
    config_fill(cmd, cfg, "--n", "n", opt.n);
    config_fill(cmd, cfg, "--d", "d", opt.d);
    config_fill(cmd, cfg, "--D", "D", opt.out_dim);
    config_fill(cmd, cfg, "--s", "s", opt.s);
    config_fill(cmd, cfg, "--kappa", "kappa", opt.kappa);
    config_fill(cmd, cfg, "--seed", "seed", opt.seed);

    emk::ModelConfig config;
    config.variant = emk::describe_variant_from_name(opt.variant);
    config.n = opt.n;
    config.d = opt.d;
    config.out_dim = opt.out_dim;
    config.s = opt.s;
    config.kappa_x = config.kappa_y = config.kappa_rho = config.kappa_theta = opt.kappa;
    config.weighted = !opt.unweighted;
    config.separate_fcn = opt.separate_fcn;
    if (!opt.no_conv) {
        if (opt.d != 128)
            throw std::invalid_argument("the reference conv architecture produces d = 128; "
                                        "use --no-conv for other channel counts");
        config.conv = architecture_for(opt.n);
        if (opt.separate_fcn)
            config.conv_tilde = config.conv;
    } else if (opt.separate_fcn) {
        config.conv_tilde.clear();
    }
    if (config.separate_fcn && config.variant != emk::DescribeVariant::combined)
        throw std::invalid_argument("--separate-fcn applies to the combined variant only");

    const emk::Model model = emk::make_random_model(config, opt.seed);
    emk::write_model_file(opt.out, model);
    std::cout << "wrote model: " << opt.out << "\n";
    return 0;
}

// --- describe ---------------------------------------------------------------

struct DescribeOptions {
    std::string model;
    std::string input;
    std::string tilde_input;
    std::string out;
    std::string config_path;
    bool tensors = false;
    bool raw = false;
    int grid_n = 0; // 0: use the model's declared n
};

int run_describe(const CLI::App* cmd, DescribeOptions& opt) {
    const json cfg = load_config(opt.config_path);
    config_fill(cmd, cfg, "--model", "model", opt.model);
    config_fill(cmd, cfg, "--input", "input", opt.input);
    config_fill(cmd, cfg, "--out", "out", opt.out);
    config_fill(cmd, cfg, "--tensors", "tensors", opt.tensors);
    config_fill(cmd, cfg, "--raw", "raw", opt.raw);
    config_fill(cmd, cfg, "--grid-n", "grid_n", opt.grid_n);

    emk::Model model = emk::read_model_file(opt.model);
    const int grid_n = opt.grid_n > 0 ? opt.grid_n : model.config.n;

    std::optional<emk::SpatialContext> ctx;
    if (emk::is_spatial(model.config.variant)) {
        auto sc = emk::spatial_config_of(model.config);
        sc.n = grid_n;
        ctx = emk::make_spatial_context(sc);
    }

    const bool wants_tilde = model.config.variant == emk::DescribeVariant::combined &&
                             model.config.separate_fcn;
    if (!opt.tensors && !model.has_conv())
        throw std::invalid_argument("model has no conv part; describe requires --tensors");
    if (opt.tensors && wants_tilde && opt.tilde_input.empty())
        throw std::invalid_argument(
            "separate-FCN model with tensor input needs --tilde-input");

    const auto files = collect_inputs(opt.input, opt.tensors ? ".emkt" : ".pgm");
    std::vector<std::vector<double>> descriptors(files.size());
    emk::parallel_for(files.size(), [&](std::size_t i) {
        emk::FeatureTensor phi;
        emk::FeatureTensor phi_tilde;
        const emk::FeatureTensor* tilde_ptr = nullptr;
        if (opt.tensors) {
            phi = emk::read_tensor_file(files[i]);
            if (wants_tilde) {
                phi_tilde = emk::read_tensor_file(fs::path(opt.tilde_input) /
                                                  files[i].filename());
                tilde_ptr = &phi_tilde;
            }
        } else {
            const emk::Patch patch = emk::read_pgm(files[i]);
            if (emk::net_output_size(model.net, patch.n) != grid_n)
                throw std::invalid_argument("patch " + files[i].string() +
                                            " does not map to the configured grid side");
            phi = emk::forward(model.net, patch);
            if (wants_tilde) {
                phi_tilde = emk::forward(model.net_tilde, patch);
                tilde_ptr = &phi_tilde;
            }
        }
        if (phi.n != grid_n || phi.d != model.config.d)
            throw std::invalid_argument("tensor shape disagrees with the model configuration");
        const emk::Descriptor desc =
            emk::model_describe(model, ctx ? &*ctx : nullptr, phi, tilde_ptr);
        descriptors[i] = opt.raw ? desc.raw : desc.normalized;
    });

    emk::write_descriptor_file(opt.out, descriptors);
    std::cout << "wrote " << descriptors.size() << " descriptors (D="
              << descriptors.front().size() << ") to " << opt.out << "\n";
    return 0;
}

// --- simmap -----------------------------------------------------------------

struct SimmapOptions {
    std::string model;
    std::string patch_a;
    std::string patch_b;
    std::string out;
    std::string config_path;
    int pos_i = 0;
    int pos_j = 0;
};

emk::FeatureTensor load_patch_or_tensor(const emk::Model& model, const std::string& path,
                                        bool tilde) {
    if (fs::path(path).extension() == ".emkt")
        return emk::read_tensor_file(path);
    if (!model.has_conv())
        throw std::invalid_argument("model has no conv part; simmap requires .emkt inputs");
    const emk::Patch patch = emk::read_pgm(path);
    return emk::forward(tilde ? model.net_tilde : model.net, patch);
}

int run_simmap(const CLI::App* cmd, SimmapOptions& opt) {
    const json cfg = load_config(opt.config_path);
    config_fill(cmd, cfg, "--model", "model", opt.model);
    config_fill(cmd, cfg, "--out", "out", opt.out);

    emk::Model model = emk::read_model_file(opt.model);
    if (!emk::is_spatial(model.config.variant))
        throw std::invalid_argument("simmap requires a spatial model variant");
    const auto ctx = emk::make_spatial_context(emk::spatial_config_of(model.config));

    const bool wants_tilde = model.config.variant == emk::DescribeVariant::combined &&
                             model.config.separate_fcn;
    const emk::FeatureTensor phi_a = load_patch_or_tensor(model, opt.patch_a, false);
    const emk::FeatureTensor phi_b = load_patch_or_tensor(model, opt.patch_b, false);
    emk::FeatureTensor tilde_a;
    emk::FeatureTensor tilde_b;
    const emk::FeatureTensor* tilde_a_ptr = nullptr;
    const emk::FeatureTensor* tilde_b_ptr = nullptr;
    if (wants_tilde) {
        tilde_a = load_patch_or_tensor(model, opt.patch_a, true);
        tilde_b = load_patch_or_tensor(model, opt.patch_b, true);
        tilde_a_ptr = &tilde_a;
        tilde_b_ptr = &tilde_b;
    }

    const emk::GridPos p{opt.pos_i, opt.pos_j};
    const auto map = emk::similarity_heatmap(model.head, ctx, phi_a, phi_b, p, tilde_a_ptr,
                                             tilde_b_ptr);

    const int n = phi_a.n;
    emk::write_pgm(opt.out + ".pgm", map, n, n);
    std::ofstream csv(opt.out + ".csv");
    if (!csv)
        throw emk::format_error("cannot create heat-map CSV: " + opt.out + ".csv");
    csv.precision(17);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            csv << map[static_cast<std::size_t>(i) * n + j] << (j + 1 < n ? "," : "");
        csv << "\n";
    }
    std::cout << "wrote " << opt.out << ".pgm and " << opt.out << ".csv\n";
    return 0;
}

// --- params -----------------------------------------------------------------

json params_report_json() {
    json layers = json::array();
    const auto shapes = emk::reference_conv_shapes();
    for (std::size_t i = 0; i < shapes.size(); ++i)
        layers.push_back({{"layer", i + 1},
                          {"shape", {shapes[i].in, shapes[i].out, 3, 3}},
                          {"parameters", static_cast<long long>(shapes[i].in) * shapes[i].out * 9}});
    json models = json::array();
    for (const auto& row : emk::parameter_table()) {
        json entry{{"model", row.model},
                   {"conv", row.conv},
                   {"head", row.head},
                   {"total", row.total}};
        if (row.conv_tilde > 0)
            entry["conv_tilde"] = row.conv_tilde;
        models.push_back(entry);
    }
    return json{{"conv_layers", layers},
                {"conv_total", emk::conv_parameters(shapes)},
                {"models", models}};
}

int run_params(bool as_json, const std::string& out) {
    const json report = params_report_json();
    if (as_json) {
        write_json_report(out, report);
        return 0;
    }
    std::ostringstream text;
    for (const auto& layer : report.at("conv_layers"))
        text << "conv layer " << layer.at("layer").get<int>() << " ["
             << layer.at("shape")[0].get<int>() << "," << layer.at("shape")[1].get<int>()
             << ",3,3]: " << layer.at("parameters").get<long long>() << "\n";
    text << "conv total: " << report.at("conv_total").get<long long>() << "\n";
    for (const auto& model : report.at("models")) {
        text << "model " << model.at("model").get<std::string>()
             << ": conv=" << model.at("conv").get<long long>();
        if (model.contains("conv_tilde"))
            text << " conv_tilde=" << model.at("conv_tilde").get<long long>();
        text << " head=" << model.at("head").get<long long>()
             << " total=" << model.at("total").get<long long>() << "\n";
    }
    if (out.empty() || out == "-") {
        std::cout << text.str();
    } else {
        std::ofstream file(out);
        if (!file)
            throw emk::format_error("cannot create report file: " + out);
        file << text.str();
    }
    return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalOptions {
    std::string task;
    std::string desc;
    std::string desc_b;
    std::string labels;
    std::string out;
    std::string config_path;
};

int run_eval(const CLI::App* cmd, EvalOptions& opt) {
    const json cfg = load_config(opt.config_path);
    config_fill(cmd, cfg, "--task", "task", opt.task);
    config_fill(cmd, cfg, "--desc", "desc", opt.desc);
    config_fill(cmd, cfg, "--desc-b", "desc_b", opt.desc_b);
    config_fill(cmd, cfg, "--labels", "labels", opt.labels);
    config_fill(cmd, cfg, "--out", "out", opt.out);

    json report;
    if (opt.task == "verification") {
        const auto descriptors = emk::read_descriptor_file(opt.desc);
        const auto pairs = emk::read_pairs_csv(opt.labels);
        const auto r = emk::evaluate_verification(descriptors, pairs);
        report = {{"task", "verification"}, {"ap", r.ap},           {"fpr_at_95", r.fpr_at_95},
                  {"pairs", r.pairs},       {"positives", r.positives}, {"negatives", r.negatives}};
    } else if (opt.task == "retrieval") {
        const auto queries = emk::read_descriptor_file(opt.desc);
        const auto pool = emk::read_descriptor_file(opt.desc_b);
        const auto labels = emk::read_relevance_csv(opt.labels);
        const auto r = emk::evaluate_retrieval(queries, pool, labels);
        report = {{"task", "retrieval"}, {"map", r.mean_ap}, {"queries", r.queries}};
    } else if (opt.task == "matching") {
        const auto left = emk::read_descriptor_file(opt.desc);
        const auto right = emk::read_descriptor_file(opt.desc_b);
        const auto gt = emk::read_correspondence_csv(opt.labels);
        const auto r = emk::evaluate_matching(left, right, gt);
        report = {{"task", "matching"}, {"map", r.mean_ap}, {"queries", r.queries}};
    } else {
        throw std::invalid_argument("unknown eval task: " + opt.task);
    }
    write_json_report(opt.out, report);
    return 0;
}

// --- selftest ---------------------------------------------------------------

struct Check {
    const char* name;
    bool (*fn)();
};

bool check_embed_unit_norm() {
    const auto spec = emk::build_feature_map_spec(8.0, 2);
    emk::NormalSampler rng(11);
    for (int t = 0; t < 200; ++t) {
        const double alpha = 4.0 * rng.next();
        const auto f = emk::embed(spec, alpha);
        const double norm_sq = emk::kern::sum_sq(f.data(), f.size());
        if (std::abs(norm_sq - 1.0) > 1e-12)
            return false;
    }
    return true;
}

bool check_kernel_inner_product() {
    const auto spec = emk::build_feature_map_spec(8.0, 2);
    emk::NormalSampler rng(12);
    for (int t = 0; t < 200; ++t) {
        const double a = 4.0 * rng.next();
        const double b = 4.0 * rng.next();
        const auto fa = emk::embed(spec, a);
        const auto fb = emk::embed(spec, b);
        const double via_embed = emk::kern::dot(fa.data(), fb.data(), fa.size());
        if (std::abs(via_embed - emk::kernel_value(spec, a - b)) > 1e-12)
            return false;
    }
    return true;
}

emk::FeatureTensor random_tensor(int n, int d, emk::NormalSampler& rng) {
    auto t = emk::make_feature_tensor(n, d);
    for (auto& v : t.data)
        v = rng.next();
    return t;
}

bool check_fc_equivalence() {
    emk::NormalSampler rng(13);
    auto head = emk::make_fc_head(5, 3, 2);
    for (auto& v : head.weight)
        v = rng.next();
    for (auto& v : head.bias)
        v = rng.next();
    const auto phi = random_tensor(3, 2, rng);
    const auto a = emk::describe_fc(head, phi);
    const auto b = emk::describe_fc_split(head, phi);
    for (int i = 0; i < a.dim(); ++i)
        if (std::abs(a.raw[i] - b.raw[i]) > 1e-12)
            return false;
    return true;
}

bool check_efficient_matches_naive() {
    emk::NormalSampler rng(14);
    for (const auto variant : {emk::Variant::xy, emk::Variant::rhotheta, emk::Variant::combined}) {
        emk::SpatialConfig sc;
        sc.variant = variant;
        sc.n = 4;
        sc.s = 1;
        const auto ctx = emk::make_spatial_context(sc);
        auto head = emk::make_descriptor_head(variant, 6, 3, 1);
        for (auto& v : head.projection)
            v = rng.next();
        for (auto& v : head.offset)
            v = rng.next();
        const auto phi = random_tensor(4, 3, rng);
        const auto phi_tilde = random_tensor(4, 3, rng);
        const auto* tilde = variant == emk::Variant::combined ? &phi_tilde : nullptr;
        const auto naive = emk::describe_spatial_naive(head, ctx, phi, tilde);
        const auto efficient = emk::describe_spatial_efficient(head, ctx, phi, tilde);
        for (int i = 0; i < naive.dim(); ++i)
            if (std::abs(naive.raw[i] - efficient.raw[i]) > 1e-10)
                return false;
    }
    return true;
}

bool check_match_kernel_total() {
    emk::NormalSampler rng(15);
    emk::SpatialConfig sc;
    sc.variant = emk::Variant::xy;
    sc.n = 3;
    sc.s = 1;
    const auto ctx = emk::make_spatial_context(sc);
    auto head = emk::make_descriptor_head(emk::Variant::xy, 4, 2, 1);
    for (auto& v : head.projection)
        v = rng.next();
    for (auto& v : head.offset)
        v = rng.next();
    const auto phi_a = random_tensor(3, 2, rng);
    const auto phi_b = random_tensor(3, 2, rng);
    const auto result = emk::match_kernel_similarity(head, ctx, phi_a, phi_b);
    const auto da = emk::describe_spatial_efficient(head, ctx, phi_a);
    const auto db = emk::describe_spatial_efficient(head, ctx, phi_b);
    const double inner = emk::kern::dot(da.raw.data(), db.raw.data(), da.raw.size());
    return std::abs(result.total - inner) <= 1e-8 * std::max(1.0, std::abs(inner));
}

bool check_mining_brute_force() {
    emk::NormalSampler rng(16);
    const int batch = 16;
    const int dim = 8;
    std::vector<std::vector<double>> anchors(batch), positives(batch);
    for (int i = 0; i < batch; ++i) {
        anchors[i].resize(dim);
        positives[i].resize(dim);
        for (int k = 0; k < dim; ++k) {
            anchors[i][k] = rng.next();
            positives[i][k] = rng.next();
        }
    }
    const auto selection = emk::mine_hardest(anchors, positives);
    for (int i = 0; i < batch; ++i) {
        int best = -1;
        double best_dist = 1e300;
        for (int j = 0; j < batch; ++j) {
            if (j == i)
                continue;
            double acc = 0.0;
            for (int k = 0; k < dim; ++k) {
                const double diff = anchors[i][k] - positives[j][k];
                acc += diff * diff;
            }
            if (acc < best_dist) {
                best_dist = acc;
                best = j;
            }
        }
        if (selection.negative_index[i] != best)
            return false;
    }
    return true;
}

bool check_metric_degenerate_cases() {
    emk::LabeledPairSet pairs;
    pairs.score = {0.1, 0.2, 0.3, 0.9, 1.0, 1.1};
    pairs.is_match = {1, 1, 1, 0, 0, 0};
    if (emk::fpr_at_95(pairs) != 0.0)
        return false;
    if (emk::average_precision({1, 1, 0, 0}) != 1.0)
        return false;
    return true;
}

bool check_orthogonal_init() {
    const auto m = emk::random_orthogonal(4, 9, 7);
    for (int r = 0; r < 4; ++r)
        for (int q = 0; q < 4; ++q) {
            const double inner = emk::kern::dot(m.data() + r * 9, m.data() + q * 9, 9);
            const double expected = r == q ? 1.0 : 0.0;
            if (std::abs(inner - expected) > 1e-10)
                return false;
        }
    return true;
}

bool check_kernel_dispatch() {
    emk::NormalSampler rng(17);
    std::vector<double> a(133), b(133);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.next();
        b[i] = rng.next();
    }
    const double dispatched = emk::kern::dot(a.data(), b.data(), a.size());
    const double reference = emk::kern::scalar::dot(a.data(), b.data(), a.size());
    return std::abs(dispatched - reference) <= 1e-12 * std::abs(reference) + 1e-12;
}

int run_selftest() {
    const Check checks[] = {
        {"embed unit norm", &check_embed_unit_norm},
        {"kernel equals embedding inner product", &check_kernel_inner_product},
        {"fc split equivalence", &check_fc_equivalence},
        {"efficient aggregation equals naive", &check_efficient_matches_naive},
        {"match-kernel total equals inner product", &check_match_kernel_total},
        {"hardest-in-batch mining", &check_mining_brute_force},
        {"metric degenerate cases", &check_metric_degenerate_cases},
        {"orthogonal initialization", &check_orthogonal_init},
        {"kernel dispatch consistency", &check_kernel_dispatch},
    };
    bool all_ok = true;
    std::cout << "kernel backend: " << emk::kern::isa_name(emk::kern::active_isa()) << "\n";
    for (const auto& check : checks) {
        const bool ok = check.fn();
        all_ok = all_ok && ok;
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << check.name << "\n";
    }
    std::cout << (all_ok ? "selftest passed\n" : "selftest FAILED\n");
    return all_ok ? 0 : kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"efficient match-kernel local descriptors"};
    app.require_subcommand(1);

    InitOptions init_opt;
    auto* init_cmd = app.add_subcommand("init", "create a model file with random-init weights");
    init_cmd->add_option("--out", init_opt.out, "output model path")->required();
    init_cmd->add_option("--config", init_opt.config_path, "JSON config file");
    init_cmd->add_option("--variant", init_opt.variant, "xy|rhotheta|combined|sum|cat");
    init_cmd->add_option("--n", init_opt.n, "grid side (8 or 16 with conv part)");
    init_cmd->add_option("--d", init_opt.d, "tensor channels");
    init_cmd->add_option("--D", init_opt.out_dim, "descriptor dimension");
    init_cmd->add_option("--s", init_opt.s, "feature-map frequencies");
    init_cmd->add_option("--kappa", init_opt.kappa, "kernel shape for all coordinate channels");
    init_cmd->add_flag("--unweighted", init_opt.unweighted, "skip center weighting");
    init_cmd->add_flag("--separate-fcn", init_opt.separate_fcn,
                       "combined variant with its own second conv part");
    init_cmd->add_flag("--no-conv", init_opt.no_conv, "tensor-import model without conv part");
    init_cmd->add_option("--seed", init_opt.seed, "initialization seed");

    DescribeOptions describe_opt;
    auto* describe_cmd = app.add_subcommand("describe", "compute descriptors for patches");
    describe_cmd->add_option("--model", describe_opt.model, "model file")->required();
    describe_cmd->add_option("--input", describe_opt.input, "patch directory or file")->required();
    describe_cmd->add_option("--tilde-input", describe_opt.tilde_input,
                             "second-FCN tensor directory (separate-FCN models, --tensors)");
    describe_cmd->add_option("--out", describe_opt.out, "output descriptor file")->required();
    describe_cmd->add_option("--config", describe_opt.config_path, "JSON config file");
    describe_cmd->add_flag("--tensors", describe_opt.tensors, "inputs are .emkt tensors");
    describe_cmd->add_flag("--raw", describe_opt.raw, "store raw instead of normalized");
    describe_cmd->add_option("--grid-n", describe_opt.grid_n,
                             "override the grid side (head is resolution independent)");

    SimmapOptions simmap_opt;
    auto* simmap_cmd = app.add_subcommand("simmap", "similarity heat-map for one position");
    simmap_cmd->add_option("--model", simmap_opt.model, "model file")->required();
    simmap_cmd->add_option("patch_a", simmap_opt.patch_a, "first patch (.pgm or .emkt)")
        ->required();
    simmap_cmd->add_option("patch_b", simmap_opt.patch_b, "second patch (.pgm or .emkt)")
        ->required();
    simmap_cmd->add_option("--row", simmap_opt.pos_i, "grid row of p (1-based)")->required();
    simmap_cmd->add_option("--col", simmap_opt.pos_j, "grid column of p (1-based)")->required();
    simmap_cmd->add_option("--out", simmap_opt.out, "output prefix (.pgm and .csv)")->required();
    simmap_cmd->add_option("--config", simmap_opt.config_path, "JSON config file");

    bool params_json = false;
    std::string params_out;
    auto* params_cmd = app.add_subcommand("params", "parameter-count report");
    params_cmd->add_flag("--json", params_json, "emit JSON instead of text");
    params_cmd->add_option("--out", params_out, "output file (default stdout)");

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate descriptors against labels");
    eval_cmd->add_option("--task", eval_opt.task, "verification|retrieval|matching")->required();
    eval_cmd->add_option("--desc", eval_opt.desc, "descriptor file (queries/left side)")
        ->required();
    eval_cmd->add_option("--desc-b", eval_opt.desc_b, "pool/right-side descriptor file");
    eval_cmd->add_option("--labels", eval_opt.labels, "label CSV")->required();
    eval_cmd->add_option("--out", eval_opt.out, "report JSON path (default stdout)");
    eval_cmd->add_option("--config", eval_opt.config_path, "JSON config file");

    auto* selftest_cmd = app.add_subcommand("selftest", "run built-in consistency checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (init_cmd->parsed())
            return run_init(init_cmd, init_opt);
        if (describe_cmd->parsed())
            return run_describe(describe_cmd, describe_opt);
        if (simmap_cmd->parsed())
            return run_simmap(simmap_cmd, simmap_opt);
        if (params_cmd->parsed())
            return run_params(params_json, params_out);
        if (eval_cmd->parsed())
            return run_eval(eval_cmd, eval_opt);
        if (selftest_cmd->parsed())
            return run_selftest();
    } catch (const emk::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const emk::format_error& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::out_of_range& e) {
        std::cerr << "range error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
