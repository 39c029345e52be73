// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Tolerances are fixed here, in code.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emk/aggregation.hpp"
#include "emk/backend.hpp"
#include "emk/evaluation.hpp"
#include "emk/featuremap.hpp"
#include "emk/kernels.hpp"
#include "emk/learning.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

using namespace emk;

namespace {

void report(int id, const char* name, bool ok) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, name);
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", id, ": ", name);
}

FeatureTensor random_tensor(int n, int d, NormalSampler& rng) {
    auto t = make_feature_tensor(n, d);
    for (auto& v : t.data)
        v = rng.next();
    return t;
}

DescriptorHead random_head(Variant variant, int out_dim, int d, int s, NormalSampler& rng) {
    auto head = make_descriptor_head(variant, out_dim, d, s);
    for (auto& v : head.projection)
        v = 0.5 * rng.next();
    for (auto& v : head.offset)
        v = 0.5 * rng.next();
    return head;
}

double held_out_fpr(const DescriptorHead& head, const SpatialContext& ctx,
                    const ToyDataset& held_out) {
    std::vector<std::vector<double>> descriptors;
    for (const auto& tensor : held_out.tensors)
        descriptors.push_back(describe_spatial_efficient(head, ctx, tensor).normalized);

    LabeledPairSet pairs;
    for (std::size_t i = 0; i < descriptors.size(); ++i)
        for (std::size_t j = i + 1; j < descriptors.size(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < descriptors[i].size(); ++k) {
                const double diff = descriptors[i][k] - descriptors[j][k];
                acc += diff * diff;
            }
            pairs.score.push_back(std::sqrt(acc));
            pairs.is_match.push_back(held_out.labels[i] == held_out.labels[j] ? 1 : 0);
        }
    return fpr_at_95(pairs);
}

} // namespace

TEST_CASE("criterion 1: Table 1 parameter counts reproduce exactly") {
    const auto shapes = reference_conv_shapes();
    std::multiset<long long> emitted;
    emitted.insert(static_cast<long long>(shapes[0].in) * shapes[0].out * 9); // layer 1
    emitted.insert(conv_parameters(shapes));
    emitted.insert(spatial_head_parameters(Variant::xy, 128, 128, 1));
    emitted.insert(spatial_head_parameters(Variant::xy, 128, 128, 2));
    emitted.insert(spatial_head_parameters(Variant::combined, 128, 128, 1));
    emitted.insert(spatial_head_parameters(Variant::combined, 128, 128, 2));
    emitted.insert(fc_head_parameters(128, 8, 128, false));
    emitted.insert(fc_head_parameters(128, 16, 128, false));
    for (const auto& row : parameter_table())
        emitted.insert(row.total);

    const long long expected[] = {288,     285984,  147584,  409728,  295040,  819328,
                                  1048576, 4194304, 433568,  695712,  581024,  1105312,
                                  867008,  1391296, 1334560, 4480288};
    bool ok = true;
    for (long long want : expected)
        ok = ok && emitted.count(want) >= 1;
    // Zero tolerance: each published number appears verbatim.
    report(1, "Table 1 reproduction (16 exact values)", ok);
}

TEST_CASE("criterion 2: memory reduction factor is 20.9") {
    const double factor = memory_reduction_factor(8, 128, 2);
    const bool ok = std::abs(factor - 204800.0 / 9792.0) < 1e-12 &&
                    std::round(factor * 10.0) / 10.0 == 20.9;
    report(2, "efficient aggregation memory factor 20.9 (3 significant figures)", ok);
}

TEST_CASE("criterion 3: efficient equals naive on 200 random instances") {
    NormalSampler rng(301);
    const Variant variants[] = {Variant::xy, Variant::rhotheta, Variant::combined};
    const int grid_sides[] = {1, 2, 4, 8};
    const int channel_counts[] = {2, 3, 128};
    double worst = 0.0;
    int instances = 0;
    while (instances < 200) {
        const Variant variant = variants[instances % 3];
        const int n = grid_sides[(instances / 3) % 4];
        const int d = channel_counts[(instances / 12) % 3];
        const int s = 1 + (instances / 36) % 2;
        SpatialConfig sc;
        sc.variant = variant;
        sc.n = n;
        sc.s = s;
        const auto ctx = make_spatial_context(sc);
        const auto head = random_head(variant, 4, d, s, rng);
        const auto phi = random_tensor(n, d, rng);
        const auto phi_tilde = random_tensor(n, d, rng);
        const auto* tilde = variant == Variant::combined ? &phi_tilde : nullptr;
        const auto naive = describe_spatial_naive(head, ctx, phi, tilde);
        const auto efficient = describe_spatial_efficient(head, ctx, phi, tilde);
        for (int t = 0; t < naive.dim(); ++t)
            worst = std::max(worst, std::abs(naive.raw[t] - efficient.raw[t]));
        ++instances;
    }
    report(3, "efficient/naive aggregation equality (200 instances, < 1e-10)", worst < 1e-10);
}

TEST_CASE("criterion 4: FC match-kernel equivalence") {
    NormalSampler rng(302);
    bool ok = true;
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + trial % 4;
        const int d = 2 + trial % 3;
        const int out_dim = 3 + trial % 4;
        auto head = make_fc_head(out_dim, n, d);
        for (auto& v : head.weight)
            v = rng.next();
        for (auto& v : head.bias)
            v = rng.next();
        const auto phi_a = random_tensor(n, d, rng);
        const auto phi_b = random_tensor(n, d, rng);

        const auto direct = describe_fc(head, phi_a);
        const auto split = describe_fc_split(head, phi_a);
        for (int t = 0; t < out_dim; ++t)
            ok = ok && std::abs(direct.raw[t] - split.raw[t]) < 1e-12;

        const auto result = match_kernel_similarity(head, phi_a, phi_b);
        const auto db = describe_fc(head, phi_b);
        const double inner = kern::dot(direct.raw.data(), db.raw.data(), direct.raw.size());
        ok = ok && std::abs(result.total - inner) <= 1e-8 * std::max(1.0, std::abs(inner));
    }
    report(4, "FC descriptor equivalence (1e-12) and pairwise-map total (1e-8)", ok);
}

TEST_CASE("criterion 5: kernel approximation quality") {
    bool monotone = true;
    for (double kappa : {2.0, 8.0, 32.0}) {
        const auto reference = build_feature_map_spec(kappa, 64);
        double previous = 1e300;
        for (int s : {1, 2, 3, 4, 8}) {
            const auto spec = build_feature_map_spec(kappa, s);
            double sup = 0.0;
            for (int k = 0; k <= 2000; ++k) {
                const double delta =
                    -std::numbers::pi + 2.0 * std::numbers::pi * k / 2000.0;
                sup = std::max(sup, std::abs(kernel_value(spec, delta) -
                                             kernel_value(reference, delta)));
            }
            monotone = monotone && sup <= previous;
            previous = sup;
        }
    }

    bool agree = true;
    NormalSampler rng(303);
    for (double kappa : {2.0, 8.0, 32.0}) {
        const auto spec = build_feature_map_spec(kappa, 2);
        for (int t = 0; t < 1000; ++t) {
            const double a = 5.0 * rng.next();
            const double b = 5.0 * rng.next();
            const auto fa = embed(spec, a);
            const auto fb = embed(spec, b);
            const double inner = kern::dot(fa.data(), fb.data(), fa.size());
            agree = agree && std::abs(inner - kernel_value(spec, a - b)) < 1e-12;
        }
    }
    report(5, "sup-norm error non-increasing in s; embeddings match kernel to 1e-12",
           monotone && agree);
}

TEST_CASE("criterion 6: analytic gradients match finite differences") {
    NormalSampler rng(304);
    const Variant variants[] = {Variant::xy, Variant::rhotheta, Variant::combined};
    int checked = 0;
    int attempts = 0;
    bool ok = true;
    while (checked < 20 && attempts < 200) {
        ++attempts;
        const Variant variant = variants[attempts % 3];
        SpatialConfig sc;
        sc.variant = variant;
        sc.n = 3;
        sc.s = 1;
        const auto ctx = make_spatial_context(sc);
        auto head = random_head(variant, 4, 2, 1, rng);
        const auto phi_a = random_tensor(3, 2, rng);
        const auto phi_p = random_tensor(3, 2, rng);
        const auto phi_n = random_tensor(3, 2, rng);

        auto chain_loss = [&]() {
            const auto da = describe_spatial_efficient(head, ctx, phi_a);
            const auto dp = describe_spatial_efficient(head, ctx, phi_p);
            const auto dn = describe_spatial_efficient(head, ctx, phi_n);
            return triplet_loss(da.normalized, dp.normalized, dn.normalized);
        };

        const auto da = describe_spatial_efficient(head, ctx, phi_a);
        const auto dp = describe_spatial_efficient(head, ctx, phi_p);
        const auto dn = describe_spatial_efficient(head, ctx, phi_n);
        const auto tg = triplet_loss_backward(da.normalized, dp.normalized, dn.normalized);
        if (tg.loss < 1e-3) // keep clear of the hinge kink
            continue;
        ++checked;

        std::vector<double> d_projection(head.projection.size(), 0.0);
        std::vector<double> d_offset(head.offset.size(), 0.0);
        auto add = [&](const Descriptor& desc, const FeatureTensor& tensor,
                       const std::vector<double>& d_hat) {
            const auto d_raw = normalize_backward(desc, d_hat);
            const auto grads = head_gradients(head, ctx, tensor, nullptr, d_raw);
            for (std::size_t i = 0; i < d_projection.size(); ++i)
                d_projection[i] += grads.projection[i];
            for (std::size_t i = 0; i < d_offset.size(); ++i)
                d_offset[i] += grads.offset[i];
        };
        add(da, phi_a, tg.d_anchor);
        add(dp, phi_p, tg.d_positive);
        add(dn, phi_n, tg.d_negative);

        const auto fd_m = oracle::central_differences(head.projection, chain_loss, 1e-5);
        for (std::size_t i = 0; i < fd_m.size(); ++i) {
            const double scale = std::max({1.0, std::abs(fd_m[i]), std::abs(d_projection[i])});
            ok = ok && std::abs(d_projection[i] - fd_m[i]) / scale < 1e-4;
        }
        const auto fd_b = oracle::central_differences(head.offset, chain_loss, 1e-5);
        for (std::size_t i = 0; i < fd_b.size(); ++i) {
            const double scale = std::max({1.0, std::abs(fd_b[i]), std::abs(d_offset[i])});
            ok = ok && std::abs(d_offset[i] - fd_b[i]) / scale < 1e-4;
        }
    }
    report(6, "gradient checks through head, normalization, and loss (20 instances, < 1e-4)",
           ok && checked >= 20);
}

TEST_CASE("criterion 7: mining matches brute force on 50 batches") {
    std::mt19937_64 seed_stream(305);
    NormalSampler rng(306);
    bool ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const int batch = 2 + static_cast<int>(seed_stream() % 63);
        std::vector<std::vector<double>> anchors;
        std::vector<std::vector<double>> positives;
        for (int i = 0; i < batch; ++i) {
            std::vector<double> a(8), p(8);
            for (int k = 0; k < 8; ++k) {
                a[k] = rng.next();
                p[k] = rng.next();
            }
            anchors.push_back(std::move(a));
            positives.push_back(std::move(p));
        }
        const auto selection = mine_hardest(anchors, positives);
        const auto expected = oracle::mine_hardest_brute_force(anchors, positives);
        for (int i = 0; i < batch; ++i)
            ok = ok && selection.negative_index[i] == expected[static_cast<std::size_t>(i)];
    }
    report(7, "hardest-in-batch selection matches brute force index for index", ok);
}

TEST_CASE("criterion 8: metric oracles") {
    std::mt19937_64 rng(307);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    bool ok = true;

    for (int trial = 0; trial < 100; ++trial) {
        const int positives = 1 + static_cast<int>(rng() % 25);
        const int negatives = 1 + static_cast<int>(rng() % 25);
        LabeledPairSet pairs;
        std::vector<double> distance;
        std::vector<bool> matches;
        for (int i = 0; i < positives + negatives; ++i) {
            const double d = std::round(uniform(rng) * 32.0) / 32.0;
            const bool match = i < positives;
            pairs.score.push_back(d);
            pairs.is_match.push_back(match ? 1 : 0);
            distance.push_back(d);
            matches.push_back(match);
        }
        ok = ok && std::abs(fpr_at_95(pairs) - oracle::fpr_at_95_sweep(distance, matches)) <
                       1e-12;

        std::vector<std::uint8_t> ranked;
        std::vector<bool> ranked_bool;
        for (int i = 0; i < 12; ++i) {
            const bool r = (rng() & 1) != 0;
            ranked.push_back(r ? 1 : 0);
            ranked_bool.push_back(r);
        }
        if (std::find(ranked.begin(), ranked.end(), 1) == ranked.end()) {
            ranked[0] = 1;
            ranked_bool[0] = true;
        }
        ok = ok && std::abs(average_precision(ranked) -
                            oracle::average_precision_definition(ranked_bool)) < 1e-12;
    }

    LabeledPairSet separated;
    separated.score = {0.1, 0.2, 0.9, 1.4};
    separated.is_match = {1, 1, 0, 0};
    ok = ok && fpr_at_95(separated) == 0.0;
    ok = ok && average_precision({1, 1, 1, 0}) == 1.0;

    report(8, "FPR@95 and AP match sweep/definition oracles (100 instances, 1e-12)", ok);
}

TEST_CASE("criterion 9: toy training strictly improves held-out FPR@95") {
    SpatialConfig sc;
    sc.variant = Variant::xy;
    sc.n = 4;
    sc.s = 1;
    const auto ctx = make_spatial_context(sc);

    // 32-class synthetic dataset with a shared nuisance direction.
    const auto data = oracle::make_synthetic_dataset(32, 4, 2, 4, 8, 308);

    ToyTrainConfig config;
    config.epochs = 20;
    config.lr0 = 0.5;
    config.momentum = 0.9;
    config.weight_decay = 1e-4;
    config.pairs_per_batch = 16;
    config.out_dim = 16;
    config.seed = 17;

    DescriptorHead init_head =
        make_descriptor_head(Variant::xy, config.out_dim, 8, sc.s);
    init_head.projection =
        random_orthogonal(config.out_dim, init_head.enc_dim, config.seed);

    const double before = held_out_fpr(init_head, ctx, data.held_out);
    const auto result = train_head_toy(data.train, ctx, config);
    const double after = held_out_fpr(result.head, ctx, data.held_out);

    // Determinism of the whole pipeline.
    const auto rerun = train_head_toy(data.train, ctx, config);
    const bool deterministic = rerun.head.projection == result.head.projection &&
                               rerun.head.offset == result.head.offset;

    std::printf("    held-out FPR@95: %.4f (init) -> %.4f (trained)\n", before, after);
    report(9, "trained head strictly lowers held-out FPR@95 versus orthogonal init",
           after < before && deterministic);
}

TEST_CASE("criterion 10: one head serves n = 8 and n = 16") {
    NormalSampler rng(309);
    auto head = make_descriptor_head(Variant::xy, 128, 128, 2);
    head.projection = random_orthogonal(128, head.enc_dim, 310);

    const long long count_for_any_n = spatial_head_parameters(Variant::xy, 128, 128, 2);
    bool ok = head.parameter_count() == count_for_any_n && count_for_any_n == 409728;

    for (int n : {8, 16}) {
        SpatialConfig sc;
        sc.variant = Variant::xy;
        sc.n = n;
        sc.s = 2;
        const auto ctx = make_spatial_context(sc);
        const auto phi = random_tensor(n, 128, rng);
        const auto desc = describe_spatial_efficient(head, ctx, phi);
        ok = ok && desc.dim() == 128;
        ok = ok && std::abs(kern::sum_sq(desc.normalized.data(), 128) - 1.0) < 1e-12;
    }
    report(10, "identical parameter count and valid descriptors across resolutions", ok);
}
