#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emk/backend.hpp"
#include "emk/error.hpp"
#include "emk/evaluation.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

using namespace emk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("emk_eval_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("fpr_at_95 basics") {
    SUBCASE("perfect separation gives exactly zero") {
        LabeledPairSet pairs;
        pairs.score = {0.1, 0.2, 0.3, 0.9, 1.0, 1.1};
        pairs.is_match = {1, 1, 1, 0, 0, 0};
        CHECK(fpr_at_95(pairs) == 0.0);
    }

    SUBCASE("identically distributed classes sit at 0.95") {
        LabeledPairSet pairs;
        for (int i = 0; i < 1000; ++i) {
            pairs.score.push_back(i);
            pairs.is_match.push_back(1);
            pairs.score.push_back(i);
            pairs.is_match.push_back(0);
        }
        CHECK(fpr_at_95(pairs) == doctest::Approx(0.95).epsilon(1e-12));
    }

    SUBCASE("similarity polarity mirrors distances") {
        LabeledPairSet dist;
        dist.score = {0.1, 0.4, 0.9, 0.2, 0.8, 1.4};
        dist.is_match = {1, 1, 1, 0, 0, 0};
        LabeledPairSet sim;
        sim.scores_are_distances = false;
        for (double s : dist.score)
            sim.score.push_back(-s);
        sim.is_match = dist.is_match;
        CHECK(fpr_at_95(dist) == fpr_at_95(sim));
    }

    SUBCASE("threshold pairs count as accepted") {
        LabeledPairSet pairs;
        pairs.score = {1.0, 1.0};
        pairs.is_match = {1, 0};
        // Threshold lands on the positive at distance 1; the tied negative
        // is accepted too.
        CHECK(fpr_at_95(pairs) == 1.0);
    }

    SUBCASE("degenerate label sets are rejected") {
        LabeledPairSet pairs;
        pairs.score = {0.1, 0.2};
        pairs.is_match = {1, 1};
        CHECK_THROWS_AS(fpr_at_95(pairs), std::invalid_argument);
        pairs.is_match = {0, 0};
        CHECK_THROWS_AS(fpr_at_95(pairs), std::invalid_argument);
    }

    SUBCASE("scale invariance") {
        LabeledPairSet pairs;
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        for (int i = 0; i < 60; ++i) {
            pairs.score.push_back(uniform(rng));
            pairs.is_match.push_back(i % 3 == 0);
        }
        const double base = fpr_at_95(pairs);
        for (auto& s : pairs.score)
            s *= 37.5;
        CHECK(fpr_at_95(pairs) == base);
    }
}

TEST_CASE("fpr_at_95 matches the exhaustive sweep oracle") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SUBCASE("hand-sized instance") {
        std::vector<double> distance;
        std::vector<bool> matches;
        LabeledPairSet pairs;
        for (int i = 0; i < 40; ++i) {
            const double d = uniform(rng);
            const bool match = i < 20;
            distance.push_back(d);
            matches.push_back(match);
            pairs.score.push_back(d);
            pairs.is_match.push_back(match ? 1 : 0);
        }
        CHECK(fpr_at_95(pairs) == doctest::Approx(oracle::fpr_at_95_sweep(distance, matches))
                                      .epsilon(1e-12));
    }

    SUBCASE("100 random instances") {
        for (int trial = 0; trial < 100; ++trial) {
            const int positives = 1 + static_cast<int>(rng() % 30);
            const int negatives = 1 + static_cast<int>(rng() % 30);
            std::vector<double> distance;
            std::vector<bool> matches;
            LabeledPairSet pairs;
            for (int i = 0; i < positives + negatives; ++i) {
                // Duplicated values exercise the tie handling.
                const double d = std::round(uniform(rng) * 16.0) / 16.0;
                const bool match = i < positives;
                distance.push_back(d);
                matches.push_back(match);
                pairs.score.push_back(d);
                pairs.is_match.push_back(match ? 1 : 0);
            }
            const double got = fpr_at_95(pairs);
            const double want = oracle::fpr_at_95_sweep(distance, matches);
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("average precision") {
    SUBCASE("perfect ranking is exactly one") {
        CHECK(average_precision({1, 1, 1, 0, 0}) == 1.0);
        CHECK(average_precision({1}) == 1.0);
    }

    SUBCASE("single relevant item at rank 2 of 2") {
        CHECK(average_precision({0, 1}) == 0.5);
    }

    SUBCASE("no relevant item is rejected") {
        CHECK_THROWS_AS(average_precision({0, 0, 0}), std::invalid_argument);
    }

    SUBCASE("matches the definition oracle on random lists") {
        std::mt19937_64 rng(79);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::uint8_t> ranked;
            std::vector<bool> ranked_bool;
            bool any = false;
            for (int i = 0; i < 10; ++i) {
                const bool r = (rng() & 1) != 0;
                ranked.push_back(r ? 1 : 0);
                ranked_bool.push_back(r);
                any = any || r;
            }
            if (!any) {
                ranked[0] = 1;
                ranked_bool[0] = true;
            }
            CHECK(average_precision(ranked) ==
                  doctest::Approx(oracle::average_precision_definition(ranked_bool))
                      .epsilon(1e-12));
        }
    }

    SUBCASE("promoting a relevant item never decreases AP") {
        std::mt19937_64 rng(80);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::uint8_t> ranked;
            for (int i = 0; i < 12; ++i)
                ranked.push_back((rng() & 1) != 0 ? 1 : 0);
            ranked[3] = 0;
            ranked[9] = 1;
            const double before = average_precision(ranked);
            std::swap(ranked[3], ranked[9]); // relevant item moves up
            const double after = average_precision(ranked);
            CHECK(after >= before);
        }
    }
}

TEST_CASE("verification protocol") {
    std::vector<std::vector<double>> descs = {
        {1.0, 0.0}, {0.9, 0.1}, {-1.0, 0.0}, {-0.9, -0.1}};
    std::vector<PairLabel> pairs = {
        {0, 1, true}, {2, 3, true}, {0, 2, false}, {1, 3, false}};
    const auto report = evaluate_verification(descs, pairs);
    CHECK(report.pairs == 4);
    CHECK(report.positives == 2);
    CHECK(report.negatives == 2);
    CHECK(report.ap == 1.0);        // both matches rank before both non-matches
    CHECK(report.fpr_at_95 == 0.0); // clean separation

    CHECK_THROWS_AS(evaluate_verification(descs, {{0, 9, true}}), format_error);
    CHECK_THROWS_AS(evaluate_verification({}, pairs), format_error);
    CHECK_THROWS_AS(evaluate_verification(descs, {{0, 1, true}}), format_error);
}

TEST_CASE("retrieval protocol") {
    SUBCASE("identical sets with identity ground truth score 1.0") {
        std::vector<std::vector<double>> items;
        NormalSampler rng(81);
        for (int i = 0; i < 6; ++i) {
            std::vector<double> v(4);
            for (auto& x : v)
                x = rng.next();
            items.push_back(v);
        }
        std::vector<RelevanceLabel> labels;
        for (int i = 0; i < 6; ++i)
            labels.push_back({i, i, true});
        const auto report = evaluate_retrieval(items, items, labels);
        CHECK(report.queries == 6);
        CHECK(report.mean_ap == 1.0);
    }

    SUBCASE("three-cluster mAP matches a full-enumeration oracle") {
        NormalSampler rng(82);
        std::vector<std::vector<double>> queries;
        std::vector<std::vector<double>> pool;
        std::vector<int> query_label;
        std::vector<int> pool_label;
        const double centers[3][2] = {{4.0, 0.0}, {-3.0, 3.0}, {0.0, -5.0}};
        for (int c = 0; c < 3; ++c) {
            for (int k = 0; k < 2; ++k) {
                queries.push_back({centers[c][0] + 0.3 * rng.next(),
                                   centers[c][1] + 0.3 * rng.next()});
                query_label.push_back(c);
            }
            for (int k = 0; k < 5; ++k) {
                pool.push_back({centers[c][0] + 0.3 * rng.next(),
                                centers[c][1] + 0.3 * rng.next()});
                pool_label.push_back(c);
            }
        }
        std::vector<RelevanceLabel> labels;
        for (std::size_t q = 0; q < queries.size(); ++q)
            for (std::size_t p = 0; p < pool.size(); ++p)
                labels.push_back({static_cast<int>(q), static_cast<int>(p),
                                  query_label[q] == pool_label[p]});
        const auto report = evaluate_retrieval(queries, pool, labels);

        double expected_sum = 0.0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            std::vector<std::pair<double, std::size_t>> order;
            for (std::size_t p = 0; p < pool.size(); ++p) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 2; ++k) {
                    const double diff = queries[q][k] - pool[p][k];
                    acc += diff * diff;
                }
                order.push_back({acc, p});
            }
            std::sort(order.begin(), order.end());
            std::vector<bool> ranked;
            for (const auto& [dist, p] : order)
                ranked.push_back(query_label[q] == pool_label[p]);
            expected_sum += oracle::average_precision_definition(ranked);
        }
        CHECK(report.mean_ap ==
              doctest::Approx(expected_sum / queries.size()).epsilon(1e-12));
    }

    SUBCASE("error contracts") {
        std::vector<std::vector<double>> queries = {{0.0, 0.0}};
        std::vector<std::vector<double>> pool = {{1.0, 0.0}};
        CHECK_THROWS_AS(evaluate_retrieval(queries, {}, {{0, 0, true}}), format_error);
        CHECK_THROWS_AS(evaluate_retrieval(queries, pool, {}), format_error);
        CHECK_THROWS_AS(evaluate_retrieval(queries, pool, {{0, 5, true}}), format_error);
        // A mentioned query whose rows are all irrelevant has no relevant item.
        CHECK_THROWS_AS(evaluate_retrieval(queries, pool, {{0, 0, false}}), format_error);
    }
}

TEST_CASE("matching protocol") {
    // Two left descriptors with known partners on the right.
    std::vector<std::vector<double>> left = {{0.0, 0.0}, {10.0, 0.0}};
    std::vector<std::vector<double>> right = {{0.1, 0.0}, {10.1, 0.0}, {5.0, 5.0}};
    const auto report = evaluate_matching(left, right, {{0, 0}, {1, 1}});
    CHECK(report.queries == 2);
    CHECK(report.mean_ap == 1.0);

    // Reversed ground truth ranks the true partner last of three.
    const auto swapped = evaluate_matching(left, right, {{0, 1}, {1, 0}});
    CHECK(swapped.mean_ap == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate_matching(left, {}, {{0, 0}}), format_error);
    CHECK_THROWS_AS(evaluate_matching(left, right, {}), format_error);
}

TEST_CASE("csv loaders") {
    TempDir tmp;

    SUBCASE("pairs file with header and comments") {
        const auto path = tmp.path / "pairs.csv";
        std::ofstream out(path);
        out << "id_a,id_b,is_match\n# comment\n0,1,1\n2,3,0\n\n4,5,1\n";
        out.close();
        const auto pairs = read_pairs_csv(path);
        REQUIRE(pairs.size() == 3);
        CHECK(pairs[0].a == 0);
        CHECK(pairs[0].match);
        CHECK(pairs[1].b == 3);
        CHECK_FALSE(pairs[1].match);
        CHECK(pairs[2].a == 4);
    }

    SUBCASE("malformed rows are format errors") {
        const auto path = tmp.path / "bad.csv";
        std::ofstream(path) << "0,1\n";
        CHECK_THROWS_AS(read_pairs_csv(path), format_error);

        std::ofstream(path) << "0,1,yes\n";
        CHECK_THROWS_AS(read_pairs_csv(path), format_error);

        std::ofstream(path) << "0,1,2\n";
        CHECK_THROWS_AS(read_pairs_csv(path), format_error); // flag must be 0/1

        CHECK_THROWS_AS(read_pairs_csv(tmp.path / "missing.csv"), format_error);
    }

    SUBCASE("correspondence file") {
        const auto path = tmp.path / "gt.csv";
        std::ofstream(path) << "3,4\n5,6\n";
        const auto rows = read_correspondence_csv(path);
        REQUIRE(rows.size() == 2);
        CHECK(rows[1].a == 5);
        CHECK(rows[1].b == 6);
    }
}
