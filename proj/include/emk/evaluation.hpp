#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace emk {

// Scored verification pairs. Scores are distances (lower is better) unless
// scores_are_distances is false, in which case they are similarities.
struct LabeledPairSet {
    std::vector<double> score;
    std::vector<std::uint8_t> is_match;
    bool scores_are_distances = true;
};

// False positive rate at the smallest threshold reaching 95% recall; pairs
// at exactly the threshold count as accepted.
double fpr_at_95(const LabeledPairSet& pairs);

// Non-interpolated average precision of a ranked relevance list:
// (1/R) sum over relevant ranks k of precision@k.
double average_precision(const std::vector<std::uint8_t>& ranked_relevance);

struct PairLabel {
    int a = 0;
    int b = 0;
    bool match = false;
};

struct RelevanceLabel {
    int query = 0;
    int pool = 0;
    bool relevant = false;
};

struct Correspondence {
    int a = 0;
    int b = 0;
};

struct VerificationReport {
    double ap = 0.0;
    double fpr_at_95 = 0.0;
    std::size_t pairs = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct RankedReport {
    double mean_ap = 0.0;
    std::size_t queries = 0;
};

// Verification: rank labeled pairs by Euclidean descriptor distance.
VerificationReport evaluate_verification(const std::vector<std::vector<double>>& descriptors,
                                         const std::vector<PairLabel>& pairs);

// Retrieval: for each query id in the labels, rank the whole pool by
// distance; relevance per explicit (query, pool) rows.
RankedReport evaluate_retrieval(const std::vector<std::vector<double>>& queries,
                                const std::vector<std::vector<double>>& pool,
                                const std::vector<RelevanceLabel>& labels);

// Matching: each left-side id in the ground truth queries the right-side
// set; its true correspondences are the relevant items.
RankedReport evaluate_matching(const std::vector<std::vector<double>>& left,
                               const std::vector<std::vector<double>>& right,
                               const std::vector<Correspondence>& ground_truth);

// CSV loaders. Lines starting with '#' and blank lines are skipped; a
// leading header row is tolerated.
std::vector<PairLabel> read_pairs_csv(const std::filesystem::path& path);
std::vector<RelevanceLabel> read_relevance_csv(const std::filesystem::path& path);
std::vector<Correspondence> read_correspondence_csv(const std::filesystem::path& path);

} // namespace emk
