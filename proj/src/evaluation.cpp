#include "emk/evaluation.hpp"

#include "emk/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace emk {

namespace {

double pair_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw format_error("descriptor dimensions disagree");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// Ranks items ascending by distance; equal distances keep index order.
std::vector<std::size_t> ranked_order(const std::vector<double>& distances) {
    std::vector<std::size_t> order(distances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&distances](std::size_t a, std::size_t b) {
        return distances[a] < distances[b];
    });
    return order;
}

} // namespace

double fpr_at_95(const LabeledPairSet& pairs) {
    if (pairs.score.size() != pairs.is_match.size())
        throw std::invalid_argument("fpr_at_95: score and label lengths disagree");
    std::vector<double> positive;
    std::vector<double> negative;
    for (std::size_t i = 0; i < pairs.score.size(); ++i) {
        const double dist = pairs.scores_are_distances ? pairs.score[i] : -pairs.score[i];
        (pairs.is_match[i] ? positive : negative).push_back(dist);
    }
    if (positive.empty() || negative.empty())
        throw std::invalid_argument("fpr_at_95: need at least one positive and one negative");

    // Smallest accepted count k with k/P >= 19/20, in integer arithmetic.
    const std::size_t p = positive.size();
    const std::size_t k = (19 * p + 19) / 20;
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     positive.end());
    const double threshold = positive[k - 1];

    std::size_t false_pos = 0;
    for (double dist : negative)
        if (dist <= threshold)
            ++false_pos;
    return static_cast<double>(false_pos) / static_cast<double>(negative.size());
}

double average_precision(const std::vector<std::uint8_t>& ranked_relevance) {
    std::size_t relevant = 0;
    for (auto r : ranked_relevance)
        if (r)
            ++relevant;
    if (relevant == 0)
        throw std::invalid_argument("average_precision: list has no relevant item");

    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
        if (ranked_relevance[k]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(relevant);
}

VerificationReport evaluate_verification(const std::vector<std::vector<double>>& descriptors,
                                         const std::vector<PairLabel>& pairs) {
    if (descriptors.empty())
        throw format_error("verification: descriptor set is empty");
    if (pairs.empty())
        throw format_error("verification: no labeled pairs");

    LabeledPairSet set;
    set.scores_are_distances = true;
    for (const auto& pair : pairs) {
        if (pair.a < 0 || pair.b < 0 ||
            static_cast<std::size_t>(pair.a) >= descriptors.size() ||
            static_cast<std::size_t>(pair.b) >= descriptors.size())
            throw format_error("verification: pair index out of range");
        set.score.push_back(pair_distance(descriptors[static_cast<std::size_t>(pair.a)],
                                          descriptors[static_cast<std::size_t>(pair.b)]));
        set.is_match.push_back(pair.match ? 1 : 0);
    }

    VerificationReport report;
    report.pairs = pairs.size();
    for (auto m : set.is_match)
        (m ? report.positives : report.negatives) += 1;
    if (report.positives == 0 || report.negatives == 0)
        throw format_error("verification: need both positive and negative pairs");

    const auto order = ranked_order(set.score);
    std::vector<std::uint8_t> ranked(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        ranked[k] = set.is_match[order[k]];
    report.ap = average_precision(ranked);
    report.fpr_at_95 = fpr_at_95(set);
    return report;
}

RankedReport evaluate_retrieval(const std::vector<std::vector<double>>& queries,
                                const std::vector<std::vector<double>>& pool,
                                const std::vector<RelevanceLabel>& labels) {
    if (pool.empty())
        throw format_error("retrieval: pool is empty");
    if (labels.empty())
        throw format_error("retrieval: no relevance labels");

    std::map<int, std::set<int>> relevant_per_query;
    for (const auto& label : labels) {
        if (label.query < 0 || static_cast<std::size_t>(label.query) >= queries.size())
            throw format_error("retrieval: query index out of range");
        if (label.pool < 0 || static_cast<std::size_t>(label.pool) >= pool.size())
            throw format_error("retrieval: pool index out of range");
        auto& set = relevant_per_query[label.query]; // creates the query entry
        if (label.relevant)
            set.insert(label.pool);
    }

    RankedReport report;
    double ap_sum = 0.0;
    for (const auto& [query, relevant] : relevant_per_query) {
        if (relevant.empty())
            throw format_error("retrieval: query has no relevant pool item");
        std::vector<double> distances(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i)
            distances[i] = pair_distance(queries[static_cast<std::size_t>(query)], pool[i]);
        const auto order = ranked_order(distances);
        std::vector<std::uint8_t> ranked(order.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            ranked[k] = relevant.count(static_cast<int>(order[k])) ? 1 : 0;
        ap_sum += average_precision(ranked);
        ++report.queries;
    }
    report.mean_ap = ap_sum / static_cast<double>(report.queries);
    return report;
}

RankedReport evaluate_matching(const std::vector<std::vector<double>>& left,
                               const std::vector<std::vector<double>>& right,
                               const std::vector<Correspondence>& ground_truth) {
    if (right.empty())
        throw format_error("matching: right-side descriptor set is empty");
    if (ground_truth.empty())
        throw format_error("matching: no ground-truth correspondences");

    std::vector<RelevanceLabel> labels;
    labels.reserve(ground_truth.size());
    for (const auto& corr : ground_truth)
        labels.push_back({corr.a, corr.b, true});
    try {
        return evaluate_retrieval(left, right, labels);
    } catch (const format_error& e) {
        throw format_error(std::string("matching: ") + e.what());
    }
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                    std::size_t columns) {
    std::ifstream in(path);
    if (!in)
        throw format_error("cannot open CSV file: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first_content = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (first_content) {
            first_content = false;
            // Tolerate a header row: skip if the first field is not numeric.
            if (!fields.empty() && fields.front().find_first_not_of("-0123456789 \t") !=
                                       std::string::npos)
                continue;
        }
        if (fields.size() != columns)
            throw format_error("CSV row has wrong field count in " + path.string());
        rows.push_back(std::move(fields));
    }
    return rows;
}

int parse_int(const std::string& text, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        const int value = std::stoi(text, &used);
        while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used])))
            ++used;
        if (used != text.size())
            throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        throw format_error("CSV field is not an integer in " + path.string());
    }
}

bool parse_flag(const std::string& text, const std::filesystem::path& path) {
    const int value = parse_int(text, path);
    if (value != 0 && value != 1)
        throw format_error("CSV flag field must be 0 or 1 in " + path.string());
    return value == 1;
}

} // namespace

std::vector<PairLabel> read_pairs_csv(const std::filesystem::path& path) {
    std::vector<PairLabel> pairs;
    for (const auto& row : read_csv_rows(path, 3))
        pairs.push_back({parse_int(row[0], path), parse_int(row[1], path),
                         parse_flag(row[2], path)});
    return pairs;
}

std::vector<RelevanceLabel> read_relevance_csv(const std::filesystem::path& path) {
    std::vector<RelevanceLabel> labels;
    for (const auto& row : read_csv_rows(path, 3))
        labels.push_back({parse_int(row[0], path), parse_int(row[1], path),
                          parse_flag(row[2], path)});
    return labels;
}

std::vector<Correspondence> read_correspondence_csv(const std::filesystem::path& path) {
    std::vector<Correspondence> rows;
    for (const auto& row : read_csv_rows(path, 2))
        rows.push_back({parse_int(row[0], path), parse_int(row[1], path)});
    return rows;
}

} // namespace emk
