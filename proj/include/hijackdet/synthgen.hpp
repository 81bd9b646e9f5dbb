#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hijackdet/corpus.hpp"

namespace hijackdet {

enum class SwapStrategy { Original, Inter, Intra };

std::string_view to_string(SwapStrategy s);
SwapStrategy swap_strategy_from_string(std::string_view s);

struct LabeledPair {
    std::string host_product_id;   // product whose page carries the review
    std::string donor_product_id;  // product the review was written for; equals host when related
    std::string review_id;         // kept for bookkeeping; not serialized
    int label = 0;                 // 0 related, 1 unrelated
    SwapStrategy strategy = SwapStrategy::Original;
    std::string product_text;
    std::string review_text;

    bool operator==(const LabeledPair&) const = default;
};

// JSONL record with fixed field order:
// host_product_id, donor_product_id, label, strategy, product_text, review_text
std::string serialize_pair(const LabeledPair& p);
LabeledPair parse_pair(const std::string& json_line);

// For each review of a product with a primary category, with probability
// unrelated_fraction the review is re-hosted on a uniformly sampled product
// from a different primary category (label 1); otherwise the original
// pairing is emitted (label 0). Deterministic under seed, independent of
// sharding: every product draws from its own (seed, product_id) stream.
std::vector<LabeledPair> generate_inter_category(const Catalog& catalog, double unrelated_fraction,
                                                 uint64_t seed);

struct IntraGenReport {
    int pairs_accepted = 0;
    long long attempts = 0;
    std::string warning;  // set when no eligible pair was found
};

// Candidate product pairs within one category are those whose filtered
// title token sets are disjoint (Jaccard similarity 0). Pairs are drawn by
// rejection sampling, so the quadratic candidate space is never
// materialized. Per accepted pair and per reviews_per_pair round, one
// unrelated swap in each direction and one related pair on each side are
// emitted; each product's reviews are consumed without replacement.
std::vector<LabeledPair> generate_intra_category(const Catalog& catalog, const std::string& category,
                                                 int max_pairs, uint64_t seed,
                                                 int reviews_per_pair = 1,
                                                 IntraGenReport* report = nullptr);

struct DatasetSplit {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> validation;
    std::vector<LabeledPair> test;
    uint64_t seed = 0;
};

// Seeded shuffle, then cuts at the floored cumulative ratio boundaries.
// With by_product set, all pairs of a host product land in one split
// (leakage control; split sizes then only approximate the ratios).
DatasetSplit split_dataset(std::vector<LabeledPair> pairs,
                           std::array<double, 3> ratios = {0.7, 0.1, 0.2}, uint64_t seed = 0,
                           bool by_product = false);

}  // namespace hijackdet
