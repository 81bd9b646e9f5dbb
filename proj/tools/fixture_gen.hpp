#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hijackdet/corpus.hpp"

namespace hijackdet::fixture {

// Synthetic mini-corpus with four vocabulary-disjoint categories. Word
// vectors are built around four pairwise-equidistant category anchors
// (cosine -1/3 between any two), so a related product/review pair points
// near cosine 1 and a cross-category pair near -1/3. Product-specific
// words carry extra noise around the anchor, which is what separates two
// products of the same category.
struct FixtureSpec {
    int categories = 4;
    int products_per_category = 50;
    int reviews_per_product = 12;
    int planted = 10;          // fully hijacked products in the scoring catalog
    int embedding_dim = 300;
    uint64_t seed = 7;

    int category_vocab = 40;       // shared words per category
    int brand_vocab = 6;           // brand names per category
    int product_vocab = 8;         // words unique to one product
    double category_noise = 0.03;  // per-dim uniform noise on category words
    double product_noise = 0.09;   // per-dim uniform noise on product words
};

struct Fixture {
    Catalog train_catalog;    // products with their own reviews
    Catalog scoring_catalog;  // same products; planted ones carry foreign reviews
    std::vector<std::string> planted_ids;  // sorted
    std::string embeddings_text;           // "token v1 ... vd" lines
    std::vector<std::string> category_names;
};

Fixture make_fixture(const FixtureSpec& spec = {});

// Writes products.jsonl, reviews.jsonl, scoring_products.jsonl,
// scoring_reviews.jsonl, embeddings.txt, planted.txt into dir.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace hijackdet::fixture
