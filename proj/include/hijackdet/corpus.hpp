#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hijackdet {

struct Product {
    std::string product_id;  // "asin"-style unique key
    std::string title;
    std::string description;
    std::string brand;
    std::vector<std::string> features;
    std::vector<std::string> categories;  // first entry is the primary category

    std::string_view primary_category() const {
        return categories.empty() ? std::string_view{} : std::string_view{categories.front()};
    }

    bool operator==(const Product&) const = default;
};

struct Review {
    std::string review_id;  // synthesized as "<asin>#<ordinal>" when absent
    std::string product_id;
    std::string body;
    std::string summary;
    std::vector<std::pair<std::string, std::string>> style;  // sorted by key
    std::optional<double> rating;                            // in [1,5] when present
    std::optional<bool> verified;

    bool operator==(const Review&) const = default;
};

struct ProductText {
    std::string product_id;
    std::string text;
};

struct ReviewText {
    std::string review_id;
    std::string product_id;
    std::string text;
};

struct ParseStats {
    uint64_t lines = 0;
    uint64_t parsed = 0;
    uint64_t malformed = 0;     // lines that are not JSON objects
    uint64_t missing_id = 0;    // objects without a usable id
    uint64_t duplicate_id = 0;  // later occurrences of an already-seen id
};

class LineReader;

// One JSON object per line. Malformed lines are skipped and counted;
// duplicate ids keep the first occurrence. A leading {"_meta":...} header
// line (written by this tool's own artifacts) is skipped silently.
std::vector<Product> parse_products(LineReader& in, ParseStats* stats = nullptr);
std::vector<Review> parse_reviews(LineReader& in, ParseStats* stats = nullptr);

std::vector<Product> parse_products(std::istream& in, ParseStats* stats = nullptr);
std::vector<Review> parse_reviews(std::istream& in, ParseStats* stats = nullptr);

// File variants auto-detect gzip by magic bytes.
std::vector<Product> parse_products_file(const std::string& path, ParseStats* stats = nullptr);
std::vector<Review> parse_reviews_file(const std::string& path, ParseStats* stats = nullptr);

// Normalized JSONL records with fixed key order, for reproducible diffs.
std::string serialize_product(const Product& p);
std::string serialize_review(const Review& r);

// Product text: title, brand, features, description joined by single spaces.
ProductText assemble_product_text(const Product& p);
// Review text: summary, style values in key order, body.
ReviewText assemble_review_text(const Review& r);

struct Catalog {
    std::vector<Product> products;
    std::vector<Review> reviews;
};

struct FilterStats {
    uint64_t products_removed = 0;
    uint64_t reviews_removed = 0;
    uint64_t dangling_reviews = 0;  // reviews whose product is not in the catalog
};

// Drops products with fewer than min_reviews reviews, along with their
// reviews. Reviews of unknown products are kept (and counted) so that
// min_reviews = 0 is the identity.
Catalog filter_min_reviews(const Catalog& catalog, int min_reviews = 5, FilterStats* stats = nullptr);

std::string strip_html(std::string_view text);
std::string collapse_whitespace(std::string_view text);

}  // namespace hijackdet
