#include "hijackdet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hijackdet/jsonl.hpp"

namespace hijackdet {

using nlohmann::json;
using nlohmann::ordered_json;

std::string strip_html(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '<') {
            size_t close = text.find('>', i + 1);
            if (close == std::string_view::npos) {
                // unterminated '<' is kept as literal text
                out += text[i++];
                continue;
            }
            // tags separate words: "a<br>b" must not become "ab"
            out += ' ';
            i = close + 1;
            continue;
        }
        out += text[i++];
    }
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // leading whitespace is trimmed
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

namespace {

std::string get_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return {};
    if (it->is_string()) return it->get<std::string>();
    return {};
}

// Field that may arrive as a string or as an array of strings.
std::string get_joined_text(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return {};
    if (it->is_string()) return it->get<std::string>();
    if (it->is_array()) {
        std::string out;
        for (const auto& e : *it) {
            if (!e.is_string()) continue;
            if (!out.empty()) out += ' ';
            out += e.get<std::string>();
        }
        return out;
    }
    return {};
}

std::vector<std::string> get_string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
        return out;
    }
    if (!it->is_array()) return out;
    for (const auto& e : *it) {
        if (e.is_string()) {
            out.push_back(e.get<std::string>());
        } else if (e.is_array()) {
            // older corpora nest category paths one level deep
            for (const auto& inner : e)
                if (inner.is_string()) out.push_back(inner.get<std::string>());
        }
    }
    return out;
}

bool is_meta_header(const json& j) { return j.is_object() && j.contains("_meta"); }

template <class Fn>
void for_each_json_line(LineReader& in, ParseStats* stats, Fn&& fn) {
    ParseStats local;
    std::string line;
    bool first = true;
    while (in.next(line)) {
        ++local.lines;
        // cheap skip of blank lines
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++local.malformed;
            first = false;
            continue;
        }
        if (first && is_meta_header(j)) {
            first = false;
            continue;  // our own artifact header
        }
        first = false;
        fn(j, local);
    }
    if (stats) *stats = local;
}

}  // namespace

std::vector<Product> parse_products(LineReader& in, ParseStats* stats) {
    std::vector<Product> out;
    std::unordered_set<std::string> seen;
    for_each_json_line(in, stats, [&](const json& j, ParseStats& st) {
        Product p;
        p.product_id = get_string(j, "asin");
        if (p.product_id.empty()) {
            ++st.missing_id;
            return;
        }
        if (!seen.insert(p.product_id).second) {
            ++st.duplicate_id;
            return;  // keep-first
        }
        p.title = get_string(j, "title");
        p.brand = get_string(j, "brand");
        p.features = get_string_list(j, "feature");
        if (p.features.empty()) p.features = get_string_list(j, "features");
        p.description = strip_html(get_joined_text(j, "description"));
        p.categories = get_string_list(j, "category");
        if (p.categories.empty()) p.categories = get_string_list(j, "categories");
        ++st.parsed;
        out.push_back(std::move(p));
    });
    return out;
}

std::vector<Review> parse_reviews(LineReader& in, ParseStats* stats) {
    std::vector<Review> out;
    std::unordered_set<std::string> seen;
    std::unordered_map<std::string, int> ordinal;  // per-product counter for id synthesis
    for_each_json_line(in, stats, [&](const json& j, ParseStats& st) {
        Review r;
        r.product_id = get_string(j, "asin");
        if (r.product_id.empty()) {
            ++st.missing_id;
            return;
        }
        r.review_id = get_string(j, "review_id");
        if (r.review_id.empty())
            r.review_id = r.product_id + "#" + std::to_string(ordinal[r.product_id]++);
        if (!seen.insert(r.review_id).second) {
            ++st.duplicate_id;
            return;
        }
        r.body = strip_html(get_joined_text(j, "reviewText"));
        r.summary = strip_html(get_string(j, "summary"));
        if (auto it = j.find("style"); it != j.end() && it->is_object()) {
            for (const auto& [k, v] : it->items()) {
                if (v.is_string())
                    r.style.emplace_back(k, v.get<std::string>());
                else
                    r.style.emplace_back(k, v.dump());
            }
            std::sort(r.style.begin(), r.style.end());
        }
        if (auto it = j.find("overall"); it != j.end() && it->is_number()) {
            double v = it->get<double>();
            if (v >= 1.0 && v <= 5.0) r.rating = v;
        }
        if (auto it = j.find("verified"); it != j.end() && it->is_boolean())
            r.verified = it->get<bool>();
        ++st.parsed;
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<Product> parse_products(std::istream& in, ParseStats* stats) {
    LineReader reader(in);
    return parse_products(reader, stats);
}

std::vector<Review> parse_reviews(std::istream& in, ParseStats* stats) {
    LineReader reader(in);
    return parse_reviews(reader, stats);
}

std::vector<Product> parse_products_file(const std::string& path, ParseStats* stats) {
    LineReader reader(path);
    return parse_products(reader, stats);
}

std::vector<Review> parse_reviews_file(const std::string& path, ParseStats* stats) {
    LineReader reader(path);
    return parse_reviews(reader, stats);
}

std::string serialize_product(const Product& p) {
    ordered_json j;
    j["asin"] = p.product_id;
    j["title"] = p.title;
    j["brand"] = p.brand;
    j["feature"] = p.features;
    j["description"] = p.description;
    j["category"] = p.categories;
    return j.dump();
}

std::string serialize_review(const Review& r) {
    ordered_json j;
    j["asin"] = r.product_id;
    j["review_id"] = r.review_id;
    j["summary"] = r.summary;
    j["reviewText"] = r.body;
    ordered_json style = ordered_json::object();
    for (const auto& [k, v] : r.style) style[k] = v;
    j["style"] = style;
    if (r.rating) j["overall"] = *r.rating;
    if (r.verified) j["verified"] = *r.verified;
    return j.dump();
}

namespace {

void append_part(std::string& text, std::string_view part) {
    std::string cleaned = collapse_whitespace(part);
    if (cleaned.empty()) return;
    if (!text.empty()) text += ' ';
    text += cleaned;
}

}  // namespace

ProductText assemble_product_text(const Product& p) {
    ProductText out;
    out.product_id = p.product_id;
    append_part(out.text, p.title);
    append_part(out.text, p.brand);
    for (const auto& f : p.features) append_part(out.text, f);
    append_part(out.text, p.description);
    return out;
}

ReviewText assemble_review_text(const Review& r) {
    ReviewText out;
    out.review_id = r.review_id;
    out.product_id = r.product_id;
    append_part(out.text, r.summary);
    for (const auto& [key, value] : r.style) append_part(out.text, value);
    append_part(out.text, r.body);
    return out;
}

Catalog filter_min_reviews(const Catalog& catalog, int min_reviews, FilterStats* stats) {
    FilterStats local;
    std::unordered_map<std::string, uint64_t> counts;
    std::unordered_set<std::string> known;
    known.reserve(catalog.products.size());
    for (const auto& p : catalog.products) known.insert(p.product_id);
    for (const auto& r : catalog.reviews) {
        if (known.count(r.product_id))
            ++counts[r.product_id];
        else
            ++local.dangling_reviews;
    }

    Catalog out;
    std::unordered_set<std::string> removed;
    for (const auto& p : catalog.products) {
        auto it = counts.find(p.product_id);
        uint64_t n = it == counts.end() ? 0 : it->second;
        if (n < static_cast<uint64_t>(std::max(min_reviews, 0))) {
            removed.insert(p.product_id);
            ++local.products_removed;
        } else {
            out.products.push_back(p);
        }
    }
    for (const auto& r : catalog.reviews) {
        if (removed.count(r.product_id)) {
            ++local.reviews_removed;
        } else {
            out.reviews.push_back(r);
        }
    }
    if (stats) *stats = local;
    return out;
}

}  // namespace hijackdet
