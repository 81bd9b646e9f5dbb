#include "fixture_gen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

#include "hijackdet/jsonl.hpp"
#include "hijackdet/rng.hpp"

namespace hijackdet::fixture {

namespace {

const char* kCategoryNames[4] = {"Sports & Outdoors", "Home & Kitchen", "Electronics",
                                 "Pet Supplies"};
// Disjoint consonant pools keep the four category vocabularies disjoint by
// construction.
const char* kConsonants[4] = {"bdfg", "klmn", "prst", "vwzj"};
const char* kVowels = "aeiou";

const std::vector<std::string> kFillers = {"the",  "and",  "with", "for",  "this",
                                           "very", "really", "great", "good", "nice"};

std::string make_word(Rng& rng, int cat, int syllables) {
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += kConsonants[cat][rng.below(4)];
        w += kVowels[rng.below(5)];
    }
    return w;
}

std::vector<std::string> make_words(Rng& rng, int cat, int syllables, int count,
                                    std::unordered_set<std::string>& taken) {
    std::vector<std::string> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        std::string w = make_word(rng, cat, syllables);
        if (taken.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

struct ProductWords {
    std::vector<std::string> specific;  // product_vocab words unique to this product
};

void append_vector_line(std::string& out, const std::string& token,
                        const std::vector<double>& v) {
    out += token;
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof(buf), " %.6f", x);
        out += buf;
    }
    out += '\n';
}

std::vector<double> anchor_vector(int cat, int dim) {
    // vertices of a regular tetrahedron, scaled to unit norm, in dims 0..2
    static const double kAnchors[4][3] = {
        {1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    std::vector<double> v(dim, 0.0);
    double inv = 1.0 / std::sqrt(3.0);
    for (int k = 0; k < 3 && k < dim; ++k) v[k] = kAnchors[cat][k] * inv;
    return v;
}

std::vector<double> noisy_anchor(Rng& rng, int cat, int dim, double noise) {
    std::vector<double> v = anchor_vector(cat, dim);
    for (auto& x : v) x += rng.uniform(-noise, noise);
    return v;
}

}  // namespace

Fixture make_fixture(const FixtureSpec& spec) {
    if (spec.categories < 2 || spec.categories > 4)
        throw std::invalid_argument("fixture supports 2..4 categories");
    if (spec.planted > spec.categories * spec.products_per_category)
        throw std::invalid_argument("more planted products than products");

    Fixture fx;
    for (int c = 0; c < spec.categories; ++c) fx.category_names.push_back(kCategoryNames[c]);

    // --- vocabulary -------------------------------------------------------
    std::unordered_set<std::string> taken(kFillers.begin(), kFillers.end());
    std::vector<std::vector<std::string>> cat_words(spec.categories);
    std::vector<std::vector<std::string>> brands(spec.categories);
    std::vector<std::vector<ProductWords>> product_words(spec.categories);
    for (int c = 0; c < spec.categories; ++c) {
        Rng rng(mix_seed(spec.seed, {fnv1a64("vocab"), static_cast<uint64_t>(c)}));
        cat_words[c] = make_words(rng, c, 3, spec.category_vocab, taken);
        brands[c] = make_words(rng, c, 2, spec.brand_vocab, taken);
        product_words[c].resize(spec.products_per_category);
        for (int p = 0; p < spec.products_per_category; ++p)
            product_words[c][p].specific = make_words(rng, c, 4, spec.product_vocab, taken);
    }

    // --- embeddings -------------------------------------------------------
    // Filler words are deliberately absent: they look up to the zero vector
    // and leave every cosine untouched.
    for (int c = 0; c < spec.categories; ++c) {
        Rng rng(mix_seed(spec.seed, {fnv1a64("embed"), static_cast<uint64_t>(c)}));
        for (const auto& w : cat_words[c])
            append_vector_line(fx.embeddings_text, w,
                               noisy_anchor(rng, c, spec.embedding_dim, spec.category_noise));
        for (const auto& w : brands[c])
            append_vector_line(fx.embeddings_text, w,
                               noisy_anchor(rng, c, spec.embedding_dim, spec.category_noise));
        for (const auto& pw : product_words[c])
            for (const auto& w : pw.specific)
                append_vector_line(fx.embeddings_text, w,
                                   noisy_anchor(rng, c, spec.embedding_dim, spec.product_noise));
    }

    // --- products ---------------------------------------------------------
    auto product_id = [](int c, int p) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "FX%d%03d", c, p);
        return std::string(buf);
    };

    for (int c = 0; c < spec.categories; ++c) {
        for (int p = 0; p < spec.products_per_category; ++p) {
            Rng rng(mix_seed(spec.seed, {fnv1a64("product"), static_cast<uint64_t>(c),
                                         static_cast<uint64_t>(p)}));
            const auto& spc = product_words[c][p].specific;
            Product prod;
            prod.product_id = product_id(c, p);
            // titles use only product-specific words, so same-category title
            // token sets are disjoint
            std::vector<std::string> title_words;
            for (int k = 0; k < 4; ++k) title_words.push_back(capitalize(spc[k]));
            prod.title = join(title_words);
            prod.brand = capitalize(brands[c][rng.below(brands[c].size())]);
            for (int f = 0; f < 2; ++f) {
                std::vector<std::string> fw;
                for (int k = 0; k < 3; ++k)
                    fw.push_back(cat_words[c][rng.below(cat_words[c].size())]);
                prod.features.push_back(join(fw));
            }
            std::vector<std::string> desc;
            for (int k = 4; k < spec.product_vocab; ++k) desc.push_back(spc[k]);
            for (int k = 0; k < 6; ++k)
                desc.push_back(cat_words[c][rng.below(cat_words[c].size())]);
            desc.push_back(kFillers[rng.below(kFillers.size())]);
            rng.shuffle(desc);
            prod.description = join(desc);
            prod.categories = {fx.category_names[c], "General"};
            fx.train_catalog.products.push_back(prod);
        }
    }
    fx.scoring_catalog.products = fx.train_catalog.products;

    // --- reviews ----------------------------------------------------------
    // A review of product (c, p) draws from that product's specific words
    // plus its category vocabulary; the stream is keyed by a purpose tag so
    // train and scoring reviews differ.
    auto make_review = [&](int c, int p, const std::string& host_id, int ordinal,
                           std::string_view purpose) {
        Rng rng(mix_seed(spec.seed, {fnv1a64(purpose), static_cast<uint64_t>(c),
                                     static_cast<uint64_t>(p), static_cast<uint64_t>(ordinal)}));
        const auto& spc = product_words[c][p].specific;
        Review r;
        r.product_id = host_id;
        r.review_id = host_id + "#" + std::to_string(ordinal);

        std::vector<size_t> pick(spc.size());
        for (size_t k = 0; k < pick.size(); ++k) pick[k] = k;
        rng.shuffle(pick);

        std::vector<std::string> summary = {cat_words[c][rng.below(cat_words[c].size())],
                                            spc[pick[0]]};
        r.summary = capitalize(join(summary));

        std::vector<std::string> body;
        for (int k = 1; k <= 3; ++k) body.push_back(spc[pick[k]]);
        for (int k = 0; k < 6; ++k)
            body.push_back(cat_words[c][rng.below(cat_words[c].size())]);
        for (int k = 0; k < 2; ++k) body.push_back(kFillers[rng.below(kFillers.size())]);
        rng.shuffle(body);
        r.body = capitalize(join(body));

        if (ordinal % 4 == 0)
            r.style.emplace_back("Color:",
                                 capitalize(cat_words[c][rng.below(cat_words[c].size())]));
        if (ordinal % 6 == 0) r.style.emplace_back("Size:", std::to_string(1 + rng.below(5)));
        std::sort(r.style.begin(), r.style.end());
        r.rating = static_cast<double>(3 + rng.below(3));
        r.verified = rng.below(2) == 0;
        return r;
    };

    for (int c = 0; c < spec.categories; ++c)
        for (int p = 0; p < spec.products_per_category; ++p) {
            std::string id = product_id(c, p);
            for (int k = 0; k < spec.reviews_per_product; ++k)
                fx.train_catalog.reviews.push_back(make_review(c, p, id, k, "review"));
        }

    // --- planted hijacks in the scoring catalog ---------------------------
    std::vector<std::pair<int, int>> all_products;
    for (int c = 0; c < spec.categories; ++c)
        for (int p = 0; p < spec.products_per_category; ++p) all_products.emplace_back(c, p);
    Rng plant_rng(mix_seed(spec.seed, {fnv1a64("plant")}));
    plant_rng.shuffle(all_products);
    std::unordered_set<std::string> planted;
    for (int k = 0; k < spec.planted; ++k) {
        auto [c, p] = all_products[k];
        planted.insert(product_id(c, p));
    }
    fx.planted_ids.assign(planted.begin(), planted.end());
    std::sort(fx.planted_ids.begin(), fx.planted_ids.end());

    for (int c = 0; c < spec.categories; ++c)
        for (int p = 0; p < spec.products_per_category; ++p) {
            std::string id = product_id(c, p);
            if (!planted.count(id)) {
                // clean product: same reviews as the training catalog
                for (int k = 0; k < spec.reviews_per_product; ++k)
                    fx.scoring_catalog.reviews.push_back(make_review(c, p, id, k, "review"));
                continue;
            }
            // hijacked product: every review was written for a donor in a
            // different category, rotating across all of them
            Rng rng(mix_seed(spec.seed, {fnv1a64("hijack"), fnv1a64(id)}));
            for (int k = 0; k < spec.reviews_per_product; ++k) {
                int donor_cat = (c + 1 + k % (spec.categories - 1)) % spec.categories;
                int donor_p = static_cast<int>(rng.below(spec.products_per_category));
                fx.scoring_catalog.reviews.push_back(
                    make_review(donor_cat, donor_p, id, k, "hijack"));
            }
        }

    return fx;
}

namespace {

void write_jsonl(const std::filesystem::path& path, const std::vector<Product>& products) {
    std::string out;
    for (const auto& p : products) {
        out += serialize_product(p);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Review>& reviews) {
    std::string out;
    for (const auto& r : reviews) {
        out += serialize_review(r);
        out += '\n';
    }
    atomic_write_file(path, out);
}

}  // namespace

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "products.jsonl", fixture.train_catalog.products);
    write_jsonl(dir / "reviews.jsonl", fixture.train_catalog.reviews);
    write_jsonl(dir / "scoring_products.jsonl", fixture.scoring_catalog.products);
    write_jsonl(dir / "scoring_reviews.jsonl", fixture.scoring_catalog.reviews);
    atomic_write_file(dir / "embeddings.txt", fixture.embeddings_text);
    std::string planted;
    for (const auto& id : fixture.planted_ids) {
        planted += id;
        planted += '\n';
    }
    atomic_write_file(dir / "planted.txt", planted);
}

}  // namespace hijackdet::fixture
