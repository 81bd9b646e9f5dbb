#include "hijackdet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hijackdet/rng.hpp"
#include "hijackdet/textprep.hpp"

namespace hijackdet {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(SwapStrategy s) {
    switch (s) {
        case SwapStrategy::Original: return "original";
        case SwapStrategy::Inter: return "inter";
        case SwapStrategy::Intra: return "intra";
    }
    return "original";
}

SwapStrategy swap_strategy_from_string(std::string_view s) {
    if (s == "original") return SwapStrategy::Original;
    if (s == "inter") return SwapStrategy::Inter;
    if (s == "intra") return SwapStrategy::Intra;
    throw std::invalid_argument("unknown swap strategy: " + std::string(s));
}

std::string serialize_pair(const LabeledPair& p) {
    ordered_json j;
    j["host_product_id"] = p.host_product_id;
    j["donor_product_id"] = p.donor_product_id;
    j["label"] = p.label;
    j["strategy"] = std::string(to_string(p.strategy));
    j["product_text"] = p.product_text;
    j["review_text"] = p.review_text;
    return j.dump();
}

LabeledPair parse_pair(const std::string& json_line) {
    json j = json::parse(json_line);
    LabeledPair p;
    p.host_product_id = j.at("host_product_id").get<std::string>();
    p.donor_product_id = j.at("donor_product_id").get<std::string>();
    p.label = j.at("label").get<int>();
    if (p.label != 0 && p.label != 1) throw std::invalid_argument("pair label must be 0 or 1");
    p.strategy = swap_strategy_from_string(j.at("strategy").get<std::string>());
    p.product_text = j.at("product_text").get<std::string>();
    p.review_text = j.at("review_text").get<std::string>();
    return p;
}

namespace {

struct ProductIndex {
    // eligible products sorted by (primary category, product id)
    std::vector<const Product*> sorted;
    // category -> [begin, end) span in `sorted`
    std::unordered_map<std::string, std::pair<size_t, size_t>> spans;
    std::unordered_map<std::string, const Product*> by_id;
    std::unordered_map<std::string, std::string> texts;  // product_id -> assembled text

    const std::string& text_of(const std::string& product_id) {
        auto it = texts.find(product_id);
        if (it != texts.end()) return it->second;
        return texts.emplace(product_id, assemble_product_text(*by_id.at(product_id)).text)
            .first->second;
    }
};

ProductIndex build_index(const Catalog& catalog) {
    ProductIndex idx;
    for (const auto& p : catalog.products) {
        idx.by_id.emplace(p.product_id, &p);
        if (!p.primary_category().empty()) idx.sorted.push_back(&p);
    }
    std::sort(idx.sorted.begin(), idx.sorted.end(), [](const Product* a, const Product* b) {
        auto ca = a->primary_category(), cb = b->primary_category();
        if (ca != cb) return ca < cb;
        return a->product_id < b->product_id;
    });
    size_t i = 0;
    while (i < idx.sorted.size()) {
        size_t j = i;
        auto cat = idx.sorted[i]->primary_category();
        while (j < idx.sorted.size() && idx.sorted[j]->primary_category() == cat) ++j;
        idx.spans.emplace(std::string(cat), std::make_pair(i, j));
        i = j;
    }
    return idx;
}

}  // namespace

std::vector<LabeledPair> generate_inter_category(const Catalog& catalog, double unrelated_fraction,
                                                 uint64_t seed) {
    if (unrelated_fraction < 0.0 || unrelated_fraction > 1.0)
        throw std::invalid_argument("unrelated_fraction must be in [0, 1]");
    ProductIndex idx = build_index(catalog);
    if (idx.spans.size() < 2)
        throw std::runtime_error(
            "inter-category swapping impossible: need at least two primary categories");

    std::vector<LabeledPair> out;
    out.reserve(catalog.reviews.size());
    // Every product draws from its own stream, consumed in the order the
    // product's reviews appear. Interleaving with other products' reviews in
    // the input therefore cannot change any draw.
    std::unordered_map<std::string, Rng> streams;

    for (const auto& review : catalog.reviews) {
        auto pit = idx.by_id.find(review.product_id);
        if (pit == idx.by_id.end()) continue;  // dangling review
        const Product& own = *pit->second;
        if (own.primary_category().empty()) continue;

        auto sit = streams.find(review.product_id);
        if (sit == streams.end())
            sit = streams.emplace(review.product_id,
                                  Rng(mix_seed(seed, fnv1a64(review.product_id)))).first;
        Rng& rng = sit->second;

        auto [span_begin, span_end] = idx.spans.at(std::string(own.primary_category()));
        size_t outside = idx.sorted.size() - (span_end - span_begin);

        LabeledPair pair;
        pair.donor_product_id = review.product_id;
        pair.review_id = review.review_id;
        pair.review_text = assemble_review_text(review).text;

        bool swap = rng.uniform01() < unrelated_fraction;
        if (swap && outside > 0) {
            // uniform over products outside this category's span
            size_t k = static_cast<size_t>(rng.below(outside));
            if (k >= span_begin) k += span_end - span_begin;
            const Product& host = *idx.sorted[k];
            pair.host_product_id = host.product_id;
            pair.label = 1;
            pair.strategy = SwapStrategy::Inter;
        } else {
            pair.host_product_id = review.product_id;
            pair.label = 0;
            pair.strategy = SwapStrategy::Original;
        }
        pair.product_text = idx.text_of(pair.host_product_id);
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<LabeledPair> generate_intra_category(const Catalog& catalog,
                                                 const std::string& category, int max_pairs,
                                                 uint64_t seed, int reviews_per_pair,
                                                 IntraGenReport* report) {
    if (max_pairs < 0) throw std::invalid_argument("max_pairs must be >= 0");
    if (reviews_per_pair < 1) throw std::invalid_argument("reviews_per_pair must be >= 1");
    IntraGenReport local;
    std::vector<LabeledPair> out;

    std::vector<Product> members;
    for (const auto& p : catalog.products)
        if (p.primary_category() == category) members.push_back(p);
    std::sort(members.begin(), members.end(),
              [](const Product& a, const Product& b) { return a.product_id < b.product_id; });

    if (members.size() < 2) {
        local.warning = "category '" + category + "' has fewer than two products";
        if (report) *report = local;
        return out;
    }

    // Title token sets with frequent tokens removed, computed over this
    // category's products only.
    auto title_sets = filtered_title_token_sets(members, 0.25);

    // Per-product review pools, in input order, consumed front-to-back.
    std::unordered_map<std::string, std::vector<const Review*>> pools;
    for (const auto& r : catalog.reviews) pools[r.product_id].push_back(&r);
    std::unordered_map<std::string, size_t> next_review;

    std::unordered_map<std::string, std::string> texts;
    auto text_of = [&](const Product& p) -> const std::string& {
        auto it = texts.find(p.product_id);
        if (it != texts.end()) return it->second;
        return texts.emplace(p.product_id, assemble_product_text(p).text).first->second;
    };
    auto take_review = [&](const Product& p) -> const Review* {
        auto it = pools.find(p.product_id);
        if (it == pools.end()) return nullptr;
        size_t& cursor = next_review[p.product_id];
        if (cursor >= it->second.size()) return nullptr;
        return it->second[cursor++];
    };

    Rng rng(mix_seed(seed, fnv1a64(category)));
    const size_t n = members.size();
    std::unordered_set<uint64_t> accepted;
    long long budget = 50LL * std::max(max_pairs, 1) + 200;

    while (local.pairs_accepted < max_pairs && local.attempts < budget) {
        ++local.attempts;
        size_t i = static_cast<size_t>(rng.below(n));
        size_t j = static_cast<size_t>(rng.below(n - 1));
        if (j >= i) ++j;
        if (i > j) std::swap(i, j);
        uint64_t key = static_cast<uint64_t>(i) * n + j;
        if (accepted.count(key)) continue;
        if (jaccard_similarity(title_sets.at(members[i].product_id),
                               title_sets.at(members[j].product_id)) != 0.0)
            continue;
        accepted.insert(key);
        ++local.pairs_accepted;

        const Product& a = members[i];
        const Product& b = members[j];
        for (int round = 0; round < reviews_per_pair; ++round) {
            const Review* ra = take_review(a);
            const Review* rb = take_review(b);
            if (!ra && !rb) break;
            // Each drawn review yields a related pair on its own product and
            // an unrelated swap onto the partner, keeping labels balanced.
            auto emit = [&](const Review& r, const Product& own, const Product& partner) {
                std::string review_text = assemble_review_text(r).text;
                LabeledPair rel;
                rel.host_product_id = own.product_id;
                rel.donor_product_id = own.product_id;
                rel.review_id = r.review_id;
                rel.label = 0;
                rel.strategy = SwapStrategy::Original;
                rel.product_text = text_of(own);
                rel.review_text = review_text;
                out.push_back(std::move(rel));

                LabeledPair swp;
                swp.host_product_id = partner.product_id;
                swp.donor_product_id = own.product_id;
                swp.review_id = r.review_id;
                swp.label = 1;
                swp.strategy = SwapStrategy::Intra;
                swp.product_text = text_of(partner);
                swp.review_text = std::move(review_text);
                out.push_back(std::move(swp));
            };
            if (ra) emit(*ra, a, b);
            if (rb) emit(*rb, b, a);
        }
    }

    if (local.pairs_accepted == 0)
        local.warning = "no title-disjoint product pair found in category '" + category + "'";
    if (report) *report = local;
    return out;
}

DatasetSplit split_dataset(std::vector<LabeledPair> pairs, std::array<double, 3> ratios,
                           uint64_t seed, bool by_product) {
    double total = ratios[0] + ratios[1] + ratios[2];
    if (!(total > 0.0) || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
        throw std::invalid_argument("split ratios must be non-negative and sum > 0");
    for (auto& r : ratios) r /= total;

    DatasetSplit split;
    split.seed = seed;
    const size_t n = pairs.size();
    // 1e-9 absorbs IEEE artifacts like 0.7 * 10 = 6.999...; boundaries are
    // floor(cumulative_ratio * n), so split sizes are within one of n * ratio.
    size_t cut1 = static_cast<size_t>(std::floor(ratios[0] * static_cast<double>(n) + 1e-9));
    size_t cut2 = static_cast<size_t>(
        std::floor((ratios[0] + ratios[1]) * static_cast<double>(n) + 1e-9));

    Rng rng(mix_seed(seed, fnv1a64("split")));

    if (!by_product) {
        rng.shuffle(pairs);
        split.train.assign(std::make_move_iterator(pairs.begin()),
                           std::make_move_iterator(pairs.begin() + cut1));
        split.validation.assign(std::make_move_iterator(pairs.begin() + cut1),
                                std::make_move_iterator(pairs.begin() + cut2));
        split.test.assign(std::make_move_iterator(pairs.begin() + cut2),
                          std::make_move_iterator(pairs.end()));
        return split;
    }

    // Group by host product, shuffle groups, then fill splits group-wise up
    // to the same boundaries. Sizes are approximate but leakage-free.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < pairs.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(pairs[i].host_product_id);
        if (inserted) order.push_back(pairs[i].host_product_id);
        it->second.push_back(i);
    }
    rng.shuffle(order);
    for (const auto& id : order) {
        auto& dst = split.train.size() < cut1           ? split.train
                    : split.train.size() + split.validation.size() < cut2 ? split.validation
                                                                          : split.test;
        for (size_t i : groups.at(id)) dst.push_back(std::move(pairs[i]));
    }
    return split;
}

}  // namespace hijackdet
