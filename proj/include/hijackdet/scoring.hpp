#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hijackdet/corpus.hpp"
#include "hijackdet/model.hpp"

namespace hijackdet {

enum class ScoreSource { Internal, External };

struct ScoredReview {
    std::string product_id;
    std::string review_id;
    double u = 0;  // unrelated score in [0,1]
    ScoreSource source = ScoreSource::Internal;
};

struct ProductScore {
    std::string product_id;
    uint64_t n = 0;    // review count
    double score = 0;  // mean u over the product's reviews
    std::array<uint64_t, 10> histogram{};  // u counts over [0,0.1),...,[0.9,1.0]
};

class PairScorer {
public:
    virtual ~PairScorer() = default;
    virtual double score(const std::string& product_text, const std::string& review_text) const = 0;
};

class TwinPairScorer : public PairScorer {
public:
    explicit TwinPairScorer(TwinModel model);
    double score(const std::string& product_text, const std::string& review_text) const override;

private:
    TwinModel model_;
};

class TfidfPairScorer : public PairScorer {
public:
    explicit TfidfPairScorer(IdfModel idf);
    double score(const std::string& product_text, const std::string& review_text) const override;

private:
    IdfModel idf_;
};

struct ScoreCatalogStats {
    uint64_t products_scored = 0;
    uint64_t products_without_reviews = 0;  // omitted from output
    uint64_t reviews_scored = 0;
};

// One ScoredReview per (product, review) pair, in catalog order. The
// product text is assembled once per product; sharding over threads
// produces the same output as a single pass.
std::vector<ScoredReview> score_catalog(const Catalog& catalog, const PairScorer& scorer,
                                        int threads = 1, ScoreCatalogStats* stats = nullptr);

// Grouped by product, sorted by product_id.
std::vector<ProductScore> product_scores(std::span<const ScoredReview> scored);

// Strictly greater than threshold; sorted by score descending, ties by
// product_id ascending.
std::vector<ProductScore> flag_products(std::span<const ProductScore> scores,
                                        double threshold = 0.5);

// Products per mean-score bin.
std::array<uint64_t, 10> score_distribution(std::span<const ProductScore> scores);

// Bin k covers [k/10, (k+1)/10); 1.0 falls in the top bin.
int score_bin(double value);

struct ExternalIngestStats {
    uint64_t lines = 0;
    uint64_t accepted = 0;
    uint64_t rejected = 0;
    uint64_t unknown_review = 0;  // warned but kept
    std::vector<std::string> errors;  // first few rejection reasons
};

// CSV "product_id,review_id,u". Rejects rows whose u is unparseable or
// outside [0,1]. When known_review_ids is given, unknown review ids are
// counted as warnings but kept.
std::vector<ScoredReview> ingest_external_scores(
    std::istream& in, ExternalIngestStats* stats = nullptr,
    const std::unordered_set<std::string>* known_review_ids = nullptr);

// Static bar chart of a product's u histogram.
std::string histogram_svg(const ProductScore& score, std::string_view subtitle = {});
std::string histogram_csv(const ProductScore& score);

}  // namespace hijackdet
