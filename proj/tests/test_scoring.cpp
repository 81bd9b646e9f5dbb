#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hijackdet/rng.hpp"
#include "hijackdet/scoring.hpp"
#include "hijackdet/textprep.hpp"

using namespace hijackdet;

namespace {

std::vector<ScoredReview> reviews_with(const std::string& product_id,
                                       const std::vector<double>& us) {
    std::vector<ScoredReview> out;
    for (size_t i = 0; i < us.size(); ++i) {
        ScoredReview s;
        s.product_id = product_id;
        s.review_id = product_id + "#" + std::to_string(i);
        s.u = us[i];
        out.push_back(s);
    }
    return out;
}

// trivially deterministic scorer for pipeline-shape tests
class FixedScorer : public PairScorer {
public:
    double score(const std::string&, const std::string& review_text) const override {
        return review_text.find("swap") != std::string::npos ? 0.9 : 0.1;
    }
};

Catalog small_catalog(int products, int reviews_each) {
    Catalog c;
    for (int i = 0; i < products; ++i) {
        Product p;
        p.product_id = "P" + std::to_string(i);
        p.title = "product " + std::to_string(i);
        c.products.push_back(p);
        for (int j = 0; j < reviews_each; ++j) {
            Review r;
            r.product_id = p.product_id;
            r.review_id = p.product_id + "#" + std::to_string(j);
            r.body = (j % 2 ? "normal text " : "swap text ") + std::to_string(j);
            c.reviews.push_back(r);
        }
    }
    return c;
}

}  // namespace

TEST_CASE("product score is the exact mean of the review scores") {
    auto scored = reviews_with("A", {0.2, 0.8});
    std::vector<ProductScore> ps = product_scores(scored);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].product_id == "A");
    CHECK(ps[0].n == 2);
    CHECK(ps[0].score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("all-zero scores give a zero mean") {
    auto ps = product_scores(reviews_with("A", {0.0, 0.0, 0.0}));
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].score == 0.0);
}

TEST_CASE("high review scores pile the histogram mass into the top bin") {
    auto ps = product_scores(reviews_with("A", {0.91, 0.95, 0.99, 1.0}));
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].histogram[9] == 4);
    for (int k = 0; k < 9; ++k) CHECK(ps[0].histogram[k] == 0);
}

TEST_CASE("product mean lies between the extreme review scores") {
    Rng rng(811);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> us;
        int n = 1 + static_cast<int>(rng.below(9));
        for (int i = 0; i < n; ++i) us.push_back(rng.uniform01());
        auto ps = product_scores(reviews_with("A", us));
        REQUIRE(ps.size() == 1);
        CHECK(ps[0].score >= *std::min_element(us.begin(), us.end()) - 1e-12);
        CHECK(ps[0].score <= *std::max_element(us.begin(), us.end()) + 1e-12);
    }
}

TEST_CASE("grouping is by product with ids sorted") {
    std::vector<ScoredReview> scored;
    for (const auto& s : reviews_with("B", {0.4})) scored.push_back(s);
    for (const auto& s : reviews_with("A", {0.2, 0.6})) scored.push_back(s);
    auto ps = product_scores(scored);
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].product_id == "A");
    CHECK(ps[1].product_id == "B");
    CHECK(ps[0].n == 2);
}

TEST_CASE("flagging is strictly greater than the threshold") {
    std::vector<ProductScore> scores(3);
    scores[0].product_id = "AT";
    scores[0].score = 0.5;
    scores[1].product_id = "OVER";
    scores[1].score = 0.51;
    scores[2].product_id = "UNDER";
    scores[2].score = 0.49;
    auto flagged = flag_products(scores, 0.5);
    REQUIRE(flagged.size() == 1);
    CHECK(flagged[0].product_id == "OVER");
}

TEST_CASE("flagged products sort by score descending then id") {
    std::vector<ProductScore> scores(4);
    scores[0] = {"C", 1, 0.8, {}};
    scores[1] = {"A", 1, 0.9, {}};
    scores[2] = {"B", 1, 0.8, {}};
    scores[3] = {"D", 1, 0.2, {}};
    auto flagged = flag_products(scores, 0.5);
    REQUIRE(flagged.size() == 3);
    CHECK(flagged[0].product_id == "A");
    CHECK(flagged[1].product_id == "B");
    CHECK(flagged[2].product_id == "C");
}

TEST_CASE("raising the threshold never adds a flag") {
    Rng rng(821);
    std::vector<ProductScore> scores(30);
    for (size_t i = 0; i < scores.size(); ++i) {
        scores[i].product_id = "P" + std::to_string(i);
        scores[i].n = 1;
        scores[i].score = rng.uniform01();
    }
    size_t prev = flag_products(scores, 0.0).size();
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        size_t now = flag_products(scores, t).size();
        CHECK(now <= prev);
        prev = now;
    }
}

TEST_CASE("score bins tile the unit interval") {
    CHECK(score_bin(0.0) == 0);
    CHECK(score_bin(0.05) == 0);
    CHECK(score_bin(0.55) == 5);
    CHECK(score_bin(0.95) == 9);
    CHECK(score_bin(1.0) == 9);  // top bin is closed
    // boundaries land in the upper bin
    CHECK(score_bin(0.1) == 1);
    CHECK(score_bin(0.7) == 7);
    double total = 0;
    Rng rng(823);
    for (int i = 0; i < 500; ++i) {
        int b = score_bin(rng.uniform01());
        CHECK(b >= 0);
        CHECK(b <= 9);
        total += 1;
    }
    CHECK(total == 500);
}

TEST_CASE("distribution counts products per mean-score bin") {
    std::vector<ProductScore> scores(2);
    scores[0] = {"A", 1, 0.95, {}};
    scores[1] = {"B", 1, 0.55, {}};
    auto dist = score_distribution(scores);
    CHECK(dist[9] == 1);
    CHECK(dist[5] == 1);
    CHECK(dist[0] == 0);

    auto empty = score_distribution(std::vector<ProductScore>{});
    for (auto c : empty) CHECK(c == 0);

    std::vector<ProductScore> low(1);
    low[0] = {"C", 1, 0.05, {}};
    CHECK(score_distribution(low)[0] == 1);
}

TEST_CASE("catalog scoring emits one row per joined review") {
    Catalog c = small_catalog(1, 1);
    FixedScorer scorer;
    ScoreCatalogStats stats;
    auto scored = score_catalog(c, scorer, 1, &stats);
    REQUIRE(scored.size() == 1);
    CHECK(scored[0].product_id == "P0");
    CHECK(stats.products_scored == 1);
    CHECK(stats.reviews_scored == 1);
}

TEST_CASE("empty catalogs score to nothing") {
    FixedScorer scorer;
    CHECK(score_catalog(Catalog{}, scorer, 1).empty());
}

TEST_CASE("products without reviews are omitted and counted") {
    Catalog c = small_catalog(2, 2);
    Product lonely;
    lonely.product_id = "LONELY";
    c.products.push_back(lonely);
    FixedScorer scorer;
    ScoreCatalogStats stats;
    auto scored = score_catalog(c, scorer, 1, &stats);
    CHECK(scored.size() == 4);
    CHECK(stats.products_without_reviews == 1);
    for (const auto& s : scored) CHECK(s.product_id != "LONELY");
}

TEST_CASE("thread count does not change scoring output") {
    Catalog c = small_catalog(7, 5);
    FixedScorer scorer;
    auto one = score_catalog(c, scorer, 1);
    for (int threads : {2, 3, 8}) {
        auto many = score_catalog(c, scorer, threads);
        REQUIRE(many.size() == one.size());
        for (size_t i = 0; i < one.size(); ++i) {
            CHECK(many[i].product_id == one[i].product_id);
            CHECK(many[i].review_id == one[i].review_id);
            CHECK(many[i].u == one[i].u);
        }
    }
}

TEST_CASE("swapped reviews score above originals under the keyword scorer") {
    Catalog c = small_catalog(3, 4);
    FixedScorer scorer;
    auto scored = score_catalog(c, scorer, 1);
    double swap_mean = 0, normal_mean = 0;
    int swaps = 0, normals = 0;
    for (const auto& s : scored) {
        if (s.u > 0.5) {
            swap_mean += s.u;
            ++swaps;
        } else {
            normal_mean += s.u;
            ++normals;
        }
    }
    REQUIRE(swaps > 0);
    REQUIRE(normals > 0);
    CHECK(swap_mean / swaps > normal_mean / normals);
}

TEST_CASE("external scores parse, validate, and preserve order") {
    std::istringstream in(
        "# tool meta comment\n"
        "product_id,review_id,u\n"
        "A1,A1#0,0.97\n"
        "A1,A1#1,1.5\n"
        "B2,B2#0,0.25\n"
        "B2,B2#1,not_a_number\n"
        "B2,B2#2\n");
    ExternalIngestStats stats;
    auto scored = ingest_external_scores(in, &stats);
    REQUIRE(scored.size() == 2);
    CHECK(scored[0].product_id == "A1");
    CHECK(scored[0].review_id == "A1#0");
    CHECK(scored[0].u == doctest::Approx(0.97));
    CHECK(scored[0].source == ScoreSource::External);
    CHECK(scored[1].product_id == "B2");
    CHECK(stats.accepted == 2);
    CHECK(stats.rejected == 3);
    CHECK(!stats.errors.empty());
}

TEST_CASE("empty external input gives an empty list") {
    std::istringstream in("");
    CHECK(ingest_external_scores(in).empty());
}

TEST_CASE("unknown review ids warn but are kept") {
    std::istringstream in("A1,A1#0,0.5\nZZ,ZZ#9,0.5\n");
    std::unordered_set<std::string> known = {"A1#0"};
    ExternalIngestStats stats;
    auto scored = ingest_external_scores(in, &stats, &known);
    CHECK(scored.size() == 2);
    CHECK(stats.unknown_review == 1);
}

TEST_CASE("histogram csv lists ten bins that sum to n") {
    auto ps = product_scores(reviews_with("A", {0.05, 0.55, 0.95, 0.97}));
    REQUIRE(ps.size() == 1);
    std::string csv = histogram_csv(ps[0]);
    CHECK(csv.rfind("bin_low,bin_high,count\n", 0) == 0);
    int rows = 0;
    long long total = 0;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        ++rows;
        total += std::stoll(line.substr(line.rfind(',') + 1));
    }
    CHECK(rows == 10);
    CHECK(total == 4);
}

TEST_CASE("histogram svg is well-formed enough to embed") {
    auto ps = product_scores(reviews_with("A<&>", {0.2, 0.9}));
    std::string svg = histogram_svg(ps[0], "subtitle & more");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("A<&>") == std::string::npos);      // escaped
    CHECK(svg.find("&amp;") != std::string::npos);
    CHECK(svg.find("<rect") != std::string::npos);
}

TEST_CASE("twin scorer clamps to the unit interval on arbitrary text") {
    TwinConfig cfg;
    cfg.embedding_dim = 4;
    cfg.hidden_sizes = {3};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.seed = 3;
    DatasetSplit split;
    LabeledPair p;
    p.product_text = "red ball red ball";
    p.review_text = "red ball again red";
    split.train = {p, p, p};
    TrainResult r = train(split, cfg);

    TwinPairScorer scorer(std::move(r.model));
    for (const char* text : {"", "red ball", "never seen words"}) {
        double u = scorer.score("red ball", text);
        CHECK(u >= 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("tfidf scorer mirrors the baseline function") {
    IdfModel idf = tfidf_fit(std::vector<std::string>{"a b", "a c"});
    TfidfPairScorer scorer(idf);
    CHECK(scorer.score("a b", "a b") == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(scorer.score("a b", "z") == doctest::Approx(1.0).epsilon(1e-12));
}
