#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hijackdet/eval.hpp"
#include "hijackdet/rng.hpp"

using namespace hijackdet;

namespace {

// Independent oracle: enumerate every (positive, negative) pair.
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double concordant = 0, tied = 0;
    long long pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            ++pos;
            for (size_t j = 0; j < scores.size(); ++j) {
                if (labels[j] != 0) continue;
                if (scores[i] > scores[j])
                    concordant += 1;
                else if (scores[i] == scores[j])
                    tied += 1;
            }
        } else {
            ++neg;
        }
    }
    return (concordant + 0.5 * tied) / (static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace

TEST_CASE("accuracy on the worked four-sample case") {
    std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK(accuracy(scores, labels, 0.5) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("accuracy endpoints") {
    std::vector<double> perfect = {0.1, 0.2, 0.8, 0.9};
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK(accuracy(perfect, labels) == 1.0);
    std::vector<double> inverted = {0.9, 0.8, 0.2, 0.1};
    CHECK(accuracy(inverted, labels) == 0.0);
}

TEST_CASE("a score exactly at the threshold predicts positive") {
    std::vector<double> scores = {0.5};
    std::vector<int> pos = {1}, neg = {0};
    CHECK(accuracy(scores, pos, 0.5) == 1.0);
    CHECK(accuracy(scores, neg, 0.5) == 0.0);
}

TEST_CASE("auc on the worked four-sample case") {
    std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK(auc(scores, labels) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auc endpoints and ties") {
    std::vector<int> labels = {0, 0, 1, 1};
    std::vector<double> separated = {0.1, 0.2, 0.8, 0.9};
    std::vector<double> all_tied = {0.5, 0.5, 0.5, 0.5};
    CHECK(auc(separated, labels) == 1.0);
    CHECK(auc(all_tied, labels) == 0.5);
}

TEST_CASE("auc requires both classes") {
    std::vector<double> scores = {0.1, 0.9};
    std::vector<int> only_pos = {1, 1}, only_neg = {0, 0};
    CHECK_THROWS_AS(auc(scores, only_pos), std::invalid_argument);
    CHECK_THROWS_AS(auc(scores, only_neg), std::invalid_argument);
}

TEST_CASE("auc matches brute-force enumeration on random tie-heavy instances") {
    Rng rng(1009);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 2 + rng.below(499);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        // coarse grid injects plenty of ties
        uint64_t grid = 2 + rng.below(12);
        for (size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(grid)) / static_cast<double>(grid - 1);
            labels[i] = static_cast<int>(rng.below(2));
        }
        labels[0] = 0;  // guarantee both classes
        labels[1] = 1;

        double fast = auc(scores, labels);
        double slow = brute_force_auc(scores, labels);
        CHECK(std::abs(fast - slow) <= 1e-12);
    }
}

TEST_CASE("roc of perfect separation is the unit step") {
    std::vector<double> scores = {0.1, 0.9};
    std::vector<int> labels = {0, 1};
    std::vector<RocPoint> roc = roc_curve(scores, labels);
    REQUIRE(roc.size() == 3);
    CHECK(std::isinf(roc[0].threshold));
    CHECK(roc[0].fpr == 0.0);
    CHECK(roc[0].tpr == 0.0);
    CHECK(roc[1].fpr == 0.0);
    CHECK(roc[1].tpr == 1.0);
    CHECK(roc[2].fpr == 1.0);
    CHECK(roc[2].tpr == 1.0);
    CHECK(trapezoid_area(roc) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one positive and one negative tied give area one half") {
    std::vector<double> scores = {0.5, 0.5};
    std::vector<int> labels = {0, 1};
    std::vector<RocPoint> roc = roc_curve(scores, labels);
    CHECK(trapezoid_area(roc) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("trapezoid area of the four-sample roc is 0.75") {
    std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK(trapezoid_area(roc_curve(scores, labels)) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("trapezoid area equals auc on random instances") {
    Rng rng(2027);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 2 + rng.below(300);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        uint64_t grid = 2 + rng.below(20);
        for (size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(grid)) / static_cast<double>(grid);
            labels[i] = static_cast<int>(rng.below(2));
        }
        labels[0] = 0;
        labels[1] = 1;
        CHECK(std::abs(trapezoid_area(roc_curve(scores, labels)) - auc(scores, labels)) <= 1e-12);
    }
}

TEST_CASE("evaluation is invariant under joint permutation") {
    Rng rng(3041);
    size_t n = 80;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform01();
        labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;

    EvalReport base = evaluate(scores, labels, 0.5);

    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffler(3042);
    shuffler.shuffle(perm);
    std::vector<double> s2(n);
    std::vector<int> l2(n);
    for (size_t i = 0; i < n; ++i) {
        s2[i] = scores[perm[i]];
        l2[i] = labels[perm[i]];
    }

    EvalReport shuffled = evaluate(s2, l2, 0.5);
    CHECK(base.accuracy == shuffled.accuracy);
    CHECK(base.auc == shuffled.auc);
    CHECK(base.tp == shuffled.tp);
    CHECK(base.fp == shuffled.fp);
    CHECK(base.tn == shuffled.tn);
    CHECK(base.fn == shuffled.fn);
    REQUIRE(base.roc.size() == shuffled.roc.size());
    for (size_t i = 0; i < base.roc.size(); ++i) {
        CHECK(base.roc[i].fpr == shuffled.roc[i].fpr);
        CHECK(base.roc[i].tpr == shuffled.roc[i].tpr);
    }
}

TEST_CASE("evaluate fills the confusion matrix consistently") {
    std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    std::vector<int> labels = {0, 0, 1, 1};
    EvalReport r = evaluate(scores, labels, 0.5);
    CHECK(r.n == 4);
    CHECK(r.tp == 1);  // 0.8
    CHECK(r.fn == 1);  // 0.35
    CHECK(r.tn == 2);  // 0.1, 0.4
    CHECK(r.fp == 0);
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.auc == doctest::Approx(0.75));
}

TEST_CASE("report serialization exposes the metric fields") {
    std::vector<double> scores = {0.2, 0.9};
    std::vector<int> labels = {0, 1};
    std::string j = report_to_json(evaluate(scores, labels, 0.5));
    for (const char* key : {"accuracy", "auc", "tp", "fp", "tn", "fn", "n"})
        CHECK(j.find(key) != std::string::npos);
}

TEST_CASE("roc csv has the documented header and row count") {
    std::vector<double> scores = {0.2, 0.9};
    std::vector<int> labels = {0, 1};
    EvalReport r = evaluate(scores, labels, 0.5);
    std::string csv = roc_to_csv(r.roc);
    CHECK(csv.rfind("threshold,fpr,tpr\n", 0) == 0);
    size_t rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == r.roc.size() + 1);
}
