#include "hijackdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hijackdet {

using nlohmann::ordered_json;

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels differ in length");
}

}  // namespace

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
    check_sizes(scores, labels);
    if (scores.empty()) throw std::invalid_argument("accuracy of empty sample");
    long long correct = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int pred = scores[i] >= threshold ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);
    const size_t n = scores.size();
    long long pos = 0;
    for (int y : labels) pos += (y == 1);
    long long neg = static_cast<long long>(n) - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("auc undefined: only one class present");

    // Average-rank formulation: AUC = (sum of positive ranks - P(P+1)/2) / (P*N).
    // Ties get the mean of the ranks they span, which contributes the 0.5 factor.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // ranks are 1-based over [i, j)
        double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += mean_rank;
        i = j;
    }
    double p = static_cast<double>(pos);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);
    long long pos = 0;
    for (int y : labels) pos += (y == 1);
    long long neg = static_cast<long long>(scores.size()) - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc undefined: only one class present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> roc;
    roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        // all samples sharing a score cross the threshold together
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1)
                ++tp;
            else
                ++fp;
        }
        roc.push_back({scores[order[i]], static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos)});
        i = j;
    }
    return roc;
}

double trapezoid_area(std::span<const RocPoint> roc) {
    double area = 0.0;
    for (size_t i = 1; i < roc.size(); ++i)
        area += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
    return area;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    double threshold) {
    check_sizes(scores, labels);
    EvalReport r;
    r.n = scores.size();
    for (size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool truth = labels[i] == 1;
        if (pred && truth)
            ++r.tp;
        else if (pred && !truth)
            ++r.fp;
        else if (!pred && !truth)
            ++r.tn;
        else
            ++r.fn;
    }
    r.accuracy = accuracy(scores, labels, threshold);
    r.roc = roc_curve(scores, labels);
    r.auc = auc(scores, labels);
    return r;
}

std::string report_to_json(const EvalReport& report) {
    ordered_json j;
    j["n"] = report.n;
    j["accuracy"] = report.accuracy;
    j["auc"] = report.auc;
    j["tp"] = report.tp;
    j["fp"] = report.fp;
    j["tn"] = report.tn;
    j["fn"] = report.fn;
    return j.dump();
}

std::string roc_to_csv(std::span<const RocPoint> roc) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,fpr,tpr\n";
    for (const auto& p : roc) {
        if (std::isinf(p.threshold))
            out << "inf";
        else
            out << p.threshold;
        out << ',' << p.fpr << ',' << p.tpr << '\n';
    }
    return out.str();
}

}  // namespace hijackdet
