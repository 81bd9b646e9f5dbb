#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hijackdet {

struct RocPoint {
    double threshold = 0;  // +inf for the leading (0,0) point
    double fpr = 0;
    double tpr = 0;
};

struct EvalReport {
    double accuracy = 0;
    double auc = 0;
    std::vector<RocPoint> roc;
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    size_t n = 0;
};

// Fraction of samples where (score >= threshold) matches (label == 1).
// A score exactly at the threshold predicts positive.
double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

// Mann-Whitney rank statistic: (concordant pairs + 0.5 * tied pairs) / (P*N).
// Throws std::invalid_argument when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

// Sweep over unique score thresholds, descending, starting at (0,0).
// Trapezoidal area over these points equals auc() exactly.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> roc);

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

std::string report_to_json(const EvalReport& report);
std::string roc_to_csv(std::span<const RocPoint> roc);

}  // namespace hijackdet
