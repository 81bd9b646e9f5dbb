#include "hijackdet/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace hijackdet {

TwinPairScorer::TwinPairScorer(TwinModel model) : model_(std::move(model)) {}

double TwinPairScorer::score(const std::string& product_text,
                             const std::string& review_text) const {
    int max_len = model_.params.config.max_len;
    TokenSequence p = to_sequence(product_text, model_.vocab, max_len);
    TokenSequence r = to_sequence(review_text, model_.vocab, max_len);
    return forward_pair(p, r, model_.params).u;
}

TfidfPairScorer::TfidfPairScorer(IdfModel idf) : idf_(std::move(idf)) {}

double TfidfPairScorer::score(const std::string& product_text,
                              const std::string& review_text) const {
    return tfidf_baseline_score(product_text, review_text, idf_);
}

std::vector<ScoredReview> score_catalog(const Catalog& catalog, const PairScorer& scorer,
                                        int threads, ScoreCatalogStats* stats) {
    ScoreCatalogStats local;

    // Assemble each product's text once up front.
    std::unordered_map<std::string, std::string> product_texts;
    product_texts.reserve(catalog.products.size());
    for (const auto& p : catalog.products)
        product_texts.emplace(p.product_id, assemble_product_text(p).text);

    struct Job {
        const Review* review;
        const std::string* product_text;
    };
    std::vector<Job> jobs;
    jobs.reserve(catalog.reviews.size());
    std::unordered_set<std::string> scored_products;
    for (const auto& r : catalog.reviews) {
        auto it = product_texts.find(r.product_id);
        if (it == product_texts.end()) continue;  // review of an unknown product
        jobs.push_back({&r, &it->second});
        scored_products.insert(r.product_id);
    }
    local.products_scored = scored_products.size();
    local.products_without_reviews = catalog.products.size() - scored_products.size();
    local.reviews_scored = jobs.size();

    std::vector<ScoredReview> out(jobs.size());
    auto run_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const Job& job = jobs[i];
            out[i].product_id = job.review->product_id;
            out[i].review_id = job.review->review_id;
            out[i].u = scorer.score(*job.product_text, assemble_review_text(*job.review).text);
            out[i].source = ScoreSource::Internal;
        }
    };

    // Each job writes only its own slot, so any contiguous partition yields
    // the same output as a single pass.
    int n_threads = std::max(1, threads);
    if (n_threads == 1 || jobs.size() < 2) {
        run_range(0, jobs.size());
    } else {
        n_threads = std::min<size_t>(n_threads, jobs.size());
        std::vector<std::thread> workers;
        size_t chunk = (jobs.size() + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            size_t begin = static_cast<size_t>(t) * chunk;
            size_t end = std::min(jobs.size(), begin + chunk);
            if (begin >= end) break;
            workers.emplace_back(run_range, begin, end);
        }
        for (auto& w : workers) w.join();
    }

    if (stats) *stats = local;
    return out;
}

int score_bin(double value) {
    int bin = static_cast<int>(value * 10.0);
    return std::clamp(bin, 0, 9);
}

std::vector<ProductScore> product_scores(std::span<const ScoredReview> scored) {
    std::map<std::string, ProductScore> by_product;
    for (const auto& s : scored) {
        ProductScore& ps = by_product[s.product_id];
        if (ps.n == 0) ps.product_id = s.product_id;
        ++ps.n;
        ps.score += s.u;
        ++ps.histogram[static_cast<size_t>(score_bin(s.u))];
    }
    std::vector<ProductScore> out;
    out.reserve(by_product.size());
    for (auto& [id, ps] : by_product) {
        ps.score /= static_cast<double>(ps.n);
        out.push_back(std::move(ps));
    }
    return out;
}

std::vector<ProductScore> flag_products(std::span<const ProductScore> scores, double threshold) {
    std::vector<ProductScore> out;
    for (const auto& ps : scores)
        if (ps.score > threshold) out.push_back(ps);
    std::sort(out.begin(), out.end(), [](const ProductScore& a, const ProductScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.product_id < b.product_id;
    });
    return out;
}

std::array<uint64_t, 10> score_distribution(std::span<const ProductScore> scores) {
    std::array<uint64_t, 10> dist{};
    for (const auto& ps : scores) ++dist[static_cast<size_t>(score_bin(ps.score))];
    return dist;
}

std::vector<ScoredReview> ingest_external_scores(
    std::istream& in, ExternalIngestStats* stats,
    const std::unordered_set<std::string>* known_review_ids) {
    ExternalIngestStats local;
    std::vector<ScoredReview> out;
    std::string line;
    auto reject = [&](uint64_t line_no, const std::string& why) {
        ++local.rejected;
        if (local.errors.size() < 5)
            local.errors.push_back("line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++local.lines;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        if (line == "product_id,review_id,u") continue;

        size_t c1 = line.find(',');
        size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) {
            reject(local.lines, "expected 3 comma-separated fields");
            continue;
        }
        if (line.find(',', c2 + 1) != std::string::npos) {
            reject(local.lines, "expected 3 comma-separated fields");
            continue;
        }
        ScoredReview s;
        s.product_id = line.substr(0, c1);
        s.review_id = line.substr(c1 + 1, c2 - c1 - 1);
        std::string u_text = line.substr(c2 + 1);
        if (s.product_id.empty() || s.review_id.empty()) {
            reject(local.lines, "empty id field");
            continue;
        }
        char* end = nullptr;
        double u = std::strtod(u_text.c_str(), &end);
        if (end == u_text.c_str() || *end != '\0' || !std::isfinite(u)) {
            reject(local.lines, "unparseable score '" + u_text + "'");
            continue;
        }
        if (u < 0.0 || u > 1.0) {
            reject(local.lines, "score " + u_text + " outside [0,1]");
            continue;
        }
        s.u = u;
        s.source = ScoreSource::External;
        if (known_review_ids && !known_review_ids->count(s.review_id)) ++local.unknown_review;
        ++local.accepted;
        out.push_back(std::move(s));
    }
    if (stats) *stats = local;
    return out;
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string histogram_svg(const ProductScore& score, std::string_view subtitle) {
    constexpr int kWidth = 420, kHeight = 240;
    constexpr double kLeft = 40, kBottom = 200, kTop = 40;
    constexpr double kBarSpan = 36, kBarWidth = 30;

    uint64_t max_count = 1;
    for (uint64_t c : score.histogram) max_count = std::max(max_count, c);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\" "
        << "font-family=\"sans-serif\">" << xml_escape(score.product_id) << " (n=" << score.n
        << ", score=";
    svg.precision(3);
    svg << std::fixed << score.score << ")</text>\n";
    if (!subtitle.empty())
        svg << "<text x=\"" << kWidth / 2 << "\" y=\"32\" text-anchor=\"middle\" font-size=\"11\" "
            << "font-family=\"sans-serif\">" << xml_escape(subtitle) << "</text>\n";

    for (size_t k = 0; k < score.histogram.size(); ++k) {
        double x = kLeft + static_cast<double>(k) * kBarSpan + 3;
        double h = (kBottom - kTop) * static_cast<double>(score.histogram[k]) /
                   static_cast<double>(max_count);
        double y = kBottom - h;
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kBarWidth
            << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
        if (score.histogram[k] > 0)
            svg << "<text x=\"" << x + kBarWidth / 2 << "\" y=\"" << y - 3
                << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">"
                << score.histogram[k] << "</text>\n";
        svg << "<text x=\"" << x + kBarWidth / 2 << "\" y=\"" << kBottom + 14
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">0."
            << k << "</text>\n";
    }
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\""
        << kLeft + 10 * kBarSpan << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft + 10 * kBarSpan << "\" y=\"" << kBottom + 28
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
        << "unrelated score bins</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::string histogram_csv(const ProductScore& score) {
    std::ostringstream out;
    out << "bin_low,bin_high,count\n";
    for (size_t k = 0; k < score.histogram.size(); ++k) {
        out << "0." << k << ',';
        if (k == 9)
            out << "1.0";
        else
            out << "0." << k + 1;
        out << ',' << score.histogram[k] << '\n';
    }
    return out.str();
}

}  // namespace hijackdet
