// Acceptance gate: runs every release criterion end to end and prints one
// [PASS]/[FAIL] line per criterion. Exit code is the number of failures.
//
// The pipeline criteria run on the bundled synthetic fixture (4 vocabulary-
// distinct categories, 200 products, 2400 reviews, 10 planted hijacks).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fixture_gen.hpp"
#include "hijackdet/eval.hpp"
#include "hijackdet/model.hpp"
#include "hijackdet/rng.hpp"
#include "hijackdet/scoring.hpp"
#include "hijackdet/synthgen.hpp"
#include "hijackdet/textprep.hpp"

using namespace hijackdet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    if (!ok) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------- fixture --

struct PipelineRun {
    fixture::Fixture fixture;
    TrainResult trained;
    double inter_accuracy = 0;
    double inter_auc = 0;
    double intra_auc = 0;
    double train_seconds = 0;
    bool ok = false;
    std::string error;
};

PipelineRun run_pipeline() {
    PipelineRun run;
    try {
        auto started = Clock::now();
        run.fixture = fixture::make_fixture({});

        std::istringstream emb_in(run.fixture.embeddings_text);
        EmbeddingTable embeddings = load_embeddings(emb_in);

        std::vector<LabeledPair> pairs =
            generate_inter_category(run.fixture.train_catalog, 25.0 / 59.0, 42);
        DatasetSplit split = split_dataset(std::move(pairs), {0.7, 0.1, 0.2}, 42);

        TwinConfig config;  // defaults: mean-pool, 300-d, 2x64, 13 epochs
        config.seed = 42;
        run.trained = train(split, config, &embeddings);

        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& p : split.test) {
            TokenSequence ps = to_sequence(p.product_text, run.trained.model.vocab,
                                           config.max_len);
            TokenSequence rs = to_sequence(p.review_text, run.trained.model.vocab,
                                           config.max_len);
            scores.push_back(forward_pair(ps, rs, run.trained.model.params).u);
            labels.push_back(p.label);
        }
        EvalReport inter = evaluate(scores, labels, 0.5);
        run.inter_accuracy = inter.accuracy;
        run.inter_auc = inter.auc;

        std::vector<LabeledPair> intra = generate_intra_category(
            run.fixture.train_catalog, run.fixture.category_names.at(0), 300, 43);
        std::vector<double> intra_scores;
        std::vector<int> intra_labels;
        for (const auto& p : intra) {
            TokenSequence ps = to_sequence(p.product_text, run.trained.model.vocab,
                                           config.max_len);
            TokenSequence rs = to_sequence(p.review_text, run.trained.model.vocab,
                                           config.max_len);
            intra_scores.push_back(forward_pair(ps, rs, run.trained.model.params).u);
            intra_labels.push_back(p.label);
        }
        run.intra_auc = auc(intra_scores, intra_labels);

        run.train_seconds = seconds_since(started);
        run.ok = true;
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    return run;
}

void criterion_fixture_pipeline(const PipelineRun& run) {
    if (!run.ok) {
        report("fixture-pipeline", false, "pipeline failed: " + run.error);
        return;
    }
    bool ok = run.inter_accuracy >= 0.90 && run.inter_auc >= 0.95 && run.intra_auc >= 0.80 &&
              run.train_seconds <= 120.0;
    report("fixture-pipeline", ok,
           "inter accuracy=" + fmt(run.inter_accuracy) + " (>=0.90), inter auc=" +
               fmt(run.inter_auc) + " (>=0.95), intra auc=" + fmt(run.intra_auc) +
               " (>=0.80), runtime=" + fmt(run.train_seconds) + "s (<=120s, single-threaded)");
}

// --------------------------------------------------------------- gradient --

void criterion_gradient_oracle() {
    try {
        Rng rng(90001);
        double worst = 0;
        int instances = 0;
        for (EncoderKind kind : {EncoderKind::MeanPool, EncoderKind::Lstm}) {
            for (int trial = 0; trial < 5; ++trial) {
                TwinConfig cfg;
                cfg.encoder = kind;
                cfg.embedding_dim = 2 + static_cast<int>(rng.below(7));  // <= 8
                cfg.hidden_sizes.clear();
                int layers = 1 + static_cast<int>(rng.below(2));
                for (int l = 0; l < layers; ++l)
                    cfg.hidden_sizes.push_back(2 + static_cast<int>(rng.below(7)));  // <= 8
                cfg.dropout = 0.0;
                cfg.seed = rng.next();
                int vocab_size = 6 + static_cast<int>(rng.below(6));
                TwinParameters params = TwinParameters::init(cfg, vocab_size);

                std::vector<PairSample> batch(1 + rng.below(3));
                for (auto& s : batch) {
                    // keep one known token per side: an all-unknown sequence
                    // encodes to the exact zero vector where the cosine
                    // branch makes the loss discontinuous, and numeric
                    // differentiation is undefined there
                    int np = 1 + static_cast<int>(rng.below(5));
                    int nr = 1 + static_cast<int>(rng.below(5));
                    s.product.ids.push_back(1 + static_cast<int>(rng.below(vocab_size - 1)));
                    for (int i = 1; i < np; ++i)
                        s.product.ids.push_back(static_cast<int>(rng.below(vocab_size)));
                    s.review.ids.push_back(1 + static_cast<int>(rng.below(vocab_size - 1)));
                    for (int i = 1; i < nr; ++i)
                        s.review.ids.push_back(static_cast<int>(rng.below(vocab_size)));
                    s.label = static_cast<int>(rng.below(2));
                }
                worst = std::max(worst, gradient_check(params, batch, 1e-5));
                ++instances;
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), "max relative error %.3g over %d instances (<1e-4)",
                      worst, instances);
        report("gradient-oracle", worst < 1e-4 && instances >= 10, buf);
    } catch (const std::exception& e) {
        report("gradient-oracle", false, e.what());
    }
}

// -------------------------------------------------------------------- auc --

double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double concordant = 0, tied = 0;
    long long pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) {
            ++neg;
            continue;
        }
        ++pos;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j])
                concordant += 1;
            else if (scores[i] == scores[j])
                tied += 1;
        }
    }
    return (concordant + 0.5 * tied) / (static_cast<double>(pos) * static_cast<double>(neg));
}

void criterion_auc_oracle() {
    try {
        Rng rng(90002);
        double worst_auc = 0, worst_area = 0;
        for (int trial = 0; trial < 100; ++trial) {
            size_t n = 2 + rng.below(499);  // n <= 500
            uint64_t grid = 2 + rng.below(15);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            for (size_t i = 0; i < n; ++i) {
                scores[i] = static_cast<double>(rng.below(grid)) / static_cast<double>(grid);
                labels[i] = static_cast<int>(rng.below(2));
            }
            labels[0] = 0;
            labels[1] = 1;
            double fast = auc(scores, labels);
            worst_auc = std::max(worst_auc, std::abs(fast - brute_force_auc(scores, labels)));
            worst_area =
                std::max(worst_area, std::abs(trapezoid_area(roc_curve(scores, labels)) - fast));
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "100 instances: |auc - brute force| <= %.3g, |trapezoid - auc| <= %.3g "
                      "(both <=1e-12)",
                      worst_auc, worst_area);
        report("auc-oracle", worst_auc <= 1e-12 && worst_area <= 1e-12, buf);
    } catch (const std::exception& e) {
        report("auc-oracle", false, e.what());
    }
}

// ---------------------------------------------------------------- scoring --

void criterion_scoring_semantics() {
    try {
        std::vector<ScoredReview> scored(2);
        scored[0] = {"A", "A#0", 0.2, ScoreSource::Internal};
        scored[1] = {"A", "A#1", 0.8, ScoreSource::Internal};
        std::vector<ProductScore> ps = product_scores(scored);
        bool mean_ok = ps.size() == 1 && ps[0].score == 0.5;

        std::vector<ProductScore> boundary(1);
        boundary[0].product_id = "B";
        boundary[0].n = 1;
        boundary[0].score = 0.5;
        bool strict_ok = flag_products(boundary, 0.5).empty();

        report("scoring-semantics", mean_ok && strict_ok,
               std::string("mean([0.2,0.8])=") + fmt(ps.empty() ? -1 : ps[0].score) +
                   " (exact 0.5), score 0.5 flagged=" + (strict_ok ? "no" : "yes") +
                   " (strict >)");
    } catch (const std::exception& e) {
        report("scoring-semantics", false, e.what());
    }
}

// ---------------------------------------------------------------- planted --

void criterion_planted_recovery(const PipelineRun& run) {
    if (!run.ok) {
        report("planted-recovery", false, "pipeline failed: " + run.error);
        return;
    }
    try {
        TwinPairScorer scorer(run.trained.model);
        std::vector<ScoredReview> scored =
            score_catalog(run.fixture.scoring_catalog, scorer, 1);
        std::vector<ProductScore> products = product_scores(scored);

        const auto& planted = run.fixture.planted_ids;
        auto is_planted = [&](const std::string& id) {
            return std::binary_search(planted.begin(), planted.end(), id);
        };
        int planted_hot = 0, clean_hot = 0, clean_total = 0;
        for (const auto& p : products) {
            if (is_planted(p.product_id)) {
                planted_hot += p.score > 0.5;
            } else {
                ++clean_total;
                clean_hot += p.score > 0.5;
            }
        }
        bool ok = planted_hot >= 9 && clean_hot <= 1;
        std::ostringstream detail;
        detail << planted_hot << "/" << planted.size() << " planted score >0.5 (>=9), "
               << clean_hot << "/" << clean_total << " clean score >0.5 (<=1)";
        report("planted-recovery", ok, detail.str());
    } catch (const std::exception& e) {
        report("planted-recovery", false, e.what());
    }
}

// ------------------------------------------------------------ determinism --

struct CliRunner {
    std::string binary;

    int run(const std::string& args) const {
        std::string cmd = "'" + binary + "' " + args + " > /dev/null 2>&1";
        int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string find_cli() {
    if (const char* env = std::getenv("HIJACKDET_CLI")) return env;
    std::error_code ec;
    fs::path self = fs::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        fs::path guess = self.parent_path().parent_path() / "tools" / "hijackdet";
        if (fs::exists(guess)) return guess.string();
    }
    return {};
}

void criterion_determinism() {
    std::string cli = find_cli();
    if (cli.empty()) {
        report("determinism", false,
               "hijackdet binary not found (set HIJACKDET_CLI or build the tools target)");
        return;
    }
    try {
        fs::path base = fs::temp_directory_path() /
                        ("hijackdet_acc_det_" + std::to_string(::getpid()));
        fs::remove_all(base);
        fs::create_directories(base);

        fixture::FixtureSpec spec;
        spec.products_per_category = 20;  // smaller corpus keeps two runs quick
        spec.reviews_per_product = 8;
        spec.planted = 4;
        fixture::Fixture fx = fixture::make_fixture(spec);
        fixture::write_fixture(fx, base / "fixture");

        CliRunner runner{cli};
        auto one_run = [&](const std::string& out) {
            std::string products = (base / "fixture" / "products.jsonl").string();
            std::string reviews = (base / "fixture" / "reviews.jsonl").string();
            std::string embeddings = (base / "fixture" / "embeddings.txt").string();
            if (runner.run("generate --products '" + products + "' --reviews '" + reviews +
                           "' --seed 42 --out '" + out + "'"))
                return false;
            if (runner.run("train --embeddings '" + embeddings +
                           "' --deterministic --seed 42 --out '" + out + "'"))
                return false;
            if (runner.run("score --products '" + products + "' --reviews '" + reviews +
                           "' --seed 42 --out '" + out + "'"))
                return false;
            return true;
        };

        bool ran = one_run((base / "r1").string()) && one_run((base / "r2").string());
        if (!ran) {
            report("determinism", false, "a pipeline command exited nonzero");
            fs::remove_all(base);
            return;
        }

        std::vector<std::string> files = {"dataset_train.jsonl", "dataset_validation.jsonl",
                                          "dataset_test.jsonl",  "checkpoint.bin",
                                          "train_metrics.csv",   "review_scores.csv",
                                          "product_scores.csv",  "flagged.csv"};
        std::string first_diff;
        for (const auto& f : files) {
            if (slurp(base / "r1" / f) != slurp(base / "r2" / f)) {
                first_diff = f;
                break;
            }
        }
        fs::remove_all(base);
        report("determinism", first_diff.empty(),
               first_diff.empty()
                   ? "seed 42 generate+train+score twice: all " + std::to_string(files.size()) +
                         " artifacts byte-identical"
                   : "artifact differs between runs: " + first_diff);
    } catch (const std::exception& e) {
        report("determinism", false, e.what());
    }
}

// ------------------------------------------------------- truncation/split --

void criterion_truncation_and_split(const PipelineRun& run) {
    try {
        bool truncation_ok = true;
        size_t checked = 0;
        if (run.ok) {
            const Catalog& catalog = run.fixture.train_catalog;
            std::vector<std::string> texts;
            for (const auto& p : catalog.products) texts.push_back(assemble_product_text(p).text);
            for (const auto& r : catalog.reviews) texts.push_back(assemble_review_text(r).text);
            // add one artificially long document
            std::string longdoc;
            for (int i = 0; i < 2000; ++i) longdoc += "tok" + std::to_string(i % 37) + " ";
            texts.push_back(longdoc);

            Vocabulary vocab = build_vocabulary(texts, 1);
            for (const auto& t : texts) {
                TokenSequence seq = to_sequence(t, vocab, 512);
                truncation_ok = truncation_ok && seq.ids.size() <= 512;
                ++checked;
            }
        } else {
            truncation_ok = false;
        }

        bool split_ok = true;
        Rng rng(90007);
        for (int trial = 0; trial < 40; ++trial) {
            int n = static_cast<int>(rng.below(2000));
            std::vector<LabeledPair> pairs(n);
            for (int i = 0; i < n; ++i) pairs[i].host_product_id = "P" + std::to_string(i);
            DatasetSplit split = split_dataset(std::move(pairs), {0.7, 0.1, 0.2}, trial);
            split_ok = split_ok &&
                       std::abs(static_cast<double>(split.train.size()) - 0.7 * n) <= 1.0 &&
                       std::abs(static_cast<double>(split.validation.size()) - 0.1 * n) <= 1.0 &&
                       std::abs(static_cast<double>(split.test.size()) - 0.2 * n) <= 1.0 &&
                       split.train.size() + split.validation.size() + split.test.size() ==
                           static_cast<size_t>(n);
        }

        std::ostringstream detail;
        detail << checked << " fixture documents all <=512 ids; 40 random splits within +/-1 of "
               << "70:10:20";
        report("truncation-and-split", truncation_ok && split_ok, detail.str());
    } catch (const std::exception& e) {
        report("truncation-and-split", false, e.what());
    }
}

// ------------------------------------------------------------- throughput --

void criterion_throughput(const PipelineRun& run) {
    if (!run.ok) {
        report("throughput", false, "pipeline failed: " + run.error);
        return;
    }
    try {
        TwinPairScorer scorer(run.trained.model);
        const Catalog& catalog = run.fixture.scoring_catalog;
        auto started = Clock::now();
        std::vector<ScoredReview> scored = score_catalog(catalog, scorer, 1);
        double elapsed = seconds_since(started);
        double per_minute = static_cast<double>(scored.size()) / elapsed * 60.0;
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "%zu reviews in %.2fs single-threaded = %.0f reviews/min (>=50000)",
                      scored.size(), elapsed, per_minute);
        report("throughput", per_minute >= 50000.0, buf);
    } catch (const std::exception& e) {
        report("throughput", false, e.what());
    }
}

}  // namespace

int main() {
    std::printf("acceptance criteria\n");
    PipelineRun run = run_pipeline();
    criterion_fixture_pipeline(run);
    criterion_gradient_oracle();
    criterion_auc_oracle();
    criterion_scoring_semantics();
    criterion_planted_recovery(run);
    criterion_determinism();
    criterion_truncation_and_split(run);
    criterion_throughput(run);
    std::printf("%s (%d %s failed)\n", failures == 0 ? "ALL PASS" : "FAILURES", failures,
                failures == 1 ? "criterion" : "criteria");
    return failures == 0 ? 0 : 1;
}
