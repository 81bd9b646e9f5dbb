// hijackdet: review-hijacking detection pipeline CLI.
//
// Subcommands: ingest | generate | train | evaluate | score | report.
// Every artifact embeds a header with (tool_version, config_hash, seed);
// reruns with the same inputs and configuration are byte-identical.
#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hijackdet/corpus.hpp"
#include "hijackdet/eval.hpp"
#include "hijackdet/jsonl.hpp"
#include "hijackdet/model.hpp"
#include "hijackdet/rng.hpp"
#include "hijackdet/scoring.hpp"
#include "hijackdet/synthgen.hpp"
#include "hijackdet/textprep.hpp"
#include "hijackdet/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace hijackdet;

namespace {

// exit code 2: bad usage or configuration; carries the offending path when
// one exists
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg, std::string path = {})
        : std::runtime_error(msg), path(std::move(path)) {}
    std::string path;
};

struct RunConfig {
    std::string products, reviews, embeddings;
    std::string out = "out";
    uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    int min_reviews = 0;

    std::string strategy = "inter";
    double unrelated_fraction = 25.0 / 59.0;
    std::string category;
    int max_pairs = 1000;
    int reviews_per_pair = 1;
    bool by_product = false;
    std::array<double, 3> ratios{0.7, 0.1, 0.2};

    TwinConfig model;

    std::string train_file, val_file;  // default <out>/dataset_*.jsonl
    std::string dataset;               // evaluate input
    std::string checkpoint;            // default <out>/checkpoint.bin
    std::string external;              // external score CSV for `score`
    std::string scores_csv;            // `report` input
    std::string product;               // `report` target
    bool baseline = false;
    double threshold = 0.5;

    int effective_threads() const { return deterministic ? 1 : std::max(1, threads); }

    // Hash covers semantic parameters only; paths deliberately excluded so
    // equal runs into different directories stay byte-identical.
    std::string config_hash() const {
        ordered_json j;
        j["seed"] = seed;
        j["min_reviews"] = min_reviews;
        j["generate"] = {{"strategy", strategy},
                         {"unrelated_fraction", unrelated_fraction},
                         {"category", category},
                         {"max_pairs", max_pairs},
                         {"reviews_per_pair", reviews_per_pair},
                         {"by_product", by_product},
                         {"ratios", ratios}};
        j["model"] = json::parse(model.to_json());
        j["score"] = {{"threshold", threshold}, {"baseline", baseline}};
        return fnv1a64_hex(j.dump());
    }

    ArtifactMeta meta() const { return {kToolVersion, config_hash(), seed}; }
};

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw UsageError(std::string(what) + " path not set");
    if (!fs::exists(path))
        throw UsageError(std::string(what) + " path does not exist", path);
}

Catalog load_catalog(const RunConfig& rc, ParseStats* pstats = nullptr,
                     ParseStats* rstats = nullptr) {
    require_file(rc.products, "products");
    require_file(rc.reviews, "reviews");
    Catalog c;
    c.products = parse_products_file(rc.products, pstats);
    c.reviews = parse_reviews_file(rc.reviews, rstats);
    return c;
}

std::vector<LabeledPair> load_pairs(const std::string& path) {
    LineReader in(path);
    std::vector<LabeledPair> out;
    std::string line;
    bool first = true;
    while (in.next(line)) {
        if (line.empty()) continue;
        bool meta = first && line.rfind("{\"_meta\"", 0) == 0;
        first = false;
        if (meta) continue;
        try {
            out.push_back(parse_pair(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(in.line_number()) + ": " +
                                     e.what());
        }
    }
    return out;
}

ordered_json stats_json(const ParseStats& s) {
    return {{"lines", s.lines},
            {"parsed", s.parsed},
            {"malformed", s.malformed},
            {"missing_id", s.missing_id},
            {"duplicate_id", s.duplicate_id}};
}

void write_report(const fs::path& path, ordered_json body, const RunConfig& rc) {
    ordered_json out;
    out["_meta"] = {{"tool_version", kToolVersion},
                    {"config_hash", rc.config_hash()},
                    {"seed", rc.seed}};
    for (auto& [k, v] : body.items()) out[k] = std::move(v);
    atomic_write_file(path, out.dump(2) + "\n");
}

// ---------------------------------------------------------------- ingest --

int cmd_ingest(const RunConfig& rc) {
    ParseStats pstats, rstats;
    Catalog catalog = load_catalog(rc, &pstats, &rstats);
    FilterStats fstats;
    catalog = filter_min_reviews(catalog, rc.min_reviews, &fstats);

    std::string products_out = meta_json_line(rc.meta()) + "\n";
    for (const auto& p : catalog.products) products_out += serialize_product(p) + "\n";
    std::string reviews_out = meta_json_line(rc.meta()) + "\n";
    for (const auto& r : catalog.reviews) reviews_out += serialize_review(r) + "\n";

    fs::path out(rc.out);
    atomic_write_file(out / "catalog_products.jsonl", products_out);
    atomic_write_file(out / "catalog_reviews.jsonl", reviews_out);

    ordered_json report;
    report["products"] = stats_json(pstats);
    report["reviews"] = stats_json(rstats);
    report["filter"] = {{"min_reviews", rc.min_reviews},
                        {"products_removed", fstats.products_removed},
                        {"reviews_removed", fstats.reviews_removed},
                        {"dangling_reviews", fstats.dangling_reviews}};
    report["output"] = {{"products", catalog.products.size()},
                        {"reviews", catalog.reviews.size()}};
    write_report(out / "ingest_report.json", std::move(report), rc);
    return 0;
}

// -------------------------------------------------------------- generate --

int cmd_generate(const RunConfig& rc) {
    Catalog catalog = load_catalog(rc);
    FilterStats fstats;
    catalog = filter_min_reviews(catalog, rc.min_reviews, &fstats);

    std::vector<LabeledPair> pairs;
    IntraGenReport intra_report;
    if (rc.strategy == "inter") {
        pairs = generate_inter_category(catalog, rc.unrelated_fraction, rc.seed);
    } else if (rc.strategy == "intra") {
        if (rc.category.empty())
            throw UsageError("intra-category generation requires --category");
        pairs = generate_intra_category(catalog, rc.category, rc.max_pairs, rc.seed,
                                        rc.reviews_per_pair, &intra_report);
    } else {
        throw UsageError("unknown strategy '" + rc.strategy + "' (expected inter or intra)");
    }

    DatasetSplit split = split_dataset(std::move(pairs), rc.ratios, rc.seed, rc.by_product);

    fs::path out(rc.out);
    auto write_split = [&](const char* name, const std::vector<LabeledPair>& part) {
        std::string text = meta_json_line(rc.meta()) + "\n";
        for (const auto& p : part) text += serialize_pair(p) + "\n";
        atomic_write_file(out / name, text);
    };
    write_split("dataset_train.jsonl", split.train);
    write_split("dataset_validation.jsonl", split.validation);
    write_split("dataset_test.jsonl", split.test);

    auto label_counts = [](const std::vector<LabeledPair>& part) {
        size_t unrelated = 0;
        for (const auto& p : part) unrelated += p.label == 1;
        return ordered_json{{"pairs", part.size()},
                            {"related", part.size() - unrelated},
                            {"unrelated", unrelated}};
    };
    ordered_json report;
    report["strategy"] = rc.strategy;
    report["train"] = label_counts(split.train);
    report["validation"] = label_counts(split.validation);
    report["test"] = label_counts(split.test);
    if (rc.strategy == "intra") {
        report["intra"] = {{"category", rc.category},
                           {"pairs_accepted", intra_report.pairs_accepted},
                           {"attempts", intra_report.attempts}};
        if (!intra_report.warning.empty()) report["intra"]["warning"] = intra_report.warning;
    }
    write_report(out / "generate_report.json", std::move(report), rc);

    if (!intra_report.warning.empty())
        std::fprintf(stderr, "warning: %s\n", intra_report.warning.c_str());
    return 0;
}

// ----------------------------------------------------------------- train --

int cmd_train(const RunConfig& rc) {
    fs::path out(rc.out);
    std::string train_path =
        rc.train_file.empty() ? (out / "dataset_train.jsonl").string() : rc.train_file;
    std::string val_path =
        rc.val_file.empty() ? (out / "dataset_validation.jsonl").string() : rc.val_file;
    require_file(train_path, "train dataset");

    DatasetSplit split;
    split.seed = rc.seed;
    split.train = load_pairs(train_path);
    if (fs::exists(val_path)) split.validation = load_pairs(val_path);

    EmbeddingTable table;
    const EmbeddingTable* pretrained = nullptr;
    if (!rc.embeddings.empty()) {
        require_file(rc.embeddings, "embeddings");
        table = load_embeddings_file(rc.embeddings);
        pretrained = &table;
    }

    std::string metrics = meta_csv_comment(rc.meta()) + "\n";
    metrics += "epoch,train_loss,val_accuracy,val_auc\n";
    TrainResult result = train(split, rc.model, pretrained, [&](const EpochMetrics& em) {
        metrics += std::to_string(em.epoch) + "," + fmt_double(em.train_loss) + "," +
                   fmt_double(em.val_accuracy) + "," + fmt_double(em.val_auc) + "\n";
    });

    save_checkpoint((out / "checkpoint.bin").string(), result.model,
                    {rc.config_hash(), rc.seed});
    atomic_write_file(out / "train_metrics.csv", metrics);

    ordered_json report;
    report["epochs"] = rc.model.epochs;
    report["best_epoch"] = result.best_epoch;
    report["train_pairs"] = split.train.size();
    report["validation_pairs"] = split.validation.size();
    report["vocabulary_size"] = result.model.vocab.size();
    report["parameters"] = result.model.params.flat.size();
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        report["final"] = {{"train_loss", last.train_loss},
                           {"val_accuracy", last.val_accuracy},
                           {"val_auc", last.val_auc}};
    }
    report["model"] = json::parse(rc.model.to_json());
    write_report(out / "train_report.json", std::move(report), rc);
    return 0;
}

// -------------------------------------------------------------- evaluate --

IdfModel fit_idf_on_pairs(const std::vector<LabeledPair>& pairs) {
    DocFrequency df;
    for (const auto& p : pairs) {
        df.add_text(p.product_text);
        df.add_text(p.review_text);
    }
    return tfidf_fit(df);
}

int cmd_evaluate(const RunConfig& rc) {
    fs::path out(rc.out);
    std::string dataset_path =
        rc.dataset.empty() ? (out / "dataset_test.jsonl").string() : rc.dataset;
    require_file(dataset_path, "evaluation dataset");
    std::vector<LabeledPair> pairs = load_pairs(dataset_path);
    if (pairs.empty()) throw std::runtime_error("evaluation dataset is empty");

    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(pairs.size());
    labels.reserve(pairs.size());

    std::string scorer_name;
    if (rc.baseline) {
        scorer_name = "tfidf_baseline";
        IdfModel idf = fit_idf_on_pairs(pairs);
        for (const auto& p : pairs)
            scores.push_back(tfidf_baseline_score(p.product_text, p.review_text, idf));
    } else {
        std::string ckpt =
            rc.checkpoint.empty() ? (out / "checkpoint.bin").string() : rc.checkpoint;
        require_file(ckpt, "checkpoint");
        TwinPairScorer scorer(load_checkpoint(ckpt));
        scorer_name = "twin";
        for (const auto& p : pairs) scores.push_back(scorer.score(p.product_text, p.review_text));
    }
    for (const auto& p : pairs) labels.push_back(p.label);

    EvalReport report = evaluate(scores, labels, 0.5);
    ordered_json body = json::parse(report_to_json(report));
    ordered_json wrapped;
    wrapped["scorer"] = scorer_name;
    wrapped["dataset"] = fs::path(dataset_path).filename().string();
    for (auto& [k, v] : body.items()) wrapped[k] = std::move(v);
    write_report(out / "eval_report.json", std::move(wrapped), rc);
    atomic_write_file(out / "roc.csv", meta_csv_comment(rc.meta()) + "\n" + roc_to_csv(report.roc));
    return 0;
}

// ----------------------------------------------------------------- score --

int cmd_score(const RunConfig& rc) {
    fs::path out(rc.out);
    Catalog catalog = load_catalog(rc);
    FilterStats fstats;
    catalog = filter_min_reviews(catalog, rc.min_reviews, &fstats);

    std::vector<ScoredReview> scored;
    ScoreCatalogStats stats;
    ExternalIngestStats ext_stats;
    std::string source;
    if (!rc.external.empty()) {
        require_file(rc.external, "external scores");
        std::unordered_set<std::string> known;
        for (const auto& r : catalog.reviews) known.insert(r.review_id);
        std::ifstream in(rc.external, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open external scores: " + rc.external);
        scored = ingest_external_scores(in, &ext_stats, &known);
        source = "external";
    } else if (rc.baseline) {
        DocFrequency df;
        for (const auto& p : catalog.products) df.add_text(assemble_product_text(p).text);
        for (const auto& r : catalog.reviews) df.add_text(assemble_review_text(r).text);
        TfidfPairScorer scorer(tfidf_fit(df));
        scored = score_catalog(catalog, scorer, rc.effective_threads(), &stats);
        source = "tfidf_baseline";
    } else {
        std::string ckpt =
            rc.checkpoint.empty() ? (out / "checkpoint.bin").string() : rc.checkpoint;
        require_file(ckpt, "checkpoint");
        TwinPairScorer scorer(load_checkpoint(ckpt));
        scored = score_catalog(catalog, scorer, rc.effective_threads(), &stats);
        source = "twin";
    }

    std::vector<ProductScore> products = product_scores(scored);
    std::vector<ProductScore> flagged = flag_products(products, rc.threshold);
    std::array<uint64_t, 10> dist = score_distribution(products);

    std::string review_csv = meta_csv_comment(rc.meta()) + "\nproduct_id,review_id,u\n";
    for (const auto& s : scored)
        review_csv += s.product_id + "," + s.review_id + "," + fmt_double(s.u) + "\n";
    atomic_write_file(out / "review_scores.csv", review_csv);

    auto product_csv = [&](const std::vector<ProductScore>& list) {
        std::string text = meta_csv_comment(rc.meta()) + "\nproduct_id,n,score\n";
        for (const auto& p : list)
            text += p.product_id + "," + std::to_string(p.n) + "," + fmt_double(p.score) + "\n";
        return text;
    };
    atomic_write_file(out / "product_scores.csv", product_csv(products));
    atomic_write_file(out / "flagged.csv", product_csv(flagged));

    ordered_json report;
    report["source"] = source;
    report["threshold"] = rc.threshold;
    if (source == "external") {
        report["external"] = {{"lines", ext_stats.lines},
                              {"accepted", ext_stats.accepted},
                              {"rejected", ext_stats.rejected},
                              {"unknown_review", ext_stats.unknown_review},
                              {"errors", ext_stats.errors}};
    } else {
        report["catalog"] = {{"products_scored", stats.products_scored},
                             {"products_without_reviews", stats.products_without_reviews},
                             {"reviews_scored", stats.reviews_scored}};
    }
    report["products"] = products.size();
    report["score_distribution"] = dist;
    ordered_json flags = ordered_json::array();
    for (const auto& p : flagged)
        flags.push_back({{"product_id", p.product_id}, {"n", p.n}, {"score", p.score}});
    report["flagged"] = std::move(flags);
    write_report(out / "score_report.json", std::move(report), rc);
    return 0;
}

// ---------------------------------------------------------------- report --

std::string sanitize_filename(std::string_view id) {
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

int cmd_report(const RunConfig& rc) {
    if (rc.product.empty()) throw UsageError("report requires --product");
    fs::path out(rc.out);
    std::string scores_path =
        rc.scores_csv.empty() ? (out / "review_scores.csv").string() : rc.scores_csv;
    require_file(scores_path, "review scores");

    std::ifstream in(scores_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scores: " + scores_path);
    std::vector<ScoredReview> all = ingest_external_scores(in);
    std::vector<ScoredReview> mine;
    for (auto& s : all)
        if (s.product_id == rc.product) mine.push_back(std::move(s));
    if (mine.empty())
        throw std::runtime_error("no scores found for product " + rc.product);

    ProductScore ps = product_scores(mine).front();
    std::string stem = "report_" + sanitize_filename(rc.product);
    atomic_write_file(out / (stem + ".csv"),
                      meta_csv_comment(rc.meta()) + "\n" + histogram_csv(ps));
    std::string svg = "<!-- " + meta_csv_comment(rc.meta()).substr(2) + " -->\n" +
                      histogram_svg(ps, "per-review unrelated scores");
    atomic_write_file(out / (stem + ".svg"), svg);
    std::printf("%s: n=%llu score=%s\n", ps.product_id.c_str(),
                static_cast<unsigned long long>(ps.n), fmt_double(ps.score).c_str());
    return 0;
}

// ------------------------------------------------------------ resolution --

// flag > config > struct default
template <class T>
void resolve(T& field, const CLI::Option* opt, const T& flag_value, const json& section,
             const char* key) {
    if (opt && opt->count() > 0) {
        field = flag_value;
        return;
    }
    if (section.is_object() && section.contains(key)) field = section.at(key).get<T>();
}

// variant for options registered on several subcommands with one storage slot
template <class T>
void resolve(T& field, const std::vector<CLI::Option*>& opts, const T& flag_value,
             const json& section, const char* key) {
    for (const auto* opt : opts)
        if (opt && opt->count() > 0) {
            field = flag_value;
            return;
        }
    if (section.is_object() && section.contains(key)) field = section.at(key).get<T>();
}

const json kEmpty = json::object();

const json& section_of(const json& cfg, const char* name) {
    if (cfg.is_object() && cfg.contains(name)) {
        const json& s = cfg.at(name);
        if (!s.is_object()) throw UsageError(std::string("config section '") + name +
                                             "' must be an object");
        return s;
    }
    return kEmpty;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"review-hijacking detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path, out_dir, products, reviews, embeddings;
    uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    int min_reviews = 0;

    auto* opt_config = app.add_option("--config", config_path, "JSON config file");
    auto* opt_seed = app.add_option("--seed", seed, "PRNG seed recorded in artifacts");
    auto* opt_threads = app.add_option("--threads", threads, "parallel worker count");
    auto* opt_det =
        app.add_flag("--deterministic", deterministic, "force single-threaded execution");
    auto* opt_out = app.add_option("--out", out_dir, "output directory (default: out)");

    auto* c_ingest = app.add_subcommand("ingest", "normalize a raw catalog");
    auto* c_generate = app.add_subcommand("generate", "build a labeled swap dataset + split");
    auto* c_train = app.add_subcommand("train", "train the twin pair classifier");
    auto* c_evaluate = app.add_subcommand("evaluate", "accuracy/AUC/ROC on a dataset split");
    auto* c_score = app.add_subcommand("score", "score a catalog and flag suspicious products");
    auto* c_report = app.add_subcommand("report", "per-product score histogram report");

    std::vector<CLI::Option*> opt_products, opt_reviews, opt_min;
    for (auto* cmd : {c_ingest, c_generate, c_score}) {
        // same storage: only the invoked subcommand parses
        opt_products.push_back(cmd->add_option("--products", products, "product JSONL[.gz] file"));
        opt_reviews.push_back(cmd->add_option("--reviews", reviews, "review JSONL[.gz] file"));
        opt_min.push_back(
            cmd->add_option("--min-reviews", min_reviews, "drop products with fewer reviews"));
    }

    std::string strategy = "inter", category;
    double unrelated_fraction = 25.0 / 59.0;
    int max_pairs = 1000, reviews_per_pair = 1;
    bool by_product = false;
    auto* opt_strategy =
        c_generate->add_option("--strategy", strategy, "inter or intra")->capture_default_str();
    auto* opt_frac = c_generate->add_option("--unrelated-fraction", unrelated_fraction,
                                            "probability a review is swapped (inter)");
    auto* opt_category =
        c_generate->add_option("--category", category, "primary category (intra)");
    auto* opt_max_pairs =
        c_generate->add_option("--max-pairs", max_pairs, "product pair budget (intra)");
    auto* opt_rpp = c_generate->add_option("--reviews-per-pair", reviews_per_pair,
                                           "swap rounds per product pair (intra)");
    auto* opt_by_product =
        c_generate->add_flag("--by-product", by_product, "split by host product (leakage control)");

    std::string train_file, val_file, encoder;
    int epochs = 0;
    auto* opt_train_file = c_train->add_option("--train-file", train_file, "train split JSONL");
    auto* opt_val_file = c_train->add_option("--val-file", val_file, "validation split JSONL");
    auto* opt_embeddings =
        c_train->add_option("--embeddings", embeddings, "pretrained word vectors (text format)");
    auto* opt_encoder = c_train->add_option("--encoder", encoder, "mean_pool or lstm");
    auto* opt_epochs = c_train->add_option("--epochs", epochs, "training epochs");

    std::string dataset, checkpoint, external, scores_csv, product;
    bool baseline = false;
    double threshold = 0.5;
    auto* opt_dataset = c_evaluate->add_option("--dataset", dataset, "pairs JSONL to evaluate");
    CLI::Option *opt_checkpoint_eval = c_evaluate->add_option("--checkpoint", checkpoint,
                                                              "model checkpoint");
    CLI::Option *opt_baseline_eval =
        c_evaluate->add_flag("--baseline", baseline, "use the TF-IDF baseline scorer");
    CLI::Option *opt_checkpoint_score =
        c_score->add_option("--checkpoint", checkpoint, "model checkpoint");
    CLI::Option *opt_baseline_score =
        c_score->add_flag("--baseline", baseline, "use the TF-IDF baseline scorer");
    auto* opt_external =
        c_score->add_option("--external", external, "externally produced score CSV");
    auto* opt_threshold =
        c_score->add_option("--threshold", threshold, "flagging threshold (strict >)");
    auto* opt_product = c_report->add_option("--product", product, "product id to report");
    auto* opt_scores = c_report->add_option("--scores", scores_csv,
                                            "review score CSV (default <out>/review_scores.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        ordered_json err;
        err["error"] = e.what();
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 2;
    }

    try {
        json cfg = json::object();
        if (opt_config->count() > 0) {
            require_file(config_path, "config");
            std::ifstream in(config_path);
            try {
                cfg = json::parse(in);
            } catch (const json::parse_error& e) {
                throw UsageError("config is not valid JSON: " + std::string(e.what()),
                                 config_path);
            }
            if (!cfg.is_object()) throw UsageError("config root must be a JSON object");
            static const std::vector<std::string> known = {
                "products", "reviews",  "embeddings", "out",   "seed",     "threads",
                "deterministic", "min_reviews", "generate", "model", "evaluate", "score",
                "train", "report"};
            for (const auto& [key, value] : cfg.items())
                if (std::find(known.begin(), known.end(), key) == known.end())
                    throw UsageError("unknown config key '" + key + "'");
        }

        RunConfig rc;
        resolve(rc.products, opt_products, products, cfg, "products");
        resolve(rc.reviews, opt_reviews, reviews, cfg, "reviews");
        resolve(rc.embeddings, opt_embeddings, embeddings, cfg, "embeddings");
        resolve(rc.out, opt_out, out_dir, cfg, "out");
        resolve(rc.seed, opt_seed, seed, cfg, "seed");
        resolve(rc.threads, opt_threads, threads, cfg, "threads");
        resolve(rc.deterministic, opt_det, deterministic, cfg, "deterministic");
        resolve(rc.min_reviews, opt_min, min_reviews, cfg, "min_reviews");

        const json& gen = section_of(cfg, "generate");
        resolve(rc.strategy, opt_strategy, strategy, gen, "strategy");
        resolve(rc.unrelated_fraction, opt_frac, unrelated_fraction, gen, "unrelated_fraction");
        resolve(rc.category, opt_category, category, gen, "category");
        resolve(rc.max_pairs, opt_max_pairs, max_pairs, gen, "max_pairs");
        resolve(rc.reviews_per_pair, opt_rpp, reviews_per_pair, gen, "reviews_per_pair");
        resolve(rc.by_product, opt_by_product, by_product, gen, "by_product");
        if (gen.contains("ratios")) {
            auto v = gen.at("ratios").get<std::vector<double>>();
            if (v.size() != 3) throw UsageError("generate.ratios must have 3 entries");
            std::copy(v.begin(), v.end(), rc.ratios.begin());
        }

        const json& model_cfg = section_of(cfg, "model");
        rc.model = TwinConfig::from_json(model_cfg.dump());
        if (!model_cfg.contains("seed")) rc.model.seed = rc.seed;
        if (opt_encoder->count() > 0) rc.model.encoder = encoder_kind_from_string(encoder);
        if (opt_epochs->count() > 0) rc.model.epochs = epochs;
        rc.model.validate();

        const json& train_cfg = section_of(cfg, "train");
        resolve(rc.train_file, opt_train_file, train_file, train_cfg, "train_file");
        resolve(rc.val_file, opt_val_file, val_file, train_cfg, "val_file");

        const json& eval_cfg = section_of(cfg, "evaluate");
        resolve(rc.dataset, opt_dataset, dataset, eval_cfg, "dataset");

        const json& score_cfg = section_of(cfg, "score");
        if (opt_checkpoint_eval->count() > 0 || opt_checkpoint_score->count() > 0)
            rc.checkpoint = checkpoint;
        else if (eval_cfg.contains("checkpoint"))
            rc.checkpoint = eval_cfg.at("checkpoint").get<std::string>();
        else if (score_cfg.contains("checkpoint"))
            rc.checkpoint = score_cfg.at("checkpoint").get<std::string>();
        if (opt_baseline_eval->count() > 0 || opt_baseline_score->count() > 0)
            rc.baseline = baseline;
        else if (eval_cfg.contains("baseline"))
            rc.baseline = eval_cfg.at("baseline").get<bool>();
        else if (score_cfg.contains("baseline"))
            rc.baseline = score_cfg.at("baseline").get<bool>();
        resolve(rc.external, opt_external, external, score_cfg, "external");
        resolve(rc.threshold, opt_threshold, threshold, score_cfg, "threshold");

        const json& report_cfg = section_of(cfg, "report");
        resolve(rc.product, opt_product, product, report_cfg, "product");
        resolve(rc.scores_csv, opt_scores, scores_csv, report_cfg, "scores");

        if (rc.min_reviews < 0) throw UsageError("min_reviews must be >= 0");
        if (rc.threshold < 0.0 || rc.threshold > 1.0)
            throw UsageError("threshold must be in [0,1]");
        if (rc.unrelated_fraction < 0.0 || rc.unrelated_fraction > 1.0)
            throw UsageError("unrelated_fraction must be in [0,1]");

        if (c_ingest->parsed()) return cmd_ingest(rc);
        if (c_generate->parsed()) return cmd_generate(rc);
        if (c_train->parsed()) return cmd_train(rc);
        if (c_evaluate->parsed()) return cmd_evaluate(rc);
        if (c_score->parsed()) return cmd_score(rc);
        if (c_report->parsed()) return cmd_report(rc);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        ordered_json err;
        err["error"] = e.what();
        if (!e.path.empty()) err["path"] = e.path;
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 2;
    } catch (const std::invalid_argument& e) {
        ordered_json err;
        err["error"] = e.what();
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 2;
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = e.what();
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
}
