#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hijackdet {

struct Product;

// Lowercased maximal runs of letters/digits; everything else separates.
// Case folding is ASCII-only; non-ASCII bytes are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text);
std::unordered_set<std::string> token_set(std::string_view text);

// Mergeable token-frequency accumulator, so counting can be sharded.
struct TokenCounts {
    std::unordered_map<std::string, long long> counts;
    void add_text(std::string_view text);
    void merge(const TokenCounts& other);
};

struct Vocabulary {
    static constexpr int kUnknownId = 0;

    std::vector<std::string> id_to_token;              // [0] is the unknown slot ("")
    std::unordered_map<std::string, int> token_to_id;  // known tokens only
    int min_count = 2;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int id_of(std::string_view token) const;

    std::string to_json() const;
    static Vocabulary from_json(const std::string& text);
};

// Ids are assigned by (frequency desc, token asc), so they are independent
// of how the counts were sharded.
Vocabulary build_vocabulary(const TokenCounts& counts, int min_count = 2);
Vocabulary build_vocabulary(std::span<const std::string> texts, int min_count = 2);

struct TokenSequence {
    std::string id;  // owning product/review id, may be empty
    std::vector<int> ids;
    bool truncated = false;
};

TokenSequence to_sequence(std::string_view text, const Vocabulary& vocab, int max_len = 512,
                          std::string id = {});

// Mergeable document-frequency accumulator.
struct DocFrequency {
    std::unordered_map<std::string, long long> df;
    long long doc_count = 0;
    void add_text(std::string_view text);
    void merge(const DocFrequency& other);
};

struct IdfModel {
    std::vector<std::string> tokens;  // sorted ascending; position = term index
    std::vector<double> idf;          // ln((1+N)/(1+df)) + 1
    std::unordered_map<std::string, int> token_to_index;
    long long doc_count = 0;

    std::string to_json() const;
    static IdfModel from_json(const std::string& text);
};

IdfModel tfidf_fit(const DocFrequency& df);
IdfModel tfidf_fit(std::span<const std::string> texts);

// Sparse, L2-normalized. Entries are sorted by term index.
struct TfIdfVector {
    std::vector<std::pair<int, double>> entries;
    bool empty() const { return entries.empty(); }
};

TfIdfVector tfidf_transform(std::string_view text, const IdfModel& model);
double cosine_sparse(const TfIdfVector& u, const TfIdfVector& v);

// |a ∩ b| / |a ∪ b|; 0 when both sets are empty.
double jaccard_similarity(const std::unordered_set<std::string>& a,
                          const std::unordered_set<std::string>& b);

// Title token sets used for intra-category pairing. Tokens whose document
// frequency exceeds max_df_fraction of products are dropped first, so
// stopword-like title tokens do not create spurious overlap.
std::unordered_map<std::string, std::unordered_set<std::string>> filtered_title_token_sets(
    std::span<const Product> products, double max_df_fraction = 0.25);

struct EmbeddingTable {
    int dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;
    std::vector<double> unknown;  // all zeros, length dim

    const std::vector<double>& lookup(std::string_view token) const;
};

// Plain-text word-vector format: "token v1 v2 ... vd", one token per line.
// A leading "count dim" header line is tolerated. Dimension mismatches
// abort with the offending line number.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings_file(const std::string& path);

}  // namespace hijackdet
