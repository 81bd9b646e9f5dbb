#include "hijackdet/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hijackdet/corpus.hpp"

namespace hijackdet {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

inline bool is_token_char(unsigned char c) {
    if (c >= 0x80) return true;  // UTF-8 continuation/lead bytes stay in tokens
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline char fold(unsigned char c) {
    if (c >= 'A' && c <= 'Z') return static_cast<char>(c - 'A' + 'a');
    return static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            cur += fold(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::unordered_set<std::string> token_set(std::string_view text) {
    auto tokens = tokenize(text);
    return {tokens.begin(), tokens.end()};
}

void TokenCounts::add_text(std::string_view text) {
    for (auto& t : tokenize(text)) ++counts[t];
}

void TokenCounts::merge(const TokenCounts& other) {
    for (const auto& [t, n] : other.counts) counts[t] += n;
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = token_to_id.find(std::string(token));
    return it == token_to_id.end() ? kUnknownId : it->second;
}

std::string Vocabulary::to_json() const {
    ordered_json j;
    j["min_count"] = min_count;
    // id 0 is the implicit unknown slot, not serialized
    j["tokens"] = std::vector<std::string>(id_to_token.begin() + 1, id_to_token.end());
    return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    json j = json::parse(text);
    Vocabulary v;
    v.min_count = j.value("min_count", 2);
    v.id_to_token.push_back("");
    for (const auto& t : j.at("tokens")) {
        int id = static_cast<int>(v.id_to_token.size());
        v.id_to_token.push_back(t.get<std::string>());
        v.token_to_id[v.id_to_token.back()] = id;
    }
    return v;
}

Vocabulary build_vocabulary(const TokenCounts& counts, int min_count) {
    std::vector<std::pair<std::string, long long>> kept;
    kept.reserve(counts.counts.size());
    for (const auto& [t, n] : counts.counts)
        if (n >= min_count) kept.emplace_back(t, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    v.min_count = min_count;
    v.id_to_token.reserve(kept.size() + 1);
    v.id_to_token.push_back("");
    for (auto& [t, n] : kept) {
        int id = static_cast<int>(v.id_to_token.size());
        v.id_to_token.push_back(std::move(t));
        v.token_to_id[v.id_to_token.back()] = id;
    }
    return v;
}

Vocabulary build_vocabulary(std::span<const std::string> texts, int min_count) {
    TokenCounts counts;
    for (const auto& t : texts) counts.add_text(t);
    return build_vocabulary(counts, min_count);
}

TokenSequence to_sequence(std::string_view text, const Vocabulary& vocab, int max_len,
                          std::string id) {
    TokenSequence seq;
    seq.id = std::move(id);
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) return true;
        if (max_len > 0 && static_cast<int>(seq.ids.size()) >= max_len) {
            seq.truncated = true;
            return false;
        }
        seq.ids.push_back(vocab.id_of(cur));
        cur.clear();
        return true;
    };
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            cur += fold(c);
        } else if (!flush()) {
            return seq;
        }
    }
    flush();
    return seq;
}

void DocFrequency::add_text(std::string_view text) {
    ++doc_count;
    for (const auto& t : token_set(text)) ++df[t];
}

void DocFrequency::merge(const DocFrequency& other) {
    doc_count += other.doc_count;
    for (const auto& [t, n] : other.df) df[t] += n;
}

std::string IdfModel::to_json() const {
    ordered_json j;
    j["doc_count"] = doc_count;
    j["tokens"] = tokens;
    j["idf"] = idf;
    return j.dump();
}

IdfModel IdfModel::from_json(const std::string& text) {
    json j = json::parse(text);
    IdfModel m;
    m.doc_count = j.at("doc_count").get<long long>();
    m.tokens = j.at("tokens").get<std::vector<std::string>>();
    m.idf = j.at("idf").get<std::vector<double>>();
    if (m.tokens.size() != m.idf.size())
        throw std::runtime_error("idf model: tokens/idf length mismatch");
    for (size_t i = 0; i < m.tokens.size(); ++i)
        m.token_to_index[m.tokens[i]] = static_cast<int>(i);
    return m;
}

IdfModel tfidf_fit(const DocFrequency& df) {
    IdfModel m;
    m.doc_count = df.doc_count;
    m.tokens.reserve(df.df.size());
    for (const auto& [t, n] : df.df) m.tokens.push_back(t);
    std::sort(m.tokens.begin(), m.tokens.end());
    m.idf.reserve(m.tokens.size());
    for (size_t i = 0; i < m.tokens.size(); ++i) {
        long long d = df.df.at(m.tokens[i]);
        m.idf.push_back(std::log((1.0 + df.doc_count) / (1.0 + d)) + 1.0);
        m.token_to_index[m.tokens[i]] = static_cast<int>(i);
    }
    return m;
}

IdfModel tfidf_fit(std::span<const std::string> texts) {
    DocFrequency df;
    for (const auto& t : texts) df.add_text(t);
    return tfidf_fit(df);
}

TfIdfVector tfidf_transform(std::string_view text, const IdfModel& model) {
    std::unordered_map<int, double> tf;
    for (const auto& t : tokenize(text)) {
        auto it = model.token_to_index.find(t);
        if (it != model.token_to_index.end()) tf[it->second] += 1.0;  // unseen tokens ignored
    }
    TfIdfVector v;
    v.entries.reserve(tf.size());
    double norm_sq = 0.0;
    for (const auto& [idx, count] : tf) {
        double w = count * model.idf[idx];
        v.entries.emplace_back(idx, w);
        norm_sq += w * w;
    }
    std::sort(v.entries.begin(), v.entries.end());
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [idx, w] : v.entries) w *= inv;
    }
    return v;
}

double cosine_sparse(const TfIdfVector& u, const TfIdfVector& v) {
    // both sides are unit vectors, so the dot product is the cosine
    double dot = 0.0;
    size_t i = 0, j = 0;
    while (i < u.entries.size() && j < v.entries.size()) {
        int a = u.entries[i].first, b = v.entries[j].first;
        if (a == b) {
            dot += u.entries[i].second * v.entries[j].second;
            ++i;
            ++j;
        } else if (a < b) {
            ++i;
        } else {
            ++j;
        }
    }
    return dot;
}

double jaccard_similarity(const std::unordered_set<std::string>& a,
                          const std::unordered_set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    size_t inter = 0;
    for (const auto& t : small)
        if (large.count(t)) ++inter;
    size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::unordered_map<std::string, std::unordered_set<std::string>> filtered_title_token_sets(
    std::span<const Product> products, double max_df_fraction) {
    std::unordered_map<std::string, std::unordered_set<std::string>> sets;
    std::unordered_map<std::string, long long> df;
    sets.reserve(products.size());
    for (const auto& p : products) {
        auto s = token_set(p.title);
        for (const auto& t : s) ++df[t];
        sets[p.product_id] = std::move(s);
    }
    double limit = max_df_fraction * static_cast<double>(products.size());
    std::unordered_set<std::string> dropped;
    for (const auto& [t, n] : df)
        if (static_cast<double>(n) > limit) dropped.insert(t);
    if (!dropped.empty()) {
        for (auto& [id, s] : sets) {
            for (const auto& t : dropped) s.erase(t);
        }
    }
    return sets;
}

const std::vector<double>& EmbeddingTable::lookup(std::string_view token) const {
    auto it = vectors.find(std::string(token));
    return it == vectors.end() ? unknown : it->second;
}

EmbeddingTable load_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    long long line_no = 0;
    bool first = true;
    bool dim_set = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vec;
        double v;
        while (ss >> v) vec.push_back(v);
        if (first) {
            first = false;
            // "count dim" header: a numeric token followed by exactly one number
            if (vec.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos)
                continue;
        }
        if (!dim_set) {
            table.dim = static_cast<int>(vec.size());
            dim_set = true;
        }
        if (static_cast<int>(vec.size()) != table.dim || table.dim == 0)
            throw std::runtime_error("embedding dimension mismatch at line " +
                                     std::to_string(line_no));
        table.vectors.emplace(std::move(token), std::move(vec));
    }
    table.unknown.assign(static_cast<size_t>(std::max(table.dim, 0)), 0.0);
    return table;
}

EmbeddingTable load_embeddings_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
    return load_embeddings(in);
}

}  // namespace hijackdet
