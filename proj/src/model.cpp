#include "hijackdet/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "hijackdet/eval.hpp"
#include "hijackdet/jsonl.hpp"
#include "hijackdet/rng.hpp"
#include "hijackdet/version.hpp"

namespace hijackdet {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::MeanPool: return "mean_pool";
        case EncoderKind::Lstm: return "lstm";
    }
    return "mean_pool";
}

EncoderKind encoder_kind_from_string(std::string_view s) {
    if (s == "mean_pool") return EncoderKind::MeanPool;
    if (s == "lstm") return EncoderKind::Lstm;
    throw std::invalid_argument("unknown encoder kind: " + std::string(s));
}

void TwinConfig::validate() const {
    if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
    if (hidden_sizes.empty()) throw std::invalid_argument("hidden_sizes must not be empty");
    for (int h : hidden_sizes)
        if (h < 1) throw std::invalid_argument("hidden sizes must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("dropout must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

std::string TwinConfig::to_json() const {
    ordered_json j;
    j["encoder"] = std::string(to_string(encoder));
    j["embedding_dim"] = embedding_dim;
    j["hidden_sizes"] = hidden_sizes;
    j["dropout"] = dropout;
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["max_len"] = max_len;
    return j.dump();
}

TwinConfig TwinConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
    TwinConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "encoder")
            c.encoder = encoder_kind_from_string(value.get<std::string>());
        else if (key == "embedding_dim")
            c.embedding_dim = value.get<int>();
        else if (key == "hidden_sizes")
            c.hidden_sizes = value.get<std::vector<int>>();
        else if (key == "dropout")
            c.dropout = value.get<double>();
        else if (key == "learning_rate")
            c.learning_rate = value.get<double>();
        else if (key == "epochs")
            c.epochs = value.get<int>();
        else if (key == "batch_size")
            c.batch_size = value.get<int>();
        else if (key == "seed")
            c.seed = value.get<uint64_t>();
        else if (key == "max_len")
            c.max_len = value.get<int>();
        else
            throw std::invalid_argument("unknown model config key: " + key);
    }
    c.validate();
    return c;
}

namespace {

constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

const TwinParameters::TensorInfo& find_tensor(const TwinParameters& p, std::string_view name) {
    for (const auto& t : p.layout)
        if (t.name == name) return t;
    throw std::runtime_error("tensor not found: " + std::string(name));
}

std::string dense_w(int l) { return "dense" + std::to_string(l) + ".w"; }
std::string dense_b(int l) { return "dense" + std::to_string(l) + ".b"; }
std::string lstm_wx(int l) { return "lstm" + std::to_string(l) + ".wx"; }
std::string lstm_wh(int l) { return "lstm" + std::to_string(l) + ".wh"; }
std::string lstm_b(int l) { return "lstm" + std::to_string(l) + ".b"; }

Rng dropout_rng(const DropoutPlan& plan, uint64_t sample, uint64_t branch, uint64_t layer) {
    return Rng(mix_seed(plan.seed,
                        {fnv1a64("dropout"), plan.epoch, plan.batch, sample, branch, layer}));
}

// Inverted dropout: kept units are scaled by 1/(1-p) so inference needs no
// rescaling.
std::vector<double> draw_mask(Rng& rng, size_t count, double p) {
    std::vector<double> mask(count);
    double keep_scale = 1.0 / (1.0 - p);
    for (auto& m : mask) m = rng.uniform01() < p ? 0.0 : keep_scale;
    return mask;
}

struct MeanPoolCache {
    std::vector<double> x0;                 // mean of token embeddings
    std::vector<std::vector<double>> act;   // tanh output per layer
    std::vector<std::vector<double>> out;   // layer output after inter-layer dropout
    std::vector<std::vector<double>> mask;  // mask on out[l], l < L-1; empty when off
};

struct LstmLayerCache {
    std::vector<std::vector<double>> in;    // per-timestep input (after dropout for l > 0)
    std::vector<std::vector<double>> mask;  // per-timestep input mask (l > 0); empty when off
    std::vector<std::vector<double>> gi, gf, gg, go, cc, hh;
};

struct BranchCache {
    MeanPoolCache mp;
    std::vector<LstmLayerCache> lstm;
    std::vector<double> encoding;
};

// y += W x (W row-major rows x cols)
void mat_vec_add(const double* w, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* wr = w + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
}

// x_grad += W^T dy
void mat_tvec_add(const double* w, const double* dy, double* x_grad, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double d = dy[r];
        if (d == 0.0) continue;
        const double* wr = w + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) x_grad[c] += wr[c] * d;
    }
}

void forward_mean_pool_cached(const TokenSequence& seq, const TwinParameters& P, bool drop,
                              const DropoutPlan* plan, uint64_t sample, uint64_t branch,
                              BranchCache& C) {
    const int d = P.config.embedding_dim;
    const auto& emb = find_tensor(P, "embedding");
    auto& mp = C.mp;
    mp.x0.assign(d, 0.0);
    if (!seq.ids.empty()) {
        for (int id : seq.ids) {
            const double* row = P.flat.data() + emb.offset + static_cast<size_t>(id) * d;
            for (int k = 0; k < d; ++k) mp.x0[k] += row[k];
        }
        double inv = 1.0 / static_cast<double>(seq.ids.size());
        for (auto& v : mp.x0) v *= inv;
    }

    const int L = static_cast<int>(P.config.hidden_sizes.size());
    mp.act.assign(L, {});
    mp.out.assign(L, {});
    mp.mask.assign(L, {});

    const std::vector<double>* in = &mp.x0;
    int in_dim = d;
    for (int l = 0; l < L; ++l) {
        const int h = P.config.hidden_sizes[l];
        const auto& w = find_tensor(P, dense_w(l));
        const auto& b = find_tensor(P, dense_b(l));
        mp.act[l].assign(h, 0.0);
        for (int r = 0; r < h; ++r) mp.act[l][r] = P.flat[b.offset + r];
        mat_vec_add(P.flat.data() + w.offset, in->data(), mp.act[l].data(), h, in_dim);
        for (auto& v : mp.act[l]) v = std::tanh(v);
        // dropout sits on every dense layer's output
        if (drop) {
            Rng rng = dropout_rng(*plan, sample, branch, static_cast<uint64_t>(l));
            mp.mask[l] = draw_mask(rng, static_cast<size_t>(h), P.config.dropout);
            mp.out[l].resize(h);
            for (int r = 0; r < h; ++r) mp.out[l][r] = mp.act[l][r] * mp.mask[l][r];
        } else {
            mp.out[l] = mp.act[l];
        }
        in = &mp.out[l];
        in_dim = h;
    }
    C.encoding = mp.out.back();
}

void backward_mean_pool(const TokenSequence& seq, const TwinParameters& P, const BranchCache& C,
                        const std::vector<double>& de, std::vector<double>& G) {
    const int d = P.config.embedding_dim;
    const int L = static_cast<int>(P.config.hidden_sizes.size());
    const auto& mp = C.mp;

    std::vector<double> grad_out = de;  // gradient w.r.t. out[l], starting at l = L-1
    for (int l = L - 1; l >= 0; --l) {
        const int h = P.config.hidden_sizes[l];
        const auto& w = find_tensor(P, dense_w(l));
        const auto& b = find_tensor(P, dense_b(l));
        const int in_dim = l == 0 ? d : P.config.hidden_sizes[l - 1];
        const std::vector<double>& input = l == 0 ? mp.x0 : mp.out[l - 1];

        std::vector<double> dz(h);
        const bool masked = !mp.mask[l].empty();
        for (int r = 0; r < h; ++r) {
            double da = masked ? grad_out[r] * mp.mask[l][r] : grad_out[r];
            dz[r] = da * (1.0 - mp.act[l][r] * mp.act[l][r]);
        }
        for (int r = 0; r < h; ++r) {
            double* gw = G.data() + w.offset + static_cast<size_t>(r) * in_dim;
            for (int c = 0; c < in_dim; ++c) gw[c] += dz[r] * input[c];
            G[b.offset + r] += dz[r];
        }
        std::vector<double> grad_in(in_dim, 0.0);
        mat_tvec_add(P.flat.data() + w.offset, dz.data(), grad_in.data(), h, in_dim);
        grad_out = std::move(grad_in);
    }

    if (!seq.ids.empty()) {
        const auto& emb = find_tensor(P, "embedding");
        double inv = 1.0 / static_cast<double>(seq.ids.size());
        for (int id : seq.ids) {
            double* gr = G.data() + emb.offset + static_cast<size_t>(id) * d;
            for (int k = 0; k < d; ++k) gr[k] += grad_out[k] * inv;
        }
    }
}

void forward_lstm_cached(const TokenSequence& seq, const TwinParameters& P, bool drop,
                         const DropoutPlan* plan, uint64_t sample, uint64_t branch,
                         BranchCache& C) {
    const int d = P.config.embedding_dim;
    const int L = static_cast<int>(P.config.hidden_sizes.size());
    const size_t T = seq.ids.size();
    const auto& emb = find_tensor(P, "embedding");

    C.lstm.assign(L, {});
    for (int l = 0; l < L; ++l) {
        const int h = P.config.hidden_sizes[l];
        const int in_dim = l == 0 ? d : P.config.hidden_sizes[l - 1];
        const auto& wx = find_tensor(P, lstm_wx(l));
        const auto& wh = find_tensor(P, lstm_wh(l));
        const auto& b = find_tensor(P, lstm_b(l));
        auto& lc = C.lstm[l];
        lc.in.assign(T, {});
        lc.gi.assign(T, {});
        lc.gf.assign(T, {});
        lc.gg.assign(T, {});
        lc.go.assign(T, {});
        lc.cc.assign(T, {});
        lc.hh.assign(T, {});
        if (l > 0 && drop) lc.mask.assign(T, {});

        Rng rng = drop && l > 0 ? dropout_rng(*plan, sample, branch, static_cast<uint64_t>(l))
                                : Rng(0);
        std::vector<double> prev_h(h, 0.0), prev_c(h, 0.0);
        std::vector<double> z(4 * static_cast<size_t>(h));
        for (size_t t = 0; t < T; ++t) {
            auto& x = lc.in[t];
            if (l == 0) {
                const double* row =
                    P.flat.data() + emb.offset + static_cast<size_t>(seq.ids[t]) * d;
                x.assign(row, row + d);
            } else {
                x = C.lstm[l - 1].hh[t];
                if (drop) {
                    lc.mask[t] = draw_mask(rng, x.size(), P.config.dropout);
                    for (size_t k = 0; k < x.size(); ++k) x[k] *= lc.mask[t][k];
                }
            }
            for (int r = 0; r < 4 * h; ++r) z[r] = P.flat[b.offset + r];
            mat_vec_add(P.flat.data() + wx.offset, x.data(), z.data(), 4 * h, in_dim);
            mat_vec_add(P.flat.data() + wh.offset, prev_h.data(), z.data(), 4 * h, h);

            auto& gi = lc.gi[t];
            auto& gf = lc.gf[t];
            auto& gg = lc.gg[t];
            auto& go = lc.go[t];
            auto& cc = lc.cc[t];
            auto& hh = lc.hh[t];
            gi.resize(h);
            gf.resize(h);
            gg.resize(h);
            go.resize(h);
            cc.resize(h);
            hh.resize(h);
            for (int r = 0; r < h; ++r) {
                gi[r] = sigmoid(z[r]);
                gf[r] = sigmoid(z[h + r]);
                gg[r] = std::tanh(z[2 * h + r]);
                go[r] = sigmoid(z[3 * h + r]);
                cc[r] = gf[r] * prev_c[r] + gi[r] * gg[r];
                hh[r] = go[r] * std::tanh(cc[r]);
            }
            prev_h = hh;
            prev_c = cc;
        }
    }

    const int h_top = P.config.hidden_sizes[L - 1];
    if (T > 0)
        C.encoding = C.lstm[L - 1].hh[T - 1];
    else
        C.encoding.assign(h_top, 0.0);
}

void backward_lstm(const TokenSequence& seq, const TwinParameters& P, const BranchCache& C,
                   const std::vector<double>& de, std::vector<double>& G) {
    const int d = P.config.embedding_dim;
    const int L = static_cast<int>(P.config.hidden_sizes.size());
    const size_t T = seq.ids.size();
    if (T == 0) return;  // encoding was the zero constant
    const auto& emb = find_tensor(P, "embedding");

    // gradient arriving at h^l_t from the layer above (or the loss, for top)
    std::vector<std::vector<double>> d_ext(T);
    d_ext[T - 1] = de;

    for (int l = L - 1; l >= 0; --l) {
        const int h = P.config.hidden_sizes[l];
        const int in_dim = l == 0 ? d : P.config.hidden_sizes[l - 1];
        const auto& wx = find_tensor(P, lstm_wx(l));
        const auto& wh = find_tensor(P, lstm_wh(l));
        const auto& b = find_tensor(P, lstm_b(l));
        const auto& lc = C.lstm[l];

        std::vector<std::vector<double>> d_in(T);
        std::vector<double> dh_rec(h, 0.0), dc_rec(h, 0.0);
        std::vector<double> dz(4 * static_cast<size_t>(h));

        for (size_t ti = T; ti-- > 0;) {
            std::vector<double> dh = dh_rec;
            if (!d_ext[ti].empty())
                for (int r = 0; r < h; ++r) dh[r] += d_ext[ti][r];
            std::vector<double> dc = dc_rec;

            const auto& gi = lc.gi[ti];
            const auto& gf = lc.gf[ti];
            const auto& gg = lc.gg[ti];
            const auto& go = lc.go[ti];
            const auto& cc = lc.cc[ti];
            for (int r = 0; r < h; ++r) {
                double tc = std::tanh(cc[r]);
                double do_ = dh[r] * tc;
                dz[3 * h + r] = do_ * go[r] * (1.0 - go[r]);
                dc[r] += dh[r] * go[r] * (1.0 - tc * tc);
                double prev_c = ti > 0 ? lc.cc[ti - 1][r] : 0.0;
                dz[r] = dc[r] * gg[r] * gi[r] * (1.0 - gi[r]);
                dz[h + r] = dc[r] * prev_c * gf[r] * (1.0 - gf[r]);
                dz[2 * h + r] = dc[r] * gi[r] * (1.0 - gg[r] * gg[r]);
            }
            for (int r = 0; r < h; ++r) dc_rec[r] = dc[r] * gf[r];

            const std::vector<double>& x = lc.in[ti];
            const std::vector<double>* prev_h = ti > 0 ? &lc.hh[ti - 1] : nullptr;
            for (int r = 0; r < 4 * h; ++r) {
                double dzr = dz[r];
                if (dzr == 0.0) continue;
                double* gwx = G.data() + wx.offset + static_cast<size_t>(r) * in_dim;
                for (int c = 0; c < in_dim; ++c) gwx[c] += dzr * x[c];
                if (prev_h) {
                    double* gwh = G.data() + wh.offset + static_cast<size_t>(r) * h;
                    for (int c = 0; c < h; ++c) gwh[c] += dzr * (*prev_h)[c];
                }
                G[b.offset + r] += dzr;
            }
            d_in[ti].assign(in_dim, 0.0);
            mat_tvec_add(P.flat.data() + wx.offset, dz.data(), d_in[ti].data(), 4 * h, in_dim);
            dh_rec.assign(h, 0.0);
            mat_tvec_add(P.flat.data() + wh.offset, dz.data(), dh_rec.data(), 4 * h, h);
        }

        if (l > 0) {
            for (size_t t = 0; t < T; ++t) {
                if (!lc.mask.empty() && !lc.mask[t].empty())
                    for (size_t k = 0; k < d_in[t].size(); ++k) d_in[t][k] *= lc.mask[t][k];
                d_ext[t] = std::move(d_in[t]);
            }
        } else {
            for (size_t t = 0; t < T; ++t) {
                double* gr = G.data() + emb.offset + static_cast<size_t>(seq.ids[t]) * d;
                for (int k = 0; k < d; ++k) gr[k] += d_in[t][k];
            }
        }
    }
}

void forward_branch(const TokenSequence& seq, const TwinParameters& P, bool drop,
                    const DropoutPlan* plan, uint64_t sample, uint64_t branch, BranchCache& C) {
    if (P.config.encoder == EncoderKind::MeanPool)
        forward_mean_pool_cached(seq, P, drop, plan, sample, branch, C);
    else
        forward_lstm_cached(seq, P, drop, plan, sample, branch, C);
}

void backward_branch(const TokenSequence& seq, const TwinParameters& P, const BranchCache& C,
                     const std::vector<double>& de, std::vector<double>& G) {
    if (P.config.encoder == EncoderKind::MeanPool)
        backward_mean_pool(seq, P, C, de, G);
    else
        backward_lstm(seq, P, C, de, G);
}

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct PairForward {
    BranchCache product;
    BranchCache review;
    double s = 0.0;       // cosine similarity
    double u = 0.0;       // unrelated probability
    double na = 0.0, nb = 0.0;
};

void forward_pair_cached(const TokenSequence& p, const TokenSequence& r,
                         const TwinParameters& params, bool drop, const DropoutPlan* plan,
                         uint64_t sample, PairForward& f) {
    forward_branch(p, params, drop, plan, sample, /*branch=*/0, f.product);
    forward_branch(r, params, drop, plan, sample, /*branch=*/1, f.review);
    const auto& a = f.product.encoding;
    const auto& b = f.review.encoding;
    f.na = vec_norm(a);
    f.nb = vec_norm(b);
    if (f.na > 0.0 && f.nb > 0.0) {
        double dot = 0.0;
        for (size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
        f.s = dot / (f.na * f.nb);
    } else {
        f.s = 0.0;  // degenerate encoding; treated as a constant
    }
    f.u = sigmoid(params.head_w() * (-f.s) + params.head_b());
}

}  // namespace

TwinParameters TwinParameters::init(const TwinConfig& config, int vocab_size,
                                    const EmbeddingTable* pretrained, const Vocabulary* vocab) {
    config.validate();
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
    if (pretrained) {
        if (!vocab)
            throw std::invalid_argument("pretrained embeddings require the vocabulary");
        if (vocab->size() != vocab_size)
            throw std::invalid_argument("vocabulary size does not match vocab_size");
        if (pretrained->dim != config.embedding_dim)
            throw std::invalid_argument("pretrained embedding dim " +
                                        std::to_string(pretrained->dim) +
                                        " does not match embedding_dim " +
                                        std::to_string(config.embedding_dim));
    }

    TwinParameters p;
    p.config = config;
    p.vocab_size = vocab_size;

    size_t next = 0;
    auto add = [&](std::string name, int rows, int cols) {
        TensorInfo info;
        info.name = std::move(name);
        info.rows = rows;
        info.cols = cols;
        info.size = static_cast<size_t>(rows) * static_cast<size_t>(cols);
        info.offset = next;
        next += info.size;
        p.layout.push_back(std::move(info));
    };

    const int d = config.embedding_dim;
    add("embedding", vocab_size, d);
    int in_dim = d;
    for (size_t l = 0; l < config.hidden_sizes.size(); ++l) {
        int h = config.hidden_sizes[l];
        if (config.encoder == EncoderKind::MeanPool) {
            add(dense_w(static_cast<int>(l)), h, in_dim);
            add(dense_b(static_cast<int>(l)), h, 1);
        } else {
            add(lstm_wx(static_cast<int>(l)), 4 * h, in_dim);
            add(lstm_wh(static_cast<int>(l)), 4 * h, h);
            add(lstm_b(static_cast<int>(l)), 4 * h, 1);
        }
        in_dim = h;
    }
    add("head.w", 1, 1);
    add("head.b", 1, 1);

    p.flat.assign(next, 0.0);
    p.adam_m.assign(next, 0.0);
    p.adam_v.assign(next, 0.0);
    p.adam_t = 0;

    auto tensor_rng = [&](const std::string& name) {
        return Rng(mix_seed(config.seed, {fnv1a64("init"), fnv1a64(name)}));
    };

    for (const auto& t : p.layout) {
        if (t.name == "embedding") {
            if (pretrained) {
                // row 0 (unknown) stays zero; missing tokens get zeros too
                for (int id = 1; id < vocab_size; ++id) {
                    const auto& vec = pretrained->lookup(vocab->id_to_token[id]);
                    std::copy(vec.begin(), vec.end(),
                              p.flat.begin() + t.offset + static_cast<size_t>(id) * d);
                }
            } else {
                Rng rng = tensor_rng(t.name);
                for (int id = 1; id < vocab_size; ++id) {
                    double* row = p.flat.data() + t.offset + static_cast<size_t>(id) * d;
                    for (int k = 0; k < d; ++k) row[k] = rng.uniform(-0.05, 0.05);
                }
            }
        } else if (t.name == "head.w") {
            p.flat[t.offset] = 4.0;
        } else if (t.name == "head.b") {
            p.flat[t.offset] = 0.0;
        } else if (t.name.ends_with(".w") || t.name.ends_with(".wx") || t.name.ends_with(".wh")) {
            // Xavier-uniform; LSTM matrices stack four gate blocks, so the
            // fan-out is the per-gate row count.
            int fan_out = t.name.starts_with("lstm") ? t.rows / 4 : t.rows;
            double limit = std::sqrt(6.0 / static_cast<double>(fan_out + t.cols));
            Rng rng = tensor_rng(t.name);
            for (size_t k = 0; k < t.size; ++k)
                p.flat[t.offset + k] = rng.uniform(-limit, limit);
        } else if (t.name.ends_with(".b")) {
            if (t.name.starts_with("lstm")) {
                int h = t.rows / 4;
                for (int r = h; r < 2 * h; ++r) p.flat[t.offset + r] = 1.0;  // forget gate
            }
        }
    }
    return p;
}

std::span<double> TwinParameters::embedding_row(int id) {
    const auto& t = find_tensor(*this, "embedding");
    if (id < 0 || id >= vocab_size) throw std::out_of_range("embedding row out of range");
    return {flat.data() + t.offset + static_cast<size_t>(id) * config.embedding_dim,
            static_cast<size_t>(config.embedding_dim)};
}

std::span<const double> TwinParameters::embedding_row(int id) const {
    const auto& t = find_tensor(*this, "embedding");
    if (id < 0 || id >= vocab_size) throw std::out_of_range("embedding row out of range");
    return {flat.data() + t.offset + static_cast<size_t>(id) * config.embedding_dim,
            static_cast<size_t>(config.embedding_dim)};
}

double& TwinParameters::head_w() { return flat[find_tensor(*this, "head.w").offset]; }
double& TwinParameters::head_b() { return flat[find_tensor(*this, "head.b").offset]; }
double TwinParameters::head_w() const { return flat[find_tensor(*this, "head.w").offset]; }
double TwinParameters::head_b() const { return flat[find_tensor(*this, "head.b").offset]; }

const std::string& TwinParameters::param_name_at(size_t flat_index) const {
    for (const auto& t : layout)
        if (flat_index >= t.offset && flat_index < t.offset + t.size) return t.name;
    throw std::out_of_range("flat index outside parameter layout");
}

std::vector<double> encode_mean_pool(const TokenSequence& seq, const TwinParameters& params) {
    BranchCache c;
    forward_mean_pool_cached(seq, params, false, nullptr, 0, 0, c);
    return std::move(c.encoding);
}

std::vector<double> encode_lstm(const TokenSequence& seq, const TwinParameters& params) {
    BranchCache c;
    forward_lstm_cached(seq, params, false, nullptr, 0, 0, c);
    return std::move(c.encoding);
}

Prediction forward_pair(const TokenSequence& p, const TokenSequence& r,
                        const TwinParameters& params, bool train_mode, const DropoutPlan* plan) {
    bool drop = train_mode && params.config.dropout > 0.0 && plan != nullptr;
    PairForward f;
    forward_pair_cached(p, r, params, drop, plan, plan ? plan->sample : 0, f);
    Prediction pred;
    pred.u = f.u;
    pred.s = f.s;
    return pred;
}

double bce_loss(double u, int label) {
    double c = std::clamp(u, kProbLo, kProbHi);
    return label == 1 ? -std::log(c) : -std::log(1.0 - c);
}

std::vector<double> compute_gradients(std::span<const PairSample> batch,
                                      const TwinParameters& params, bool train_mode,
                                      const DropoutPlan* plan, double* mean_loss) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const bool drop = train_mode && params.config.dropout > 0.0 && plan != nullptr;
    std::vector<double> grads(params.flat.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const auto& head_w_info = find_tensor(params, "head.w");
    const auto& head_b_info = find_tensor(params, "head.b");
    double loss_sum = 0.0;

    PairForward f;
    for (size_t k = 0; k < batch.size(); ++k) {
        const PairSample& sample = batch[k];
        uint64_t sample_id = (plan ? plan->sample : 0) + k;
        forward_pair_cached(sample.product, sample.review, params, drop, plan, sample_id, f);
        loss_sum += bce_loss(f.u, sample.label);

        // d(loss)/d(logit); zero where the clamp flattens the loss
        double dlogit = 0.0;
        if (f.u >= kProbLo && f.u <= kProbHi)
            dlogit = (f.u - static_cast<double>(sample.label)) * inv_b;
        if (dlogit == 0.0) continue;

        grads[head_w_info.offset] += dlogit * (-f.s);
        grads[head_b_info.offset] += dlogit;
        double ds = dlogit * (-params.head_w());
        if (f.na > 0.0 && f.nb > 0.0) {
            const auto& a = f.product.encoding;
            const auto& b = f.review.encoding;
            const size_t dim = a.size();
            std::vector<double> da(dim), db(dim);
            double inv_ab = 1.0 / (f.na * f.nb);
            double inv_aa = 1.0 / (f.na * f.na);
            double inv_bb = 1.0 / (f.nb * f.nb);
            for (size_t i = 0; i < dim; ++i) {
                da[i] = ds * (b[i] * inv_ab - f.s * a[i] * inv_aa);
                db[i] = ds * (a[i] * inv_ab - f.s * b[i] * inv_bb);
            }
            backward_branch(sample.product, params, f.product, da, grads);
            backward_branch(sample.review, params, f.review, db, grads);
        }
    }

    for (size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("non-finite gradient in " + params.param_name_at(i));
    }
    if (mean_loss) *mean_loss = loss_sum * inv_b;
    return grads;
}

double batch_loss(std::span<const PairSample> batch, const TwinParameters& params) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double sum = 0.0;
    PairForward f;
    for (const auto& sample : batch) {
        forward_pair_cached(sample.product, sample.review, params, false, nullptr, 0, f);
        sum += bce_loss(f.u, sample.label);
    }
    return sum / static_cast<double>(batch.size());
}

void adam_step(TwinParameters& params, std::span<const double> grads) {
    if (grads.size() != params.flat.size())
        throw std::invalid_argument("gradient size does not match parameter count");
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++params.adam_t;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(params.adam_t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(params.adam_t));
    const double lr = params.config.learning_rate;
    for (size_t i = 0; i < grads.size(); ++i) {
        double g = grads[i];
        double m = params.adam_m[i] = b1 * params.adam_m[i] + (1.0 - b1) * g;
        double v = params.adam_v[i] = b2 * params.adam_v[i] + (1.0 - b2) * g * g;
        params.flat[i] -= lr * (m / corr1) / (std::sqrt(v / corr2) + eps);
    }
}

double gradient_check(TwinParameters& params, std::span<const PairSample> batch, double h) {
    auto analytic = compute_gradients(batch, params, false, nullptr, nullptr);
    double worst = 0.0;
    for (size_t i = 0; i < params.flat.size(); ++i) {
        double saved = params.flat[i];
        params.flat[i] = saved + h;
        double lp = batch_loss(batch, params);
        params.flat[i] = saved - h;
        double lm = batch_loss(batch, params);
        params.flat[i] = saved;
        double numeric = (lp - lm) / (2.0 * h);
        double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-3);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

TrainResult train(const DatasetSplit& split, const TwinConfig& config,
                  const EmbeddingTable* pretrained, const EpochCallback& on_epoch) {
    config.validate();
    if (split.train.empty()) throw std::invalid_argument("empty train set");
    const double nan = std::numeric_limits<double>::quiet_NaN();

    TokenCounts counts;
    for (const auto& pr : split.train) {
        counts.add_text(pr.product_text);
        counts.add_text(pr.review_text);
    }
    Vocabulary vocab = build_vocabulary(counts, 2);

    auto to_samples = [&](const std::vector<LabeledPair>& pairs) {
        std::vector<PairSample> out;
        out.reserve(pairs.size());
        for (const auto& pr : pairs)
            out.push_back({to_sequence(pr.product_text, vocab, config.max_len),
                           to_sequence(pr.review_text, vocab, config.max_len), pr.label});
        return out;
    };
    std::vector<PairSample> train_set = to_samples(split.train);
    std::vector<PairSample> val_set = to_samples(split.validation);

    TwinParameters params = TwinParameters::init(config, vocab.size(), pretrained, &vocab);

    TrainResult result;
    TwinParameters best;
    double best_auc = -1.0;

    const size_t n = train_set.size();
    std::vector<size_t> order(n);
    std::vector<PairSample> batch;
    batch.reserve(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), size_t{0});
        Rng(mix_seed(config.seed, {fnv1a64("epoch"), static_cast<uint64_t>(epoch)}))
            .shuffle(order);

        double loss_sum = 0.0;
        uint64_t batch_index = 0;
        for (size_t start = 0; start < n; start += config.batch_size) {
            size_t end = std::min(n, start + static_cast<size_t>(config.batch_size));
            batch.clear();
            for (size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
            DropoutPlan plan{config.seed, static_cast<uint64_t>(epoch), batch_index, 0};
            double mean_loss = 0.0;
            auto grads =
                compute_gradients(batch, params, config.dropout > 0.0, &plan, &mean_loss);
            adam_step(params, grads);
            loss_sum += mean_loss * static_cast<double>(batch.size());
            ++batch_index;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = n > 0 ? loss_sum / static_cast<double>(n) : nan;
        em.val_accuracy = nan;
        em.val_auc = nan;
        if (!val_set.empty()) {
            std::vector<double> scores;
            std::vector<int> labels;
            scores.reserve(val_set.size());
            labels.reserve(val_set.size());
            PairForward f;
            for (const auto& sample : val_set) {
                forward_pair_cached(sample.product, sample.review, params, false, nullptr, 0, f);
                scores.push_back(f.u);
                labels.push_back(sample.label);
            }
            em.val_accuracy = accuracy(scores, labels, 0.5);
            try {
                em.val_auc = auc(scores, labels);
            } catch (const std::invalid_argument&) {
                // single-class validation split; AUC undefined
            }
        }
        if (!std::isnan(em.val_auc) && em.val_auc > best_auc) {
            best_auc = em.val_auc;
            best = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(em);
        if (on_epoch) on_epoch(em);
    }

    result.model.vocab = std::move(vocab);
    result.model.params = result.best_epoch > 0 ? std::move(best) : std::move(params);
    return result;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void append_raw(std::string& out, const std::vector<double>& v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

void read_raw(const std::string& blob, size_t& pos, std::vector<double>& v, size_t count) {
    size_t bytes = count * sizeof(double);
    if (pos + bytes > blob.size()) throw std::runtime_error("checkpoint truncated");
    v.resize(count);
    std::memcpy(v.data(), blob.data() + pos, bytes);
    pos += bytes;
}

}  // namespace

void save_checkpoint(const std::string& path, const TwinModel& model,
                     const CheckpointMeta& meta) {
    ordered_json header;
    header["magic"] = "HJDC";
    header["version"] = 1;
    header["tool_version"] = kToolVersion;
    header["config"] = json::parse(model.params.config.to_json());
    header["config_hash"] = meta.config_hash;
    header["seed"] = meta.seed;
    header["vocab_size"] = model.params.vocab_size;
    header["adam_t"] = model.params.adam_t;
    ordered_json layout = ordered_json::array();
    for (const auto& t : model.params.layout) {
        layout.push_back({{"name", t.name},
                          {"offset", t.offset},
                          {"size", t.size},
                          {"rows", t.rows},
                          {"cols", t.cols}});
    }
    header["layout"] = std::move(layout);
    header["param_count"] = model.params.flat.size();
    header["vocab"] = json::parse(model.vocab.to_json());

    std::string out = header.dump();
    out += '\n';
    append_raw(out, model.params.flat);
    append_raw(out, model.params.adam_m);
    append_raw(out, model.params.adam_v);
    atomic_write_file(path, out);
}

TwinModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    size_t nl = blob.find('\n');
    if (nl == std::string::npos) throw std::runtime_error("checkpoint header missing");
    json header = json::parse(blob.substr(0, nl));
    if (header.value("magic", "") != "HJDC")
        throw std::runtime_error("not a checkpoint file: " + path);
    if (header.value("version", 0) != 1)
        throw std::runtime_error("unsupported checkpoint version");

    TwinModel model;
    model.vocab = Vocabulary::from_json(header.at("vocab").dump());
    model.params.config = TwinConfig::from_json(header.at("config").dump());
    model.params.vocab_size = header.at("vocab_size").get<int>();
    model.params.adam_t = header.at("adam_t").get<long long>();
    for (const auto& t : header.at("layout")) {
        TwinParameters::TensorInfo info;
        info.name = t.at("name").get<std::string>();
        info.offset = t.at("offset").get<size_t>();
        info.size = t.at("size").get<size_t>();
        info.rows = t.at("rows").get<int>();
        info.cols = t.at("cols").get<int>();
        model.params.layout.push_back(std::move(info));
    }
    size_t count = header.at("param_count").get<size_t>();
    size_t pos = nl + 1;
    read_raw(blob, pos, model.params.flat, count);
    read_raw(blob, pos, model.params.adam_m, count);
    read_raw(blob, pos, model.params.adam_v, count);
    if (pos != blob.size()) throw std::runtime_error("checkpoint has trailing bytes");
    if (model.vocab.size() != model.params.vocab_size)
        throw std::runtime_error("checkpoint vocabulary does not match vocab_size");
    return model;
}

double tfidf_baseline_score(std::string_view product_text, std::string_view review_text,
                            const IdfModel& idf) {
    TfIdfVector vp = tfidf_transform(product_text, idf);
    TfIdfVector vr = tfidf_transform(review_text, idf);
    return std::clamp(1.0 - cosine_sparse(vp, vr), 0.0, 1.0);
}

}  // namespace hijackdet
