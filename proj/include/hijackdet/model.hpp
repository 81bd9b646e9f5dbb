#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hijackdet/synthgen.hpp"
#include "hijackdet/textprep.hpp"

namespace hijackdet {

enum class EncoderKind { MeanPool, Lstm };

std::string_view to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(std::string_view s);

struct TwinConfig {
    EncoderKind encoder = EncoderKind::MeanPool;
    int embedding_dim = 300;
    std::vector<int> hidden_sizes = {64, 64};
    double dropout = 0.01;
    double learning_rate = 1e-5;
    int epochs = 13;
    int batch_size = 32;
    uint64_t seed = 0;
    int max_len = 512;

    void validate() const;  // throws std::invalid_argument
    std::string to_json() const;
    static TwinConfig from_json(const std::string& text);
};

// Both twin branches share one parameter set. All trainable tensors live in
// a single flat buffer so the optimizer, checkpointing, and finite
// differencing can treat parameters uniformly; the layout table names each
// tensor's slice.
struct TwinParameters {
    struct TensorInfo {
        std::string name;
        size_t offset = 0;
        size_t size = 0;
        int rows = 0;
        int cols = 0;
    };

    TwinConfig config;
    int vocab_size = 0;
    std::vector<double> flat;
    std::vector<TensorInfo> layout;

    // Adam moment buffers, mirroring `flat`.
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    long long adam_t = 0;

    // Layer weights are Xavier-uniform, biases zero (LSTM forget gate bias 1),
    // head w=4 b=0. Embeddings come from `pretrained` when given (missing
    // tokens get the zero vector), else uniform(-0.05, 0.05); row 0 is the
    // unknown token and starts at zero. Everything is trainable.
    static TwinParameters init(const TwinConfig& config, int vocab_size,
                               const EmbeddingTable* pretrained = nullptr,
                               const Vocabulary* vocab = nullptr);

    std::span<double> embedding_row(int id);
    std::span<const double> embedding_row(int id) const;
    double& head_w();
    double& head_b();
    double head_w() const;
    double head_b() const;

    const std::string& param_name_at(size_t flat_index) const;
};

struct Prediction {
    std::string pair_id;
    double u = 0;  // unrelated probability, sigma(w * (-s) + b)
    double s = 0;  // cosine similarity of the two encodings
};

// Identifies the dropout stream: masks are drawn from a PRNG derived from
// (seed, epoch, batch, layer) plus the sample/branch position, so training
// is reproducible and independent of evaluation order.
struct DropoutPlan {
    uint64_t seed = 0;
    uint64_t epoch = 0;
    uint64_t batch = 0;
    uint64_t sample = 0;
};

// Inference-mode encodings (dropout off).
std::vector<double> encode_mean_pool(const TokenSequence& seq, const TwinParameters& params);
std::vector<double> encode_lstm(const TokenSequence& seq, const TwinParameters& params);

Prediction forward_pair(const TokenSequence& p, const TokenSequence& r,
                        const TwinParameters& params, bool train_mode = false,
                        const DropoutPlan* plan = nullptr);

// -[y ln u + (1-y) ln(1-u)], u clamped to [1e-7, 1-1e-7].
double bce_loss(double u, int label);

struct PairSample {
    TokenSequence product;
    TokenSequence review;
    int label = 0;
};

// Analytic gradients of the mean batch loss with respect to every
// parameter. Throws std::runtime_error naming the tensor if any gradient
// is non-finite.
std::vector<double> compute_gradients(std::span<const PairSample> batch,
                                      const TwinParameters& params, bool train_mode = false,
                                      const DropoutPlan* plan = nullptr,
                                      double* mean_loss = nullptr);

// Mean batch loss, inference path only (no dropout).
double batch_loss(std::span<const PairSample> batch, const TwinParameters& params);

// One Adam update (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected) at the
// configured learning rate. Increments params.adam_t.
void adam_step(TwinParameters& params, std::span<const double> grads);

// Central finite differences against compute_gradients over every
// parameter; returns the max relative error. Dropout is disabled. `params`
// is perturbed in place and restored.
double gradient_check(TwinParameters& params, std::span<const PairSample> batch, double h = 1e-5);

struct TwinModel {
    Vocabulary vocab;
    TwinParameters params;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0;
    double val_accuracy = 0;  // NaN when validation is empty
    double val_auc = 0;       // NaN when undefined
};

struct TrainResult {
    TwinModel model;  // parameters from the best-validation-AUC epoch
    std::vector<EpochMetrics> history;
    int best_epoch = 0;  // 0 when validation never produced an AUC
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Builds the vocabulary from the train split (min_count 2), converts pair
// texts to sequences, then runs minibatch Adam for config.epochs epochs.
// Deterministic under (config, seed) in single-threaded mode.
TrainResult train(const DatasetSplit& split, const TwinConfig& config,
                  const EmbeddingTable* pretrained = nullptr,
                  const EpochCallback& on_epoch = nullptr);

struct CheckpointMeta {
    std::string config_hash;
    uint64_t seed = 0;
};

// Versioned container: JSON header (config, vocabulary, provenance)
// followed by raw little-endian float64 tensors. load(save(m)) is
// bit-exact, including Adam state.
void save_checkpoint(const std::string& path, const TwinModel& model,
                     const CheckpointMeta& meta = {});
TwinModel load_checkpoint(const std::string& path);

// No-training baseline: 1 - cosine of the TF-IDF vectors, clamped to [0,1].
double tfidf_baseline_score(std::string_view product_text, std::string_view review_text,
                            const IdfModel& idf);

}  // namespace hijackdet
