#pragma once

#include "mwpr/corpus.hpp"
#include "mwpr/embedding.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mwpr {

struct TrainConfig {
    double temperature = 0.05;
    double learning_rate = 3e-5;
    int epochs = 5;
    int batch_size = 16;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 0;  // 0 = same as the base embedding dimension
    std::size_t output_dim = 0;  // 0 = same as the base embedding dimension
};

// One contrastive mini-batch of base (pre-pooler) embeddings.
struct TrainingBatch {
    std::vector<Embedding> queries;
    std::vector<Embedding> positives;
    std::vector<std::pair<std::string, std::string>> pair_ids;
};

// Gradients with the same shapes as PoolerParams.
struct PoolerGradients {
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    std::vector<double> b2;
};

// Contrastive softmax loss with in-batch negatives. For each query i the
// positive score sim(q_i, q_i+) competes against every other pooled query
// (j != i) and every pooled positive (all j):
//
//   L = (1/n) sum_i -log( exp(s_ii+/t) /
//         ( sum_{j!=i} exp(s_ij/t) + sum_j exp(s_ij+/t) ) )
//
// where s is cosine over pooled embeddings and t the temperature. The
// log-sum-exp is computed with max subtraction.
double infonce_loss(const TrainingBatch& batch, const PoolerParams& p, double temperature);

// Exact analytic gradient of infonce_loss with respect to every pooler entry.
PoolerGradients infonce_gradients(const TrainingBatch& batch, const PoolerParams& p, double temperature);

// Loss and gradients from one shared forward pass.
std::pair<double, PoolerGradients> infonce_loss_and_gradients(const TrainingBatch& batch,
                                                              const PoolerParams& p, double temperature);

// Central finite differences (L(x+h) - L(x-h)) / 2h per parameter; the test
// oracle for infonce_gradients. Throws BadStepSizeError when h <= 0.
PoolerGradients finite_difference_gradient(const TrainingBatch& batch, const PoolerParams& p,
                                           double temperature, double h);

struct AdamWOptions {
    double learning_rate = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

// One decoupled-weight-decay update over a flat parameter view:
//   theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta
// State is lazily sized to the parameter count on first use.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options);

// AdamW over the four pooler tensors in a fixed flattening order.
void adamw_step(PoolerParams& params, const PoolerGradients& grads, AdamWState& state,
                const AdamWOptions& options);

struct TrainResult {
    PoolerParams params;
    std::vector<double> loss_history;  // one entry per optimized batch
};

// Trains a pooler over mined pairs: epochs x shuffled mini-batches with
// in-batch negatives and AdamW. Deterministic under cfg.seed when the base
// provider is deterministic. A trailing partial batch is kept when it still
// has at least two pairs, otherwise dropped. Throws EmptyPairsError.
TrainResult train(const std::vector<Problem>& corpus, const PairSet& pairs, const TrainConfig& cfg,
                  EmbeddingProvider& base);

void save_checkpoint(const std::string& path, const PoolerParams& params, const TrainConfig& cfg,
                     const std::vector<double>& loss_history);

struct Checkpoint {
    PoolerParams params;
    TrainConfig config;
    std::vector<double> loss_history;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mwpr
