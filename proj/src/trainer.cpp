#include "mwpr/trainer.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace mwpr {

using nlohmann::json;

namespace {

// Per-input forward pass state needed for backpropagation.
struct ForwardCache {
    const std::vector<double>* x = nullptr;  // base embedding
    std::vector<double> h;                   // tanh(W1^T x + b1)
    std::vector<double> u;                   // normalized output
    double z2_norm = 0.0;                    // ||W2^T h + b2||
};

ForwardCache forward_cached(const Embedding& e, const PoolerParams& p) {
    if (e.values.size() != p.d_in) {
        throw DimensionMismatchError("batch embedding dimension does not match pooler input");
    }
    ForwardCache cache;
    cache.x = &e.values;
    cache.h.resize(p.d_h);
    for (std::size_t j = 0; j < p.d_h; ++j) {
        double z = p.b1[j];
        for (std::size_t i = 0; i < p.d_in; ++i) {
            z += p.w1[i * p.d_h + j] * e.values[i];
        }
        cache.h[j] = std::tanh(z);
    }
    std::vector<double> z2(p.d_out);
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < p.d_out; ++k) {
        double z = p.b2[k];
        for (std::size_t j = 0; j < p.d_h; ++j) {
            z += p.w2[j * p.d_out + k] * cache.h[j];
        }
        z2[k] = z;
        norm_sq += z * z;
    }
    cache.z2_norm = std::sqrt(norm_sq);
    if (cache.z2_norm == 0.0 || !std::isfinite(cache.z2_norm)) {
        throw NonFiniteError("pooler output cannot be normalized");
    }
    cache.u.resize(p.d_out);
    for (std::size_t k = 0; k < p.d_out; ++k) cache.u[k] = z2[k] / cache.z2_norm;
    return cache;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void validate_batch(const TrainingBatch& batch) {
    if (batch.queries.empty()) {
        throw BatchTooSmallError("batch must contain at least one pair");
    }
    if (batch.queries.size() != batch.positives.size()) {
        throw DimensionMismatchError("batch query and positive counts differ");
    }
}

struct BatchForward {
    std::vector<ForwardCache> queries;
    std::vector<ForwardCache> positives;
    std::vector<std::vector<double>> sim_qq;  // sim_qq[i][j] = u_qi . u_qj
    std::vector<std::vector<double>> sim_qp;  // sim_qp[i][j] = u_qi . u_pj
};

BatchForward forward_batch(const TrainingBatch& batch, const PoolerParams& p) {
    BatchForward fwd;
    const std::size_t n = batch.queries.size();
    fwd.queries.reserve(n);
    fwd.positives.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        fwd.queries.push_back(forward_cached(batch.queries[i], p));
        fwd.positives.push_back(forward_cached(batch.positives[i], p));
    }
    fwd.sim_qq.assign(n, std::vector<double>(n, 0.0));
    fwd.sim_qp.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) fwd.sim_qq[i][j] = dot(fwd.queries[i].u, fwd.queries[j].u);
            fwd.sim_qp[i][j] = dot(fwd.queries[i].u, fwd.positives[j].u);
        }
    }
    return fwd;
}

// log(sum_m exp(t_m)) with max subtraction, plus the softmax weights.
double log_sum_exp(const std::vector<double>& terms, std::vector<double>* softmax) {
    double max_term = -std::numeric_limits<double>::infinity();
    for (double t : terms) max_term = std::max(max_term, t);
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    if (softmax) {
        softmax->resize(terms.size());
        for (std::size_t m = 0; m < terms.size(); ++m) (*softmax)[m] = std::exp(terms[m] - max_term) / sum;
    }
    return max_term + std::log(sum);
}

struct PerQueryTerms {
    std::vector<double> terms;          // denominator logits s/t
    std::vector<std::size_t> qq_index;  // position of sim_qq[i][j] per term (or npos)
    std::vector<std::size_t> qp_index;  // position of sim_qp[i][j] per term (or npos)
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

PerQueryTerms denominator_terms(const BatchForward& fwd, std::size_t i, double temperature) {
    const std::size_t n = fwd.queries.size();
    PerQueryTerms out;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        out.terms.push_back(fwd.sim_qq[i][j] / temperature);
        out.qq_index.push_back(j);
        out.qp_index.push_back(kNone);
    }
    for (std::size_t j = 0; j < n; ++j) {
        out.terms.push_back(fwd.sim_qp[i][j] / temperature);
        out.qq_index.push_back(kNone);
        out.qp_index.push_back(j);
    }
    return out;
}

void backprop_input(const ForwardCache& cache, const std::vector<double>& grad_u, const PoolerParams& p,
                    PoolerGradients& grads) {
    // normalize: u = z2/||z2||  =>  g_z2 = (g_u - (u . g_u) u) / ||z2||
    const std::size_t d_out = p.d_out;
    const std::size_t d_h = p.d_h;
    const std::size_t d_in = p.d_in;
    double u_dot_g = dot(cache.u, grad_u);
    std::vector<double> gz2(d_out);
    for (std::size_t k = 0; k < d_out; ++k) {
        gz2[k] = (grad_u[k] - u_dot_g * cache.u[k]) / cache.z2_norm;
    }
    // z2 = W2^T h + b2
    std::vector<double> gh(d_h, 0.0);
    for (std::size_t j = 0; j < d_h; ++j) {
        double hj = cache.h[j];
        double acc = 0.0;
        for (std::size_t k = 0; k < d_out; ++k) {
            grads.w2[j * d_out + k] += hj * gz2[k];
            acc += p.w2[j * d_out + k] * gz2[k];
        }
        gh[j] = acc;
    }
    for (std::size_t k = 0; k < d_out; ++k) grads.b2[k] += gz2[k];
    // h = tanh(z1), z1 = W1^T x + b1
    const std::vector<double>& x = *cache.x;
    for (std::size_t j = 0; j < d_h; ++j) {
        double gz1 = gh[j] * (1.0 - cache.h[j] * cache.h[j]);
        grads.b1[j] += gz1;
        for (std::size_t i = 0; i < d_in; ++i) {
            grads.w1[i * p.d_h + j] += x[i] * gz1;
        }
    }
}

PoolerGradients zero_gradients(const PoolerParams& p) {
    PoolerGradients g;
    g.w1.assign(p.w1.size(), 0.0);
    g.b1.assign(p.b1.size(), 0.0);
    g.w2.assign(p.w2.size(), 0.0);
    g.b2.assign(p.b2.size(), 0.0);
    return g;
}

}  // namespace

double infonce_loss(const TrainingBatch& batch, const PoolerParams& p, double temperature) {
    validate_batch(batch);
    BatchForward fwd = forward_batch(batch, p);
    const std::size_t n = batch.queries.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        PerQueryTerms denom = denominator_terms(fwd, i, temperature);
        double lse = log_sum_exp(denom.terms, nullptr);
        total += lse - fwd.sim_qp[i][i] / temperature;
    }
    double loss = total / static_cast<double>(n);
    if (!std::isfinite(loss)) {
        throw NonFiniteError("contrastive loss is not finite");
    }
    return loss;
}

std::pair<double, PoolerGradients> infonce_loss_and_gradients(const TrainingBatch& batch,
                                                              const PoolerParams& p, double temperature) {
    validate_batch(batch);
    BatchForward fwd = forward_batch(batch, p);
    const std::size_t n = batch.queries.size();
    const double inv_nt = 1.0 / (static_cast<double>(n) * temperature);

    // dL/dsim accumulated per ordered similarity entry.
    std::vector<std::vector<double>> gsim_qq(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> gsim_qp(n, std::vector<double>(n, 0.0));
    double total = 0.0;
    std::vector<double> softmax;
    for (std::size_t i = 0; i < n; ++i) {
        PerQueryTerms denom = denominator_terms(fwd, i, temperature);
        double lse = log_sum_exp(denom.terms, &softmax);
        total += lse - fwd.sim_qp[i][i] / temperature;
        for (std::size_t m = 0; m < denom.terms.size(); ++m) {
            if (denom.qq_index[m] != kNone) {
                gsim_qq[i][denom.qq_index[m]] += inv_nt * softmax[m];
            } else {
                gsim_qp[i][denom.qp_index[m]] += inv_nt * softmax[m];
            }
        }
        gsim_qp[i][i] -= inv_nt;  // numerator term
    }
    double loss = total / static_cast<double>(n);
    if (!std::isfinite(loss)) {
        throw NonFiniteError("contrastive loss is not finite");
    }

    // Gradient reaching each pooled vector: sim = u_a . u_b.
    std::vector<std::vector<double>> gu_q(n, std::vector<double>(p.d_out, 0.0));
    std::vector<std::vector<double>> gu_p(n, std::vector<double>(p.d_out, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double g = gsim_qq[i][j];
            if (g != 0.0) {
                for (std::size_t k = 0; k < p.d_out; ++k) {
                    gu_q[i][k] += g * fwd.queries[j].u[k];
                    gu_q[j][k] += g * fwd.queries[i].u[k];
                }
            }
            g = gsim_qp[i][j];
            if (g != 0.0) {
                for (std::size_t k = 0; k < p.d_out; ++k) {
                    gu_q[i][k] += g * fwd.positives[j].u[k];
                    gu_p[j][k] += g * fwd.queries[i].u[k];
                }
            }
        }
    }

    PoolerGradients grads = zero_gradients(p);
    for (std::size_t i = 0; i < n; ++i) {
        backprop_input(fwd.queries[i], gu_q[i], p, grads);
        backprop_input(fwd.positives[i], gu_p[i], p, grads);
    }
    return {loss, std::move(grads)};
}

PoolerGradients infonce_gradients(const TrainingBatch& batch, const PoolerParams& p, double temperature) {
    return infonce_loss_and_gradients(batch, p, temperature).second;
}

PoolerGradients finite_difference_gradient(const TrainingBatch& batch, const PoolerParams& p,
                                           double temperature, double h) {
    if (!(h > 0.0)) {
        throw BadStepSizeError("finite-difference step must be positive");
    }
    PoolerParams work = p;
    PoolerGradients out = zero_gradients(p);
    auto probe = [&](std::vector<double>& params, std::vector<double>& grads) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            double original = params[i];
            params[i] = original + h;
            double up = infonce_loss(batch, work, temperature);
            params[i] = original - h;
            double down = infonce_loss(batch, work, temperature);
            params[i] = original;
            grads[i] = (up - down) / (2.0 * h);
        }
    };
    probe(work.w1, out.w1);
    probe(work.b1, out.b1);
    probe(work.w2, out.w2);
    probe(work.b2, out.b2);
    return out;
}

namespace {

void adamw_update_range(std::span<double> params, std::span<const double> grads, AdamWState& state,
                        std::size_t offset, double bias1, double bias2, const AdamWOptions& options) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        if (!std::isfinite(g)) throw NonFiniteError("gradient is not finite");
        double& m = state.m[offset + i];
        double& v = state.v[offset + i];
        m = options.beta1 * m + (1.0 - options.beta1) * g;
        v = options.beta2 * v + (1.0 - options.beta2) * g * g;
        double m_hat = m / bias1;
        double v_hat = v / bias2;
        params[i] -= options.learning_rate * (m_hat / (std::sqrt(v_hat) + options.eps));
        params[i] -= options.learning_rate * options.weight_decay * params[i];
    }
}

}  // namespace

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options) {
    if (params.size() != grads.size()) {
        throw DimensionMismatchError("parameter and gradient sizes differ");
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) {
        throw DimensionMismatchError("optimizer state does not match parameter count");
    }
    state.step += 1;
    const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
    adamw_update_range(params, grads, state, 0, bias1, bias2, options);
}

void adamw_step(PoolerParams& params, const PoolerGradients& grads, AdamWState& state,
                const AdamWOptions& options) {
    if (state.m.empty()) {
        state.m.assign(params.parameter_count(), 0.0);
        state.v.assign(params.parameter_count(), 0.0);
    }
    if (state.m.size() != params.parameter_count()) {
        throw DimensionMismatchError("optimizer state does not match parameter count");
    }
    state.step += 1;
    const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
    std::size_t offset = 0;
    auto update = [&](std::vector<double>& p, const std::vector<double>& g) {
        if (p.size() != g.size()) {
            throw DimensionMismatchError("parameter and gradient tensor shapes differ");
        }
        adamw_update_range(std::span<double>(p), std::span<const double>(g), state, offset, bias1, bias2,
                           options);
        offset += p.size();
    };
    update(params.w1, grads.w1);
    update(params.b1, grads.b1);
    update(params.w2, grads.w2);
    update(params.b2, grads.b2);
}

TrainResult train(const std::vector<Problem>& corpus, const PairSet& pairs, const TrainConfig& cfg,
                  EmbeddingProvider& base) {
    if (pairs.pairs.empty()) throw EmptyPairsError();
    if (cfg.batch_size < 2) throw BatchTooSmallError("batch size must be at least 2");
    auto by_id = index_by_id(corpus);
    auto question_of = [&](const std::string& id) -> const std::string& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("pair references unknown problem id '" + id + "'");
        return it->second->question;
    };
    for (const Pair& pair : pairs.pairs) {
        question_of(pair.query_id);
        question_of(pair.positive_id);
    }

    // Deterministic providers are embedded once through the cache; remote
    // providers are re-queried per epoch.
    CachingProvider cached(std::shared_ptr<EmbeddingProvider>(&base, [](EmbeddingProvider*) {}));

    auto embed_texts = [&](const std::vector<std::string>& texts) { return cached.embed(texts); };

    std::size_t d_in = base.dim();
    if (d_in == 0) {
        d_in = embed_texts({question_of(pairs.pairs.front().query_id)}).front().values.size();
    }
    const std::size_t d_h = cfg.hidden_dim == 0 ? d_in : cfg.hidden_dim;
    const std::size_t d_out = cfg.output_dim == 0 ? d_in : cfg.output_dim;

    TrainResult result;
    result.params = init_pooler(d_in, d_h, d_out, cfg.seed);
    AdamWState state;
    AdamWOptions opt{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay};

    std::vector<std::size_t> order(pairs.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    const std::size_t n = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += n) {
            std::size_t end = std::min(order.size(), start + n);
            if (end - start < 2) break;  // a single leftover pair has no negatives
            TrainingBatch batch;
            std::vector<std::string> query_texts;
            std::vector<std::string> positive_texts;
            for (std::size_t m = start; m < end; ++m) {
                const Pair& pair = pairs.pairs[order[m]];
                query_texts.push_back(question_of(pair.query_id));
                positive_texts.push_back(question_of(pair.positive_id));
                batch.pair_ids.emplace_back(pair.query_id, pair.positive_id);
            }
            batch.queries = embed_texts(query_texts);
            batch.positives = embed_texts(positive_texts);
            auto [loss, grads] = infonce_loss_and_gradients(batch, result.params, cfg.temperature);
            adamw_step(result.params, grads, state, opt);
            result.loss_history.push_back(loss);
        }
    }
    return result;
}

void save_checkpoint(const std::string& path, const PoolerParams& params, const TrainConfig& cfg,
                     const std::vector<double>& loss_history) {
    json doc{{"d_in", params.d_in},
             {"d_h", params.d_h},
             {"d_out", params.d_out},
             {"W1", params.w1},
             {"b1", params.b1},
             {"W2", params.w2},
             {"b2", params.b2},
             {"activation", "tanh"},
             {"train_config",
              {{"temperature", cfg.temperature},
               {"learning_rate", cfg.learning_rate},
               {"epochs", cfg.epochs},
               {"batch_size", cfg.batch_size},
               {"weight_decay", cfg.weight_decay},
               {"adam_beta1", cfg.adam_beta1},
               {"adam_beta2", cfg.adam_beta2},
               {"adam_eps", cfg.adam_eps},
               {"seed", cfg.seed}}},
             {"loss_history", loss_history}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << doc.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw IoError("checkpoint is not valid JSON: " + path);
    Checkpoint ckpt;
    ckpt.params.d_in = doc.at("d_in").get<std::size_t>();
    ckpt.params.d_h = doc.at("d_h").get<std::size_t>();
    ckpt.params.d_out = doc.at("d_out").get<std::size_t>();
    ckpt.params.w1 = doc.at("W1").get<std::vector<double>>();
    ckpt.params.b1 = doc.at("b1").get<std::vector<double>>();
    ckpt.params.w2 = doc.at("W2").get<std::vector<double>>();
    ckpt.params.b2 = doc.at("b2").get<std::vector<double>>();
    if (doc.contains("train_config")) {
        const json& tc = doc["train_config"];
        ckpt.config.temperature = tc.value("temperature", 0.05);
        ckpt.config.learning_rate = tc.value("learning_rate", 3e-5);
        ckpt.config.epochs = tc.value("epochs", 5);
        ckpt.config.batch_size = tc.value("batch_size", 16);
        ckpt.config.weight_decay = tc.value("weight_decay", 0.01);
        ckpt.config.adam_beta1 = tc.value("adam_beta1", 0.9);
        ckpt.config.adam_beta2 = tc.value("adam_beta2", 0.999);
        ckpt.config.adam_eps = tc.value("adam_eps", 1e-8);
        ckpt.config.seed = tc.value("seed", 0ull);
    }
    if (doc.contains("loss_history")) {
        ckpt.loss_history = doc["loss_history"].get<std::vector<double>>();
    }
    if (ckpt.params.w1.size() != ckpt.params.d_in * ckpt.params.d_h ||
        ckpt.params.w2.size() != ckpt.params.d_h * ckpt.params.d_out ||
        ckpt.params.b1.size() != ckpt.params.d_h || ckpt.params.b2.size() != ckpt.params.d_out) {
        throw IoError("checkpoint parameter shapes are inconsistent: " + path);
    }
    return ckpt;
}

}  // namespace mwpr
