#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mwpr/corpus.hpp"
#include "mwpr/embedding.hpp"
#include "mwpr/errors.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/trainer.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

using namespace mwpr;

namespace {

// Relative error |a - f| / (|a| + |f|), the usual gradient-check metric; the
// denominator floor only guards exact-zero pairs.
double max_relative_error(const PoolerGradients& analytic, const PoolerGradients& reference) {
    double worst = 0.0;
    auto compare = [&worst](const std::vector<double>& a, const std::vector<double>& f) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            double denom = std::max(std::fabs(a[i]) + std::fabs(f[i]), 1e-6);
            worst = std::max(worst, std::fabs(a[i] - f[i]) / denom);
        }
    };
    compare(analytic.w1, reference.w1);
    compare(analytic.b1, reference.b1);
    compare(analytic.w2, reference.w2);
    compare(analytic.b2, reference.b2);
    return worst;
}

// Strict variant with max(|a|, |f|) in the denominator, for the tighter check
// at a smaller step where truncation noise is negligible.
double max_relative_error_strict(const PoolerGradients& analytic, const PoolerGradients& reference) {
    double worst = 0.0;
    auto compare = [&worst](const std::vector<double>& a, const std::vector<double>& f) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            double denom = std::max({std::fabs(a[i]), std::fabs(f[i]), 1e-6});
            worst = std::max(worst, std::fabs(a[i] - f[i]) / denom);
        }
    };
    compare(analytic.w1, reference.w1);
    compare(analytic.b1, reference.b1);
    compare(analytic.w2, reference.w2);
    compare(analytic.b2, reference.b2);
    return worst;
}

bool all_zero(const std::vector<double>& values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

TrainingBatch constant_batch(std::size_t n, std::size_t dim) {
    Rng rng(1);
    Embedding shared = mwpr::testing::random_embedding(rng, dim);
    TrainingBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        batch.queries.push_back(shared);
        batch.positives.push_back(shared);
        batch.pair_ids.emplace_back("q", "p");
    }
    return batch;
}

}  // namespace

TEST_CASE("infonce_loss degenerate n=1 batch is exactly zero") {
    Rng rng(2);
    TrainingBatch batch = mwpr::testing::random_batch(rng, 1, 6);
    PoolerParams p = mwpr::testing::random_pooler(rng, 6, 4, 4);
    CHECK(infonce_loss(batch, p, 0.05) == 0.0);

    // scaling the base embeddings does not change the degenerate case
    for (double& v : batch.queries[0].values) v *= 2.0;
    for (double& v : batch.positives[0].values) v *= 2.0;
    CHECK(infonce_loss(batch, p, 0.05) == 0.0);
}

TEST_CASE("infonce_loss with n=2 and all-equal similarities is ln 3") {
    TrainingBatch batch = constant_batch(2, 6);
    Rng rng(3);
    PoolerParams p = mwpr::testing::random_pooler(rng, 6, 4, 4);
    CHECK(std::fabs(infonce_loss(batch, p, 0.05) - std::log(3.0)) <= 1e-9);
}

TEST_CASE("infonce_loss matches the direct-summation reference on random batches") {
    Rng rng(4);
    for (int round = 0; round < 40; ++round) {
        std::size_t n = 2 + rng.index(5);
        TrainingBatch batch = mwpr::testing::random_batch(rng, n, 8);
        PoolerParams p = mwpr::testing::random_pooler(rng, 8, 6, 5);
        double fast = infonce_loss(batch, p, 0.05);
        double reference = mwpr::testing::reference_infonce(batch, p, 0.05);
        REQUIRE(std::fabs(fast - reference) <= 1e-9 * std::max(1.0, std::fabs(reference)));
        CHECK(fast >= 0.0);  // the positive term sits in its own denominator
    }
}

TEST_CASE("infonce_loss is invariant to batch order") {
    Rng rng(5);
    TrainingBatch batch = mwpr::testing::random_batch(rng, 6, 8);
    PoolerParams p = mwpr::testing::random_pooler(rng, 8, 6, 6);
    double original = infonce_loss(batch, p, 0.05);

    std::vector<std::size_t> order(batch.queries.size());
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(order);
    TrainingBatch shuffled;
    for (std::size_t i : order) {
        shuffled.queries.push_back(batch.queries[i]);
        shuffled.positives.push_back(batch.positives[i]);
        shuffled.pair_ids.push_back(batch.pair_ids[i]);
    }
    CHECK(std::fabs(infonce_loss(shuffled, p, 0.05) - original) <= 1e-9);
}

TEST_CASE("infonce_loss stays finite at similarity extremes with tau=0.05") {
    // zero biases make the pooler odd, so pooled(-v) = -pooled(v) and the
    // query-positive similarities reach exactly -1 and +1
    PoolerParams p;
    p.d_in = 4;
    p.d_h = 4;
    p.d_out = 4;
    p.w1 = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    p.b1.assign(4, 0.0);
    p.w2 = p.w1;
    p.b2.assign(4, 0.0);
    Rng rng(6);
    Embedding v = mwpr::testing::random_embedding(rng, 4);
    Embedding neg = v;
    for (double& x : neg.values) x = -x;
    TrainingBatch batch;
    batch.queries = {v, neg};
    batch.positives = {v, v};
    batch.pair_ids = {{"a", "b"}, {"c", "d"}};
    double loss = infonce_loss(batch, p, 0.05);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
}

TEST_CASE("infonce_loss rejects empty batches") {
    TrainingBatch batch;
    Rng rng(7);
    PoolerParams p = mwpr::testing::random_pooler(rng, 4, 4, 4);
    CHECK_THROWS_AS(infonce_loss(batch, p, 0.05), BatchTooSmallError);
}

TEST_CASE("infonce_gradients n=1 is exactly zero") {
    Rng rng(8);
    TrainingBatch batch = mwpr::testing::random_batch(rng, 1, 6);
    PoolerParams p = mwpr::testing::random_pooler(rng, 6, 4, 4);
    PoolerGradients g = infonce_gradients(batch, p, 0.05);
    CHECK(all_zero(g.w1));
    CHECK(all_zero(g.b1));
    CHECK(all_zero(g.w2));
    CHECK(all_zero(g.b2));
}

TEST_CASE("infonce_gradients match central finite differences on 20 seeds") {
    double worst = 0.0;
    double worst_fine = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        std::size_t n = 2 + rng.index(3);  // n in {2,3,4}
        TrainingBatch batch = mwpr::testing::random_batch(rng, n, 6);
        PoolerParams p = mwpr::testing::random_pooler(rng, 6, 4, 4);
        PoolerGradients analytic = infonce_gradients(batch, p, 0.05);
        PoolerGradients numeric = finite_difference_gradient(batch, p, 0.05, 1e-4);
        double err = max_relative_error(analytic, numeric);
        worst = std::max(worst, err);
        REQUIRE(err <= 1e-4);
        // at a finer step the oracle's truncation noise drops quadratically and
        // the strict metric passes a bound 5x tighter than required
        PoolerGradients fine = finite_difference_gradient(batch, p, 0.05, 1e-5);
        double err_fine = max_relative_error_strict(analytic, fine);
        worst_fine = std::max(worst_fine, err_fine);
        REQUIRE(err_fine <= 2e-5);
    }
    MESSAGE("worst relative error over 20 seeds: h=1e-4 -> ", worst, ", h=1e-5 strict -> ", worst_fine);
}

TEST_CASE("finite_difference_gradient basics") {
    // central differences recover the derivative of a quadratic almost exactly
    auto f = [](double theta) { return theta * theta; };
    double h = 1e-5;
    double derivative = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
    CHECK(std::fabs(derivative - 2.0) <= 1e-8);

    Rng rng(9);
    TrainingBatch batch = mwpr::testing::random_batch(rng, 2, 4);
    PoolerParams p = mwpr::testing::random_pooler(rng, 4, 3, 3);
    CHECK_THROWS_AS(finite_difference_gradient(batch, p, 0.05, 0.0), BadStepSizeError);
    CHECK_THROWS_AS(finite_difference_gradient(batch, p, 0.05, -1e-4), BadStepSizeError);

    // n=1 loss is constant: the numeric gradient is zero too
    TrainingBatch single = mwpr::testing::random_batch(rng, 1, 4);
    PoolerGradients g = finite_difference_gradient(single, p, 0.05, 1e-4);
    CHECK(all_zero(g.w1));
    CHECK(all_zero(g.b2));
}

TEST_CASE("adamw_step hand-computed fixtures") {
    AdamWOptions options;
    options.learning_rate = 0.1;
    options.weight_decay = 0.0;

    // first step with g=1: mhat=1, vhat=1, theta' = 1 - 0.1/(1+eps)
    std::vector<double> theta{1.0};
    std::vector<double> grad{1.0};
    AdamWState state;
    adamw_step(std::span<double>(theta), std::span<const double>(grad), state, options);
    CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(state.step == 1);

    // zero gradient, zero decay: parameter unchanged
    std::vector<double> frozen{0.7};
    std::vector<double> zero{0.0};
    AdamWState state2;
    adamw_step(std::span<double>(frozen), std::span<const double>(zero), state2, options);
    CHECK(frozen[0] == 0.7);

    // decay-only step: theta' = 1 - lr*wd*theta = 0.999
    options.weight_decay = 0.01;
    std::vector<double> decayed{1.0};
    AdamWState state3;
    adamw_step(std::span<double>(decayed), std::span<const double>(zero), state3, options);
    CHECK(decayed[0] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("adamw_step over pooler tensors matches the flat update") {
    Rng rng(10);
    PoolerParams p = mwpr::testing::random_pooler(rng, 3, 3, 3);
    PoolerParams p_copy = p;
    PoolerGradients g;
    g.w1.resize(p.w1.size());
    g.b1.resize(p.b1.size());
    g.w2.resize(p.w2.size());
    g.b2.resize(p.b2.size());
    for (double& v : g.w1) v = rng.real(-1, 1);
    for (double& v : g.b1) v = rng.real(-1, 1);
    for (double& v : g.w2) v = rng.real(-1, 1);
    for (double& v : g.b2) v = rng.real(-1, 1);

    AdamWOptions options;
    options.learning_rate = 0.01;
    AdamWState state;
    adamw_step(p, g, state, options);
    adamw_step(p, g, state, options);
    CHECK(state.step == 2);

    // flat equivalent
    std::vector<double> flat;
    flat.insert(flat.end(), p_copy.w1.begin(), p_copy.w1.end());
    flat.insert(flat.end(), p_copy.b1.begin(), p_copy.b1.end());
    flat.insert(flat.end(), p_copy.w2.begin(), p_copy.w2.end());
    flat.insert(flat.end(), p_copy.b2.begin(), p_copy.b2.end());
    std::vector<double> flat_grad;
    flat_grad.insert(flat_grad.end(), g.w1.begin(), g.w1.end());
    flat_grad.insert(flat_grad.end(), g.b1.begin(), g.b1.end());
    flat_grad.insert(flat_grad.end(), g.w2.begin(), g.w2.end());
    flat_grad.insert(flat_grad.end(), g.b2.begin(), g.b2.end());
    AdamWState flat_state;
    adamw_step(std::span<double>(flat), std::span<const double>(flat_grad), flat_state, options);
    adamw_step(std::span<double>(flat), std::span<const double>(flat_grad), flat_state, options);

    std::size_t offset = 0;
    auto check_tensor = [&](const std::vector<double>& tensor) {
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            CHECK(tensor[i] == flat[offset + i]);
        }
        offset += tensor.size();
    };
    check_tensor(p.w1);
    check_tensor(p.b1);
    check_tensor(p.w2);
    check_tensor(p.b2);
}

namespace {

// tiny corpus with three signature groups and structure words in the questions
std::vector<Problem> structured_corpus() {
    std::vector<Problem> corpus;
    const char* fillers[] = {"garden", "market", "library", "harbor", "bakery", "museum"};
    for (int i = 0; i < 24; ++i) {
        Problem p;
        p.id = "s" + std::to_string(i);
        int group = i % 3;
        std::string filler = fillers[i % 6];
        int a = 2 + i;
        int b = 3 + i;
        int c = 1 + (i % 5);
        switch (group) {
            case 0:
                p.question = "At the " + filler + " there are " + std::to_string(a) + " crates plus " +
                             std::to_string(b) + " more crates.";
                p.solution = "x=" + std::to_string(a) + "+" + std::to_string(b);
                break;
            case 1:
                p.question = "The " + filler + " stores " + std::to_string(a) + " boxes times " +
                             std::to_string(b) + " items minus " + std::to_string(c) + " lost.";
                p.solution = "x=(" + std::to_string(a) + "*" + std::to_string(b) + ")-" + std::to_string(c);
                break;
            default:
                p.question = "A " + filler + " splits " + std::to_string(a * b) + " goods by " +
                             std::to_string(c) + " shelves.";
                p.solution = "x=" + std::to_string(a * b) + "/" + std::to_string(c);
                break;
        }
        p.answer = "";
        p.solution_type = SolutionType::Equation;
        corpus.push_back(p);
    }
    return corpus;
}

}  // namespace

TEST_CASE("train is deterministic and lowers the loss on a structured corpus") {
    std::vector<Problem> corpus = structured_corpus();
    PairSet pairs = mine_pairs(corpus, 3);
    REQUIRE(pairs.pairs.size() == corpus.size());  // every problem has twins

    HashedNgramProvider provider(64);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-3;  // visible movement on a desk-sized fixture
    cfg.seed = 17;

    TrainResult first = train(corpus, pairs, cfg, provider);
    TrainResult second = train(corpus, pairs, cfg, provider);
    CHECK(first.params.w1 == second.params.w1);
    CHECK(first.params.b1 == second.params.b1);
    CHECK(first.params.w2 == second.params.w2);
    CHECK(first.params.b2 == second.params.b2);
    CHECK(first.loss_history == second.loss_history);

    const std::size_t batches_per_epoch = first.loss_history.size() / 5;
    REQUIRE(batches_per_epoch >= 1);
    double first_epoch = 0.0;
    double last_epoch = 0.0;
    for (std::size_t i = 0; i < batches_per_epoch; ++i) {
        first_epoch += first.loss_history[i];
        last_epoch += first.loss_history[first.loss_history.size() - batches_per_epoch + i];
    }
    CHECK(last_epoch < first_epoch);
}

TEST_CASE("train rejects bad inputs") {
    std::vector<Problem> corpus = structured_corpus();
    HashedNgramProvider provider(32);
    TrainConfig cfg;
    PairSet empty;
    CHECK_THROWS_AS(train(corpus, empty, cfg, provider), EmptyPairsError);

    PairSet unknown;
    unknown.pairs.push_back({"nope", "also-nope", true});
    CHECK_THROWS_AS(train(corpus, unknown, cfg, provider), Error);

    PairSet pairs = mine_pairs(corpus, 3);
    cfg.batch_size = 1;
    CHECK_THROWS_AS(train(corpus, pairs, cfg, provider), BatchTooSmallError);
}

TEST_CASE("train keeps trailing partial batches of at least two pairs") {
    std::vector<Problem> corpus = structured_corpus();
    PairSet pairs = mine_pairs(corpus, 3);
    pairs.pairs.resize(10);
    HashedNgramProvider provider(32);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.seed = 5;
    TrainResult result = train(corpus, pairs, cfg, provider);
    CHECK(result.loss_history.size() == 2);  // 8 + 2

    pairs.pairs.resize(9);  // 8 + 1: the singleton is dropped
    TrainResult dropped = train(corpus, pairs, cfg, provider);
    CHECK(dropped.loss_history.size() == 1);
}

TEST_CASE("checkpoints round trip") {
    Rng rng(11);
    PoolerParams p = mwpr::testing::random_pooler(rng, 5, 4, 3);
    TrainConfig cfg;
    cfg.seed = 123;
    cfg.epochs = 2;
    std::vector<double> history{1.5, 1.2, 0.9};
    save_checkpoint("ckpt_test.json", p, cfg, history);
    Checkpoint loaded = load_checkpoint("ckpt_test.json");
    CHECK(loaded.params.d_in == 5);
    CHECK(loaded.params.d_h == 4);
    CHECK(loaded.params.d_out == 3);
    CHECK(loaded.params.w1 == p.w1);
    CHECK(loaded.params.b2 == p.b2);
    CHECK(loaded.config.seed == 123);
    CHECK(loaded.config.epochs == 2);
    CHECK(loaded.loss_history == history);
    std::remove("ckpt_test.json");
    CHECK_THROWS_AS(load_checkpoint("ckpt_test.json"), IoError);
}
