#pragma once

#include "mwpr/corpus.hpp"
#include "mwpr/promptgen.hpp"
#include "mwpr/retrieval.hpp"
#include "mwpr/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mwpr {

enum class MatchMode { String, Float, Option };

const char* match_mode_name(MatchMode mode);

// Per-dataset convention: options -> Option, equation solutions -> Float,
// text solutions -> String.
MatchMode mode_for(const Problem& p);

// Exact-match comparison after normalization. Float mode evaluates equation
// strings first and accepts |p - g| <= 1e-4 * max(1, |g|); it throws
// UnparseableNumberError when either side has no numeric value (callers treat
// that as a non-match).
bool answers_match(const std::string& predicted, const std::string& gold, MatchMode mode);

struct EvalRecord {
    std::string problem_id;
    std::vector<std::string> retrieved_ids;
    std::string raw_output;
    std::optional<std::string> parsed_answer;
    std::string gold;
    bool correct = false;
    MatchMode mode = MatchMode::String;
    bool generation_failed = false;
};

struct EvalReport {
    double em = 0.0;
    std::size_t n_evaluated = 0;
    std::size_t n_parse_failures = 0;  // counted incorrect
    std::vector<EvalRecord> records;
    nlohmann::json config_snapshot;
};

struct EvalOptions {
    std::optional<MatchMode> mode_override;
    std::string template_id = kDefaultTemplateId;
    bool exclude_exact_question = true;
};

// Retrieve -> prompt -> generate -> parse -> match, one record per problem.
// Generation and parse failures are recorded as incorrect, never fatal.
EvalReport evaluate(const std::vector<Problem>& problems, const RetrievalIndex& index, std::size_t k,
                    Generator& generator, const EvalOptions& options = {});

// Same harness with exemplars chosen by graph-signature similarity: the
// performance upper bound of structure-based retrieval.
EvalReport upper_bound_eval(const std::vector<Problem>& problems, const std::vector<Problem>& corpus,
                            std::size_t k, Generator& generator, const EvalOptions& options = {});

// Same harness with uniformly random exemplars (the random baseline).
EvalReport random_exemplar_eval(const std::vector<Problem>& problems, const std::vector<Problem>& corpus,
                                std::size_t k, std::uint64_t seed, Generator& generator,
                                const EvalOptions& options = {});

// Sample Pearson correlation. Throws DegenerateInputError for fewer than two
// points or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct CorrelationReport {
    std::vector<std::pair<double, double>> points;  // (embedding cosine, graph similarity)
    double pearson_r = 0.0;
};

// For sample_size random corpus questions, retrieves top-k and pairs each
// hit's embedding cosine with its graph similarity to the query; Pearson is
// computed over the pooled points.
CorrelationReport correlation_report(const RetrievalIndex& index, const std::vector<Problem>& corpus,
                                     std::size_t sample_size, std::size_t k, std::uint64_t seed);

struct FractionPoint {
    double fraction = 0.0;
    double em = 0.0;
};

struct SweepConfig {
    TrainConfig train;
    std::size_t k = 8;
    EvalOptions eval;
};

// For each fraction: deterministically slice the pairs, train a fresh pooler,
// rebuild the index and evaluate.
std::vector<FractionPoint> fraction_sweep(const std::vector<double>& fractions,
                                          const std::vector<Problem>& corpus, const PairSet& pairs,
                                          const std::vector<Problem>& eval_set,
                                          std::shared_ptr<EmbeddingProvider> provider,
                                          Generator& generator, const SweepConfig& cfg);

nlohmann::json report_to_json(const EvalReport& report);
void write_report_json(const std::string& path, const EvalReport& report,
                       const nlohmann::json& provenance = {});
void write_scatter_csv(const std::string& path, const CorrelationReport& report,
                       const std::vector<std::string>& provenance_lines = {});
void write_sweep_csv(const std::string& path, const std::vector<FractionPoint>& points,
                     const std::vector<std::string>& provenance_lines = {});

}  // namespace mwpr
