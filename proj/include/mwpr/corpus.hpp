#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mwpr {

enum class SolutionType { Equation, Text };

// One math word problem record.
struct Problem {
    std::string id;
    std::string question;
    std::string solution;
    std::string answer;
    SolutionType solution_type = SolutionType::Equation;
    std::vector<std::string> options;                   // empty when the dataset has none
    std::optional<std::string> graph_signature;         // cached canonical signature
};

struct Pair {
    std::string query_id;
    std::string positive_id;
    bool mined = true;  // false for distilled (generator-rewritten) pairs
};

struct PairSet {
    std::vector<Pair> pairs;
    std::string source_corpus;
};

struct CorpusSlice {
    double fraction = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::string> ids;
};

// JSONL loader; one problem object per line. Throws IoError, SchemaError or
// DuplicateIdError.
std::vector<Problem> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Problem>& problems);

std::unordered_map<std::string, const Problem*> index_by_id(const std::vector<Problem>& problems);

// Canonical signature of a problem: the cached one when present, otherwise
// derived from an equation solution. Throws MissingSignatureError when neither
// route applies.
std::string problem_signature(const Problem& p);

// Gold answer extraction. Equation solutions evaluate to a decimal string;
// text solutions take whatever follows the last "#### " marker. If the problem
// has options and the extracted token is a single letter A-E, the uppercased
// letter is returned. Throws ParseFailure.
std::string extract_final_answer(const Problem& p);

// Matching-time answer normalization: trims whitespace, drops a trailing '.',
// removes thousands separators and converts full-width digits to ASCII.
std::string normalize_answer(const std::string& answer);

// Groups problems by signature and emits one (query, positive) pair per
// problem that has at least one other group member; singleton groups are
// discarded. Positive choice is uniform under the seed.
PairSet mine_pairs(const std::vector<Problem>& corpus, std::uint64_t seed);

// Uniform random subset of round(fraction * size) ids, deterministic in
// (seed, fraction, sorted ids). Throws BadFractionError outside (0, 1].
CorpusSlice slice_corpus(const std::vector<Problem>& corpus, double fraction, std::uint64_t seed);

// Same deterministic selection applied to a pair list (data-fraction sweeps).
PairSet slice_pairs(const PairSet& pairs, double fraction, std::uint64_t seed);

PairSet load_pairs(const std::string& path);
void save_pairs(const std::string& path, const PairSet& pairs);

// Distillation ingest: each rewrite becomes a new problem (id suffixed with
// "#rw") paired with its original, flagged mined=false. Blank rewrites are
// rejected and reported back.
struct Rewrite {
    std::string id;       // id of the original problem
    std::string rewrite;  // generator output: the rewritten question
};

struct DistillResult {
    PairSet pairs;
    std::vector<Problem> new_problems;
    std::vector<std::string> rejected_ids;
};

DistillResult ingest_rewrites(const std::vector<Problem>& corpus, const std::vector<Rewrite>& rewrites);

}  // namespace mwpr
