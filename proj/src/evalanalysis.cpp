#include "mwpr/evalanalysis.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/expr.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace mwpr {

using nlohmann::json;

const char* match_mode_name(MatchMode mode) {
    switch (mode) {
        case MatchMode::String: return "string";
        case MatchMode::Float: return "float";
        case MatchMode::Option: return "option";
    }
    return "?";
}

MatchMode mode_for(const Problem& p) {
    if (!p.options.empty()) return MatchMode::Option;
    if (p.solution_type == SolutionType::Equation) return MatchMode::Float;
    return MatchMode::String;
}

namespace {

double numeric_value(const std::string& normalized) {
    double value = 0.0;
    if (parse_plain_decimal(normalized, value)) return value;
    try {
        return evaluate_expression(parse_equation(normalized));
    } catch (const Error&) {
        throw UnparseableNumberError("'" + normalized + "' has no numeric value");
    }
}

}  // namespace

bool answers_match(const std::string& predicted, const std::string& gold, MatchMode mode) {
    const std::string p = normalize_answer(predicted);
    const std::string g = normalize_answer(gold);
    if (p.empty() || g.empty()) return false;
    switch (mode) {
        case MatchMode::String:
            return p == g;
        case MatchMode::Float: {
            double pv = numeric_value(p);
            double gv = numeric_value(g);
            return std::fabs(pv - gv) <= 1e-4 * std::max(1.0, std::fabs(gv));
        }
        case MatchMode::Option: {
            if (p.size() != 1 || g.size() != 1) return false;
            return std::toupper(static_cast<unsigned char>(p[0])) ==
                   std::toupper(static_cast<unsigned char>(g[0]));
        }
    }
    return false;
}

namespace {

using ExemplarSelector = std::function<TopkResult(const Problem&)>;

EvalReport run_harness(const std::vector<Problem>& problems, std::size_t k, Generator& generator,
                       const EvalOptions& options, const ExemplarSelector& select) {
    if (k < 1) throw BadKError("k must be at least 1");
    EvalReport report;
    report.records.reserve(problems.size());
    std::size_t correct_count = 0;
    for (const Problem& problem : problems) {
        EvalRecord record;
        record.problem_id = problem.id;
        record.gold = problem.answer;
        record.mode = options.mode_override.value_or(mode_for(problem));
        try {
            TopkResult hits = select(problem);
            std::vector<Exemplar> exemplars;
            exemplars.reserve(hits.hits.size());
            for (const ScoredHit& hit : hits.hits) {
                record.retrieved_ids.push_back(hit.problem.id);
                exemplars.push_back({hit.problem.question, hit.problem.solution});
            }
            PromptBundle bundle = assemble_prompt(exemplars, problem.question, options.template_id);
            bundle.truncated = hits.truncated;
            GeneratorOutput out = generator.generate(bundle);
            record.raw_output = out.raw;

            Problem probe;
            probe.id = problem.id;
            probe.solution = out.raw;
            probe.solution_type = problem.solution_type;
            probe.options = problem.options;
            try {
                record.parsed_answer = extract_final_answer(probe);
            } catch (const ParseFailure&) {
                record.parsed_answer = std::nullopt;
            }
            if (record.parsed_answer) {
                try {
                    record.correct = answers_match(*record.parsed_answer, problem.answer, record.mode);
                } catch (const UnparseableNumberError&) {
                    record.correct = false;
                }
            } else {
                ++report.n_parse_failures;
            }
        } catch (const TransportError& e) {
            record.generation_failed = true;
            record.raw_output = std::string("<transport error: ") + e.what() + ">";
        } catch (const ServiceError& e) {
            record.generation_failed = true;
            record.raw_output = std::string("<service error: ") + e.what() + ">";
        } catch (const TimeoutError& e) {
            record.generation_failed = true;
            record.raw_output = std::string("<timeout: ") + e.what() + ">";
        }
        if (record.correct) ++correct_count;
        report.records.push_back(std::move(record));
    }
    report.n_evaluated = problems.size();
    report.em = problems.empty() ? 0.0
                                 : static_cast<double>(correct_count) / static_cast<double>(problems.size());
    return report;
}

}  // namespace

EvalReport evaluate(const std::vector<Problem>& problems, const RetrievalIndex& index, std::size_t k,
                    Generator& generator, const EvalOptions& options) {
    EvalReport report = run_harness(problems, k, generator, options, [&](const Problem& p) {
        return index.topk(p.question, k, options.exclude_exact_question);
    });
    report.config_snapshot = json{{"mode", "retrieval"},
                                  {"k", k},
                                  {"generator", generator.id()},
                                  {"template", options.template_id},
                                  {"provider", index.provenance().provider_id},
                                  {"pooler", index.provenance().pooler}};
    return report;
}

EvalReport upper_bound_eval(const std::vector<Problem>& problems, const std::vector<Problem>& corpus,
                            std::size_t k, Generator& generator, const EvalOptions& options) {
    EvalReport report = run_harness(problems, k, generator, options, [&](const Problem& p) {
        return graph_oracle_topk(corpus, problem_signature(p), k);
    });
    report.config_snapshot =
        json{{"mode", "upper-bound"}, {"k", k}, {"generator", generator.id()}, {"template", options.template_id}};
    return report;
}

EvalReport random_exemplar_eval(const std::vector<Problem>& problems, const std::vector<Problem>& corpus,
                                std::size_t k, std::uint64_t seed, Generator& generator,
                                const EvalOptions& options) {
    Rng rng(seed);
    EvalReport report = run_harness(problems, k, generator, options, [&](const Problem&) {
        return random_exemplars(corpus, k, rng.next_u64());
    });
    report.config_snapshot = json{{"mode", "random"},
                                  {"k", k},
                                  {"seed", seed},
                                  {"generator", generator.id()},
                                  {"template", options.template_id}};
    return report;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw DimensionMismatchError("correlation inputs must have equal length");
    }
    if (xs.size() < 2) {
        throw DegenerateInputError("correlation requires at least two points");
    }
    const double n = static_cast<double>(xs.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double cov = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mean_x;
        double dy = ys[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if (var_x == 0.0 || var_y == 0.0) {
        throw DegenerateInputError("correlation input has zero variance");
    }
    return cov / std::sqrt(var_x * var_y);
}

CorrelationReport correlation_report(const RetrievalIndex& index, const std::vector<Problem>& corpus,
                                     std::size_t sample_size, std::size_t k, std::uint64_t seed) {
    if (sample_size > corpus.size()) {
        throw DegenerateInputError("sample size exceeds corpus size");
    }
    std::vector<std::size_t> positions(corpus.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    Rng rng(seed);
    rng.shuffle(positions);
    positions.resize(sample_size);

    CorrelationReport report;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t position : positions) {
        const Problem& query = corpus[position];
        const std::string query_sig = problem_signature(query);
        TopkResult hits = index.topk(query.question, k, /*exclude_exact_question=*/true);
        for (const ScoredHit& hit : hits.hits) {
            double graph_sim = signature_similarity(query_sig, problem_signature(hit.problem));
            report.points.emplace_back(hit.score, graph_sim);
            xs.push_back(hit.score);
            ys.push_back(graph_sim);
        }
    }
    report.pearson_r = pearson(xs, ys);
    return report;
}

std::vector<FractionPoint> fraction_sweep(const std::vector<double>& fractions,
                                          const std::vector<Problem>& corpus, const PairSet& pairs,
                                          const std::vector<Problem>& eval_set,
                                          std::shared_ptr<EmbeddingProvider> provider,
                                          Generator& generator, const SweepConfig& cfg) {
    std::vector<FractionPoint> points;
    points.reserve(fractions.size());
    for (double fraction : fractions) {
        PairSet sliced = slice_pairs(pairs, fraction, cfg.train.seed);
        TrainResult trained = train(corpus, sliced, cfg.train, *provider);
        RetrievalIndex index = RetrievalIndex::build(corpus, provider, trained.params);
        EvalReport report = evaluate(eval_set, index, cfg.k, generator, cfg.eval);
        points.push_back({fraction, report.em});
    }
    return points;
}

json report_to_json(const EvalReport& report) {
    json records = json::array();
    for (const EvalRecord& r : report.records) {
        json rec{{"problem_id", r.problem_id},
                 {"retrieved_ids", r.retrieved_ids},
                 {"raw_output", r.raw_output},
                 {"parsed_answer", r.parsed_answer ? json(*r.parsed_answer) : json(nullptr)},
                 {"gold", r.gold},
                 {"correct", r.correct},
                 {"mode", match_mode_name(r.mode)},
                 {"generation_failed", r.generation_failed}};
        records.push_back(std::move(rec));
    }
    return json{{"em", report.em},
                {"n_evaluated", report.n_evaluated},
                {"n_parse_failures", report.n_parse_failures},
                {"config", report.config_snapshot},
                {"records", records}};
}

void write_report_json(const std::string& path, const EvalReport& report, const json& provenance) {
    json doc = report_to_json(report);
    if (!provenance.is_null() && !provenance.empty()) {
        doc["provenance"] = provenance;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << doc.dump(2) << "\n";
}

namespace {

std::string csv_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.10g", v);
    return std::string(buffer);
}

void append_provenance(std::ofstream& out, const std::vector<std::string>& lines) {
    for (const std::string& line : lines) {
        out << "# " << line << "\n";
    }
}

}  // namespace

void write_scatter_csv(const std::string& path, const CorrelationReport& report,
                       const std::vector<std::string>& provenance_lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scatter csv: " + path);
    out << "embedding_sim,graph_sim\n";
    for (const auto& [embedding_sim, graph_sim] : report.points) {
        out << csv_double(embedding_sim) << "," << csv_double(graph_sim) << "\n";
    }
    append_provenance(out, provenance_lines);
}

void write_sweep_csv(const std::string& path, const std::vector<FractionPoint>& points,
                     const std::vector<std::string>& provenance_lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sweep csv: " + path);
    out << "fraction,em\n";
    for (const FractionPoint& p : points) {
        out << csv_double(p.fraction) << "," << csv_double(p.em) << "\n";
    }
    append_provenance(out, provenance_lines);
}

}  // namespace mwpr
