#include "mwpr/corpus.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/expr.hpp"
#include "mwpr/rng.hpp"
#include "mwpr/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

namespace mwpr {

using nlohmann::json;

namespace {

std::string require_string(const json& record, const char* field, std::size_t line) {
    auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw SchemaError(line, field);
    }
    return it->get<std::string>();
}

SolutionType parse_solution_type(const std::string& value, std::size_t line) {
    if (value == "equation") return SolutionType::Equation;
    if (value == "text") return SolutionType::Text;
    throw SchemaError(line, "solution_type");
}

const char* solution_type_name(SolutionType t) {
    return t == SolutionType::Equation ? "equation" : "text";
}

}  // namespace

std::vector<Problem> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus file: " + path);
    }
    std::vector<Problem> problems;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw SchemaError(line_no, "<json>");
        }
        Problem p;
        p.id = require_string(record, "id", line_no);
        p.question = require_string(record, "question", line_no);
        p.solution = require_string(record, "solution", line_no);
        p.answer = require_string(record, "answer", line_no);
        p.solution_type = parse_solution_type(require_string(record, "solution_type", line_no), line_no);
        if (auto it = record.find("options"); it != record.end() && !it->is_null()) {
            if (!it->is_array()) throw SchemaError(line_no, "options");
            for (const auto& opt : *it) {
                if (!opt.is_string()) throw SchemaError(line_no, "options");
                p.options.push_back(opt.get<std::string>());
            }
        }
        if (auto it = record.find("graph"); it != record.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError(line_no, "graph");
            p.graph_signature = it->get<std::string>();
        }
        if (!seen_ids.insert(p.id).second) {
            throw DuplicateIdError(p.id);
        }
        problems.push_back(std::move(p));
    }
    return problems;
}

void save_corpus(const std::string& path, const std::vector<Problem>& problems) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write corpus file: " + path);
    }
    for (const Problem& p : problems) {
        json record{{"id", p.id},
                    {"question", p.question},
                    {"solution", p.solution},
                    {"answer", p.answer},
                    {"solution_type", solution_type_name(p.solution_type)}};
        if (!p.options.empty()) record["options"] = p.options;
        if (p.graph_signature) record["graph"] = *p.graph_signature;
        out << record.dump() << "\n";
    }
}

std::unordered_map<std::string, const Problem*> index_by_id(const std::vector<Problem>& problems) {
    std::unordered_map<std::string, const Problem*> map;
    map.reserve(problems.size());
    for (const Problem& p : problems) map.emplace(p.id, &p);
    return map;
}

std::string problem_signature(const Problem& p) {
    if (p.graph_signature) return *p.graph_signature;
    if (p.solution_type == SolutionType::Equation) {
        try {
            return parse_equation(p.solution).signature;
        } catch (const Error&) {
            throw MissingSignatureError(p.id);
        }
    }
    throw MissingSignatureError(p.id);
}

std::string extract_final_answer(const Problem& p) {
    std::string extracted;
    if (p.solution_type == SolutionType::Equation) {
        try {
            extracted = format_decimal(evaluate_expression(parse_equation(p.solution)));
        } catch (const Error& e) {
            throw ParseFailure("cannot evaluate equation solution for '" + p.id + "': " + e.what());
        }
    } else {
        static const std::string kMarker = "#### ";
        std::size_t pos = p.solution.rfind(kMarker);
        if (pos == std::string::npos) {
            throw ParseFailure("text solution for '" + p.id + "' has no '#### ' marker");
        }
        extracted = trim(p.solution.substr(pos + kMarker.size()));
        if (extracted.empty()) {
            throw ParseFailure("text solution for '" + p.id + "' has an empty final answer");
        }
    }
    if (!p.options.empty()) {
        const std::string token = trim(extracted);
        if (token.size() == 1) {
            char c = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
            if (c >= 'A' && c <= 'E') return std::string(1, c);
        }
    }
    return extracted;
}

std::string normalize_answer(const std::string& answer) {
    std::string out;
    out.reserve(answer.size());
    const unsigned char* s = reinterpret_cast<const unsigned char*>(answer.data());
    std::size_t n = answer.size();
    for (std::size_t i = 0; i < n; ++i) {
        // full-width digits U+FF10..U+FF19 (EF BC 90..99) -> ASCII
        if (s[i] == 0xEF && i + 2 < n && s[i + 1] == 0xBC && s[i + 2] >= 0x90 && s[i + 2] <= 0x99) {
            out.push_back(static_cast<char>('0' + (s[i + 2] - 0x90)));
            i += 2;
            continue;
        }
        if (s[i] == ',') continue;  // thousands separator
        out.push_back(static_cast<char>(s[i]));
    }
    out = trim(out);
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
        out = trim(out);
    }
    return out;
}

PairSet mine_pairs(const std::vector<Problem>& corpus, std::uint64_t seed) {
    // Ordered map keeps grouping independent of hash iteration order.
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> signatures(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        signatures[i] = problem_signature(corpus[i]);
        groups[signatures[i]].push_back(i);
    }
    Rng rng(seed);
    PairSet out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& group = groups[signatures[i]];
        if (group.size() < 2) continue;  // no positive available: discard
        std::size_t pick = rng.index(group.size() - 1);
        std::size_t positive = 0;
        std::size_t seen = 0;
        for (std::size_t member : group) {
            if (member == i) continue;
            if (seen++ == pick) {
                positive = member;
                break;
            }
        }
        out.pairs.push_back({corpus[i].id, corpus[positive].id, true});
    }
    return out;
}

namespace {

std::uint64_t mix_fraction_seed(std::uint64_t seed, double fraction) {
    char bytes[sizeof(double)];
    std::memcpy(bytes, &fraction, sizeof(double));
    return fnv1a64(std::string_view(bytes, sizeof(double)), kFnvOffsetBasis ^ seed);
}

std::size_t slice_count(double fraction, std::size_t size) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size)));
}

}  // namespace

CorpusSlice slice_corpus(const std::vector<Problem>& corpus, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw BadFractionError("fraction must be in (0, 1]");
    }
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const Problem& p : corpus) ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_fraction_seed(seed, fraction));
    rng.shuffle(ids);
    ids.resize(slice_count(fraction, corpus.size()));
    return {fraction, seed, std::move(ids)};
}

PairSet slice_pairs(const PairSet& pairs, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw BadFractionError("fraction must be in (0, 1]");
    }
    std::vector<std::size_t> order(pairs.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Pair& pa = pairs.pairs[a];
        const Pair& pb = pairs.pairs[b];
        return std::tie(pa.query_id, pa.positive_id) < std::tie(pb.query_id, pb.positive_id);
    });
    Rng rng(mix_fraction_seed(seed, fraction));
    rng.shuffle(order);
    order.resize(slice_count(fraction, pairs.pairs.size()));
    PairSet out;
    out.source_corpus = pairs.source_corpus;
    for (std::size_t i : order) out.pairs.push_back(pairs.pairs[i]);
    return out;
}

PairSet load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open pair file: " + path);
    }
    PairSet out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw SchemaError(line_no, "<json>");
        }
        Pair p;
        p.query_id = require_string(record, "query_id", line_no);
        p.positive_id = require_string(record, "positive_id", line_no);
        p.mined = record.value("mined", true);
        out.pairs.push_back(std::move(p));
    }
    return out;
}

void save_pairs(const std::string& path, const PairSet& pairs) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write pair file: " + path);
    }
    for (const Pair& p : pairs.pairs) {
        out << json{{"query_id", p.query_id}, {"positive_id", p.positive_id}, {"mined", p.mined}}.dump()
            << "\n";
    }
}

DistillResult ingest_rewrites(const std::vector<Problem>& corpus, const std::vector<Rewrite>& rewrites) {
    auto by_id = index_by_id(corpus);
    DistillResult result;
    for (const Rewrite& r : rewrites) {
        auto it = by_id.find(r.id);
        if (it == by_id.end() || trim(r.rewrite).empty()) {
            result.rejected_ids.push_back(r.id);
            continue;
        }
        const Problem& original = *it->second;
        Problem rewritten = original;
        rewritten.id = original.id + "#rw";
        rewritten.question = r.rewrite;
        result.new_problems.push_back(std::move(rewritten));
        result.pairs.pairs.push_back({original.id, original.id + "#rw", false});
    }
    return result;
}

}  // namespace mwpr
