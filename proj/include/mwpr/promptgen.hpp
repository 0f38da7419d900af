#pragma once

#include "mwpr/corpus.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwpr {

struct Exemplar {
    std::string question;
    std::string solution;
};

struct PromptBundle {
    std::vector<Exemplar> exemplars;
    std::string query;
    std::string template_id;
    std::string rendered;
    bool truncated = false;
};

inline constexpr const char* kDefaultTemplateId = "default-v1";
inline constexpr const char* kZeroShotTemplateId = "zero-shot-v1";

// Renders exemplars followed by the query:
//   "Question: {q}\nAnswer: {a}\n\n" ... "Question: {query}\nAnswer:"
// under an instruction header that tells the generator to follow the same
// format as the examples. Exemplar order is preserved. Throws
// TemplateUnknownError; the few-shot template requires at least one exemplar.
PromptBundle assemble_prompt(const std::vector<Exemplar>& exemplars, const std::string& query,
                             const std::string& template_id = kDefaultTemplateId);

struct GeneratorOutput {
    std::string raw;
    std::optional<std::string> parsed_answer;  // filled by the evaluation layer
    double latency_ms = 0.0;
    std::string model_id;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual GeneratorOutput generate(const PromptBundle& bundle) = 0;
    virtual std::string id() const = 0;
};

// Deterministic lookup by query text; unknown queries get a fixed wrong
// answer ("x=-1").
class MockGenerator final : public Generator {
public:
    explicit MockGenerator(std::map<std::string, std::string> answers);
    GeneratorOutput generate(const PromptBundle& bundle) override;
    std::string id() const override { return "mock"; }

private:
    std::map<std::string, std::string> answers_;
};

// Answers by analogy: takes the top exemplar's equation solution and replaces
// its numeric literals, in infix order, with the numbers found in the query
// text. Correct exactly when the exemplar shares the query's equation shape.
class AnalogizerGenerator final : public Generator {
public:
    GeneratorOutput generate(const PromptBundle& bundle) override;
    std::string id() const override { return "analogizer"; }
};

// Decimal literals appearing in free text, in order.
std::vector<std::string> numbers_in_text(const std::string& text);

struct ChatEndpoint {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key;  // falls back to GEN_API_KEY
    double temperature = 0.0;
    int timeout_seconds = 60;
    int max_retries = 3;
};

// Chat-completions client: sends the rendered prompt as a single user message
// at temperature 0. 429s and transport failures are retried with backoff
// (max_retries), then surface as ServiceError / TransportError / TimeoutError.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(ChatEndpoint endpoint);
    GeneratorOutput generate(const PromptBundle& bundle) override;
    std::string id() const override;

private:
    ChatEndpoint endpoint_;
};

// Instruction prompt asking a generator to rewrite a problem with the same
// computation graph but different surface content; the rewrite becomes a
// distilled training pair (mined=false).
std::string build_rewrite_prompt(const Problem& problem);

}  // namespace mwpr
