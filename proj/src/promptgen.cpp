#include "mwpr/promptgen.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/expr.hpp"
#include "http_support.hpp"

#include "json.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>

namespace mwpr {

using nlohmann::json;

namespace {

constexpr const char* kFewShotHeader =
    "Solve the final question. Follow the same format as the examples.\n\n";
constexpr const char* kZeroShotHeader = "Solve the question.\n\n";

constexpr const char* kRewriteInstruction =
    "Generate a problem with the same computation graph as the input math problem, ensuring that the "
    "semantics, numerical values, and sentence structure are as different as possible. Output only one "
    "rewritten example, without any additional information.";

}  // namespace

PromptBundle assemble_prompt(const std::vector<Exemplar>& exemplars, const std::string& query,
                             const std::string& template_id) {
    PromptBundle bundle;
    bundle.exemplars = exemplars;
    bundle.query = query;
    bundle.template_id = template_id;
    if (template_id == kDefaultTemplateId) {
        if (exemplars.empty()) throw EmptyExemplarsError();
        bundle.rendered = kFewShotHeader;
    } else if (template_id == kZeroShotTemplateId) {
        bundle.rendered = kZeroShotHeader;
    } else {
        throw TemplateUnknownError(template_id);
    }
    for (const Exemplar& e : bundle.exemplars) {
        bundle.rendered += "Question: " + e.question + "\nAnswer: " + e.solution + "\n\n";
    }
    bundle.rendered += "Question: " + query + "\nAnswer:";
    return bundle;
}

MockGenerator::MockGenerator(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}

GeneratorOutput MockGenerator::generate(const PromptBundle& bundle) {
    GeneratorOutput out;
    out.model_id = id();
    auto it = answers_.find(bundle.query);
    out.raw = it != answers_.end() ? it->second : "x=-1";
    return out;
}

std::vector<std::string> numbers_in_text(const std::string& text) {
    std::vector<std::string> numbers;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isdigit(c)) {
            // skip literals glued to an identifier, e.g. "q12"
            if (i > 0 && (std::isalpha(static_cast<unsigned char>(text[i - 1])) || text[i - 1] == '_')) {
                while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                                           text[i] == '_')) {
                    ++i;
                }
                continue;
            }
            std::size_t start = i;
            bool seen_dot = false;
            while (i < text.size()) {
                char d = text[i];
                if (std::isdigit(static_cast<unsigned char>(d))) {
                    ++i;
                } else if (d == '.' && !seen_dot && i + 1 < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                    seen_dot = true;
                    ++i;
                } else {
                    break;
                }
            }
            numbers.push_back(text.substr(start, i - start));
        } else {
            ++i;
        }
    }
    return numbers;
}

namespace {

void collect_number_nodes(ExprNode& node, std::vector<ExprNode*>& out) {
    if (node.kind == NodeKind::Number) {
        out.push_back(&node);
        return;
    }
    for (ExprNode& child : node.children) collect_number_nodes(child, out);
}

}  // namespace

GeneratorOutput AnalogizerGenerator::generate(const PromptBundle& bundle) {
    GeneratorOutput out;
    out.model_id = id();
    if (bundle.exemplars.empty()) {
        out.raw = "x=-1";
        return out;
    }
    const std::string& exemplar_solution = bundle.exemplars.front().solution;
    std::vector<std::string> query_numbers = numbers_in_text(bundle.query);
    try {
        ComputationalGraph graph = parse_equation(exemplar_solution);
        std::vector<ExprNode*> slots;
        collect_number_nodes(graph.root, slots);
        if (slots.size() != query_numbers.size()) {
            out.raw = exemplar_solution;  // shapes disagree; echo the exemplar as-is
            return out;
        }
        for (std::size_t i = 0; i < slots.size(); ++i) {
            slots[i]->value = query_numbers[i];
        }
        out.raw = "x=" + infix(graph.root);
    } catch (const Error&) {
        out.raw = exemplar_solution;
    }
    return out;
}

namespace {

std::string resolve_gen_api_key(const std::string& configured) {
    if (!configured.empty()) return configured;
    const char* env = std::getenv("GEN_API_KEY");
    return env ? std::string(env) : std::string();
}

}  // namespace

RemoteGenerator::RemoteGenerator(ChatEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.api_key = resolve_gen_api_key(endpoint_.api_key);
}

std::string RemoteGenerator::id() const { return "remote:" + endpoint_.model; }

GeneratorOutput RemoteGenerator::generate(const PromptBundle& bundle) {
    detail::HttpRequest request;
    request.base_url = endpoint_.base_url;
    request.path = endpoint_.path;
    request.body = json{{"model", endpoint_.model},
                        {"messages", json::array({json{{"role", "user"}, {"content", bundle.rendered}}})},
                        {"temperature", endpoint_.temperature}}
                       .dump();
    request.bearer_token = endpoint_.api_key;
    request.timeout_seconds = endpoint_.timeout_seconds;
    request.max_retries = endpoint_.max_retries;
    request.retry_rate_limited = true;

    auto started = std::chrono::steady_clock::now();
    std::string body = detail::post_json(request);
    auto elapsed = std::chrono::steady_clock::now() - started;

    json response = json::parse(body, nullptr, false);
    if (response.is_discarded() || !response.contains("choices") || response["choices"].empty() ||
        !response["choices"][0].contains("message")) {
        throw ServiceError(200, "malformed chat completion payload");
    }
    GeneratorOutput out;
    out.raw = response["choices"][0]["message"].value("content", "");
    out.latency_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    out.model_id = endpoint_.model;
    return out;
}

std::string build_rewrite_prompt(const Problem& problem) {
    return std::string(kRewriteInstruction) + "\n\n" + problem.question;
}

}  // namespace mwpr
