#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mwpr/errors.hpp"
#include "mwpr/expr.hpp"
#include "mwpr/promptgen.hpp"

#include <string>

using namespace mwpr;

TEST_CASE("assemble_prompt renders exemplars before the query, in order") {
    std::vector<Exemplar> exemplars = {{"2+2?", "x=4"}};
    PromptBundle bundle = assemble_prompt(exemplars, "3+3?");
    CHECK(bundle.template_id == kDefaultTemplateId);
    std::size_t exemplar_pos = bundle.rendered.find("Question: 2+2?\nAnswer: x=4");
    std::size_t query_pos = bundle.rendered.find("Question: 3+3?\nAnswer:");
    REQUIRE(exemplar_pos != std::string::npos);
    REQUIRE(query_pos != std::string::npos);
    CHECK(exemplar_pos < query_pos);
    CHECK(bundle.rendered.find("format as the examples") != std::string::npos);

    std::vector<Exemplar> ab = {{"qa", "sa"}, {"qb", "sb"}};
    std::vector<Exemplar> ba = {{"qb", "sb"}, {"qa", "sa"}};
    CHECK(assemble_prompt(ab, "q").rendered != assemble_prompt(ba, "q").rendered);
}

TEST_CASE("assemble_prompt contains every component exactly once") {
    std::vector<Exemplar> exemplars = {{"first question", "first solution"},
                                       {"second question", "second solution"}};
    PromptBundle bundle = assemble_prompt(exemplars, "the query");
    auto count = [&](const std::string& needle) {
        std::size_t occurrences = 0;
        for (std::size_t pos = bundle.rendered.find(needle); pos != std::string::npos;
             pos = bundle.rendered.find(needle, pos + 1)) {
            ++occurrences;
        }
        return occurrences;
    };
    CHECK(count("first question") == 1);
    CHECK(count("first solution") == 1);
    CHECK(count("second question") == 1);
    CHECK(count("second solution") == 1);
    CHECK(count("the query") == 1);

    // no silent truncation: rendered length is component lengths plus the
    // fixed per-exemplar and header overhead, exactly
    const std::string header = "Solve the final question. Follow the same format as the examples.\n\n";
    const std::string exemplar_scaffold = "Question: \nAnswer: \n\n";
    const std::string query_scaffold = "Question: \nAnswer:";
    std::size_t expected = header.size() + query_scaffold.size() + bundle.query.size();
    for (const Exemplar& e : exemplars) {
        expected += exemplar_scaffold.size() + e.question.size() + e.solution.size();
    }
    CHECK(bundle.rendered.size() == expected);
}

TEST_CASE("assemble_prompt template handling") {
    CHECK_THROWS_AS(assemble_prompt({{"q", "a"}}, "query", "no-such-template"), TemplateUnknownError);
    CHECK_THROWS_AS(assemble_prompt({}, "query"), EmptyExemplarsError);
    PromptBundle zero = assemble_prompt({}, "query", kZeroShotTemplateId);
    CHECK(zero.exemplars.empty());
    CHECK(zero.rendered.find("Question: query\nAnswer:") != std::string::npos);
}

TEST_CASE("mock_generate looks up by query text") {
    std::map<std::string, std::string> answers{{"known query", "x=99"}};
    MockGenerator generator(answers);
    PromptBundle known = assemble_prompt({{"q", "a"}}, "known query");
    CHECK(generator.generate(known).raw == "x=99");
    PromptBundle unknown = assemble_prompt({{"q", "a"}}, "unknown query");
    CHECK(generator.generate(unknown).raw == "x=-1");
    CHECK(generator.generate(known).raw == generator.generate(known).raw);
}

TEST_CASE("numbers_in_text finds decimal literals in order") {
    CHECK(numbers_in_text("buy 5 packs of 1000, lose 2000") ==
          std::vector<std::string>{"5", "1000", "2000"});
    CHECK(numbers_in_text("2.5 yuan per book, 4 yuan each") == std::vector<std::string>{"2.5", "4"});
    CHECK(numbers_in_text("no numbers here").empty());
    CHECK(numbers_in_text("ids like q12 are skipped, 7 is not") == std::vector<std::string>{"7"});
}

TEST_CASE("analogizer substitutes query numbers into the top exemplar") {
    std::vector<Exemplar> exemplars = {
        {"Amy buys 5 packs of 1000 pins and loses 2000.", "x=(5*1000)-2000"}};
    AnalogizerGenerator generator;
    PromptBundle bundle = assemble_prompt(exemplars, "Bo buys 3 packs of 400 nails and loses 100.");
    GeneratorOutput out = generator.generate(bundle);
    CHECK(out.raw == "x=((3*400)-100)");
    CHECK(evaluate_expression(parse_equation(out.raw)) == doctest::Approx(1100.0));
}

TEST_CASE("analogizer falls back when shapes disagree") {
    AnalogizerGenerator generator;
    std::vector<Exemplar> exemplars = {{"q", "x=(5*1000)-2000"}};
    // two numbers in the query, three slots in the exemplar
    PromptBundle mismatched = assemble_prompt(exemplars, "only 2 numbers 7 here");
    CHECK(generator.generate(mismatched).raw == "x=(5*1000)-2000");

    std::vector<Exemplar> unparseable = {{"q", "this is not an equation"}};
    PromptBundle bad = assemble_prompt(unparseable, "a 1 b 2");
    CHECK(generator.generate(bad).raw == "this is not an equation");

    PromptBundle empty = assemble_prompt({}, "query 5", kZeroShotTemplateId);
    CHECK(generator.generate(empty).raw == "x=-1");
}

TEST_CASE("build_rewrite_prompt starts with the fixed instruction") {
    Problem p;
    p.id = "p1";
    p.question = "A farm has 3 fields of 17 rows each; how many rows?";
    std::string prompt = build_rewrite_prompt(p);
    CHECK(prompt.rfind("Generate a problem with the same computation graph", 0) == 0);
    CHECK(prompt.find("Output only one rewritten example, without any additional information.") !=
          std::string::npos);
    CHECK(prompt.find(p.question) != std::string::npos);
    // instruction first, problem last
    CHECK(prompt.find(p.question) > prompt.find("computation graph"));
}
