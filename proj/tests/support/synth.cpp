#include "support/synth.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/util.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace mwpr::testing {

namespace {

const std::vector<std::vector<std::string>> kTopicWords = {
    {"orchard", "apples", "farmer", "baskets", "harvest", "branches", "cider", "grove", "ladder", "crates"},
    {"library", "books", "shelves", "reader", "volumes", "catalog", "margins", "lantern", "archive", "index"},
    {"harbor", "boats", "sailors", "ropes", "cargo", "tide", "anchor", "pier", "gulls", "lighthouse"},
    {"bakery", "loaves", "oven", "flour", "baker", "pastry", "dough", "trays", "icing", "crumbs"},
    {"railway", "trains", "tracks", "station", "whistle", "carriages", "conductor", "platform", "signals", "tunnel"},
    {"aquarium", "fish", "tanks", "coral", "keeper", "bubbles", "plankton", "turtles", "filters", "visitors"},
    {"workshop", "gears", "lathe", "benches", "apprentice", "sawdust", "chisels", "blueprints", "clamps", "varnish"},
    {"observatory", "stars", "telescope", "charts", "astronomer", "domes", "lenses", "comets", "eyepiece", "nebula"},
};

const char* op_word(OpCode op) {
    switch (op) {
        case OpCode::Add: return "and";
        case OpCode::Sub: return "less";
        case OpCode::Mul: return "times";
        case OpCode::Div: return "among";
        default: return "?";
    }
}

// Random binary tree over + - * / with number placeholders; depth <= 3.
ExprNode random_template_tree(Rng& rng, int depth) {
    if (depth <= 0 || (depth < 2 && rng.real() < 0.5)) {
        return make_number("0");
    }
    static const OpCode kOps[] = {OpCode::Add, OpCode::Sub, OpCode::Mul, OpCode::Div};
    OpCode op = kOps[rng.index(4)];
    return make_binary(op, random_template_tree(rng, depth - 1), random_template_tree(rng, depth - 1));
}

std::size_t count_leaves(const ExprNode& node) {
    if (node.kind == NodeKind::Number) return 1;
    std::size_t total = 0;
    for (const ExprNode& child : node.children) total += count_leaves(child);
    return total;
}

void assign_values(ExprNode& node, Rng& rng) {
    if (node.kind == NodeKind::Number) {
        node.value = std::to_string(2 + rng.index(48));
        return;
    }
    for (ExprNode& child : node.children) assign_values(child, rng);
}

// The equation spelled out in words, numbers in infix order.
std::string spell_out(const ExprNode& node) {
    if (node.kind == NodeKind::Number) return node.value;
    const std::string lhs = spell_out(node.children[0]);
    const std::string rhs = spell_out(node.children[1]);
    return "( " + lhs + " " + op_word(node.op) + " " + rhs + " )";
}

bool safe_to_evaluate(const ExprNode& node, double& out) {
    try {
        out = evaluate_expression(node);
    } catch (const Error&) {
        return false;
    }
    return std::fabs(out) < 1e7;
}

std::string render_question(const std::vector<std::string>& topic, const ExprNode& tree, Rng& rng) {
    auto word = [&]() { return topic[rng.index(topic.size())]; };
    std::string text = "In the " + word() + ", the " + word() + " near the " + word() + " kept the " +
                       word() + " busy, and the " + word() + " stacked " + word() + " beside the " +
                       word() + ". Later the " + word() + " and the " + word() + " sorted the " +
                       word() + " while the " + word() + " rested by the " + word() +
                       ". The ledger counts " + spell_out(tree) + " of them. How many " + word() +
                       " does the " + word() + " record?";
    return text;
}

Problem make_problem(const std::string& id, const ExprNode& template_tree, std::size_t topic, Rng& rng) {
    ExprNode tree = template_tree;
    double value = 0.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        assign_values(tree, rng);
        if (safe_to_evaluate(tree, value)) break;
        if (attempt == 199) throw std::logic_error("template resists value assignment");
    }
    Problem p;
    p.id = id;
    p.question = render_question(kTopicWords[topic], tree, rng);
    p.solution = "x=" + infix(tree);
    p.answer = format_decimal(value);
    p.solution_type = SolutionType::Equation;
    p.graph_signature = canonical_signature(tree);
    return p;
}

}  // namespace

SynthData make_synthetic(const SynthOptions& options) {
    Rng rng(options.seed);
    SynthData data;

    // distinct-signature templates; distinct signature implies retrieval by
    // signature always lands inside the right template group
    std::vector<ExprNode> templates;
    std::set<std::string> seen;
    int guard = 0;
    while (templates.size() < options.num_templates) {
        if (++guard > 100000) throw std::logic_error("cannot build enough distinct templates");
        ExprNode tree = random_template_tree(rng, 3);
        if (count_leaves(tree) < 2) continue;
        std::string signature = canonical_signature(tree);
        if (!seen.insert(signature).second) continue;
        templates.push_back(tree);
        data.template_signatures.push_back(signature);
    }

    for (std::size_t i = 0; i < options.corpus_size; ++i) {
        std::size_t template_id = i % templates.size();
        std::size_t topic = rng.index(kTopicWords.size());
        data.corpus.push_back(
            make_problem("syn-" + std::to_string(i), templates[template_id], topic, rng));
    }
    for (std::size_t i = 0; i < options.eval_size; ++i) {
        std::size_t template_id = i % templates.size();
        std::size_t topic = rng.index(kTopicWords.size());
        data.eval_set.push_back(
            make_problem("eval-" + std::to_string(i), templates[template_id], topic, rng));
    }
    return data;
}

}  // namespace mwpr::testing
