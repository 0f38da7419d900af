// Command-line front end for the retrieval pipeline: ingest and mine a
// problem corpus, train the pooler, build and query an index, run the
// evaluation harness and the analysis reports.

#include "mwpr/corpus.hpp"
#include "mwpr/embedding.hpp"
#include "mwpr/errors.hpp"
#include "mwpr/evalanalysis.hpp"
#include "mwpr/expr.hpp"
#include "mwpr/promptgen.hpp"
#include "mwpr/retrieval.hpp"
#include "mwpr/trainer.hpp"
#include "mwpr/util.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using mwpr::Error;
using nlohmann::json;

struct Options {
    std::string config_path;
    std::string corpus_path;
    std::string pairs_path;
    std::string checkpoint_path;
    std::string index_path;
    std::string eval_path;
    std::string out_path;
    std::string out_corpus_path;
    std::string rewrites_path;
    std::string answers_path;
    std::string query;
    std::string provider = "hashed";
    std::string generator = "mock";
    std::string template_id = mwpr::kDefaultTemplateId;
    std::string fractions = "0.05,0.1,0.25,0.5,1.0";
    std::string embed_url;
    std::string embed_model;
    std::string gen_url;
    std::string gen_model;
    std::size_t k = 8;
    std::uint64_t seed = 0;
    std::size_t dim = 512;
    std::size_t sample = 100;
    double fraction = 1.0;
    bool include_self = false;
    mwpr::TrainConfig train;
};

// Every subcommand shares one flag set; the config file uses the same names
// without the leading dashes.
void register_options(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config_path, "key=value config file");
    cmd->add_option("--corpus", opt.corpus_path, "problem corpus (JSONL)");
    cmd->add_option("--pairs", opt.pairs_path, "pair set (JSONL)");
    cmd->add_option("--checkpoint", opt.checkpoint_path, "pooler checkpoint (JSON)");
    cmd->add_option("--index", opt.index_path, "retrieval index file");
    cmd->add_option("--eval", opt.eval_path, "evaluation problems (JSONL)");
    cmd->add_option("--out", opt.out_path, "primary output path");
    cmd->add_option("--out-corpus", opt.out_corpus_path, "augmented corpus output (distill)");
    cmd->add_option("--rewrites", opt.rewrites_path, "rewrites file for distill ingest (JSONL)");
    cmd->add_option("--answers", opt.answers_path, "mock generator answer map (JSON object)");
    cmd->add_option("--query", opt.query, "ad-hoc query text (retrieve)");
    cmd->add_option("--provider", opt.provider, "embedding provider: hashed | remote");
    cmd->add_option("--generator", opt.generator, "generator: mock | analogizer | remote");
    cmd->add_option("--template", opt.template_id, "prompt template id");
    cmd->add_option("--fraction", opt.fraction, "train on this fraction of the pairs");
    cmd->add_option("--fractions", opt.fractions, "comma-separated fractions (sweep)");
    cmd->add_option("--embed-url", opt.embed_url, "embedding service base url");
    cmd->add_option("--embed-model", opt.embed_model, "embedding service model name");
    cmd->add_option("--gen-url", opt.gen_url, "generator service base url");
    cmd->add_option("--gen-model", opt.gen_model, "generator service model name");
    cmd->add_option("--k", opt.k, "exemplars per prompt");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--dim", opt.dim, "hashed embedding dimension");
    cmd->add_option("--sample", opt.sample, "sample size (correlate)");
    cmd->add_flag("--include-self", opt.include_self, "keep byte-identical questions in retrieval");
    cmd->add_option("--temperature", opt.train.temperature, "contrastive temperature");
    cmd->add_option("--lr", opt.train.learning_rate, "learning rate");
    cmd->add_option("--epochs", opt.train.epochs, "training epochs");
    cmd->add_option("--batch-size", opt.train.batch_size, "contrastive batch size");
    cmd->add_option("--weight-decay", opt.train.weight_decay, "decoupled weight decay");
    cmd->add_option("--hidden-dim", opt.train.hidden_dim, "pooler hidden width (0 = input dim)");
    cmd->add_option("--output-dim", opt.train.output_dim, "pooler output width (0 = input dim)");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mwpr::IoError("cannot open config file: " + path);
    std::map<std::string, std::string> values;
    std::string line;
    while (std::getline(in, line)) {
        std::string trimmed = mwpr::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw mwpr::IoError("config line is not key=value: " + trimmed);
        }
        values[mwpr::trim(trimmed.substr(0, eq))] = mwpr::trim(trimmed.substr(eq + 1));
    }
    return values;
}

// Config fills in every option the command line left untouched.
void merge_config(CLI::App* cmd, Options& opt) {
    if (opt.config_path.empty()) return;
    std::map<std::string, std::string> values = parse_config_file(opt.config_path);
    for (const auto& [key, value] : values) {
        CLI::Option* option = cmd->get_option_no_throw("--" + key);
        if (option == nullptr) {
            throw mwpr::IoError("config file sets unknown option '" + key + "'");
        }
        if (option->count() == 0) {
            option->add_result(value);
            option->run_callback();
        }
    }
}

struct Provenance {
    json block;
    std::vector<std::string> csv_lines;
};

Provenance make_provenance(const Options& opt, const std::vector<std::string>& input_paths) {
    json inputs = json::object();
    std::uint64_t combined = mwpr::kFnvOffsetBasis;
    for (const std::string& path : input_paths) {
        if (path.empty()) continue;
        std::string digest = mwpr::hex64(mwpr::fnv1a64_file(path));
        inputs[path] = digest;
        combined = mwpr::fnv1a64(path + ":" + digest, combined);
    }
    std::string settings = "provider=" + opt.provider + ";generator=" + opt.generator +
                           ";k=" + std::to_string(opt.k) + ";seed=" + std::to_string(opt.seed) +
                           ";dim=" + std::to_string(opt.dim) +
                           ";fraction=" + mwpr::format_decimal(opt.fraction) +
                           ";temperature=" + mwpr::format_decimal(opt.train.temperature) +
                           ";lr=" + mwpr::format_decimal(opt.train.learning_rate) +
                           ";epochs=" + std::to_string(opt.train.epochs) +
                           ";batch=" + std::to_string(opt.train.batch_size);
    std::string config_hash = mwpr::hex64(mwpr::fnv1a64(settings, combined));
    Provenance p;
    p.block = json{{"config_hash", config_hash}, {"seed", opt.seed}, {"inputs", inputs}};
    p.csv_lines.push_back("config_hash=" + config_hash);
    p.csv_lines.push_back("seed=" + std::to_string(opt.seed));
    for (const auto& [path, digest] : inputs.items()) {
        p.csv_lines.push_back("input " + path + "=" + digest.get<std::string>());
    }
    return p;
}

void require(bool condition, const std::string& message) {
    if (!condition) throw Error(message);
}

std::shared_ptr<mwpr::EmbeddingProvider> make_provider(const Options& opt) {
    if (opt.provider == "hashed") {
        return std::make_shared<mwpr::HashedNgramProvider>(opt.dim);
    }
    if (opt.provider == "remote") {
        require(!opt.embed_url.empty(), "remote provider requires --embed-url");
        mwpr::EmbedEndpoint endpoint;
        endpoint.base_url = opt.embed_url;
        endpoint.model = opt.embed_model;
        return std::make_shared<mwpr::RemoteEmbeddingProvider>(endpoint);
    }
    throw Error("unknown provider '" + opt.provider + "' (expected hashed or remote)");
}

std::unique_ptr<mwpr::Generator> make_generator(const Options& opt) {
    if (opt.generator == "mock") {
        std::map<std::string, std::string> answers;
        if (!opt.answers_path.empty()) {
            std::ifstream in(opt.answers_path);
            if (!in) throw mwpr::IoError("cannot open answers file: " + opt.answers_path);
            json doc = json::parse(in, nullptr, false);
            if (doc.is_discarded() || !doc.is_object()) {
                throw mwpr::IoError("answers file must be a JSON object: " + opt.answers_path);
            }
            for (const auto& [key, value] : doc.items()) answers[key] = value.get<std::string>();
        }
        return std::make_unique<mwpr::MockGenerator>(std::move(answers));
    }
    if (opt.generator == "analogizer") {
        return std::make_unique<mwpr::AnalogizerGenerator>();
    }
    if (opt.generator == "remote") {
        require(!opt.gen_url.empty(), "remote generator requires --gen-url");
        mwpr::ChatEndpoint endpoint;
        endpoint.base_url = opt.gen_url;
        endpoint.model = opt.gen_model;
        return std::make_unique<mwpr::RemoteGenerator>(endpoint);
    }
    throw Error("unknown generator '" + opt.generator + "' (expected mock, analogizer or remote)");
}

std::optional<mwpr::PoolerParams> load_pooler(const Options& opt) {
    if (opt.checkpoint_path.empty()) return std::nullopt;
    return mwpr::load_checkpoint(opt.checkpoint_path).params;
}

mwpr::RetrievalIndex open_index(const Options& opt, const std::vector<mwpr::Problem>& corpus) {
    require(!opt.index_path.empty(), "--index is required");
    return mwpr::RetrievalIndex::load(opt.index_path, corpus, make_provider(opt), load_pooler(opt));
}

bool ends_with(const std::string& text, const std::string& suffix) {
    return text.size() >= suffix.size() &&
           text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// --- subcommands ---

int run_ingest(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.out_path.empty(), "ingest requires --corpus and --out");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    std::size_t derived = 0;
    for (mwpr::Problem& p : corpus) {
        if (!p.graph_signature && p.solution_type == mwpr::SolutionType::Equation) {
            p.graph_signature = mwpr::parse_equation(p.solution).signature;
            ++derived;
        }
    }
    mwpr::save_corpus(opt.out_path, corpus);
    std::cout << "ingested " << corpus.size() << " problems (" << derived
              << " signatures derived) -> " << opt.out_path << "\n";
    return 0;
}

int run_mine_pairs(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.out_path.empty(), "mine-pairs requires --corpus and --out");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::PairSet pairs = mwpr::mine_pairs(corpus, opt.seed);
    pairs.source_corpus = opt.corpus_path;
    mwpr::save_pairs(opt.out_path, pairs);
    std::cout << "mined " << pairs.pairs.size() << " pairs from " << corpus.size() << " problems -> "
              << opt.out_path << "\n";
    return 0;
}

int run_train(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.pairs_path.empty() && !opt.out_path.empty(),
            "train requires --corpus, --pairs and --out");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::PairSet pairs = mwpr::load_pairs(opt.pairs_path);
    if (opt.fraction < 1.0) {
        pairs = mwpr::slice_pairs(pairs, opt.fraction, opt.seed);
    }
    mwpr::TrainConfig cfg = opt.train;
    cfg.seed = opt.seed;
    auto provider = make_provider(opt);
    mwpr::TrainResult result = mwpr::train(corpus, pairs, cfg, *provider);
    mwpr::save_checkpoint(opt.out_path, result.params, cfg, result.loss_history);

    // append provenance to the checkpoint artifact
    Provenance prov = make_provenance(opt, {opt.corpus_path, opt.pairs_path});
    std::ifstream in(opt.out_path);
    json doc = json::parse(in);
    in.close();
    doc["provenance"] = prov.block;
    std::ofstream out(opt.out_path);
    out << doc.dump(2) << "\n";

    double final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    std::cout << "trained pooler over " << pairs.pairs.size() << " pairs, "
              << result.loss_history.size() << " batches, final batch loss "
              << mwpr::format_decimal(final_loss) << " -> " << opt.out_path << "\n";
    return 0;
}

int run_index(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.out_path.empty(), "index requires --corpus and --out");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::RetrievalIndex index =
        mwpr::RetrievalIndex::build(corpus, make_provider(opt), load_pooler(opt));
    if (ends_with(opt.out_path, ".bin")) {
        index.save_binary(opt.out_path);
    } else {
        index.save_json(opt.out_path);
    }
    std::cout << "indexed " << index.size() << " problems (dim " << index.dim() << ", pooler "
              << index.provenance().pooler << ") -> " << opt.out_path << "\n";
    return 0;
}

int run_retrieve(const Options& opt) {
    require(!opt.corpus_path.empty(), "retrieve requires --corpus");
    require(!opt.query.empty(), "retrieve requires --query");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::RetrievalIndex index = open_index(opt, corpus);
    mwpr::TopkResult top = index.topk(opt.query, opt.k, !opt.include_self);
    json lines = json::array();
    for (const mwpr::ScoredHit& hit : top.hits) {
        json line{{"id", hit.problem.id}, {"score", hit.score}, {"question", hit.problem.question}};
        std::cout << line.dump() << "\n";
        lines.push_back(std::move(line));
    }
    if (top.truncated) std::cout << "# truncated: fewer than k entries available\n";
    if (!opt.out_path.empty()) {
        std::ofstream out(opt.out_path);
        out << lines.dump(2) << "\n";
    }
    return 0;
}

int run_eval(const Options& opt, bool upper_bound) {
    require(!opt.corpus_path.empty() && !opt.eval_path.empty(),
            "eval requires --corpus (retrieval corpus) and --eval (problem set)");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    std::vector<mwpr::Problem> eval_set = mwpr::load_corpus(opt.eval_path);
    std::unique_ptr<mwpr::Generator> generator = make_generator(opt);
    mwpr::EvalOptions eval_options;
    eval_options.template_id = opt.template_id;
    eval_options.exclude_exact_question = !opt.include_self;

    mwpr::EvalReport report;
    if (upper_bound) {
        report = mwpr::upper_bound_eval(eval_set, corpus, opt.k, *generator, eval_options);
    } else {
        mwpr::RetrievalIndex index = open_index(opt, corpus);
        report = mwpr::evaluate(eval_set, index, opt.k, *generator, eval_options);
    }
    Provenance prov = make_provenance(
        opt, {opt.corpus_path, opt.eval_path, opt.index_path, opt.checkpoint_path, opt.answers_path});
    if (!opt.out_path.empty()) {
        mwpr::write_report_json(opt.out_path, report, prov.block);
    }
    std::cout << (upper_bound ? "upper-bound " : "") << "EM = " << report.em << " over "
              << report.n_evaluated << " problems (" << report.n_parse_failures
              << " parse failures)\n";
    return 0;
}

int run_correlate(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.out_path.empty(),
            "correlate requires --corpus and --out");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::RetrievalIndex index = open_index(opt, corpus);
    mwpr::CorrelationReport report =
        mwpr::correlation_report(index, corpus, opt.sample, opt.k, opt.seed);
    Provenance prov = make_provenance(opt, {opt.corpus_path, opt.index_path, opt.checkpoint_path});
    prov.csv_lines.push_back("pearson=" + mwpr::format_decimal(report.pearson_r));
    mwpr::write_scatter_csv(opt.out_path, report, prov.csv_lines);
    std::cout << "pearson = " << report.pearson_r << " over " << report.points.size()
              << " points -> " << opt.out_path << "\n";
    return 0;
}

int run_sweep(const Options& opt) {
    require(!opt.corpus_path.empty() && !opt.pairs_path.empty() && !opt.eval_path.empty() &&
                !opt.out_path.empty(),
            "sweep requires --corpus, --pairs, --eval and --out");
    std::vector<double> fractions;
    for (const std::string& part : mwpr::split(opt.fractions, ',')) {
        if (!mwpr::trim(part).empty()) fractions.push_back(std::stod(mwpr::trim(part)));
    }
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    mwpr::PairSet pairs = mwpr::load_pairs(opt.pairs_path);
    std::vector<mwpr::Problem> eval_set = mwpr::load_corpus(opt.eval_path);
    std::unique_ptr<mwpr::Generator> generator = make_generator(opt);
    mwpr::SweepConfig cfg;
    cfg.train = opt.train;
    cfg.train.seed = opt.seed;
    cfg.k = opt.k;
    cfg.eval.template_id = opt.template_id;
    cfg.eval.exclude_exact_question = !opt.include_self;
    std::vector<mwpr::FractionPoint> points = mwpr::fraction_sweep(
        fractions, corpus, pairs, eval_set, make_provider(opt), *generator, cfg);
    Provenance prov = make_provenance(opt, {opt.corpus_path, opt.pairs_path, opt.eval_path});
    mwpr::write_sweep_csv(opt.out_path, points, prov.csv_lines);
    for (const mwpr::FractionPoint& p : points) {
        std::cout << "fraction " << p.fraction << " -> EM " << p.em << "\n";
    }
    std::cout << "curve -> " << opt.out_path << "\n";
    return 0;
}

int run_distill(const Options& opt) {
    require(!opt.corpus_path.empty(), "distill requires --corpus");
    std::vector<mwpr::Problem> corpus = mwpr::load_corpus(opt.corpus_path);
    if (opt.rewrites_path.empty()) {
        // emit mode: one rewrite prompt per problem
        require(!opt.out_path.empty(), "distill emit mode requires --out");
        std::ofstream out(opt.out_path);
        if (!out) throw mwpr::IoError("cannot write prompts: " + opt.out_path);
        for (const mwpr::Problem& p : corpus) {
            out << json{{"id", p.id}, {"prompt", mwpr::build_rewrite_prompt(p)}}.dump() << "\n";
        }
        std::cout << "emitted " << corpus.size() << " rewrite prompts -> " << opt.out_path << "\n";
        return 0;
    }
    // ingest mode: rewrites become distilled pairs plus new corpus rows
    require(!opt.out_path.empty() && !opt.out_corpus_path.empty(),
            "distill ingest mode requires --out (pairs) and --out-corpus");
    std::ifstream in(opt.rewrites_path);
    if (!in) throw mwpr::IoError("cannot open rewrites: " + opt.rewrites_path);
    std::vector<mwpr::Rewrite> rewrites;
    std::string line;
    while (std::getline(in, line)) {
        if (mwpr::trim(line).empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.contains("id") || !doc.contains("rewrite")) {
            throw mwpr::IoError("rewrite lines need {\"id\", \"rewrite\"}: " + opt.rewrites_path);
        }
        rewrites.push_back({doc["id"].get<std::string>(), doc["rewrite"].get<std::string>()});
    }
    mwpr::DistillResult result = mwpr::ingest_rewrites(corpus, rewrites);
    mwpr::save_pairs(opt.out_path, result.pairs);
    std::vector<mwpr::Problem> augmented = corpus;
    augmented.insert(augmented.end(), result.new_problems.begin(), result.new_problems.end());
    mwpr::save_corpus(opt.out_corpus_path, augmented);
    for (const std::string& rejected : result.rejected_ids) {
        std::cerr << "rejected rewrite for '" << rejected << "'\n";
    }
    std::cout << "distilled " << result.pairs.pairs.size() << " pairs (" << result.rejected_ids.size()
              << " rejected) -> " << opt.out_path << ", corpus -> " << opt.out_corpus_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"computational-graph exemplar retrieval for math word problems"};
    app.require_subcommand(1);
    Options opt;

    CLI::App* ingest = app.add_subcommand("ingest", "validate a dataset and cache graph signatures");
    CLI::App* mine = app.add_subcommand("mine-pairs", "mine positive pairs by canonical signature");
    CLI::App* train_cmd = app.add_subcommand("train", "train the pooler on mined pairs");
    CLI::App* index_cmd = app.add_subcommand("index", "embed a corpus into a retrieval index");
    CLI::App* retrieve = app.add_subcommand("retrieve", "top-k lookup for an ad-hoc query");
    CLI::App* eval_cmd = app.add_subcommand("eval", "retrieve, prompt, generate and score");
    CLI::App* upper = app.add_subcommand("eval-upper-bound", "eval with graph-oracle retrieval");
    CLI::App* correlate = app.add_subcommand("correlate", "embedding vs graph similarity scatter");
    CLI::App* sweep = app.add_subcommand("sweep", "EM as a function of training-data fraction");
    CLI::App* distill = app.add_subcommand("distill", "emit rewrite prompts / ingest rewrites");
    for (CLI::App* cmd : {ingest, mine, train_cmd, index_cmd, retrieve, eval_cmd, upper, correlate,
                          sweep, distill}) {
        register_options(cmd, opt);
    }

    try {
        app.parse(argc, argv);
        CLI::App* active = app.get_subcommands().front();
        merge_config(active, opt);
        if (active == ingest) return run_ingest(opt);
        if (active == mine) return run_mine_pairs(opt);
        if (active == train_cmd) return run_train(opt);
        if (active == index_cmd) return run_index(opt);
        if (active == retrieve) return run_retrieve(opt);
        if (active == eval_cmd) return run_eval(opt, false);
        if (active == upper) return run_eval(opt, true);
        if (active == correlate) return run_correlate(opt);
        if (active == sweep) return run_sweep(opt);
        if (active == distill) return run_distill(opt);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        app.exit(e);
        return 1;
    } catch (const mwpr::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const mwpr::TimeoutError& e) {
        std::cerr << "timeout: " << e.what() << "\n";
        return 2;
    } catch (const mwpr::ServiceError& e) {
        std::cerr << "service error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
