#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pplqa/app.hpp"
#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace {

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> dataset;
    std::optional<std::string> dataset_format;
    std::optional<std::string> scorers;
    std::optional<std::string> template_name;
    std::optional<std::string> templates_dir;
    std::optional<std::string> judge_template;
    bool judge = false;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::string> route;
    std::optional<std::string> api_key_env;
    std::optional<double> timeout;
    std::optional<int> max_retries;
    std::optional<int> max_in_flight;
    std::optional<std::string> cache_dir;
    std::optional<std::string> oracle_corpus;
    std::optional<int> order;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<int> list_length;
    std::optional<std::string> tie_policy;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;
    std::optional<std::string> separator;
    std::optional<double> error_threshold;
    std::optional<std::size_t> resamples;
    std::optional<std::string> leaderboard;
    std::optional<std::size_t> top;
};

// "\n" and "\t" escapes let separators be passed on the command line.
std::string unescape(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            const char next = text[i + 1];
            if (next == 'n' || next == 't' || next == '\\') {
                out += next == 'n' ? '\n' : next == 't' ? '\t' : '\\';
                ++i;
                continue;
            }
        }
        out += text[i];
    }
    return out;
}

pplqa::RunConfig build_config(const Overrides& o) {
    auto c = o.config ? pplqa::load_config(*o.config) : pplqa::RunConfig{};
    auto set = [](auto& target, const auto& value) {
        if (value) target = *value;
    };
    if (o.dataset) c.dataset = *o.dataset;
    set(c.dataset_format, o.dataset_format);
    if (o.scorers) c.scorers = pplqa::split(*o.scorers, ',');
    set(c.template_name, o.template_name);
    if (o.templates_dir) c.templates_dir = *o.templates_dir;
    set(c.judge_template, o.judge_template);
    if (o.judge) c.judge = true;
    set(c.endpoint, o.endpoint);
    set(c.model, o.model);
    set(c.route, o.route);
    set(c.api_key_env, o.api_key_env);
    set(c.timeout_seconds, o.timeout);
    set(c.max_retries, o.max_retries);
    set(c.max_in_flight, o.max_in_flight);
    if (o.cache_dir) c.cache_dir = *o.cache_dir;
    if (o.oracle_corpus) c.oracle_corpus = *o.oracle_corpus;
    set(c.order, o.order);
    set(c.alpha, o.alpha);
    set(c.seed, o.seed);
    set(c.reps, o.reps);
    set(c.list_length, o.list_length);
    set(c.tie_policy, o.tie_policy);
    if (o.out) c.out = *o.out;
    set(c.workers, o.workers);
    if (o.separator) c.separator = unescape(*o.separator);
    set(c.error_threshold, o.error_threshold);
    set(c.resamples, o.resamples);
    if (o.leaderboard) c.leaderboard = *o.leaderboard;
    set(c.top, o.top);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-free answer quality scoring and evaluator agreement"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;

    app.add_option("--config", o.config, "JSON config file; flags override it");
    app.add_option("--dataset", o.dataset, "Dataset file (JSON Lines)");
    app.add_option("--dataset-format", o.dataset_format, "auto, mtbench or domain");
    app.add_option("--scorers", o.scorers, "Comma list of pplqa, gptscore, geval");
    app.add_option("--template", o.template_name, "Prompt template name, or none");
    app.add_option("--templates-dir", o.templates_dir, "Directory of extra *.txt templates");
    app.add_option("--judge-template", o.judge_template, "Judge template for rank --judge");
    app.add_flag("--judge", o.judge, "Add the evaluator-LLM judge to rank");
    app.add_option("--endpoint", o.endpoint, "OpenAI-compatible base URL");
    app.add_option("--model", o.model, "Evaluator model id");
    app.add_option("--route", o.route, "Generation route: completions or chat");
    app.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
    app.add_option("--timeout", o.timeout, "Request timeout in seconds");
    app.add_option("--max-retries", o.max_retries, "Retries per request on transport errors");
    app.add_option("--max-in-flight", o.max_in_flight, "Concurrent provider requests");
    app.add_option("--cache-dir", o.cache_dir, "Response cache directory");
    app.add_option("--oracle-corpus", o.oracle_corpus, "Use the n-gram provider trained on this corpus");
    app.add_option("--order", o.order, "n-gram order (default 2)");
    app.add_option("--alpha", o.alpha, "n-gram Laplace smoothing (default 0.1)");
    app.add_option("--seed", o.seed, "Seed for tie handling, permutations and sampling");
    app.add_option("--reps", o.reps, "Baseline repetitions");
    app.add_option("--L", o.list_length, "Baseline list length");
    app.add_option("--tie-policy", o.tie_policy, "exclude, wrong or random");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--workers", o.workers, "Worker threads (default: max in flight)");
    app.add_option("--separator", o.separator, "Question/answer separator (\\n escapes allowed)");
    app.add_option("--error-threshold", o.error_threshold, "Largest tolerated failure fraction");
    app.add_option("--resamples", o.resamples, "Permutation resamples for tau p-values");
    app.add_option("--leaderboard", o.leaderboard, "Leaderboard CSV for rank");
    app.add_option("--top", o.top, "Keep the first N leaderboard rows");

    auto* score = app.add_subcommand("score", "Score every response");
    auto* compare = app.add_subcommand("compare", "Pairwise comparison metrics");
    auto* rank = app.add_subcommand("rank", "Evaluator rank agreement (Kendall tau)");
    auto* baseline = app.add_subcommand("baseline", "Monte-Carlo tau baseline for random rankings");
    auto* lengthcorr = app.add_subcommand("lengthcorr", "Perplexity vs response length correlation");
    auto* cache = app.add_subcommand("cache", "Inspect or clear the response cache");
    cache->require_subcommand(1);
    auto* cache_stats = cache->add_subcommand("stats", "Entry count and size");
    auto* cache_clear = cache->add_subcommand("clear", "Remove all entries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const auto config = build_config(o);
        if (score->parsed()) pplqa::cmd_score(config, std::cerr);
        else if (compare->parsed()) pplqa::cmd_compare(config, std::cerr);
        else if (rank->parsed()) pplqa::cmd_rank(config, std::cerr);
        else if (baseline->parsed()) pplqa::cmd_baseline(config, std::cout);
        else if (lengthcorr->parsed()) pplqa::cmd_lengthcorr(config, std::cerr);
        else if (cache_stats->parsed()) pplqa::cmd_cache_stats(config, std::cout);
        else if (cache_clear->parsed()) pplqa::cmd_cache_clear(config, std::cout);
        return 0;
    } catch (const pplqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pplqa::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
