#include "pplqa/app.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "pplqa/cache.hpp"
#include "pplqa/comparison.hpp"
#include "pplqa/datasets.hpp"
#include "pplqa/error.hpp"
#include "pplqa/ngram.hpp"
#include "pplqa/parallel.hpp"
#include "pplqa/ranking.hpp"
#include "pplqa/remote_provider.hpp"
#include "pplqa/report.hpp"
#include "pplqa/result_store.hpp"
#include "pplqa/scorers.hpp"
#include "pplqa/templates.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

namespace fs = std::filesystem;

template <class T>
T config_value(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(fmt::format("config key '{}' has the wrong type", key));
    }
}

std::optional<fs::path> optional_path(const nlohmann::json& j, const std::string& key) {
    if (j.is_null()) return std::nullopt;
    const auto text = config_value<std::string>(j, key);
    if (text.empty()) return std::nullopt;
    return fs::path(text);
}

std::vector<std::string> scorer_list(const nlohmann::json& j) {
    if (j.is_string()) return split(j.get<std::string>(), ',');
    return config_value<std::vector<std::string>>(j, "scorers");
}

nlohmann::json path_json(const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
}

GenerationRoute route_from_string(std::string_view text) {
    if (text == "completions") return GenerationRoute::completions;
    if (text == "chat") return GenerationRoute::chat;
    throw UsageError(fmt::format("unknown route '{}' (expected completions or chat)", text));
}

void require_existing(const std::optional<fs::path>& path, std::string_view what) {
    if (path && !fs::exists(*path)) throw UsageError(fmt::format("{} not found: {}", what, path->string()));
}

void validate(const RunConfig& c) {
    require_existing(c.dataset, "dataset");
    require_existing(c.oracle_corpus, "oracle corpus");
    require_existing(c.templates_dir, "templates directory");
    require_existing(c.leaderboard, "leaderboard table");
    if (c.scorers.empty()) throw UsageError("no scorers selected");
    for (const auto& s : c.scorers) scorer_kind_from_string(s);
    tie_policy_from_string(c.tie_policy);
    route_from_string(c.route);
    if (c.order < 1) throw UsageError("order must be >= 1");
    if (!(c.alpha >= 0.0)) throw UsageError("alpha must be >= 0");
    if (!(c.error_threshold >= 0.0 && c.error_threshold <= 1.0)) {
        throw UsageError("error threshold must be in [0, 1]");
    }
    if (c.max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");
    if (c.dataset_format != "auto" && c.dataset_format != "mtbench" && c.dataset_format != "domain") {
        throw UsageError(fmt::format("unknown dataset format '{}' (expected auto, mtbench or domain)", c.dataset_format));
    }
}

struct ProviderHandle {
    std::shared_ptr<LogprobProvider> provider;
    std::shared_ptr<CachedProvider> cache;
};

ProviderHandle make_provider(const RunConfig& c) {
    ProviderHandle h;
    if (c.oracle_corpus) {
        std::ifstream in(*c.oracle_corpus, std::ios::binary);
        if (!in) throw UsageError(fmt::format("cannot read oracle corpus {}", c.oracle_corpus->string()));
        std::stringstream corpus;
        corpus << in.rdbuf();
        auto model = std::make_shared<const NgramModel>(NgramModel::train(corpus.str(), c.order, c.alpha));
        h.provider = std::make_shared<NgramProvider>(model, c.model.empty() ? "ngram-oracle" : c.model, c.seed);
    } else if (!c.endpoint.empty()) {
        if (c.model.empty()) throw UsageError("--model is required with --endpoint");
        ProviderConfig pc;
        pc.endpoint_url = c.endpoint;
        pc.model_id = c.model;
        pc.timeout = std::chrono::duration<double>(c.timeout_seconds);
        pc.max_retries = c.max_retries;
        pc.max_in_flight = c.max_in_flight;
        pc.cache_dir = c.cache_dir;
        pc.api_key_env = c.api_key_env;
        pc.route = route_from_string(c.route);
        pc.validate();
        h.provider = std::make_shared<RemoteProvider>(pc);
    } else {
        throw UsageError("no provider configured: pass --oracle-corpus or --endpoint");
    }
    if (c.cache_dir) {
        h.cache = cached(h.provider, *c.cache_dir);
        h.provider = h.cache;
    }
    return h;
}

void report_cache(const ProviderHandle& h, std::ostream& log) {
    if (!h.cache) return;
    const auto s = h.cache->stats();
    const auto lookups = s.hits + s.misses;
    log << fmt::format("cache: {} hits, {} misses ({:.1f}% hit rate), {} writes\n", s.hits, s.misses,
                       lookups == 0 ? 0.0 : 100.0 * static_cast<double>(s.hits) / static_cast<double>(lookups),
                       s.writes);
}

TemplateRegistry make_registry(const RunConfig& c) {
    auto registry = TemplateRegistry::with_builtins();
    if (c.templates_dir) registry.load_directory(*c.templates_dir);
    return registry;
}

const PromptTemplate& geval_template(const RunConfig& c, const TemplateRegistry& registry) {
    if (c.template_name == "none") return registry.get("geval_coherence");
    const auto& named = registry.get(c.template_name);
    if (named.kind == TemplateKind::form) return named;
    const auto aspect = named.aspect == Aspect::none ? Aspect::coherence : named.aspect;
    return registry.get(fmt::format("geval_{}", to_string(aspect)));
}

/// Scorer variants in report order. With `both`, template-capable scorers
/// run with the named template first and then without one.
std::vector<ScorerSpec> scorer_variants(const RunConfig& c, const TemplateRegistry& registry, bool both) {
    std::vector<ScorerSpec> specs;
    for (const auto& name : c.scorers) {
        const auto kind = scorer_kind_from_string(name);
        if (kind == ScorerKind::geval) {
            specs.push_back({kind, geval_template(c, registry)});
            continue;
        }
        if (c.template_name != "none") {
            const auto& tmpl = registry.get(c.template_name);
            if (tmpl.kind != TemplateKind::qa) {
                throw UsageError(fmt::format("template '{}' is a {} template; {} needs a qa template", tmpl.name,
                                             to_string(tmpl.kind), name));
            }
            specs.push_back({kind, tmpl});
            if (both) specs.push_back({kind, std::nullopt});
        } else {
            specs.push_back({kind, std::nullopt});
        }
    }
    return specs;
}

ScorerOptions scorer_options(const RunConfig& c) {
    ScorerOptions o;
    o.separator = c.separator;
    return o;
}

bool use_mtbench(const RunConfig& c) {
    if (c.dataset_format == "mtbench") return true;
    if (c.dataset_format == "domain") return false;
    return looks_like_mtbench(*c.dataset);
}

const fs::path& require_dataset(const RunConfig& c) {
    if (!c.dataset) throw UsageError("--dataset is required");
    return *c.dataset;
}

std::vector<PairwiseExample> load_pairs(const RunConfig& c, std::ostream& log, std::size_t& ties_dropped) {
    const auto& path = require_dataset(c);
    if (use_mtbench(c)) {
        auto loaded = load_mtbench(path, c.separator);
        ties_dropped = loaded.ties_dropped;
        log << fmt::format("loaded {} pairs from {} ({} ties dropped)\n", loaded.examples.size(), path.string(),
                           loaded.ties_dropped);
        return std::move(loaded.examples);
    }
    auto pairs = pairwise_from_items(load_domain_questions(path));
    log << fmt::format("loaded {} labelled pairs from {}\n", pairs.size(), path.string());
    return pairs;
}

std::vector<QAItem> load_items(const RunConfig& c, std::ostream& log) {
    const auto& path = require_dataset(c);
    std::vector<QAItem> items;
    if (use_mtbench(c)) {
        const auto loaded = load_mtbench(path, c.separator);
        items = items_from_pairwise(loaded.examples);
    } else {
        items = load_domain_questions(path);
    }
    log << fmt::format("loaded {} questions from {}\n", items.size(), path.string());
    if (items.empty()) throw DataError("no examples");
    return items;
}

ReportHeader make_header(const RunConfig& c, std::string command, const LogprobProvider* provider) {
    ReportHeader h{std::move(command), config_hash(c), c.seed, {}};
    if (provider) h.notes.emplace_back("provider", provider->identity());
    if (c.dataset) h.notes.emplace_back("dataset", c.dataset->filename().string());
    return h;
}

std::string run_id(const RunConfig& c, std::string_view command) {
    return fmt::format("{}-{}-{}", command, config_hash(c).substr(0, 12), c.seed);
}

void check_error_rate(std::size_t failures, std::size_t total, double threshold, std::string_view what,
                      const std::vector<std::string>& messages) {
    if (total == 0 || failures == 0) return;
    if (static_cast<double>(failures) / static_cast<double>(total) > threshold) {
        throw ErrorRateExceeded(fmt::format("{} of {} {} failed (threshold {:.0f}%); first: {}", failures, total, what,
                                            100.0 * threshold, messages.empty() ? "" : messages.front()));
    }
}

template <class Fn>
void catch_item_error(std::string& failure, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::usage) throw;
        failure = e.what();
    }
}

struct RankedEvaluators {
    std::vector<EvaluatorTable> tables;
    std::vector<std::string> failures;
    std::size_t judge_failures = 0;
    std::size_t dropped_questions = 0;
};

RankedEvaluators rank_items(const RunConfig& c, std::span<const QAItem> items, LogprobProvider& provider,
                            const TemplateRegistry& registry, std::ostream& log) {
    const auto specs = scorer_variants(c, registry, false);
    const auto options = scorer_options(c);
    const auto workers = c.effective_workers();
    const PromptTemplate* judge = nullptr;
    if (c.judge) {
        judge = &registry.get(c.judge_template);
        if (judge->kind != TemplateKind::judge) {
            throw UsageError(fmt::format("template '{}' is not a judge template", judge->name));
        }
        for (const auto& item : items) {
            if (item.responses.size() > judge_capacity(*judge)) {
                throw UsageError(fmt::format("judge template '{}' holds {} answers; question '{}' has {}",
                                             judge->name, judge_capacity(*judge), item.question_id,
                                             item.responses.size()));
            }
        }
    }

    const std::size_t evaluators = specs.size() + (judge ? 1 : 0);
    std::vector<std::vector<std::optional<RankVector>>> ranks(evaluators,
                                                               std::vector<std::optional<RankVector>>(items.size()));
    std::vector<std::vector<std::string>> failure(evaluators, std::vector<std::string>(items.size()));

    for (std::size_t s = 0; s < specs.size(); ++s) {
        log << fmt::format("ranking with {} ({} questions)\n", specs[s].label(), items.size());
        parallel_for(items.size(), workers, [&](std::size_t i) {
            const auto& item = items[i];
            catch_item_error(failure[s][i], [&] {
                std::vector<double> values;
                for (const auto& [model, text] : item.responses) {
                    values.push_back(
                        run_scorer(specs[s], item.question_id, model, item.question, text, provider, options).value);
                }
                ranks[s][i] = scores_to_ranks(values, direction_of(specs[s].kind), item.question_id, specs[s].label());
            });
        });
    }
    if (judge) {
        const auto j = specs.size();
        log << fmt::format("ranking with judge template {} ({} questions)\n", judge->name, items.size());
        parallel_for(items.size(), workers, [&](std::size_t i) {
            const auto& item = items[i];
            catch_item_error(failure[j][i], [&] {
                std::vector<std::string> answers;
                for (const auto& r : item.responses) answers.push_back(r.second);
                auto rv = judge_rank(item.question, answers, provider, *judge, options);
                rv.question_id = item.question_id;
                rv.evaluator = "judge";
                ranks[j][i] = std::move(rv);
            });
        });
    }

    RankedEvaluators out;
    for (std::size_t e = 0; e < evaluators; ++e) {
        out.tables.push_back({e < specs.size() ? specs[e].label() : std::string("judge"), {}});
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        bool complete = true;
        for (std::size_t e = 0; e < evaluators; ++e) {
            if (ranks[e][i]) continue;
            complete = false;
            if (judge && e == specs.size()) ++out.judge_failures;
            out.failures.push_back(
                fmt::format("{} on question '{}': {}", out.tables[e].evaluator, items[i].question_id, failure[e][i]));
        }
        if (!complete) {
            ++out.dropped_questions;
            continue;
        }
        for (std::size_t e = 0; e < evaluators; ++e) out.tables[e].ranks.push_back(std::move(*ranks[e][i]));
    }
    return out;
}

std::string rank_lines(const RunConfig& c, std::span<const EvaluatorTable> tables) {
    const auto hash = config_hash(c);
    std::string out;
    for (const auto& table : tables) {
        for (const auto& rv : table.ranks) {
            auto j = to_json(rv);
            j["evaluator"] = table.evaluator;
            j["config_hash"] = hash;
            j["seed"] = c.seed;
            out += j.dump() + "\n";
        }
    }
    return out;
}

std::vector<EvaluatorTable> restrict_to(std::span<const EvaluatorTable> tables, const std::set<std::string>& ids) {
    std::vector<EvaluatorTable> out;
    for (const auto& t : tables) {
        EvaluatorTable copy{t.evaluator, {}};
        for (const auto& rv : t.ranks) {
            if (ids.contains(rv.question_id)) copy.ranks.push_back(rv);
        }
        out.push_back(std::move(copy));
    }
    return out;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "endpoint") c.endpoint = config_value<std::string>(v, key);
        else if (key == "model") c.model = config_value<std::string>(v, key);
        else if (key == "api_key_env") c.api_key_env = config_value<std::string>(v, key);
        else if (key == "route") c.route = config_value<std::string>(v, key);
        else if (key == "max_in_flight") c.max_in_flight = config_value<int>(v, key);
        else if (key == "max_retries") c.max_retries = config_value<int>(v, key);
        else if (key == "timeout") c.timeout_seconds = config_value<double>(v, key);
        else if (key == "cache_dir") c.cache_dir = optional_path(v, key);
        else if (key == "oracle_corpus") c.oracle_corpus = optional_path(v, key);
        else if (key == "order") c.order = config_value<int>(v, key);
        else if (key == "alpha") c.alpha = config_value<double>(v, key);
        else if (key == "scorers") c.scorers = scorer_list(v);
        else if (key == "template") c.template_name = config_value<std::string>(v, key);
        else if (key == "templates_dir") c.templates_dir = optional_path(v, key);
        else if (key == "judge_template") c.judge_template = config_value<std::string>(v, key);
        else if (key == "judge") c.judge = config_value<bool>(v, key);
        else if (key == "separator") c.separator = config_value<std::string>(v, key);
        else if (key == "tie_policy") c.tie_policy = config_value<std::string>(v, key);
        else if (key == "error_threshold") c.error_threshold = config_value<double>(v, key);
        else if (key == "dataset") c.dataset = optional_path(v, key);
        else if (key == "dataset_format") c.dataset_format = config_value<std::string>(v, key);
        else if (key == "leaderboard") c.leaderboard = optional_path(v, key);
        else if (key == "top") c.top = config_value<std::size_t>(v, key);
        else if (key == "out") c.out = config_value<std::string>(v, key);
        else if (key == "seed") c.seed = config_value<std::uint64_t>(v, key);
        else if (key == "resamples") c.resamples = config_value<std::size_t>(v, key);
        else if (key == "L") c.list_length = config_value<int>(v, key);
        else if (key == "reps") c.reps = config_value<std::size_t>(v, key);
        else if (key == "workers") c.workers = config_value<std::size_t>(v, key);
        else throw UsageError(fmt::format("unknown config key '{}'", key));
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(fmt::format("config file not found: {}", path.string()));
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(fmt::format("{}: invalid JSON at byte {}", path.string(), e.byte));
    }
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    return {{"endpoint", c.endpoint},
            {"model", c.model},
            {"api_key_env", c.api_key_env},
            {"route", c.route},
            {"max_in_flight", c.max_in_flight},
            {"max_retries", c.max_retries},
            {"timeout", c.timeout_seconds},
            {"cache_dir", path_json(c.cache_dir)},
            {"oracle_corpus", path_json(c.oracle_corpus)},
            {"order", c.order},
            {"alpha", c.alpha},
            {"scorers", c.scorers},
            {"template", c.template_name},
            {"templates_dir", path_json(c.templates_dir)},
            {"judge_template", c.judge_template},
            {"judge", c.judge},
            {"separator", c.separator},
            {"tie_policy", c.tie_policy},
            {"error_threshold", c.error_threshold},
            {"dataset", path_json(c.dataset)},
            {"dataset_format", c.dataset_format},
            {"leaderboard", path_json(c.leaderboard)},
            {"top", c.top},
            {"out", c.out.string()},
            {"seed", c.seed},
            {"resamples", c.resamples},
            {"L", c.list_length},
            {"reps", c.reps},
            {"workers", c.workers}};
}

std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    for (const auto* key : {"out", "workers", "cache_dir", "api_key_env", "timeout", "max_retries", "max_in_flight"}) {
        j.erase(key);
    }
    // Only file contents matter for results, not where the inputs live.
    for (const auto* key : {"dataset", "oracle_corpus", "templates_dir", "leaderboard"}) {
        if (j[key].is_string()) j[key] = fs::path(j[key].get<std::string>()).filename().string();
    }
    return sha256_hex(j.dump()).substr(0, 16);
}

void cmd_score(const RunConfig& c, std::ostream& log) {
    validate(c);
    const auto items = load_items(c, log);
    const auto registry = make_registry(c);
    const auto specs = scorer_variants(c, registry, false);
    const auto handle = make_provider(c);
    const auto options = scorer_options(c);

    struct Task {
        std::size_t spec;
        std::size_t item;
        std::size_t response;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            for (std::size_t r = 0; r < items[i].responses.size(); ++r) tasks.push_back({s, i, r});
        }
    }
    log << fmt::format("scoring {} responses with {} scorer(s)\n", tasks.size(), specs.size());
    std::vector<std::optional<ScoreRecord>> results(tasks.size());
    std::vector<std::string> failure(tasks.size());
    parallel_for(tasks.size(), c.effective_workers(), [&](std::size_t t) {
        const auto& task = tasks[t];
        const auto& item = items[task.item];
        const auto& [model, text] = item.responses[task.response];
        catch_item_error(failure[t], [&] {
            results[t] = run_scorer(specs[task.spec], item.question_id, model, item.question, text, *handle.provider,
                                    options);
        });
    });

    std::vector<ScoreRecord> records;
    std::vector<std::string> failures;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (results[t]) {
            records.push_back(std::move(*results[t]));
        } else {
            const auto& item = items[tasks[t].item];
            failures.push_back(fmt::format("{} on '{}' / '{}': {}", specs[tasks[t].spec].label(), item.question_id,
                                           item.responses[tasks[t].response].first, failure[t]));
        }
    }
    report_cache(handle, log);
    check_error_rate(failures.size(), tasks.size(), c.error_threshold, "responses", failures);
    for (const auto& f : failures) log << "skipped: " << f << "\n";

    auto header = make_header(c, "score", handle.provider.get());
    header.notes.emplace_back("failures", std::to_string(failures.size()));
    const auto csv = scores_csv(header, records);
    fs::create_directories(c.out);
    write_file_atomic(c.out / "scores.csv", csv);
    ResultStore store(c.out / "results.jsonl", run_id(c, "score"));
    store.append("run", {{"command", "score"}, {"config_hash", config_hash(c)}, {"seed", c.seed}});
    for (const auto& r : records) store.append("score", to_json(r));
    log << fmt::format("wrote {} scores to {}\n", records.size(), (c.out / "scores.csv").string());
}

void cmd_compare(const RunConfig& c, std::ostream& log) {
    validate(c);
    std::size_t ties_dropped = 0;
    const auto pairs = load_pairs(c, log, ties_dropped);
    if (pairs.empty()) throw DataError("no examples");
    const auto registry = make_registry(c);
    const auto specs = scorer_variants(c, registry, true);
    const auto handle = make_provider(c);

    PairwiseOptions options;
    options.tie_policy = tie_policy_from_string(c.tie_policy);
    options.seed = c.seed;
    options.group_by_domain = true;
    options.workers = c.effective_workers();
    options.max_error_rate = c.error_threshold;
    options.scorer = scorer_options(c);

    std::vector<PairwiseRun> runs;
    for (const auto& spec : specs) {
        log << fmt::format("comparing {} pairs with {}\n", pairs.size(), spec.label());
        runs.push_back(evaluate_pairwise(pairs, spec, *handle.provider, options, nullptr));
        for (const auto& f : runs.back().failures) log << "skipped: " << f << "\n";
    }
    report_cache(handle, log);

    // Group-major order so each table section lists every scorer.
    std::vector<MetricsReport> reports;
    for (std::size_t g = 0; g < runs.front().reports.size(); ++g) {
        for (const auto& run : runs) reports.push_back(run.reports[g]);
    }
    auto header = make_header(c, "compare", handle.provider.get());
    header.notes.emplace_back("pairs", std::to_string(pairs.size()));
    header.notes.emplace_back("ties_dropped", std::to_string(ties_dropped));
    header.notes.emplace_back("tie_policy", std::string(to_string(options.tie_policy)));
    const auto csv = metrics_csv(header, reports);
    const auto md = metrics_markdown(header, reports);
    fs::create_directories(c.out);
    write_file_atomic(c.out / "compare.csv", csv);
    write_file_atomic(c.out / "compare.md", md);
    ResultStore store(c.out / "results.jsonl", run_id(c, "compare"));
    store.append("run", {{"command", "compare"}, {"config_hash", config_hash(c)}, {"seed", c.seed}});
    for (const auto& run : runs) {
        for (const auto& r : run.records) store.append("score", to_json(r));
    }
    for (const auto& r : reports) store.append("metrics", to_json(r));
    log << fmt::format("wrote {} and {}\n", (c.out / "compare.csv").string(), (c.out / "compare.md").string());
}

void cmd_rank(const RunConfig& c, std::ostream& log) {
    validate(c);
    const PermutationOptions perm{c.resamples, c.seed, c.effective_workers()};
    std::vector<EvaluatorTable> tables;
    std::vector<TauGroup> groups;
    std::unique_ptr<ProviderHandle> handle;
    ReportHeader header;

    if (c.leaderboard) {
        tables = import_leaderboard_csv(*c.leaderboard, c.top);
        log << fmt::format("leaderboard {}: {} score columns\n", c.leaderboard->string(), tables.size());
        groups.push_back({"leaderboard", evaluator_consistency_matrix(tables, perm)});
        header = make_header(c, "rank", nullptr);
        header.notes.emplace_back("leaderboard", c.leaderboard->filename().string());
    } else {
        const auto items = load_items(c, log);
        const auto registry = make_registry(c);
        handle = std::make_unique<ProviderHandle>(make_provider(c));
        auto ranked = rank_items(c, items, *handle->provider, registry, log);
        report_cache(*handle, log);
        check_error_rate(ranked.dropped_questions, items.size(), c.error_threshold, "questions", ranked.failures);
        for (const auto& f : ranked.failures) log << "skipped: " << f << "\n";
        if (c.judge) log << fmt::format("judge parse failures: {}\n", ranked.judge_failures);

        std::set<std::string> kept;
        for (const auto& rv : ranked.tables.front().ranks) kept.insert(rv.question_id);
        const bool all_human = std::all_of(items.begin(), items.end(), [](const QAItem& i) { return i.human_ranks; });
        if (all_human) {
            EvaluatorTable human{"human", {}};
            for (const auto& item : items) {
                if (!kept.contains(item.question_id)) continue;
                auto rv = *item.human_ranks;
                rv.evaluator = "human";
                human.ranks.push_back(std::move(rv));
            }
            ranked.tables.push_back(std::move(human));
        } else if (std::any_of(items.begin(), items.end(), [](const QAItem& i) { return i.human_ranks; })) {
            log << "some questions lack human_ranks; human evaluator left out\n";
        }
        tables = std::move(ranked.tables);
        if (tables.size() < 2) {
            throw UsageError(fmt::format("rank needs at least 2 evaluators, got {} (add scorers, --judge or human ranks)",
                                         tables.size()));
        }

        std::vector<std::string> group_names{"overall"};
        const auto domains = domains_of(items);
        if (domains.size() > 1 || (domains.size() == 1 && !domains.front().empty())) {
            group_names.insert(group_names.end(), domains.begin(), domains.end());
        }
        for (const auto& name : group_names) {
            std::set<std::string> ids;
            for (const auto& item : items) {
                if ((name == "overall" || item.domain == name) && kept.contains(item.question_id)) {
                    ids.insert(item.question_id);
                }
            }
            if (ids.empty()) {
                groups.push_back({name, {}});
                continue;
            }
            const auto subset = restrict_to(tables, ids);
            groups.push_back({name, evaluator_consistency_matrix(subset, perm)});
        }
        header = make_header(c, "rank", handle->provider.get());
        header.notes.emplace_back("questions", std::to_string(kept.size()));
        header.notes.emplace_back("dropped", std::to_string(ranked.dropped_questions));
        if (c.judge) header.notes.emplace_back("judge_failures", std::to_string(ranked.judge_failures));
    }
    header.notes.emplace_back("resamples", std::to_string(c.resamples));

    const auto lines = rank_lines(c, tables);
    const auto csv = tau_csv(header, groups);
    const auto md = tau_markdown(header, groups);
    fs::create_directories(c.out);
    write_file_atomic(c.out / "ranks.jsonl", lines);
    write_file_atomic(c.out / "rank_tau.csv", csv);
    write_file_atomic(c.out / "rank_tau.md", md);
    ResultStore store(c.out / "results.jsonl", run_id(c, "rank"));
    store.append("run", {{"command", "rank"}, {"config_hash", config_hash(c)}, {"seed", c.seed}});
    for (const auto& g : groups) {
        for (const auto& cell : g.cells) {
            store.append("tau", {{"group", g.group},
                                 {"first", cell.first},
                                 {"second", cell.second},
                                 {"mean_tau", cell.summary.mean_tau},
                                 {"p_value", cell.summary.p_value},
                                 {"n_questions", cell.summary.n_questions}});
        }
    }
    log << fmt::format("wrote {} and {}\n", (c.out / "rank_tau.csv").string(), (c.out / "rank_tau.md").string());
}

void cmd_lengthcorr(const RunConfig& c, std::ostream& log) {
    validate(c);
    const auto items = load_items(c, log);
    const auto handle = make_provider(c);
    LengthCorrelationOptions options;
    options.separator = c.separator;
    options.per_domain = true;
    options.workers = c.effective_workers();
    const auto rows = ppl_length_correlation(items, *handle.provider, options);
    report_cache(handle, log);

    const auto header = make_header(c, "lengthcorr", handle.provider.get());
    const auto csv = lengthcorr_csv(header, rows);
    const auto md = lengthcorr_markdown(header, rows);
    fs::create_directories(c.out);
    write_file_atomic(c.out / "lengthcorr.csv", csv);
    write_file_atomic(c.out / "lengthcorr.md", md);
    log << fmt::format("wrote {} and {}\n", (c.out / "lengthcorr.csv").string(), (c.out / "lengthcorr.md").string());
}

double cmd_baseline(const RunConfig& c, std::ostream& out) {
    const double tau = mc_tau_baseline(c.list_length, c.reps, c.seed, c.effective_workers());
    out << fmt::format("L={} reps={} seed={} tau={:.6f}\n", c.list_length, c.reps, c.seed, tau);
    return tau;
}

void cmd_cache_stats(const RunConfig& c, std::ostream& out) {
    if (!c.cache_dir) throw UsageError("--cache-dir is required");
    const auto s = cache_summary(*c.cache_dir);
    out << fmt::format("entries={} bytes={}\n", s.entries, s.bytes);
}

void cmd_cache_clear(const RunConfig& c, std::ostream& out) {
    if (!c.cache_dir) throw UsageError("--cache-dir is required");
    out << fmt::format("removed={}\n", cache_clear(*c.cache_dir));
}

}  // namespace pplqa
