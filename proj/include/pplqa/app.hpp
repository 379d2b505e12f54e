#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pplqa {

struct RunConfig {
    // provider
    std::string endpoint;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string route = "completions";
    int max_in_flight = 4;
    int max_retries = 3;
    double timeout_seconds = 60.0;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> oracle_corpus;
    int order = 2;
    double alpha = 0.1;

    // scoring
    std::vector<std::string> scorers{"pplqa"};
    std::string template_name = "none";
    std::optional<std::filesystem::path> templates_dir;
    std::string judge_template = "judge_4";
    bool judge = false;
    std::string separator = "\n";
    std::string tie_policy = "exclude";
    double error_threshold = 0.05;

    // data and output
    std::optional<std::filesystem::path> dataset;
    std::string dataset_format = "auto";
    std::optional<std::filesystem::path> leaderboard;
    std::size_t top = 0;
    std::filesystem::path out = ".";

    // statistics
    std::uint64_t seed = 0;
    std::size_t resamples = 10000;
    int list_length = 4;
    std::size_t reps = 100000;

    /// 0 means max_in_flight.
    std::size_t workers = 0;

    std::size_t effective_workers() const noexcept {
        return workers > 0 ? workers : static_cast<std::size_t>(max_in_flight);
    }
};

/// Reads a JSON config object; unknown keys and wrong types are usage errors.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& config);

/// Digest of the settings that determine results. Output location, worker
/// count, cache directory, credentials and timeouts are left out.
std::string config_hash(const RunConfig& config);

/// Each command writes its reports under config.out, progress to `log`, and
/// throws pplqa::Error on failure. Reports are only written once the whole
/// run has succeeded.
void cmd_score(const RunConfig& config, std::ostream& log);
void cmd_compare(const RunConfig& config, std::ostream& log);
void cmd_rank(const RunConfig& config, std::ostream& log);
void cmd_lengthcorr(const RunConfig& config, std::ostream& log);
/// Prints "L=<L> reps=<reps> seed=<seed> tau=<value>" to `out`.
double cmd_baseline(const RunConfig& config, std::ostream& out);
void cmd_cache_stats(const RunConfig& config, std::ostream& out);
void cmd_cache_clear(const RunConfig& config, std::ostream& out);

}  // namespace pplqa
