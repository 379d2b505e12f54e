#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pplqa/provider.hpp"

namespace pplqa {

enum class GenerationRoute { completions, chat };

struct ProviderConfig {
    std::string endpoint_url;
    std::string model_id;
    std::chrono::duration<double> timeout{60.0};
    int max_retries = 3;
    int max_in_flight = 4;
    std::optional<std::filesystem::path> cache_dir;
    /// Name of the environment variable holding the bearer token; empty or
    /// unset means no Authorization header.
    std::string api_key_env = "OPENAI_API_KEY";
    GenerationRoute route = GenerationRoute::completions;
    /// First retry delay; doubles per attempt, with up to 50% jitter.
    std::chrono::duration<double> backoff_base{0.5};

    /// Throws UsageError unless timeout > 0, max_in_flight >= 1,
    /// max_retries >= 0 and an endpoint is set.
    void validate() const;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POSTs JSON bodies to paths under one base URL. Throws TransportError when
/// no response arrives.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport(const std::string& endpoint_url,
                                                   std::chrono::duration<double> timeout);

inline constexpr std::string_view completions_path = "/v1/completions";
inline constexpr std::string_view chat_completions_path = "/v1/chat/completions";

nlohmann::json scoring_request(const std::string& model, std::string_view text);
nlohmann::json generation_request(const std::string& model, const GenerationRequest& request, GenerationRoute route);

/// Parses choices[0].logprobs of an echo response. A null first logprob is
/// dropped together with its token and offset. Throws ProtocolError naming
/// the JSON location of the first defect, DataError for positive logprobs
/// beyond the clamp tolerance.
TokenLogProbs parse_echo_response(const nlohmann::json& response);
TokenLogProbs parse_echo_body(std::string_view body);

/// Extracts the completion text; throws ProtocolError on a malformed body
/// and DataError on an empty completion.
std::string parse_generation_response(const nlohmann::json& response, GenerationRoute route);

/// Provider for an OpenAI-compatible completions server. Transport failures
/// (no response, HTTP 429 and 5xx) are retried with exponential backoff;
/// protocol errors are not.
class RemoteProvider final : public LogprobProvider {
public:
    RemoteProvider(ProviderConfig config, std::unique_ptr<HttpTransport> transport);
    explicit RemoteProvider(ProviderConfig config);

    TokenLogProbs score_text(std::string_view text) override;
    std::string generate(const GenerationRequest& request) override;
    std::string identity() const override;
    std::string model_id() const override { return config_.model_id; }

    const ProviderConfig& config() const noexcept { return config_; }

private:
    std::string post_with_retry(std::string_view path, const nlohmann::json& body);

    ProviderConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace pplqa
