#include "pplqa/remote_provider.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

constexpr std::size_t payload_excerpt_limit = 512;

std::string excerpt(std::string_view payload) {
    if (payload.size() <= payload_excerpt_limit) return std::string(payload);
    return fmt::format("{}... ({} bytes)", payload.substr(0, payload_excerpt_limit), payload.size());
}

std::string excerpt_json(const nlohmann::json& payload) { return excerpt(payload.dump()); }

[[noreturn]] void malformed(const nlohmann::json& response, std::string_view where, std::string_view problem) {
    throw ProtocolError(fmt::format("malformed response at {}: {}", where, problem), excerpt_json(response));
}

const nlohmann::json& first_choice(const nlohmann::json& response) {
    if (!response.is_object()) malformed(response, "$", "expected a JSON object");
    const auto it = response.find("choices");
    if (it == response.end()) malformed(response, "choices", "missing");
    if (!it->is_array() || it->empty()) malformed(response, "choices", "expected a non-empty array");
    const auto& choice = it->front();
    if (!choice.is_object()) malformed(response, "choices[0]", "expected an object");
    return choice;
}

struct SplitUrl {
    std::string scheme_host_port;
    std::string base_path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw UsageError(fmt::format("endpoint URL '{}' has no scheme", url));
    const auto path_begin = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.scheme_host_port = url.substr(0, path_begin);
    if (path_begin != std::string::npos) {
        out.base_path = url.substr(path_begin);
        while (out.base_path.ends_with('/')) out.base_path.pop_back();
    }
    return out;
}

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(const std::string& endpoint_url, std::chrono::duration<double> timeout)
        : url_(split_url(endpoint_url)), timeout_(timeout) {}

    HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers) override {
        // One client per call keeps concurrent requests independent.
        httplib::Client client(url_.scheme_host_port);
        if (!client.is_valid()) throw UsageError(fmt::format("unsupported endpoint '{}'", url_.scheme_host_port));
        const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_);
        client.set_connection_timeout(micros);
        client.set_read_timeout(micros);
        client.set_write_timeout(micros);
        httplib::Headers h;
        for (const auto& [name, value] : headers) h.emplace(name, value);
        const auto full_path = url_.base_path + path;
        auto result = client.Post(full_path, h, body, "application/json");
        if (!result) {
            throw TransportError(fmt::format("POST {}{}: {}", url_.scheme_host_port, full_path,
                                             httplib::to_string(result.error())));
        }
        return {result->status, result->body};
    }

private:
    SplitUrl url_;
    std::chrono::duration<double> timeout_;
};

bool is_transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

void ProviderConfig::validate() const {
    if (endpoint_url.empty()) throw UsageError("provider endpoint URL is empty");
    if (!(timeout.count() > 0.0)) throw UsageError("provider timeout must be > 0");
    if (max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");
    if (max_retries < 0) throw UsageError("max_retries must be >= 0");
}

std::unique_ptr<HttpTransport> make_http_transport(const std::string& endpoint_url,
                                                   std::chrono::duration<double> timeout) {
    return std::make_unique<HttplibTransport>(endpoint_url, timeout);
}

nlohmann::json scoring_request(const std::string& model, std::string_view text) {
    return {{"model", model}, {"prompt", text}, {"max_tokens", 0}, {"echo", true}, {"logprobs", 1}};
}

nlohmann::json generation_request(const std::string& model, const GenerationRequest& request, GenerationRoute route) {
    nlohmann::json body = {{"model", model}};
    if (route == GenerationRoute::completions) {
        body["prompt"] = request.prompt;
        body["echo"] = false;
    } else {
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
    }
    body["max_tokens"] = request.max_tokens;
    body["temperature"] = request.temperature;
    if (!request.stop.empty()) body["stop"] = request.stop;
    return body;
}

TokenLogProbs parse_echo_response(const nlohmann::json& response) {
    const auto& choice = first_choice(response);
    const auto lp_it = choice.find("logprobs");
    if (lp_it == choice.end() || !lp_it->is_object()) malformed(response, "choices[0].logprobs", "expected an object");
    const auto& logprobs = *lp_it;

    auto array_field = [&](std::string_view name) -> const nlohmann::json& {
        const auto where = fmt::format("choices[0].logprobs.{}", name);
        const auto it = logprobs.find(name);
        if (it == logprobs.end()) malformed(response, where, "missing");
        if (!it->is_array()) malformed(response, where, "expected an array");
        return *it;
    };
    const auto& tokens = array_field("tokens");
    const auto& values = array_field("token_logprobs");
    const auto& offsets = array_field("text_offset");
    if (tokens.size() != values.size() || tokens.size() != offsets.size()) {
        malformed(response, "choices[0].logprobs",
                  fmt::format("tokens/token_logprobs/text_offset lengths differ ({}/{}/{})", tokens.size(),
                              values.size(), offsets.size()));
    }

    TokenLogProbs out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!tokens[i].is_string()) malformed(response, fmt::format("choices[0].logprobs.tokens[{}]", i), "not a string");
        if (!offsets[i].is_number_integer() || offsets[i].get<long long>() < 0) {
            malformed(response, fmt::format("choices[0].logprobs.text_offset[{}]", i), "not a non-negative integer");
        }
        const auto& value = values[i];
        if (value.is_null()) {
            if (i == 0) continue;
            malformed(response, fmt::format("choices[0].logprobs.token_logprobs[{}]", i), "null after the first token");
        }
        if (!value.is_number()) {
            malformed(response, fmt::format("choices[0].logprobs.token_logprobs[{}]", i), "not a number");
        }
        double lp = 0.0;
        try {
            lp = clamp_logprob(value.get<double>(), i);
        } catch (const DataError& e) {
            throw DataError(fmt::format("choices[0].logprobs.token_logprobs[{}]: {}", i, e.what()));
        }
        const auto offset = offsets[i].get<std::size_t>();
        if (!out.offsets.empty() && offset <= out.offsets.back()) {
            malformed(response, fmt::format("choices[0].logprobs.text_offset[{}]", i),
                      fmt::format("{} is not greater than the previous offset {}", offset, out.offsets.back()));
        }
        out.tokens.push_back(tokens[i].get<std::string>());
        out.logprobs.push_back(lp);
        out.offsets.push_back(offset);
    }
    if (out.tokens.empty()) malformed(response, "choices[0].logprobs", "no scored tokens");
    return out;
}

TokenLogProbs parse_echo_body(std::string_view body) {
    nlohmann::json response;
    try {
        response = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(fmt::format("response is not valid JSON (byte {})", e.byte), excerpt(body));
    }
    return parse_echo_response(response);
}

std::string parse_generation_response(const nlohmann::json& response, GenerationRoute route) {
    const auto& choice = first_choice(response);
    const nlohmann::json* text = nullptr;
    std::string where;
    if (route == GenerationRoute::completions) {
        where = "choices[0].text";
        if (const auto it = choice.find("text"); it != choice.end()) text = &*it;
    } else {
        where = "choices[0].message.content";
        if (const auto m = choice.find("message"); m != choice.end() && m->is_object()) {
            if (const auto it = m->find("content"); it != m->end()) text = &*it;
        }
    }
    if (!text) malformed(response, where, "missing");
    if (!text->is_string()) malformed(response, where, "not a string");
    auto completion = text->get<std::string>();
    if (trim(completion).empty()) throw DataError("empty completion");
    return completion;
}

RemoteProvider::RemoteProvider(ProviderConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      in_flight_(std::max(config_.max_in_flight, 1)) {
    config_.validate();
    if (!transport_) throw UsageError("remote provider needs a transport");
}

RemoteProvider::RemoteProvider(ProviderConfig config)
    : RemoteProvider(config, make_http_transport(config.endpoint_url, config.timeout)) {}

std::string RemoteProvider::post_with_retry(std::string_view path, const nlohmann::json& body) {
    HttpHeaders headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
    }
    const auto payload = body.dump();
    thread_local std::mt19937_64 jitter_rng(std::random_device{}());
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::uniform_real_distribution<double> jitter(1.0, 1.5);
            const auto delay = config_.backoff_base * std::ldexp(1.0, attempt - 1) * jitter(jitter_rng);
            std::this_thread::sleep_for(delay);
        }
        HttpResponse response;
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            response = transport_->post(std::string(path), payload, headers);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        if (response.status >= 200 && response.status < 300) return std::move(response.body);
        if (is_transient_status(response.status)) {
            last_error = fmt::format("HTTP {} from {}", response.status, path);
            continue;
        }
        throw ProtocolError(fmt::format("HTTP {} from {}", response.status, path), excerpt(response.body));
    }
    throw TransportError(
        fmt::format("{} failed after {} attempt(s): {}", path, config_.max_retries + 1, last_error));
}

TokenLogProbs RemoteProvider::score_text(std::string_view text) {
    if (text.empty()) throw DataError("cannot score empty text");
    const auto body = post_with_retry(completions_path, scoring_request(config_.model_id, text));
    return parse_echo_body(body);
}

std::string RemoteProvider::generate(const GenerationRequest& request) {
    request.validate();
    const auto route = config_.route;
    const auto path = route == GenerationRoute::completions ? completions_path : chat_completions_path;
    const auto body = post_with_retry(path, generation_request(config_.model_id, request, route));
    nlohmann::json response;
    try {
        response = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(fmt::format("response is not valid JSON (byte {})", e.byte), excerpt(body));
    }
    return parse_generation_response(response, route);
}

std::string RemoteProvider::identity() const {
    return fmt::format("openai-compatible:{}", config_.endpoint_url);
}

}  // namespace pplqa
