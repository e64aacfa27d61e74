#include "fedsem/remote_encoder.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace fedsem {

RemoteEncoderConfig remote_config_from_env() {
    RemoteEncoderConfig cfg;
    if (const char* url = std::getenv("FEDSEM_ENCODER_URL")) cfg.url = url;
    if (const char* token = std::getenv("FEDSEM_ENCODER_TOKEN")) cfg.token = token;
    if (const char* timeout = std::getenv("FEDSEM_ENCODER_TIMEOUT_S")) {
        cfg.timeout_seconds = std::stod(timeout);
        if (cfg.timeout_seconds <= 0.0) {
            throw std::invalid_argument("FEDSEM_ENCODER_TIMEOUT_S must be positive");
        }
    }
    return cfg;
}

RemoteEncoder::RemoteEncoder(RemoteEncoderConfig config, std::string encoder_id)
    : config_(std::move(config)), encoder_id_(std::move(encoder_id)) {
    if (!config_.enabled()) {
        throw std::invalid_argument("RemoteEncoder: no URL configured");
    }
    std::string rest = config_.url;
    if (rest.rfind("http://", 0) == 0) {
        rest = rest.substr(7);
    } else if (rest.rfind("https://", 0) == 0) {
        throw std::invalid_argument("RemoteEncoder: https is not supported by this build");
    }
    const auto slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    const auto colon = authority.find(':');
    if (colon == std::string::npos) {
        host_ = authority;
        port_ = 80;
    } else {
        host_ = authority.substr(0, colon);
        port_ = std::stoi(authority.substr(colon + 1));
    }
    if (host_.empty()) throw std::invalid_argument("RemoteEncoder: malformed URL " + config_.url);
}

EncodeResult RemoteEncoder::encode(const std::string& text, int k, std::uint64_t) const {
    if (text.empty()) throw std::invalid_argument("RemoteEncoder::encode: empty text");
    if (k < 1) throw std::invalid_argument("RemoteEncoder::encode: dimension must be >= 1");

    httplib::Client client(host_, port_);
    const auto seconds = static_cast<time_t>(config_.timeout_seconds);
    const auto micros = static_cast<time_t>(
        (config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (!config_.token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.token);
    }
    const nlohmann::json request = {{"model", encoder_id_}, {"text", text}, {"dim", k}};
    const auto res = client.Post(path_, headers, request.dump(), "application/json");
    if (!res) {
        throw std::runtime_error("RemoteEncoder: request to " + config_.url +
                                 " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw std::runtime_error("RemoteEncoder: " + config_.url + " returned HTTP " +
                                 std::to_string(res->status));
    }

    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("RemoteEncoder: malformed response JSON: ") +
                                 e.what());
    }
    if (!body.contains("embedding") || !body["embedding"].is_array()) {
        throw std::runtime_error("RemoteEncoder: response missing embedding array");
    }
    const auto& arr = body["embedding"];
    if (static_cast<int>(arr.size()) != k) {
        throw std::runtime_error("RemoteEncoder: expected " + std::to_string(k) +
                                 " embedding values, got " + std::to_string(arr.size()));
    }
    Vector v(k);
    for (int i = 0; i < k; ++i) {
        v[i] = arr[static_cast<std::size_t>(i)].get<double>();
        if (!std::isfinite(v[i])) {
            throw std::runtime_error("RemoteEncoder: non-finite embedding entry");
        }
    }
    const double latency =
        body.contains("latency_ms") ? body["latency_ms"].get<double>() : 0.0;
    return EncodeResult{SemanticEmbedding{std::move(v), encoder_id_}, latency};
}

}  // namespace fedsem
