#pragma once

#include <string>

#include "fedsem/encoding.hpp"

namespace fedsem {

// Remote embedding backend over HTTP. Disabled unless a URL is configured;
// any failure is surfaced as an error and never silently replaced by the
// stub encoders.
struct RemoteEncoderConfig {
    std::string url;              // e.g. http://host:port/encode
    std::string token;            // bearer token, empty means unauthenticated
    double timeout_seconds = 30.0;

    bool enabled() const { return !url.empty(); }
};

// Reads FEDSEM_ENCODER_URL and FEDSEM_ENCODER_TOKEN.
RemoteEncoderConfig remote_config_from_env();

// POSTs {"model": <encoder_id>, "text": <text>, "dim": k} and expects
// {"embedding": [k floats], "latency_ms": float} back.
class RemoteEncoder final : public Encoder {
public:
    RemoteEncoder(RemoteEncoderConfig config, std::string encoder_id);

    const std::string& id() const override { return encoder_id_; }
    EncodeResult encode(const std::string& text, int k, std::uint64_t seed) const override;

private:
    RemoteEncoderConfig config_;
    std::string encoder_id_;
    std::string host_;
    int port_ = 80;
    std::string path_;
};

}  // namespace fedsem
