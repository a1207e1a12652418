#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgdiv/errors.hpp"

namespace kgdiv::http {

enum class Method { get, post };

struct Request {
    Method method = Method::get;
    std::string url; // full url, query string included for GET
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string content_type;
    std::chrono::milliseconds timeout{30000};
};

struct Response {
    int status = 0;
    std::string body;
    std::string content_type;
};

// Sends one request. Implementations throw TransportError when no response
// arrives at all; an HTTP error status is a normal Response.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Response send(const Request& request) = 0;
};

// Real network transport backed by cpp-httplib.
class HttpTransport final : public Transport {
public:
    Response send(const Request& request) override;
};

struct Url {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 0;
    std::string path; // includes any query string
};

Url parse_url(std::string_view url); // throws ConfigError

std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);
std::string form_encode(const std::vector<std::pair<std::string, std::string>>& params);
// Parses "a=1&b=2" (query string or form body).
std::map<std::string, std::string> parse_form(std::string_view s);

} // namespace kgdiv::http
