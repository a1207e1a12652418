#include "kgdiv/http.hpp"

#include <fmt/format.h>

#include <httplib.h>

namespace kgdiv::http {

Url parse_url(std::string_view url) {
    Url u;
    auto sep = url.find("://");
    if (sep == std::string_view::npos)
        throw ConfigError(fmt::format("url '{}' has no scheme", url));
    u.scheme = std::string(url.substr(0, sep));
    if (u.scheme != "http" && u.scheme != "https")
        throw ConfigError(fmt::format("url '{}': unsupported scheme '{}'", url, u.scheme));
    auto rest = url.substr(sep + 3);
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    u.path = slash == std::string_view::npos ? std::string("/") : std::string(rest.substr(slash));
    auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        u.host = std::string(authority.substr(0, colon));
        try {
            u.port = std::stoi(std::string(authority.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("url '{}': bad port", url));
        }
    } else {
        u.host = std::string(authority);
        u.port = u.scheme == "https" ? 443 : 80;
    }
    if (u.host.empty())
        throw ConfigError(fmt::format("url '{}' has no host", url));
    return u;
}

std::string percent_encode(std::string_view s) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size() * 3);
    for (unsigned char c : s) {
        if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
            c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

std::string percent_decode(std::string_view s) {
    auto hexval = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out.push_back(' ');
        } else if (s[i] == '%' && i + 2 < s.size() && hexval(s[i + 1]) >= 0 && hexval(s[i + 2]) >= 0) {
            out.push_back(static_cast<char>(hexval(s[i + 1]) * 16 + hexval(s[i + 2])));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string form_encode(const std::vector<std::pair<std::string, std::string>>& params) {
    std::string out;
    for (const auto& [k, v] : params) {
        if (!out.empty())
            out.push_back('&');
        out += percent_encode(k);
        out.push_back('=');
        out += percent_encode(v);
    }
    return out;
}

std::map<std::string, std::string> parse_form(std::string_view s) {
    std::map<std::string, std::string> out;
    while (!s.empty()) {
        auto amp = s.find('&');
        auto pair = s.substr(0, amp);
        auto eq = pair.find('=');
        if (eq == std::string_view::npos)
            out[percent_decode(pair)] = "";
        else
            out[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
        if (amp == std::string_view::npos)
            break;
        s.remove_prefix(amp + 1);
    }
    return out;
}

Response HttpTransport::send(const Request& request) {
    auto url = parse_url(request.url);
#ifndef KGDIV_HAVE_TLS
    if (url.scheme == "https")
        throw TransportError(fmt::format("{}: built without TLS support", request.url));
#endif
    httplib::Client client(fmt::format("{}://{}:{}", url.scheme, url.host, url.port));
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_follow_location(true);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers)
        headers.emplace(k, v);

    httplib::Result res = request.method == Method::get
                              ? client.Get(url.path, headers)
                              : client.Post(url.path, headers, request.body, request.content_type);
    if (!res)
        throw TransportError(fmt::format("{}: {}", request.url, httplib::to_string(res.error())));
    Response out;
    out.status = res->status;
    out.body = std::move(res->body);
    out.content_type = res->get_header_value("Content-Type");
    return out;
}

} // namespace kgdiv::http
