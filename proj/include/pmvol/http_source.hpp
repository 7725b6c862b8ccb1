#pragma once

// Optional HTTP adapters. Responses are rewritten into the flat-file CSV
// schema and passed through the same ingest functions as local files, so
// validation and rejection rules are identical for both sources.

#include <cstdlib>
#include <httplib.h>
#include <json.hpp>
// <resolv.h>, pulled in by httplib, defines _res as a macro, which collides
// with parameter names in other headers (Eigen among them).
#ifdef _res
#undef _res
#endif
#include <sstream>
#include <string>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/market_data.hpp"

namespace pmvol::http {

inline constexpr const char* kQuotesUrlEnv = "PMVOL_QUOTES_URL";
inline constexpr const char* kPricesUrlEnv = "PMVOL_PRICES_URL";
inline constexpr const char* kControlsUrlEnv = "PMVOL_CONTROLS_URL";
inline constexpr const char* kTokenEnv = "PMVOL_API_TOKEN";

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path?query
};

/// Splits an absolute http URL into the client base and request path.
[[nodiscard]] inline Endpoint parse_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("URL must be absolute: '" + url + "'");
  if (url.compare(0, scheme, "http") != 0)
    throw ValidationError("only http:// endpoints are supported (got '" + url.substr(0, scheme) + "')");
  const auto slash = url.find('/', scheme + 3);
  if (slash == scheme + 3) throw ValidationError("URL has no host: '" + url + "'");
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

struct SourceConfig {
  std::string quotes_url;
  std::string prices_url;
  std::string controls_url;
  std::string token;
  int timeout_seconds = 30;

  [[nodiscard]] static SourceConfig from_env() {
    auto get = [](const char* k) {
      const char* v = std::getenv(k);
      return v ? std::string(v) : std::string();
    };
    return {get(kQuotesUrlEnv), get(kPricesUrlEnv), get(kControlsUrlEnv), get(kTokenEnv)};
  }
};

/// GET `url` and return the body. Transport failures and non-2xx statuses are
/// I/O errors.
[[nodiscard]] inline std::string fetch(const std::string& url, const std::string& token, int timeout_seconds = 30) {
  const auto ep = parse_url(url);
  httplib::Client client(ep.base);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  httplib::Headers headers = {{"Accept", "application/json, text/csv"}};
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  auto res = client.Get(ep.path, headers);
  if (!res) throw IoError("GET " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw IoError("GET " + url + " returned HTTP " + std::to_string(res->status));
  return res->body;
}

namespace detail {

inline std::string cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return csv::format(v.get<double>());
  throw SchemaError("unsupported JSON value in record: " + v.dump());
}

}  // namespace detail

/// Rewrites a JSON body into CSV with the given columns. Accepts either an
/// array of records or an object holding the array under "records" or "data".
/// A body that already starts with the CSV header is returned unchanged.
[[nodiscard]] inline std::string normalize_to_csv(const std::string& body, const std::vector<std::string>& columns) {
  std::string header;
  for (std::size_t i = 0; i < columns.size(); ++i) header += (i ? "," : "") + columns[i];
  if (body.rfind(header, 0) == 0) return body;

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("response is neither CSV nor JSON: ") + e.what());
  }
  const nlohmann::json* records = &doc;
  if (doc.is_object()) {
    if (doc.contains("records")) records = &doc["records"];
    else if (doc.contains("data")) records = &doc["data"];
  }
  if (!records->is_array()) throw SchemaError("JSON response holds no record array");

  std::ostringstream out;
  out << header << '\n';
  for (const auto& rec : *records) {
    if (!rec.is_object()) throw SchemaError("JSON record is not an object");
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out << ',';
      auto it = rec.find(columns[i]);
      if (it != rec.end()) out << detail::cell(*it);
    }
    out << '\n';
  }
  return out.str();
}

[[nodiscard]] inline IngestResult<ContractQuote> fetch_contract_quotes(const std::string& url,
                                                                       const std::string& token = {}) {
  std::istringstream in(normalize_to_csv(fetch(url, token), kQuoteColumns));
  return ingest_contract_quotes(in, url);
}

[[nodiscard]] inline IngestResult<PriceBar> fetch_prices(const std::string& url, const std::string& token = {}) {
  std::istringstream in(normalize_to_csv(fetch(url, token), kPriceColumns));
  return ingest_prices(in, url);
}

[[nodiscard]] inline IngestResult<ControlRecord> fetch_controls(const std::string& url,
                                                                const std::string& token = {}) {
  std::istringstream in(normalize_to_csv(fetch(url, token), kControlColumns));
  return ingest_controls(in, url);
}

}  // namespace pmvol::http
