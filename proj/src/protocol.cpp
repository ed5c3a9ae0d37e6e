#include "smart/protocol.hpp"

#include "smart/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace smart {

using ordered_json = nlohmann::ordered_json;

std::string encode_request(const ProtocolRequest& r) {
  ordered_json j;
  j["id"] = r.id;
  j["image_path"] = r.image_path;
  return j.dump();
}

std::string encode_response(const ProtocolResponse& r) {
  ordered_json j;
  j["id"] = r.id;
  if (r.error) {
    j["error"] = *r.error;
  } else {
    j["sa"] = r.sa.value_or(0.0);
  }
  return j.dump();
}

namespace {

nlohmann::json parse_object(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not a JSON object");
  return j;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ProtocolError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

ProtocolRequest decode_request(std::string_view line) {
  const auto j = parse_object(line);
  return {string_field(j, "id"), string_field(j, "image_path")};
}

ProtocolResponse decode_response(std::string_view line) {
  const auto j = parse_object(line);
  ProtocolResponse r;
  r.id = string_field(j, "id");
  if (auto e = j.find("error"); e != j.end()) {
    r.error = e->is_string() ? e->get<std::string>() : e->dump();
    return r;
  }
  auto sa = j.find("sa");
  if (sa == j.end() || !sa->is_number()) throw ProtocolError("response lacks numeric 'sa'");
  r.sa = sa->get<double>();
  if (!std::isfinite(*r.sa)) throw ProtocolError("response 'sa' is not finite");
  return r;
}

std::size_t serve_protocol(std::istream& in, std::ostream& out, const PathPredictor& predict) {
  std::size_t answered = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ProtocolResponse resp;
    try {
      const auto req = decode_request(line);
      resp.id = req.id;
      const double sa = predict(req.image_path);
      if (!std::isfinite(sa)) throw SutError("predictor returned a non-finite angle");
      resp.sa = std::clamp(sa, -1.0, 1.0);
    } catch (const std::exception& e) {
      // Echo whatever id survives parsing so the client can still correlate.
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.is_object() && j.contains("id") && j["id"].is_string()) resp.id = j["id"].get<std::string>();
      } catch (...) {
      }
      resp.sa.reset();
      resp.error = e.what();
    }
    out << encode_response(resp) << '\n' << std::flush;
    ++answered;
  }
  return answered;
}

}  // namespace smart
