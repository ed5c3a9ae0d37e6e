#pragma once

// Newline-delimited JSON protocol between the harness and an external SUT.
//
//   request:  {"id":"<string>","image_path":"<string>"}
//   response: {"id":"<string>","sa":<number>}
//         or  {"id":"<string>","error":"<string>"}
//
// One object per line, responses in request order, ids echoed verbatim.
// Images travel by path into a shared scratch directory.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace smart {

struct ProtocolRequest {
  std::string id;
  std::string image_path;
};

struct ProtocolResponse {
  std::string id;
  std::optional<double> sa;
  std::optional<std::string> error;
};

std::string encode_request(const ProtocolRequest& r);
std::string encode_response(const ProtocolResponse& r);

/// Throw ProtocolError on malformed lines.
ProtocolRequest decode_request(std::string_view line);
ProtocolResponse decode_response(std::string_view line);

/// Given an image path, returns the steering angle or throws.
using PathPredictor = std::function<double(const std::string& image_path)>;

/// Serves the protocol until EOF on `in`. Malformed requests and predictor
/// failures produce error lines; the loop keeps going. Flushes every line.
/// Returns the number of requests answered.
std::size_t serve_protocol(std::istream& in, std::ostream& out, const PathPredictor& predict);

}  // namespace smart
