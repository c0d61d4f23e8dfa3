#include "http_client.hpp"

#include <chrono>
#include <cmath>

#include <httplib.h>

#include "promptprobe/error.hpp"

namespace promptprobe::detail {

std::string http_post(const std::string& endpoint, const std::string& path,
                      std::string_view body, const std::string& content_type,
                      double timeout_seconds) {
  httplib::Client client(endpoint);
  if (!client.is_valid()) {
    throw Error(ErrorKind::kTransport, "invalid endpoint '" + endpoint + "'");
  }
  const auto timeout = std::chrono::milliseconds(
      static_cast<long long>(std::llround(timeout_seconds * 1000.0)));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(path, body.data(), body.size(), content_type);
  if (!res) {
    throw Error(ErrorKind::kTransport, "POST " + endpoint + path + " failed: " +
                                           httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::kTransport, "POST " + endpoint + path +
                                           " returned HTTP " +
                                           std::to_string(res->status));
  }
  return res->body;
}

}  // namespace promptprobe::detail
