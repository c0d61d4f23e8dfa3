#pragma once

#include <string>
#include <string_view>

namespace promptprobe::detail {

/// POSTs `body` to `endpoint` + `path` and returns the response body.
/// Any connection failure, timeout or non-200 status raises kTransport.
std::string http_post(const std::string& endpoint, const std::string& path,
                      std::string_view body, const std::string& content_type,
                      double timeout_seconds);

}  // namespace promptprobe::detail
