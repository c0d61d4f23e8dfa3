#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "promptprobe/encoder.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"
#include "test_support.hpp"

using namespace promptprobe;
using promptprobe::testing::Rng;
using promptprobe::testing::TempDir;
using promptprobe::testing::write_file;

namespace {

const char* kTwoTokens =
    "pp-embed v1 2 2\n"
    "0\tred\t1 0\n"
    "1\tblue\t0 1\n";

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an Error");
  return Error(ErrorKind::kUsage, "");
}

std::string fixture(const std::string& name) {
  return text::read_file(std::string(PROMPTPROBE_FIXTURES) + "/" + name);
}

// Decimal strings with at most three fractional digits and no trailing zero
// are already in shortest round-trip form.
std::string short_decimal(Rng& rng) {
  long m = 0;
  while (m % 10 == 0) m = static_cast<long>(rng.index(20000)) - 10000;
  std::string s = m < 0 ? "-" : "";
  m = std::labs(m);
  s += std::to_string(m / 1000);
  std::string frac = std::to_string(m % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  while (frac.back() == '0') frac.pop_back();
  return s + "." + frac;
}

// Serves recorded sidecar responses on an ephemeral port.
class RecordedServer {
 public:
  RecordedServer() {
    server_.Post("/v1/encode_text", [this](const httplib::Request& req, httplib::Response& res) {
      last_text_body = req.body;
      res.set_content(text_response, "application/json");
    });
    server_.Post("/v1/encode_image", [this](const httplib::Request& req, httplib::Response& res) {
      last_image_type = req.get_header_value("Content-Type");
      last_image_size = req.body.size();
      res.set_content(image_response, "application/json");
    });
    server_.Post("/v1/broken", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~RecordedServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::string text_response;
  std::string image_response;
  std::string last_text_body;
  std::string last_image_type;
  std::size_t last_image_size = 0;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("two-token table") {
  const auto t = parse_table(kTwoTokens);
  REQUIRE(t.size() == 2);
  CHECK(t.dim() == 2);
  CHECK(t.at(0).token_text == "red");
  CHECK(t.at(0).embedding == EmbeddingVector{1, 0});
  CHECK(t.at(1).token_text == "blue");
  CHECK(t.at(1).embedding == EmbeddingVector{0, 1});
  CHECK(t.find("blue") == TokenId{1});
  CHECK_FALSE(t.find("Blue").has_value());
}

TEST_CASE("malformed tables name the line") {
  auto e = error_of([] { parse_table("pp-embed v1 2 3\n0\tred\t1 0 0\n1\tblue\t0 1\n"); });
  CHECK(e.kind() == ErrorKind::kParse);
  CHECK(std::string(e.what()).rfind("line 3:", 0) == 0);

  CHECK(error_of([] { parse_table("pp-embed v2 1 1\n0\ta\t1\n"); }).kind() == ErrorKind::kParse);
  CHECK(error_of([] { parse_table("pp-embed v1 2 1\n0\ta\t1\n0\tb\t1\n"); }).kind() ==
        ErrorKind::kParse);
  CHECK(error_of([] { parse_table("pp-embed v1 2 1\n0\ta\t1\n1\ta\t1\n"); }).kind() ==
        ErrorKind::kParse);
  CHECK(error_of([] { parse_table("pp-embed v1 1 1\n0\ta\tnan\n"); }).kind() == ErrorKind::kParse);
  CHECK(error_of([] { parse_table("pp-embed v1 2 1\n0\ta\t1\n"); }).kind() == ErrorKind::kParse);

  const std::string what = error_of([] { parse_table("pp-embed v1 1 1\n0\ta\tinf\n"); }).what();
  CHECK(what.find("line 2") != std::string::npos);
}

TEST_CASE("1000-token table round-trips byte for byte") {
  Rng rng(1000);
  std::string content = "pp-embed v1 1000 7\n";
  for (int id = 0; id < 1000; ++id) {
    content += std::to_string(id) + "\ttok" + std::to_string(id) + "\t";
    for (int j = 0; j < 7; ++j) content += (j ? " " : "") + short_decimal(rng);
    content += "\n";
  }
  TempDir dir;
  const auto path = write_file(dir / "big.tsv", content);
  CHECK(serialize_table(load_table(path)) == content);

  // Full-precision values survive a second pass unchanged.
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (int i = 0; i < 50; ++i) rows.emplace_back("r" + std::to_string(i), rng.gaussian_vector(5));
  const auto table = testing::make_table(rows);
  const auto once = serialize_table(*table);
  const auto reparsed = parse_table(once);
  CHECK(serialize_table(reparsed) == once);
  for (std::size_t i = 0; i < table->size(); ++i) {
    CHECK(reparsed.at(i).embedding == table->at(i).embedding);
  }
}

TEST_CASE("row order on disk does not matter") {
  Rng rng(5);
  std::vector<std::string> rows;
  for (int id = 0; id < 30; ++id) {
    std::string row = std::to_string(id) + "\tw" + std::to_string(id) + "\t";
    for (int j = 0; j < 4; ++j) row += (j ? " " : "") + text::format_double(rng.normal());
    rows.push_back(row);
  }
  auto join = [](const std::vector<std::string>& r) {
    std::string out = "pp-embed v1 30 4\n";
    for (const auto& x : r) out += x + "\n";
    return out;
  };
  auto a = std::make_shared<const EmbeddingTable>(parse_table(join(rows)));
  std::reverse(rows.begin(), rows.end());
  std::swap(rows[3], rows[17]);
  auto b = std::make_shared<const EmbeddingTable>(parse_table(join(rows)));
  CHECK(serialize_table(*a) == serialize_table(*b));
  for (const char* prompt : {"w0", "w3 w17", "w29 w1 w1 w8"}) {
    CHECK(encode_text(EncoderBinding::toy(a), prompt) ==
          encode_text(EncoderBinding::toy(b), prompt));
  }
}

TEST_CASE("toy encode_text") {
  auto t = std::make_shared<const EmbeddingTable>(parse_table(kTwoTokens));
  const auto enc = EncoderBinding::toy(t);
  CHECK(encode_text(enc, "red") == EmbeddingVector{1, 0});
  const auto rb = encode_text(enc, "  red   blue ");
  CHECK(rb[0] == doctest::Approx(0.70710678118654752).epsilon(1e-15));
  CHECK(rb[1] == doctest::Approx(0.70710678118654752).epsilon(1e-15));

  auto e = error_of([&] { encode_text(enc, "green"); });
  CHECK(e.kind() == ErrorKind::kLookup);
  CHECK(std::string(e.what()).find("green") != std::string::npos);
  CHECK(error_of([&] { encode_text(enc, "Red"); }).kind() == ErrorKind::kLookup);
  CHECK(error_of([&] { encode_text(enc, "   "); }).kind() == ErrorKind::kUsage);
}

TEST_CASE("toy encodings are unit length and match the token-id path") {
  Rng rng(21);
  auto t = rng.random_table(40, 6);
  const auto enc = EncoderBinding::toy(t);
  for (int i = 0; i < 100; ++i) {
    std::vector<TokenId> ids;
    std::string prompt;
    const std::size_t n = 1 + rng.index(8);
    std::vector<double> mean(6, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      ids.push_back(rng.index(40));
      prompt += (k ? " " : "") + t->at(ids.back()).token_text;
      for (std::size_t j = 0; j < 6; ++j) mean[j] += t->at(ids.back()).embedding[j] / n;
    }
    const auto v = encode_text(enc, prompt);
    CHECK(std::abs(v.norm() - 1.0) <= 1e-10);
    CHECK(v == encode_token_ids(*t, ids));
    CHECK(encode_text(enc, prompt) == v);
    CHECK(cosine(v, EmbeddingVector(mean)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("toy reference vectors") {
  auto t = std::make_shared<const EmbeddingTable>(parse_table(kTwoTokens));
  const auto enc = EncoderBinding::toy(t);
  TempDir dir;
  CHECK(encode_image_ref(enc, write_file(dir / "ok.vec", "1.0 0.0\n")) == EmbeddingVector{1, 0});
  CHECK(error_of([&] { encode_image_ref(enc, write_file(dir / "three.vec", "1 0 0")); }).kind() ==
        ErrorKind::kConfig);
  CHECK(error_of([&] { encode_image_ref(enc, dir / "missing.vec"); }).kind() == ErrorKind::kIo);
  CHECK(error_of([&] { encode_image_ref(enc, write_file(dir / "bad.vec", "1 x")); }).kind() ==
        ErrorKind::kParse);
}

TEST_CASE("binding validation") {
  CHECK(error_of([] { EncoderBinding::toy(nullptr); }).kind() == ErrorKind::kConfig);
  CHECK(error_of([] { EncoderBinding::remote("", 4); }).kind() == ErrorKind::kConfig);
  CHECK(error_of([] { EncoderBinding::remote("http://x", 0); }).kind() == ErrorKind::kConfig);
  auto b = EncoderBinding::toy(testing::basis_table(2));
  b.endpoint = "http://x";
  CHECK(error_of([&] { b.validate(); }).kind() == ErrorKind::kConfig);
}

TEST_CASE("encode response parsing") {
  CHECK(parse_encode_response(R"({"dim":2,"values":[0.5,-1]})", 2) == EmbeddingVector{0.5, -1});
  for (const char* bad : {"not json", R"({"dim":2})", R"({"dim":3,"values":[1,2,3]})",
                          R"({"dim":2,"values":[1]})", R"({"dim":2,"values":[1,"a"]})",
                          R"([1,2])"}) {
    CAPTURE(bad);
    CHECK(error_of([&] { parse_encode_response(bad, 2); }).kind() == ErrorKind::kTransport);
  }
}

TEST_CASE("remote encoder replays recorded responses") {
  RecordedServer server;
  server.text_response = fixture("remote/encode_text_dim512.json");
  server.image_response = fixture("remote/encode_image_dim512.json");
  const auto enc = EncoderBinding::remote(server.endpoint(), 512, 5.0);

  const auto recorded = nlohmann::json::parse(server.text_response);
  const auto v = encode_text(enc, "a quiet street");
  REQUIRE(v.dim() == 512);
  for (std::size_t i = 0; i < 512; ++i) CHECK(v[i] == recorded["values"][i].get<double>());
  CHECK(std::isfinite(v.norm()));
  CHECK(nlohmann::json::parse(server.last_text_body) == nlohmann::json{{"text", "a quiet street"}});

  TempDir dir;
  const auto img = write_file(dir / "ref.png", std::string("\x89PNG\r\n\x1a\n", 8) + "payload");
  const auto iv = encode_image_ref(enc, img);
  CHECK(iv.dim() == 512);
  CHECK(iv[0] == nlohmann::json::parse(server.image_response)["values"][0].get<double>());
  CHECK(server.last_image_type == "image/png");
  CHECK(server.last_image_size == 15);

  const auto wrong_dim = EncoderBinding::remote(server.endpoint(), 256, 5.0);
  CHECK(error_of([&] { encode_text(wrong_dim, "x"); }).kind() == ErrorKind::kTransport);

  server.text_response = "{\"dim\": 512}";
  CHECK(error_of([&] { encode_text(enc, "x"); }).kind() == ErrorKind::kTransport);
}

TEST_CASE("remote encoder surfaces transport failures") {
  // Nothing listens on the discard port.
  const auto enc = EncoderBinding::remote("http://127.0.0.1:9", 4, 1.0);
  CHECK(error_of([&] { encode_text(enc, "x"); }).kind() == ErrorKind::kTransport);
}
