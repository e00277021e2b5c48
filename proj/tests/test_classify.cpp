#include <doctest.h>

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sortcell/backends.hpp"
#include "sortcell/classify.hpp"
#include "sortcell/errors.hpp"
#include "sortcell/rng.hpp"

using namespace sortcell;
using namespace sortcell::classify;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("build_prompt matches the golden prompt byte for byte") {
  const ChatRequest req = build_prompt();
  const auto data = std::filesystem::path(SORTCELL_TEST_DATA_DIR);
  CHECK(req.system_prompt == read_file(data / "prompt_system.golden"));
  CHECK(req.user_prompt == read_file(data / "prompt_user.golden"));
  CHECK(req.user_prompt.find("Your response is a single word") != std::string::npos);
  CHECK(req.user_prompt.find("shirt, sock, underwear or trousers") != std::string::npos);

  const ChatRequest again = build_prompt();
  CHECK(again.system_prompt == req.system_prompt);
  CHECK(again.user_prompt == req.user_prompt);
}

TEST_CASE("parse_text: the spec's worked examples") {
  CHECK(parse_text("Sock") == ParsedLabel::make_valid(GarmentClass::Sock));
  CHECK(parse_text("  trousers  ") == ParsedLabel::make_valid(GarmentClass::Trousers));
  CHECK(parse_text("The image shows a piece of green fabric").kind ==
        ParsedLabel::Kind::MultiWord);
  CHECK(parse_text("sock.").kind == ParsedLabel::Kind::NotAClass);
  CHECK(parse_text("").kind == ParsedLabel::Kind::EmptyText);
  CHECK(parse_text("   \t\n").kind == ParsedLabel::Kind::EmptyText);
  CHECK(parse_text("EMPTY") == ParsedLabel::make_valid(GarmentClass::Empty));
  CHECK(parse_text("socks").kind == ParsedLabel::Kind::NotAClass);

  ParseOptions lenient;
  lenient.lenient_punctuation = true;
  CHECK(parse_text("sock.", lenient) == ParsedLabel::make_valid(GarmentClass::Sock));
  CHECK(parse_text("trousers!!", lenient) ==
        ParsedLabel::make_valid(GarmentClass::Trousers));
  CHECK(parse_text("...", lenient).kind == ParsedLabel::Kind::EmptyText);
}

TEST_CASE("parse_text: totality and case invariance over generated strings") {
  RngStream rng(321);
  const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ .,!?\t\n-_09";
  for (int i = 0; i < 1500; ++i) {
    std::string s;
    const int len = rng.uniform_int(0, 24);
    for (int k = 0; k < len; ++k)
      s += alphabet[static_cast<size_t>(rng.uniform_int(0, int(alphabet.size()) - 1))];

    const ParsedLabel a = parse_text(s);  // must not throw: total
    std::string lower = s;
    for (char& c : lower) c = static_cast<char>(std::tolower((unsigned char)c));
    const ParsedLabel b = parse_text(lower);
    REQUIRE(a == b);

    // Exactly one outcome kind, and Valid only for canonical words.
    if (a.kind == ParsedLabel::Kind::Valid) {
      REQUIRE(a.label.has_value());
      std::string trimmed;
      for (char c : lower)
        if (!std::isspace((unsigned char)c)) trimmed += c;
      REQUIRE(trimmed == to_string(*a.label));
    }
  }

  for (const GarmentClass c : kClassOrder) {
    std::string word(to_string(c));
    CHECK(parse_text(word) == ParsedLabel::make_valid(c));
    for (char& ch : word) ch = static_cast<char>(std::toupper((unsigned char)ch));
    CHECK(parse_text(word) == ParsedLabel::make_valid(c));
  }
}

TEST_CASE("ParsedLabel string form round-trips") {
  for (const GarmentClass c : kClassOrder) {
    const ParsedLabel l = ParsedLabel::make_valid(c);
    CHECK(ParsedLabel::from_string(l.to_string()) == l);
  }
  for (const auto kind :
       {ParsedLabel::Kind::NotAClass, ParsedLabel::Kind::MultiWord,
        ParsedLabel::Kind::EmptyText, ParsedLabel::Kind::Transport}) {
    const ParsedLabel l = ParsedLabel::invalid(kind);
    CHECK(ParsedLabel::from_string(l.to_string()) == l);
  }
  CHECK(!ParsedLabel::from_string("valid:socks").has_value());
  CHECK(!ParsedLabel::from_string("junk").has_value());
}

TEST_CASE("base64 encoding") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  const std::string binary{'\x00', '\xff', '\x10'};
  CHECK(base64_encode(binary) == "AP8Q");
}

TEST_CASE("ConfusionProfile: validation and draws") {
  ConfusionProfile identity = ConfusionProfile::identity();
  identity.validate();
  CHECK(identity.draw(GarmentClass::Sock, 0.3) == class_index(GarmentClass::Sock));

  std::array<double, kClassCount + 1> bad{};
  bad[0] = 0.5;
  ConfusionProfile p;
  p.set_row(GarmentClass::Shirt, bad);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("ConfusionProfile: file round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "sortcell_profile.json";
  ConfusionProfile p = ConfusionProfile::identity();
  std::array<double, kClassCount + 1> row{};
  row[class_index(GarmentClass::Sock)] = 0.7;
  row[class_index(GarmentClass::Other)] = 0.2;
  row[ConfusionProfile::kInvalidCol] = 0.1;
  p.set_row(GarmentClass::Sock, row);
  p.save(path);

  const ConfusionProfile back = ConfusionProfile::load(path);
  CHECK(back.row(GarmentClass::Sock)[class_index(GarmentClass::Sock)] == 0.7);
  CHECK(back.row(GarmentClass::Sock)[ConfusionProfile::kInvalidCol] == 0.1);
  CHECK(back.row(GarmentClass::Shirt)[class_index(GarmentClass::Shirt)] == 1.0);

  // invalid rows are rejected at load time
  const auto bad = std::filesystem::temp_directory_path() / "sortcell_bad_profile.json";
  std::ofstream f(bad);
  f << R"({"rows": {"sock": {"sock": 0.5}}})";
  f.close();
  CHECK_THROWS_AS(ConfusionProfile::load(bad), std::invalid_argument);
}

TEST_CASE("mock backend: identity profile echoes the declared class") {
  MockProfileBackend mock(ConfusionProfile::identity(), 5);
  const ChatRequest req = build_prompt();
  const RawResponse resp = mock.classify({"r1", "", "sock"}, req);
  CHECK(resp.text == "sock");
  CHECK(resp.latency_s >= 0.5);
  CHECK(resp.latency_s <= 0.8);
  CHECK(parse_response(resp) == ParsedLabel::make_valid(GarmentClass::Sock));
}

TEST_CASE("mock backend: empty scenes can hallucinate by construction") {
  ConfusionProfile profile = ConfusionProfile::identity();
  std::array<double, kClassCount + 1> row{};
  row[class_index(GarmentClass::Other)] = 1.0;
  profile.set_row(GarmentClass::Empty, row);
  MockProfileBackend mock(profile, 5);
  const RawResponse resp = mock.classify({"r1", "", "empty"}, build_prompt());
  CHECK(resp.text == "other");
}

TEST_CASE("mock backend: determinism and per-id stream independence") {
  ConfusionProfile profile = ConfusionProfile::identity();
  std::array<double, kClassCount + 1> row{};
  row[class_index(GarmentClass::Sock)] = 0.5;
  row[class_index(GarmentClass::Other)] = 0.3;
  row[ConfusionProfile::kInvalidCol] = 0.2;
  profile.set_row(GarmentClass::Sock, row);

  MockProfileBackend a(profile, 42);
  MockProfileBackend b(profile, 42);
  const ChatRequest req = build_prompt();
  for (int i = 0; i < 50; ++i) {
    const std::string id = "req" + std::to_string(i);
    const RawResponse ra = a.classify({id, "", "sock"}, req);
    const RawResponse rb = b.classify({id, "", "sock"}, req);
    REQUIRE(ra.text == rb.text);
    REQUIRE(ra.latency_s == rb.latency_s);
  }
  // Replies keyed by id, not by call order.
  const RawResponse first = a.classify({"req7", "", "sock"}, req);
  MockProfileBackend c(profile, 42);
  const RawResponse shuffled = c.classify({"req7", "", "sock"}, req);
  CHECK(first.text == shuffled.text);
}

TEST_CASE("mock backend: empirical distribution approaches the profile row") {
  // 0.8 correct, 0.2 spread uniformly over the remaining outcomes.
  ConfusionProfile profile;
  for (const GarmentClass cls : kClassOrder) {
    std::array<double, kClassCount + 1> row{};
    for (size_t col = 0; col <= ConfusionProfile::kInvalidCol; ++col)
      row[col] = 0.2 / kClassCount;
    row[class_index(cls)] = 0.8;
    profile.set_row(cls, row);
  }
  MockProfileBackend mock(profile, 2025);
  const ChatRequest req = build_prompt();

  std::array<int, kClassCount + 1> hits{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const RawResponse r = mock.classify({"d" + std::to_string(i), "", "shirt"}, req);
    const ParsedLabel parsed = parse_response(r);
    hits[parsed.valid() ? class_index(*parsed.label)
                        : ConfusionProfile::kInvalidCol] += 1;
  }
  double l1 = 0;
  const auto& row = profile.row(GarmentClass::Shirt);
  for (size_t col = 0; col <= ConfusionProfile::kInvalidCol; ++col)
    l1 += std::abs(double(hits[col]) / n - row[col]);
  CHECK(l1 < 0.04);
}

TEST_CASE("replay backend: stored responses come back verbatim") {
  const auto path = std::filesystem::temp_directory_path() / "sortcell_replay.jsonl";
  {
    std::ofstream f(path);
    f << R"({"id":"a","model":"gemma3:12b","raw":"sock","parsed":"valid:sock","latency_s":0.61})" << "\n";
    f << R"({"id":"b","model":"gemma3:12b","raw":"No clothing visible","parsed":"invalid:multi_word","latency_s":0.72})" << "\n";
  }
  ReplayBackend replay(path);
  CHECK(replay.model_name() == "gemma3:12b");
  const RawResponse a = replay.classify({"a", "", ""}, build_prompt());
  CHECK(a.text == "sock");
  CHECK(a.latency_s == 0.61);
  const RawResponse b = replay.classify({"b", "", ""}, build_prompt());
  CHECK(b.text == "No clothing visible");
  CHECK_THROWS_AS(replay.classify({"missing", "", ""}, build_prompt()),
                  UnknownRequestError);
}

TEST_CASE("live backend: wire shape against a stub chat server") {
  httplib::Server server;
  std::atomic<int> post_count{0};
  nlohmann::json seen_body;
  std::string seen_path;

  server.Post("/api/chat", [&](const httplib::Request& req, httplib::Response& res) {
    post_count += 1;
    seen_path = req.path;
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(R"({"message":{"role":"assistant","content":"sock"}})",
                    "application/json");
  });

  const int port = 18732;
  std::thread server_thread([&] { server.listen("127.0.0.1", port); });
  server.wait_until_ready();

  LiveHttpBackend backend("http://127.0.0.1:" + std::to_string(port), "test-model",
                          5.0);
  const ChatRequest req = build_prompt();
  const RawResponse resp = classify_image(backend, {"r1", "PNGBYTES", "sock"}, req);

  CHECK(resp.text == "sock");
  CHECK(resp.latency_s >= 0);
  CHECK(post_count == 1);
  CHECK(seen_path == "/api/chat");
  CHECK(seen_body.at("model") == "test-model");
  CHECK(seen_body.at("stream") == false);
  REQUIRE(seen_body.at("messages").size() == 2);
  CHECK(seen_body["messages"][0]["role"] == "system");
  CHECK(seen_body["messages"][0]["content"] == req.system_prompt);
  CHECK(seen_body["messages"][1]["role"] == "user");
  CHECK(seen_body["messages"][1]["content"] == req.user_prompt);
  REQUIRE(seen_body["messages"][1]["images"].size() >= 1);
  CHECK(seen_body["messages"][1]["images"][0] == base64_encode("PNGBYTES"));

  server.stop();
  server_thread.join();
}

TEST_CASE("live backend: a slow server trips the timeout") {
  httplib::Server server;
  server.Post("/api/chat", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(R"({"message":{"content":"sock"}})", "application/json");
  });
  const int port = 18733;
  std::thread server_thread([&] { server.listen("127.0.0.1", port); });
  server.wait_until_ready();

  LiveHttpBackend backend("http://127.0.0.1:" + std::to_string(port), "m", 0.3);
  CHECK_THROWS_AS(backend.classify({"r1", "img", "sock"}, build_prompt()),
                  TimeoutError);

  server.stop();
  server_thread.join();
}

TEST_CASE("live backend: connection refused is a transport error") {
  LiveHttpBackend backend("http://127.0.0.1:1", "m", 0.5);
  CHECK_THROWS_AS(backend.classify({"r1", "img", "sock"}, build_prompt()),
                  TransportError);
}
