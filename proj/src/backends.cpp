#include "sortcell/backends.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sortcell/errors.hpp"

namespace sortcell::classify {

using nlohmann::json;

void ConfusionProfile::set_row(GarmentClass true_class,
                               const std::array<double, kClassCount + 1>& row) {
  rows_[true_class] = row;
}

const std::array<double, ConfusionProfile::kInvalidCol + 1>& ConfusionProfile::row(
    GarmentClass true_class) const {
  const auto it = rows_.find(true_class);
  if (it == rows_.end())
    throw std::invalid_argument("profile has no row for class " +
                                std::string(to_string(true_class)));
  return it->second;
}

size_t ConfusionProfile::draw(GarmentClass true_class, double u) const {
  const auto& r = row(true_class);
  double acc = 0;
  for (size_t col = 0; col < r.size(); ++col) {
    acc += r[col];
    if (u < acc) return col;
  }
  return kInvalidCol;
}

void ConfusionProfile::validate() const {
  for (const auto& [cls, r] : rows_) {
    double sum = 0;
    for (const double p : r) {
      if (p < 0)
        throw std::invalid_argument("profile row has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("profile row for " +
                                  std::string(to_string(cls)) +
                                  " does not sum to 1");
  }
}

ConfusionProfile ConfusionProfile::identity() {
  ConfusionProfile p;
  for (const GarmentClass c : kClassOrder) {
    std::array<double, kClassCount + 1> row{};
    row[class_index(c)] = 1.0;
    p.set_row(c, row);
  }
  return p;
}

ConfusionProfile ConfusionProfile::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open profile: " + path.string());
  const json j = json::parse(f);
  ConfusionProfile p;
  for (const auto& [name, row_json] : j.at("rows").items()) {
    const auto cls = class_from_string(name);
    if (!cls) throw std::runtime_error("profile row for unknown class: " + name);
    std::array<double, kClassCount + 1> row{};
    for (const auto& [col_name, prob] : row_json.items()) {
      if (col_name == "invalid") {
        row[kInvalidCol] = prob.get<double>();
      } else {
        const auto col = class_from_string(col_name);
        if (!col)
          throw std::runtime_error("profile column for unknown class: " + col_name);
        row[class_index(*col)] = prob.get<double>();
      }
    }
    p.set_row(*cls, row);
  }
  p.validate();
  return p;
}

void ConfusionProfile::save(const std::filesystem::path& path) const {
  json rows;
  for (const auto& [cls, r] : rows_) {
    json row;
    for (size_t col = 0; col < kClassCount; ++col)
      if (r[col] != 0) row[std::string(to_string(kClassOrder[col]))] = r[col];
    if (r[kInvalidCol] != 0) row["invalid"] = r[kInvalidCol];
    rows[std::string(to_string(cls))] = row;
  }
  std::ofstream f(path);
  f << json{{"rows", rows}}.dump(2) << "\n";
}

MockProfileBackend::MockProfileBackend(ConfusionProfile profile, uint64_t seed,
                                       std::string model_name,
                                       double latency_base_s,
                                       double latency_jitter_s)
    : profile_(std::move(profile)),
      seed_(seed),
      model_name_(std::move(model_name)),
      latency_base_s_(latency_base_s),
      latency_jitter_s_(latency_jitter_s) {
  profile_.validate();
}

RawResponse MockProfileBackend::classify(const ImagePayload& image,
                                         const ChatRequest& request) {
  (void)request;
  const auto cls = class_from_string(image.declared_class);
  if (!cls)
    throw std::invalid_argument("mock backend needs a declared class, got '" +
                                image.declared_class + "'");
  RngStream stream = RngStream(seed_).split("mock").split(image.request_id);
  const size_t col = profile_.draw(*cls, stream.uniform01());

  RawResponse resp;
  resp.model_name = model_name_;
  resp.request_id = image.request_id;
  resp.latency_s = latency_base_s_ + stream.uniform01() * latency_jitter_s_;
  if (col == ConfusionProfile::kInvalidCol) {
    // Multi-word by construction, so it parses as a malformed response.
    resp.text = "I am not sure what this object is";
  } else {
    resp.text = std::string(to_string(kClassOrder[col]));
  }
  return resp;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& log_path) {
  std::ifstream f(log_path);
  if (!f) throw std::runtime_error("cannot open replay log: " + log_path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("replay log parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    Entry entry{j.at("raw").get<std::string>(), j.at("latency_s").get<double>()};
    entries_[j.at("id").get<std::string>()] = entry;
    if (model_name_.empty() && j.contains("model"))
      model_name_ = j.at("model").get<std::string>();
  }
  if (model_name_.empty()) model_name_ = "replay";
}

RawResponse ReplayBackend::classify(const ImagePayload& image,
                                    const ChatRequest& request) {
  (void)request;
  const auto it = entries_.find(image.request_id);
  if (it == entries_.end())
    throw UnknownRequestError("no replay entry for request id '" +
                              image.request_id + "'");
  RawResponse resp;
  resp.text = it->second.text;
  resp.latency_s = it->second.latency_s;
  resp.model_name = model_name_;
  resp.request_id = image.request_id;
  return resp;
}

LiveHttpBackend::LiveHttpBackend(std::string endpoint, std::string model_name,
                                 double timeout_s)
    : endpoint_(std::move(endpoint)),
      model_name_(std::move(model_name)),
      timeout_s_(timeout_s) {}

RawResponse LiveHttpBackend::classify(const ImagePayload& image,
                                      const ChatRequest& request) {
  json user_msg;
  user_msg["role"] = "user";
  user_msg["content"] = request.user_prompt;
  json images = json::array();
  images.push_back(base64_encode(image.png_bytes));
  for (const std::string& extra : request.images)
    images.push_back(base64_encode(extra));
  user_msg["images"] = images;

  json body;
  body["model"] = model_name_;
  body["messages"] = json::array(
      {json{{"role", "system"}, {"content", request.system_prompt}}, user_msg});
  body["stream"] = false;

  httplib::Client client(endpoint_);
  const auto timeout_us =
      std::chrono::microseconds(static_cast<int64_t>(timeout_s_ * 1e6));
  client.set_connection_timeout(timeout_us);
  client.set_read_timeout(timeout_us);
  client.set_write_timeout(timeout_us);

  const auto start = std::chrono::steady_clock::now();
  httplib::Result res = client.Post("/api/chat", body.dump(), "application/json");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw TimeoutError("chat call timed out after " + std::to_string(timeout_s_) +
                         " s");
    throw TransportError("chat call failed: " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw TransportError("chat call returned status " + std::to_string(res->status));

  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat reply: ") + e.what());
  }
  if (!reply.contains("message") || !reply["message"].contains("content"))
    throw TransportError("chat reply missing message.content");

  RawResponse out;
  out.text = reply["message"]["content"].get<std::string>();
  out.latency_s = elapsed;
  out.model_name = model_name_;
  out.request_id = image.request_id;
  return out;
}

std::unique_ptr<ClassifierBackend> make_backend(const BackendDescriptor& desc) {
  switch (desc.kind) {
    case BackendDescriptor::Kind::LiveHttp:
      return std::make_unique<LiveHttpBackend>(desc.endpoint, desc.model_name,
                                               desc.timeout_s);
    case BackendDescriptor::Kind::MockProfile: {
      ConfusionProfile profile = desc.profile_path.empty()
                                     ? ConfusionProfile::identity()
                                     : ConfusionProfile::load(desc.profile_path);
      return std::make_unique<MockProfileBackend>(
          std::move(profile), desc.mock_seed, desc.model_name,
          desc.mock_latency_base_s, desc.mock_latency_jitter_s);
    }
    case BackendDescriptor::Kind::ReplayLog:
      return std::make_unique<ReplayBackend>(desc.log_path);
  }
  throw std::invalid_argument("unknown backend kind");
}

RawResponse classify_image(ClassifierBackend& backend, const ImagePayload& image,
                           const ChatRequest& request) {
  return backend.classify(image, request);
}

}  // namespace sortcell::classify
