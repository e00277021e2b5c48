#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "sortcell/classify.hpp"
#include "sortcell/garment.hpp"
#include "sortcell/rng.hpp"

namespace sortcell::classify {

// Per true class (incl. empty scenes), a probability row over the six
// classes plus an invalid outcome. Rows sum to 1.
class ConfusionProfile {
 public:
  static constexpr size_t kInvalidCol = kClassCount;  // column 6

  ConfusionProfile() = default;

  void set_row(GarmentClass true_class, const std::array<double, kClassCount + 1>& row);
  const std::array<double, kClassCount + 1>& row(GarmentClass true_class) const;

  // Column index drawn from the row's distribution.
  size_t draw(GarmentClass true_class, double u) const;

  void validate() const;  // rows sum to 1 within 1e-9, entries >= 0

  static ConfusionProfile identity();
  static ConfusionProfile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<GarmentClass, std::array<double, kClassCount + 1>> rows_;
};

struct BackendDescriptor {
  enum class Kind { LiveHttp, MockProfile, ReplayLog };
  Kind kind = Kind::MockProfile;
  std::string endpoint;      // live: http://host:port
  std::string profile_path;  // mock: empty = identity profile
  std::string log_path;      // replay
  std::string model_name = "mock";
  double timeout_s = 30.0;
  uint64_t mock_seed = 0;
  double mock_latency_base_s = 0.5;
  double mock_latency_jitter_s = 0.3;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual RawResponse classify(const ImagePayload& image, const ChatRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

// Seeded confusion-profile mock. The stream is split per request id, so the
// response sequence is independent of call order and thread scheduling.
class MockProfileBackend : public ClassifierBackend {
 public:
  MockProfileBackend(ConfusionProfile profile, uint64_t seed,
                     std::string model_name = "mock", double latency_base_s = 0.5,
                     double latency_jitter_s = 0.3);
  RawResponse classify(const ImagePayload& image, const ChatRequest& request) override;
  std::string model_name() const override { return model_name_; }

 private:
  ConfusionProfile profile_;
  uint64_t seed_;
  std::string model_name_;
  double latency_base_s_, latency_jitter_s_;
};

// Replays a stored response log keyed by request id.
class ReplayBackend : public ClassifierBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& log_path);
  RawResponse classify(const ImagePayload& image, const ChatRequest& request) override;
  std::string model_name() const override { return model_name_; }

 private:
  struct Entry {
    std::string text;
    double latency_s;
  };
  std::map<std::string, Entry> entries_;
  std::string model_name_;
};

// Chat call over HTTP: POST <endpoint>/api/chat, stream disabled, one system
// and one user message with base64 images.
class LiveHttpBackend : public ClassifierBackend {
 public:
  LiveHttpBackend(std::string endpoint, std::string model_name, double timeout_s);
  RawResponse classify(const ImagePayload& image, const ChatRequest& request) override;
  std::string model_name() const override { return model_name_; }

 private:
  std::string endpoint_;
  std::string model_name_;
  double timeout_s_;
};

std::unique_ptr<ClassifierBackend> make_backend(const BackendDescriptor& desc);

RawResponse classify_image(ClassifierBackend& backend, const ImagePayload& image,
                           const ChatRequest& request);

}  // namespace sortcell::classify
