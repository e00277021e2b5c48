#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

namespace sortcell::orchestrator {

struct ServiceEnvelope {
  std::string service_name;
  nlohmann::json request;
  double timeout_s = 10.0;
  std::string correlation_id;
};

struct ServiceReply {
  nlohmann::json payload;
  double latency_s = 0;  // logical latency reported by the handler
};

struct ServiceOutcome {
  bool timed_out = false;
  ServiceReply reply;
};

// Request/response seam between the control loop and its services.
// Handlers run at most once per correlation id; duplicates are rejected.
class ServiceBus {
 public:
  enum class Clock {
    Logical,  // handler-reported latency vs. timeout; drives simulation
    Wall,     // handler runs on a worker thread with a real deadline
  };

  using Handler = std::function<ServiceReply(const nlohmann::json&)>;

  explicit ServiceBus(Clock clock = Clock::Logical) : clock_(clock) {}
  ~ServiceBus();

  void register_handler(const std::string& service_name, Handler handler);

  // Throws std::invalid_argument for an unregistered service or a reused
  // correlation id. A slow handler yields timed_out instead of a reply.
  ServiceOutcome call_service(const ServiceEnvelope& envelope);

  double logical_now_s() const { return logical_now_s_; }

 private:
  Clock clock_;
  std::map<std::string, Handler> handlers_;
  std::set<std::string> used_ids_;
  double logical_now_s_ = 0;
  struct Pending;
};

}  // namespace sortcell::orchestrator
