#include "sortcell/service_bus.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace sortcell::orchestrator {

struct ServiceBus::Pending {
  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  ServiceReply reply;
  std::exception_ptr error;
};

ServiceBus::~ServiceBus() = default;

void ServiceBus::register_handler(const std::string& service_name, Handler handler) {
  handlers_[service_name] = std::move(handler);
}

ServiceOutcome ServiceBus::call_service(const ServiceEnvelope& envelope) {
  if (envelope.timeout_s <= 0)
    throw std::invalid_argument("envelope timeout must be positive");
  const auto it = handlers_.find(envelope.service_name);
  if (it == handlers_.end())
    throw std::invalid_argument("no handler registered for service '" +
                                envelope.service_name + "'");
  if (!used_ids_.insert(envelope.correlation_id).second)
    throw std::invalid_argument("duplicate correlation id '" +
                                envelope.correlation_id + "'");

  if (clock_ == Clock::Logical) {
    ServiceReply reply = it->second(envelope.request);
    if (reply.latency_s > envelope.timeout_s) {
      logical_now_s_ += envelope.timeout_s;
      return {true, {}};
    }
    logical_now_s_ += reply.latency_s;
    return {false, std::move(reply)};
  }

  // Wall clock: the handler runs on its own thread. A handler that misses
  // the deadline is abandoned; the shared state block outlives the call so
  // the late write has somewhere safe to land.
  auto pending = std::make_shared<Pending>();
  Handler handler = it->second;
  std::thread([pending, handler, request = envelope.request] {
    try {
      ServiceReply r = handler(request);
      std::lock_guard lock(pending->mutex);
      pending->reply = std::move(r);
      pending->done = true;
      pending->cv.notify_all();
    } catch (...) {
      std::lock_guard lock(pending->mutex);
      pending->error = std::current_exception();
      pending->done = true;
      pending->cv.notify_all();
    }
  }).detach();

  std::unique_lock lock(pending->mutex);
  const bool finished = pending->cv.wait_for(
      lock, std::chrono::duration<double>(envelope.timeout_s),
      [&] { return pending->done; });
  if (!finished) return {true, {}};
  if (pending->error) std::rethrow_exception(pending->error);
  return {false, std::move(pending->reply)};
}

}  // namespace sortcell::orchestrator
