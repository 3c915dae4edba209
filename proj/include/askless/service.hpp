#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "askless/inference.hpp"
#include "askless/network_io.hpp"
#include "askless/rng.hpp"

namespace httplib {
class Server;
}

namespace askless {

struct ServiceOptions {
  Engine engine = Engine::exact;
  long nSamples = 5000;
  std::chrono::seconds ttl = std::chrono::hours(24);
  int defaultK = 10;
};

struct Session {
  std::string id;
  std::vector<std::string> questionSet;
  Evidence answered;
  // Prior first, then one snapshot per answer.
  std::vector<Posterior> posteriorTrace;
  std::chrono::system_clock::time_point createdAt;
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> remaining() const;
  const Posterior& current() const { return posteriorTrace.back(); }
};

struct AnswerResult {
  Posterior posterior;
  std::string segment;
  std::size_t answeredCount = 0;
  std::vector<std::string> remaining;
};

// In-memory sessions for the scaling phase. The network is shared and
// immutable; each session is guarded by its own mutex so answers to one
// session serialize while different sessions proceed independently.
class SessionStore {
 public:
  explicit SessionStore(std::shared_ptr<const BayesianNetwork> network, ServiceOptions options = {});

  bool model_loaded() const { return network_ != nullptr; }
  // Errors: ModelNotLoaded.
  const BayesianNetwork& network() const;
  const ServiceOptions& options() const { return options_; }
  std::vector<std::string> question_pool() const;

  // Errors: ModelNotLoaded, KTooLarge, InvalidConfig (k < 1).
  Session create_session(int k, std::optional<std::uint64_t> seed = std::nullopt);
  // Errors: UnknownSession, QuestionNotInSet, AlreadyAnswered, InvalidLevel.
  AnswerResult submit_answer(const std::string& id, const std::string& question, const std::string& value);
  // Errors: UnknownSession.
  Session get_session(const std::string& id);

  // Drops sessions older than the TTL; returns how many were removed.
  std::size_t purge_expired(std::chrono::system_clock::time_point now = std::chrono::system_clock::now());
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id);
  std::string new_id();
  QueryOptions query_options(const Session& session) const;

  std::shared_ptr<const BayesianNetwork> network_;
  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
  Rng rng_;
};

Json posterior_to_json(const Posterior& posterior);
Json session_to_json(const SessionStore& store, const Session& session);

// HTTP + JSON front end:
//   POST /sessions              {"k":10,"seed":optional} -> 201
//   POST /sessions/{id}/answers {"question":"PAM","value":"4"} -> 200
//   GET  /sessions/{id}         -> 200 session view
//   GET  /healthz               -> 200 when a model is loaded
class HttpService {
 public:
  explicit HttpService(SessionStore& store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds to `port` (0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Serves until stop(); returns false if the listener failed.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace askless
