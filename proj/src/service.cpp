#include "askless/service.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>

#include <httplib.h>

#include "askless/reduction.hpp"

namespace askless {

std::vector<std::string> Session::remaining() const {
  std::vector<std::string> out;
  for (const auto& q : questionSet)
    if (!answered.contains(q)) out.push_back(q);
  return out;
}

SessionStore::SessionStore(std::shared_ptr<const BayesianNetwork> network, ServiceOptions options)
    : network_(std::move(network)), options_(options), rng_(std::random_device{}()) {}

const BayesianNetwork& SessionStore::network() const {
  if (!network_) throw Error(Errc::ModelNotLoaded, "no network loaded");
  return *network_;
}

std::vector<std::string> SessionStore::question_pool() const { return network().schema().asked_questions(); }

std::string SessionStore::new_id() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_.next()),
                static_cast<unsigned long long>(rng_.next()));
  return buf;
}

QueryOptions SessionStore::query_options(const Session& session) const {
  return {options_.engine, options_.nSamples, derive_seed({session.seed, session.answered.size()})};
}

Session SessionStore::create_session(int k, std::optional<std::uint64_t> seed) {
  const BayesianNetwork& bn = network();
  const auto pool = question_pool();
  if (k < 1) throw Error(Errc::InvalidConfig, "k must be >= 1");
  if (static_cast<std::size_t>(k) > pool.size())
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds pool of " + std::to_string(pool.size()));
  purge_expired();

  auto entry = std::make_shared<Entry>();
  Session& s = entry->session;
  {
    std::lock_guard lock(mutex_);
    s.seed = seed ? *seed : rng_.next();
    do {
      s.id = new_id();
    } while (sessions_.count(s.id) != 0);
  }
  Rng draw(s.seed);
  s.questionSet = random_subset(pool, static_cast<std::size_t>(k), draw);
  s.k = k;
  s.createdAt = std::chrono::system_clock::now();
  s.posteriorTrace.push_back(query(bn, bn.schema().label_var(), s.answered, query_options(s)));

  Session copy = s;
  std::lock_guard lock(mutex_);
  sessions_.emplace(copy.id, std::move(entry));
  return copy;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::UnknownSession, id);
  return it->second;
}

AnswerResult SessionStore::submit_answer(const std::string& id, const std::string& question,
                                         const std::string& value) {
  const BayesianNetwork& bn = network();
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;
  if (std::find(s.questionSet.begin(), s.questionSet.end(), question) == s.questionSet.end())
    throw Error(Errc::QuestionNotInSet, question);
  if (s.answered.contains(question)) throw Error(Errc::AlreadyAnswered, question);
  const int v = bn.schema().require_index(question);
  if (bn.schema()[v].level_index(value) < 0) throw Error(Errc::InvalidLevel, question + "='" + value + "'");

  Evidence added;
  added.assignments.emplace(question, value);
  QueryOptions options = query_options(s);
  options.seed = derive_seed({s.seed, s.answered.size() + 1});
  Posterior post = incremental_update(bn, bn.schema().label_var(), s.answered, added, options);
  s.answered = merge_evidence(s.answered, added);
  s.posteriorTrace.push_back(post);

  AnswerResult result;
  result.segment = post.levels[static_cast<std::size_t>(post.argmax())];
  result.posterior = std::move(post);
  result.answeredCount = s.answered.size();
  result.remaining = s.remaining();
  return result;
}

Session SessionStore::get_session(const std::string& id) {
  purge_expired();
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session;
}

std::size_t SessionStore::purge_expired(std::chrono::system_clock::time_point now) {
  std::lock_guard lock(mutex_);
  return std::erase_if(sessions_, [&](const auto& item) {
    return now - item.second->session.createdAt > options_.ttl;
  });
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

// ---------------------------------------------------------------------------
// JSON views

Json posterior_to_json(const Posterior& posterior) {
  Json out = Json::object();
  for (std::size_t i = 0; i < posterior.levels.size(); ++i)
    out[posterior.levels[i]] = posterior.probs(static_cast<Eigen::Index>(i));
  return out;
}

namespace {

Json question_json(const SurveySchema& schema, const std::string& abbr) {
  const auto& q = schema[schema.require_index(abbr)];
  return {{"abbr", q.abbr}, {"text", q.text}, {"levels", q.levels}};
}

Json questions_json(const SurveySchema& schema, const std::vector<std::string>& names) {
  Json out = Json::array();
  for (const auto& n : names) out.push_back(question_json(schema, n));
  return out;
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Json session_to_json(const SessionStore& store, const Session& session) {
  const auto& schema = store.network().schema();
  Json trace = Json::array();
  for (const auto& p : session.posteriorTrace) trace.push_back(posterior_to_json(p));
  const Posterior& current = session.current();
  return {{"id", session.id},
          {"k", session.k},
          {"createdAt", iso_time(session.createdAt)},
          {"questions", questions_json(schema, session.questionSet)},
          {"remaining", questions_json(schema, session.remaining())},
          {"answers", session.answered.assignments},
          {"answeredCount", session.answered.size()},
          {"posterior", posterior_to_json(current)},
          {"posteriorTrace", std::move(trace)},
          {"segment", current.levels[static_cast<std::size_t>(current.argmax())]}};
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::UnknownSession: return 404;
    case Errc::AlreadyAnswered:
    case Errc::ConflictingEvidence: return 409;
    case Errc::ModelNotLoaded: return 503;
    case Errc::ZeroProbabilityEvidence:
    case Errc::AllZeroWeights: return 422;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", std::string(code)}, {"message", message}});
}

template <typename Handler>
void guarded(httplib::Response& res, Handler&& handler) {
  try {
    handler();
  } catch (const Error& e) {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "MalformedDocument", e.what());
  }
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json body = Json::parse(req.body);
    if (!body.is_object()) throw Error(Errc::MalformedDocument, "body must be a JSON object");
    return body;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
}

}  // namespace

HttpService::HttpService(SessionStore& store) : server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Get("/healthz", [&store](const httplib::Request&, httplib::Response& res) {
    if (store.model_loaded())
      send_json(res, 200, {{"status", "ok"}});
    else
      send_error(res, 503, "ModelNotLoaded", "no network loaded");
  });

  srv.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      const int k = body.contains("k") ? body.at("k").get<int>() : store.options().defaultK;
      std::optional<std::uint64_t> seed;
      if (body.contains("seed") && !body.at("seed").is_null()) seed = body.at("seed").get<std::uint64_t>();
      const Session s = store.create_session(k, seed);
      const auto& schema = store.network().schema();
      send_json(res, 201,
                {{"id", s.id},
                 {"k", s.k},
                 {"questions", questions_json(schema, s.questionSet)},
                 {"posterior", posterior_to_json(s.current())},
                 {"segment", s.current().levels[static_cast<std::size_t>(s.current().argmax())]}});
    });
  });

  srv.Post(R"(/sessions/([^/]+)/answers)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      if (!body.contains("question") || !body.contains("value"))
        throw Error(Errc::MalformedDocument, "body needs 'question' and 'value'");
      const auto question = body.at("question").get<std::string>();
      const auto value = body.at("value").is_string() ? body.at("value").get<std::string>()
                                                      : body.at("value").dump();
      const AnswerResult r = store.submit_answer(req.matches[1], question, value);
      send_json(res, 200,
                {{"posterior", posterior_to_json(r.posterior)},
                 {"segment", r.segment},
                 {"answeredCount", r.answeredCount},
                 {"remaining", questions_json(store.network().schema(), r.remaining)}});
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, session_to_json(store, store.get_session(req.matches[1]))); });
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_) server_->stop();
}

void HttpService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace askless
