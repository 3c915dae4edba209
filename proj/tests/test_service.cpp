#include <doctest.h>

#include <algorithm>
#include <set>
#include <thread>

#include "askless/inference.hpp"
#include "askless/network_io.hpp"
#include "askless/service.hpp"
#include "oracles.hpp"

// After Eigen: <resolv.h> defines a `_res` macro.
#include <httplib.h>

using namespace askless;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected askless::Error");
  return Errc::Io;
}

std::shared_ptr<const BayesianNetwork> shared_network() {
  static const auto bn = std::make_shared<const BayesianNetwork>(askless::testing::synthetic_network(42, 4000));
  return bn;
}

// A plausible answer for every asked question, taken from one generated row.
std::map<std::string, std::string> answer_sheet(std::uint64_t seed) {
  auto config = default_generator_config();
  config.rows = 1;
  config.seed = seed;
  const auto row = generate_synthetic(default_schema(), config);
  std::map<std::string, std::string> answers;
  for (const auto& q : default_schema().asked_questions()) {
    const int c = default_schema().require_index(q);
    answers[q] = default_schema()[c].levels[static_cast<std::size_t>(row.values(0, c))];
  }
  return answers;
}

}  // namespace

TEST_CASE("create_session") {
  SessionStore store(shared_network());
  const auto pool = store.question_pool();
  CHECK(pool.size() == 22);

  const auto ten = store.create_session(10);
  CHECK(ten.questionSet.size() == 10);
  CHECK(std::set<std::string>(ten.questionSet.begin(), ten.questionSet.end()).size() == 10);
  for (const auto& q : ten.questionSet)
    CHECK(store.network().schema()[store.network().schema().require_index(q)].role == Role::asked);
  CHECK(ten.posteriorTrace.size() == 1);
  CHECK(ten.id.size() == 32);

  const auto prior = eliminate(store.network(), "SGV2", Evidence{});
  CHECK(total_variation(ten.current(), prior) <= 1e-12);

  const auto full = store.create_session(static_cast<int>(pool.size()));
  CHECK(std::set<std::string>(full.questionSet.begin(), full.questionSet.end()) ==
        std::set<std::string>(pool.begin(), pool.end()));

  CHECK(store.create_session(5, 77).questionSet == store.create_session(5, 77).questionSet);
  CHECK(store.create_session(5, 1).id != store.create_session(5, 1).id);

  CHECK(code_of([&] { store.create_session(23); }) == Errc::KTooLarge);
  CHECK(code_of([&] { store.create_session(0); }) == Errc::InvalidConfig);

  SessionStore empty(nullptr);
  CHECK_FALSE(empty.model_loaded());
  CHECK(code_of([&] { empty.create_session(3); }) == Errc::ModelNotLoaded);
}

TEST_CASE("submit_answer and get_session") {
  SessionStore store(shared_network());
  const auto s = store.create_session(6, 5);
  const auto sheet = answer_sheet(9);

  CHECK(code_of([&] { store.submit_answer("nope", s.questionSet[0], "1"); }) == Errc::UnknownSession);
  CHECK(code_of([&] { store.get_session("nope"); }) == Errc::UnknownSession);
  std::string outside;
  for (const auto& q : store.question_pool())
    if (std::find(s.questionSet.begin(), s.questionSet.end(), q) == s.questionSet.end()) outside = q;
  CHECK(code_of([&] { store.submit_answer(s.id, outside, sheet.at(outside)); }) == Errc::QuestionNotInSet);
  CHECK(code_of([&] { store.submit_answer(s.id, s.questionSet[0], "banana"); }) == Errc::InvalidLevel);

  const auto first = store.submit_answer(s.id, s.questionSet[0], sheet.at(s.questionSet[0]));
  CHECK(first.answeredCount == 1);
  CHECK(first.remaining.size() == 5);
  CHECK(store.get_session(s.id).posteriorTrace.size() == 2);
  CHECK(code_of([&] { store.submit_answer(s.id, s.questionSet[0], sheet.at(s.questionSet[0])); }) ==
        Errc::AlreadyAnswered);

  for (std::size_t i = 1; i < s.questionSet.size(); ++i)
    store.submit_answer(s.id, s.questionSet[i], sheet.at(s.questionSet[i]));
  const auto done = store.get_session(s.id);
  CHECK(done.remaining().empty());
  CHECK(done.posteriorTrace.size() == s.questionSet.size() + 1);
  CHECK(done.answered.assignments.size() == s.questionSet.size());

  // Same answers through predict() give the same segment.
  CHECK(predict(store.network(), "SGV2", done.answered, {}) ==
        done.current().levels[static_cast<std::size_t>(done.current().argmax())]);

  const auto view = session_to_json(store, done);
  CHECK(view.at("remaining").empty());
  CHECK(view.at("posteriorTrace").size() == s.questionSet.size() + 1);
  CHECK(view.at("segment").get<std::string>() == predict(store.network(), "SGV2", done.answered, {}));
}

TEST_CASE("trace consistency and answer-order invariance") {
  SessionStore store(shared_network());
  const auto& bn = store.network();
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto s = store.create_session(8, static_cast<std::uint64_t>(t));
    const auto sheet = answer_sheet(100 + static_cast<std::uint64_t>(t));
    auto order = s.questionSet;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto other = store.create_session(8, static_cast<std::uint64_t>(t));
    for (const auto& q : s.questionSet) store.submit_answer(s.id, q, sheet.at(q));
    for (const auto& q : order) store.submit_answer(other.id, q, sheet.at(q));

    const auto a = store.get_session(s.id);
    const auto b = store.get_session(other.id);
    CHECK(total_variation(a.current(), b.current()) <= 1e-9);

    Evidence prefix;
    for (std::size_t i = 0; i <= s.questionSet.size(); ++i) {
      CHECK(total_variation(a.posteriorTrace[i], eliminate(bn, "SGV2", prefix)) <= 1e-9);
      if (i < s.questionSet.size()) prefix.assignments[s.questionSet[i]] = sheet.at(s.questionSet[i]);
    }
  }
}

TEST_CASE("concurrent sessions stay isolated") {
  SessionStore store(shared_network());
  const int workers = 4;
  std::vector<Session> own;
  for (int w = 0; w < workers; ++w) own.push_back(store.create_session(10, static_cast<std::uint64_t>(w)));
  const auto shared = store.create_session(10, 50);
  const auto sharedSheet = answer_sheet(50);
  const auto untouched = store.create_session(4, 99);

  // Each worker answers its own session and races the others on `shared`;
  // every shared question must be accepted exactly once.
  std::atomic<int> rejected{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      const auto& mine = own[static_cast<std::size_t>(w)];
      const auto sheet = answer_sheet(static_cast<std::uint64_t>(w));
      for (std::size_t i = 0; i < mine.questionSet.size(); ++i) {
        store.submit_answer(mine.id, mine.questionSet[i], sheet.at(mine.questionSet[i]));
        const auto& q = shared.questionSet[i];
        try {
          store.submit_answer(shared.id, q, sharedSheet.at(q));
        } catch (const Error& e) {
          if (e.code() == Errc::AlreadyAnswered) ++rejected;
        }
      }
    });
  }
  for (auto& t : threads) t.join();

  for (int w = 0; w < workers; ++w) {
    const auto s = store.get_session(own[static_cast<std::size_t>(w)].id);
    const auto sheet = answer_sheet(static_cast<std::uint64_t>(w));
    Evidence expected;
    for (const auto& q : s.questionSet) expected.assignments[q] = sheet.at(q);
    CHECK(s.answered.assignments == expected.assignments);
    CHECK(s.posteriorTrace.size() == 11);
    CHECK(total_variation(s.current(), eliminate(store.network(), "SGV2", expected)) <= 1e-9);
  }
  const auto s = store.get_session(shared.id);
  CHECK(s.answered.assignments.size() == 10);
  CHECK(s.posteriorTrace.size() == 11);
  CHECK(rejected.load() == 10 * (workers - 1));
  CHECK(total_variation(s.current(), eliminate(store.network(), "SGV2", s.answered)) <= 1e-9);
  CHECK(store.get_session(untouched.id).posteriorTrace.size() == 1);
}

TEST_CASE("sessions expire after the TTL") {
  ServiceOptions options;
  options.ttl = std::chrono::seconds(60);
  SessionStore store(shared_network(), options);
  const auto s = store.create_session(3);
  CHECK(store.purge_expired(s.createdAt + std::chrono::seconds(30)) == 0);
  CHECK(store.purge_expired(s.createdAt + std::chrono::seconds(61)) == 1);
  CHECK(code_of([&] { store.get_session(s.id); }) == Errc::UnknownSession);
}

TEST_CASE("HTTP API") {
  SessionStore store(shared_network());
  HttpService service(store);
  const int port = service.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { service.listen(); });
  service.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);

  auto created = client.Post("/sessions", R"({"k":4,"seed":3})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto body = Json::parse(created->body);
  const std::string id = body.at("id");
  REQUIRE(body.at("questions").size() == 4);
  const std::string q0 = body.at("questions")[0].at("abbr");
  CHECK(body.at("questions")[0].contains("text"));
  CHECK(body.at("questions")[0].at("levels").is_array());
  CHECK(body.at("posterior").size() == 4);

  const Json answer{{"question", q0}, {"value", body.at("questions")[0].at("levels")[0]}};
  auto answered = client.Post("/sessions/" + id + "/answers", answer.dump(), "application/json");
  REQUIRE(answered);
  CHECK(answered->status == 200);
  const auto ab = Json::parse(answered->body);
  CHECK(ab.at("answeredCount") == 1);
  CHECK(ab.at("remaining").size() == 3);
  double total = 0.0;
  for (const auto& [level, p] : ab.at("posterior").items()) total += p.get<double>();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ab.at("segment").get<std::string>().rfind("S", 0) == 0);

  auto again = client.Post("/sessions/" + id + "/answers", answer.dump(), "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);

  const Json badLevel{{"question", body.at("questions")[1].at("abbr")}, {"value", "nope"}};
  auto bad = client.Post("/sessions/" + id + "/answers", badLevel.dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(Json::parse(bad->body).at("error") == "InvalidLevel");

  auto garbage = client.Post("/sessions", "{not json", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);

  auto tooMany = client.Post("/sessions", R"({"k":99})", "application/json");
  REQUIRE(tooMany);
  CHECK(tooMany->status == 400);

  auto view = client.Get("/sessions/" + id);
  REQUIRE(view);
  CHECK(view->status == 200);
  const auto vb = Json::parse(view->body);
  CHECK(vb.at("remaining").size() == 3);
  CHECK(vb.at("posteriorTrace").size() == 2);

  auto missing = client.Get("/sessions/does-not-exist");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto missingAnswer = client.Post("/sessions/does-not-exist/answers", answer.dump(), "application/json");
  REQUIRE(missingAnswer);
  CHECK(missingAnswer->status == 404);

  service.stop();
  server.join();

  SessionStore noModel(nullptr);
  HttpService down(noModel);
  const int downPort = down.bind("127.0.0.1", 0);
  REQUIRE(downPort > 0);
  std::thread downThread([&] { down.listen(); });
  down.wait_until_ready();
  httplib::Client downClient("127.0.0.1", downPort);
  auto h = downClient.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 503);
  auto c = downClient.Post("/sessions", R"({"k":2})", "application/json");
  REQUIRE(c);
  CHECK(c->status == 503);
  down.stop();
  downThread.join();
}
