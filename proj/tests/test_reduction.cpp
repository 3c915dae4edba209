#include <doctest.h>

#include <cmath>
#include <set>

#include "askless/learning.hpp"
#include "askless/reduction.hpp"
#include "askless/survey.hpp"

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

double round2(double x) { return std::round(x * 100.0) / 100.0; }

EvaluationReport stub_report(double f) {
  EvaluationReport r;
  r.macroPrecision = f;
  r.macroRecall = f;
  r.macroF = f;
  r.fOfMacroPR = f;
  return r;
}

std::function<EvaluationReport(int)> table(std::map<int, double> values) {
  return [values](int k) { return stub_report(values.at(k)); };
}

}  // namespace

TEST_CASE("f_score") {
  CHECK(f_score(0.68, 0.79) == doctest::Approx(0.7309).epsilon(1e-4));
  CHECK(round2(f_score(0.68, 0.79)) == 0.73);
  CHECK(f_score(1.0, 1.0) == 1.0);
  CHECK(f_score(0.0, 0.0) == 0.0);
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    CHECK(f_score(p, p) == doctest::Approx(p).epsilon(1e-12));
    for (double r = 0.0; r <= 1.0; r += 0.05) {
      CHECK(f_score(p, r) == f_score(r, p));
      CHECK(f_score(p, r) <= std::max(p, r) + 1e-12);
      CHECK(f_score(p, r) >= 0.0);
    }
  }
}

TEST_CASE("evaluate examples") {
  const std::vector<std::string> classes{"S1", "S2"};
  const std::vector<std::string> labels{"S1", "S1", "S2", "S2"};
  const std::vector<std::string> preds{"S1", "S2", "S2", "S2"};
  const auto r = evaluate(preds, labels, classes);
  CHECK(r.perClass[0].precision == 1.0);
  CHECK(r.perClass[0].recall == 0.5);
  CHECK(r.perClass[0].fScore == doctest::Approx(2.0 / 3.0));
  CHECK(r.perClass[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.perClass[1].recall == 1.0);
  CHECK(r.perClass[1].fScore == doctest::Approx(0.8));
  CHECK(r.confusion(0, 0) == 1);
  CHECK(r.confusion(0, 1) == 1);
  CHECK(r.confusion(1, 1) == 2);
  CHECK(r.macroF == doctest::Approx((2.0 / 3.0 + 0.8) / 2));
  CHECK(r.fOfMacroPR == doctest::Approx(f_score(r.macroPrecision, r.macroRecall)));

  const std::vector<std::string> four{"S1", "S2", "S3", "S4"};
  const std::vector<std::string> same{"S4", "S1", "S3", "S2", "S1"};
  const auto id = evaluate(same, same, four);
  for (const auto& m : id.perClass) {
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.fScore == 1.0);
  }
  CHECK(id.fOfMacroPR == 1.0);
  CHECK(id.confusion.isApprox(Eigen::MatrixXi(id.confusion.diagonal().asDiagonal())));

  CHECK(code_of([&] { evaluate(std::span(preds).first(3), labels, classes); }) == Errc::LengthMismatch);
  CHECK(code_of([&] {
          evaluate(std::vector<std::string>{}, std::vector<std::string>{}, classes);
        }) == Errc::LengthMismatch);
  CHECK(code_of([&] {
          evaluate(std::vector<std::string>{"S9"}, std::vector<std::string>{"S1"}, classes);
        }) == Errc::UnknownClass);
}

TEST_CASE("table aggregate uses the harmonic mean of macro precision and recall") {
  CHECK(f_score(0.75, 0.74) == doctest::Approx(0.745).epsilon(1e-3));
  CHECK(round2(f_score(0.75, 0.74)) == 0.74);
}

TEST_CASE("confusion identities on random predictions") {
  Rng rng(6);
  const std::vector<std::string> classes{"S1", "S2", "S3", "S4"};
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> labels(n), preds(n);
    long correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(4));
      preds[i] = rng.uniform() < 0.6 ? labels[i] : static_cast<int>(rng.below(4));
      correct += preds[i] == labels[i];
    }
    const auto r = evaluate(preds, labels, classes);
    CHECK(r.confusion.diagonal().sum() == correct);
    long total = 0;
    for (int c = 0; c < 4; ++c) {
      CHECK(r.confusion.row(c).sum() == r.perClass[c].support);
      total += r.perClass[c].support;
      for (double m : {r.perClass[c].precision, r.perClass[c].recall, r.perClass[c].fScore})
        CHECK((m >= 0.0 && m <= 1.0));
    }
    CHECK(total == static_cast<long>(n));
    for (double m : {r.macroPrecision, r.macroRecall, r.macroF, r.fOfMacroPR}) CHECK((m >= 0.0 && m <= 1.0));
  }
}

TEST_CASE("random_subset") {
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back("Q" + std::to_string(i));
  Rng rng(3);
  const auto all = random_subset(pool, pool.size(), rng);
  CHECK(std::set<std::string>(all.begin(), all.end()) == std::set<std::string>(pool.begin(), pool.end()));
  CHECK(random_subset(pool, 0, rng).empty());
  CHECK(code_of([&] { random_subset(pool, 11, rng); }) == Errc::KTooLarge);

  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) CHECK(random_subset(pool, 4, a) == random_subset(pool, 4, b));

  std::map<std::string, long> freq;
  Rng u(2024);
  const long draws = 100000;
  for (long i = 0; i < draws; ++i) ++freq[random_subset(pool, 1, u).front()];
  for (const auto& q : pool) {
    const double f = static_cast<double>(freq[q]) / draws;
    CHECK(f >= 0.09);
    CHECK(f <= 0.11);
  }
}

TEST_CASE("find_k selection on injected per-k averages") {
  FindKConfig config;
  config.grid = {5, 10, 20};
  config.threshold = 0.70;
  const auto evaluator = table({{5, 0.63}, {10, 0.74}, {20, 0.85}});

  config.mode = SelectionMode::threshold;
  const auto t = find_k(config, evaluator);
  REQUIRE(t.chosenK.has_value());
  CHECK(*t.chosenK == 10);
  CHECK(t.perK.size() == 3);
  CHECK_FALSE(t.trace.empty());

  config.mode = SelectionMode::best;
  const auto b = find_k(config, evaluator);
  REQUIRE(b.chosenK.has_value());
  CHECK(*b.chosenK == 20);

  config.mode = SelectionMode::threshold;
  config.threshold = 0.90;
  CHECK_FALSE(find_k(config, evaluator).chosenK.has_value());

  config.mode = SelectionMode::best;
  const auto tie = find_k(config, table({{5, 0.7}, {10, 0.8}, {20, 0.8}}));
  CHECK(*tie.chosenK == 10);
}

TEST_CASE("threshold and best agree when only the argmax qualifies") {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    FindKConfig config;
    config.grid = {2, 4, 6, 8, 10};
    config.threshold = 0.5 + 0.4 * rng.uniform();
    std::map<int, double> values;
    const int argmax = config.grid[rng.below(config.grid.size())];
    for (int k : config.grid) values[k] = config.threshold * rng.uniform() * 0.999;
    values[argmax] = config.threshold + (1.0 - config.threshold) * rng.uniform();
    config.mode = SelectionMode::threshold;
    const auto a = find_k(config, table(values));
    config.mode = SelectionMode::best;
    const auto b = find_k(config, table(values));
    CHECK(a.chosenK == b.chosenK);
    CHECK(*a.chosenK == argmax);
  }
}

TEST_CASE("find_k config validation") {
  FindKConfig config;
  const auto evaluator = table({{5, 0.5}});
  config.grid = {};
  CHECK(code_of([&] { find_k(config, evaluator); }) == Errc::InvalidConfig);
  config.grid = {10, 5};
  CHECK(code_of([&] { find_k(config, evaluator); }) == Errc::InvalidConfig);
  config.grid = {0};
  CHECK(code_of([&] { find_k(config, evaluator); }) == Errc::InvalidConfig);
  config.grid = {5};
  config.threshold = 0.0;
  CHECK(code_of([&] { find_k(config, evaluator); }) == Errc::InvalidConfig);
  CHECK(selection_mode_from_string("best") == SelectionMode::best);
  CHECK(code_of([] { selection_mode_from_string("worst"); }) == Errc::InvalidConfig);
}

TEST_CASE("find_k on the synthetic population") {
  const auto& schema = default_schema();
  const int pool = static_cast<int>(schema.asked_questions().size());
  std::map<int, double> mean;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    auto gen = default_generator_config();
    gen.rows = 12000;
    gen.seed = static_cast<std::uint64_t>(seed);
    const auto all = generate_synthetic(schema, gen);
    std::vector<int> trainRows, testRows;
    for (int r = 0; r < static_cast<int>(all.rows()); ++r) (r < 10000 ? trainRows : testRows).push_back(r);
    const auto train = all.subset(trainRows);
    const auto test = all.subset(testRows);
    const auto bn = fit_mle(hill_climb(train, {}), train);

    FindKConfig config;
    config.grid = {5, 10, pool};
    config.engine = Engine::exact;
    config.seed = static_cast<std::uint64_t>(seed);
    const auto report = find_k(bn, test, config);
    REQUIRE(report.perK.size() == 3);
    for (const auto& [k, r] : report.perK) mean[k] += r.fOfMacroPR / seeds;
    CHECK(report.perK.at(5).fOfMacroPR < report.perK.at(10).fOfMacroPR);
    CHECK(report.perK.at(10).fOfMacroPR < report.perK.at(pool).fOfMacroPR);

    if (seed == 1) {
      const auto again = find_k(bn, test, config);
      for (const auto& [k, r] : report.perK) {
        CHECK(again.perK.at(k).confusion == r.confusion);
        CHECK(again.perK.at(k).fOfMacroPR == r.fOfMacroPR);
      }
      CHECK(report_to_json(again).dump() == report_to_json(report).dump());

      FindKConfig full = config;
      full.grid = {pool};
      const auto single = find_k(bn, test, full);
      CHECK(single.perK.at(pool).confusion == report.perK.at(pool).confusion);
      CHECK(single.chosenK.has_value() == (single.perK.at(pool).fOfMacroPR >= full.threshold));

      full.grid = {pool + 1};
      CHECK(code_of([&] { find_k(bn, test, full); }) == Errc::KTooLarge);
      Dataset unlabeled = test;
      unlabeled.values.col(schema.label_index()).setConstant(-1);
      CHECK(code_of([&] { find_k(bn, unlabeled, config); }) == Errc::UnlabeledTestSet);
    }
  }
  CHECK(mean[5] < mean[10]);
  CHECK(mean[10] < mean[pool]);
}

TEST_CASE("render_table lists every segment and the average row") {
  const std::vector<std::string> classes{"S1", "S2", "S3", "S4"};
  const std::vector<int> labels{0, 1, 2, 3, 0, 1};
  const std::vector<int> preds{0, 1, 2, 2, 0, 0};
  const auto text = render_table(evaluate(preds, labels, classes), "k=5");
  for (const auto& c : classes) CHECK(text.find(c) != std::string::npos);
  CHECK(text.find("Average") != std::string::npos);
  CHECK(text.find("F-Score") != std::string::npos);
}
