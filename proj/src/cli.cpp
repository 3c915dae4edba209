#include "askless/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "askless/inference.hpp"
#include "askless/learning.hpp"
#include "askless/network_io.hpp"
#include "askless/reduction.hpp"
#include "askless/rng.hpp"
#include "askless/service.hpp"
#include "askless/survey.hpp"

namespace askless::cli {

namespace {

// Bad flag values detected before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      grid.push_back(k);
    } catch (const std::exception&) {
      throw UsageError("--grid: '" + item + "' is not an integer");
    }
  }
  if (grid.empty()) throw UsageError("--grid must list at least one k");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw UsageError("--grid must be strictly ascending");
  if (grid.front() < 1) throw UsageError("--grid values must be >= 1");
  return grid;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::filesystem::path split_path_for(const std::filesystem::path& networkPath) {
  auto p = networkPath;
  p.replace_extension();
  p += ".split.json";
  return p;
}

// Shuffles row indices with the seed; the first round(fraction * n) are training rows.
std::pair<std::vector<int>, std::vector<int>> partition_rows(long n, double fraction, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<int> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<int> holdout(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(holdout.begin(), holdout.end());
  return {train, holdout};
}

Engine parse_engine(const std::string& text) {
  try {
    return engine_from_string(text);
  } catch (const Error&) {
    throw UsageError("--engine must be exact or lw");
  }
}

std::atomic<HttpService*> g_running_service{nullptr};

extern "C" void handle_stop_signal(int) {
  if (auto* s = g_running_service.load()) s->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"askless: ask fewer survey questions with a Bayesian network segmentation model", "askless"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--seed", globals.seed, "RNG seed (falls back to $ASKLESS_SEED)")->envname("ASKLESS_SEED");
  app.add_flag("--quiet,-q", globals.quiet, "Suppress progress output on standard error");

  // generate
  auto* generate = app.add_subcommand("generate", "Sample a synthetic labeled survey population");
  std::string genSchema = "default", genConfig = "default", genOut;
  std::optional<long> genRows;
  std::optional<double> genNoise;
  generate->add_option("--schema", genSchema, "Schema JSON path or 'default'")->capture_default_str();
  generate->add_option("--config", genConfig, "Generator config JSON path or 'default'")->capture_default_str();
  generate->add_option("--rows", genRows, "Row count (overrides the config)");
  generate->add_option("--noise", genNoise, "Uniform-response mixing weight in [0,1] (overrides the config)");
  generate->add_option("--out", genOut, "Output CSV")->required();

  // learn
  auto* learn = app.add_subcommand("learn", "Learn structure (hill climbing) and CPTs (maximum likelihood)");
  std::string learnData, learnSchema = "default", learnScore = "aic", learnOut, learnHoldout;
  int maxParents = 4, restarts = 0, perturb = 1;
  long maxIter = 1'000'000;
  double alpha = 0.0, split = 1.0;
  learn->add_option("--data", learnData, "Training CSV")->required();
  learn->add_option("--schema", learnSchema, "Schema JSON path or 'default'")->capture_default_str();
  learn->add_option("--score", learnScore, "Structure score: aic or bic")->capture_default_str();
  learn->add_option("--max-parents", maxParents, "Parent cap per node")->capture_default_str();
  learn->add_option("--max-iter", maxIter, "Cap on accepted moves per climb")->capture_default_str();
  learn->add_option("--restarts", restarts, "Random restarts")->capture_default_str();
  learn->add_option("--perturb", perturb, "Random edge flips per restart")->capture_default_str();
  learn->add_option("--alpha", alpha, "Additive smoothing for CPTs (0 = maximum likelihood)")->capture_default_str();
  learn->add_option("--split", split, "Fraction of rows used for learning; the rest is held out")
      ->capture_default_str();
  learn->add_option("--holdout-out", learnHoldout, "Write held-out rows to this CSV");
  learn->add_option("--out", learnOut, "Output network JSON")->required();

  // find-k
  auto* findk = app.add_subcommand("find-k", "Line search for the fewest random questions meeting an F threshold");
  std::string fkNet, fkTest, fkGrid = "5,10,15,20", fkMode = "threshold", fkEngine = "lw", fkPool, fkOut;
  double threshold = 0.70;
  long fkSamples = 5000;
  findk->add_option("--net", fkNet, "Network JSON")->required();
  findk->add_option("--test", fkTest, "Labeled test CSV")->required();
  findk->add_option("--grid", fkGrid, "Ascending candidate k values")->capture_default_str();
  findk->add_option("--threshold", threshold, "Minimum average F-score")->capture_default_str();
  findk->add_option("--mode", fkMode, "threshold (fewest qualifying k) or best (argmax)")->capture_default_str();
  findk->add_option("--engine", fkEngine, "Inference engine: lw (default here) or exact")->capture_default_str();
  findk->add_option("--samples", fkSamples, "Likelihood-weighting samples per query")->capture_default_str();
  findk->add_option("--pool", fkPool, "Comma-separated askable questions (default: every asked question)");
  findk->add_option("--out", fkOut, "Report JSON (standard output when omitted)");

  // evaluate
  auto* evaluateCmd = app.add_subcommand("evaluate", "Score segment predictions on a labeled CSV");
  std::string evNet, evTest, evEngine = "exact", evPool, evOut;
  std::optional<int> evK;
  long evSamples = 5000;
  evaluateCmd->add_option("--net", evNet, "Network JSON")->required();
  evaluateCmd->add_option("--test", evTest, "Labeled test CSV")->required();
  evaluateCmd->add_option("--k", evK, "Random questions per respondent (default: the whole pool)");
  evaluateCmd->add_option("--engine", evEngine, "Inference engine: exact (default here) or lw")->capture_default_str();
  evaluateCmd->add_option("--samples", evSamples, "Likelihood-weighting samples per query")->capture_default_str();
  evaluateCmd->add_option("--pool", evPool, "Comma-separated askable questions");
  evaluateCmd->add_option("--out", evOut, "Report JSON");

  // predict
  auto* predictCmd = app.add_subcommand("predict", "Assign a segment from partial answers");
  std::string prNet, prEvidence, prEngine = "exact";
  long prSamples = 5000;
  predictCmd->add_option("--net", prNet, "Network JSON")->required();
  predictCmd->add_option("--evidence", prEvidence, "Evidence JSON, e.g. {\"PAM\":\"4\"}")->required();
  predictCmd->add_option("--engine", prEngine, "Inference engine: exact (default here) or lw")->capture_default_str();
  predictCmd->add_option("--samples", prSamples, "Likelihood-weighting samples")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP survey sessions with live segment posteriors");
  std::string svNet, svHost = "0.0.0.0", svEngine = "exact";
  int svK = 10, svPort = 8080;
  long svSamples = 5000;
  double ttlHours = 24.0;
  serve->add_option("--net", svNet, "Network JSON")->required();
  serve->add_option("--k", svK, "Default questions per session")->capture_default_str();
  serve->add_option("--port", svPort, "Listen port")->capture_default_str();
  serve->add_option("--host", svHost, "Listen address")->capture_default_str();
  serve->add_option("--engine", svEngine, "Inference engine: exact or lw")->capture_default_str();
  serve->add_option("--samples", svSamples, "Likelihood-weighting samples per query")->capture_default_str();
  serve->add_option("--ttl-hours", ttlHours, "Session lifetime in hours")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const auto note = [&](const std::string& msg) {
    if (!globals.quiet) err << msg << '\n';
  };

  try {
    if (generate->parsed()) {
      if (genRows && *genRows < 0) throw UsageError("--rows must be >= 0");
      if (genNoise && !(*genNoise >= 0.0 && *genNoise <= 1.0)) throw UsageError("--noise must be in [0,1]");
      const SurveySchema schema = load_schema_file(genSchema);
      GeneratorConfig config = load_generator_config(genConfig);
      if (genRows) config.rows = *genRows;
      if (genNoise) config.noise = *genNoise;
      if (globals.seed) config.seed = *globals.seed;
      const Dataset data = generate_synthetic(schema, config);
      write_csv(genOut, data);
      note("wrote " + std::to_string(data.rows()) + " rows to " + genOut);
      return kOk;
    }

    if (learn->parsed()) {
      if (!(split > 0.0 && split <= 1.0)) throw UsageError("--split must be in (0, 1]");
      if (maxParents < 1) throw UsageError("--max-parents must be >= 1");
      if (restarts < 0 || perturb < 0 || maxIter < 0) throw UsageError("--restarts/--perturb/--max-iter must be >= 0");
      if (!(alpha >= 0.0)) throw UsageError("--alpha must be >= 0");
      Criterion criterion;
      try {
        criterion = criterion_from_string(learnScore);
      } catch (const Error&) {
        throw UsageError("--score must be aic or bic");
      }
      const SurveySchema schema = load_schema_file(learnSchema);
      const Dataset all = read_csv(learnData, schema, true);
      const std::uint64_t seed = globals.seed.value_or(0);
      auto [trainRows, holdoutRows] = partition_rows(all.rows(), split, seed);
      const Dataset train = all.subset(trainRows);

      HillClimbConfig hc;
      hc.criterion = criterion;
      hc.maxParents = maxParents;
      hc.maxIterations = maxIter;
      hc.restarts = restarts;
      hc.perturb = perturb;
      hc.seed = seed;
      const HillClimbResult result = hill_climb_traced(train, hc);
      const BayesianNetwork bn = fit_mle(result.dag, train, alpha);
      save_network(bn, learnOut);
      write_json_file({{"seed", seed}, {"split", split}, {"rows", all.rows()}, {"train", trainRows},
                       {"holdout", holdoutRows}},
                      split_path_for(learnOut));
      if (!learnHoldout.empty()) write_csv(learnHoldout, all.subset(holdoutRows));
      note("learned " + std::to_string(result.dag.edges().size()) + " edges from " +
           std::to_string(train.rows()) + " rows (" + std::string(to_string(criterion)) +
           " score " + std::to_string(result.score) + "); wrote " + learnOut);
      return kOk;
    }

    if (findk->parsed() || evaluateCmd->parsed()) {
      const bool isFindK = findk->parsed();
      FindKConfig config;
      config.engine = parse_engine(isFindK ? fkEngine : evEngine);
      config.nSamples = isFindK ? fkSamples : evSamples;
      if (config.nSamples < 1) throw UsageError("--samples must be >= 1");
      config.questionPool = parse_list(isFindK ? fkPool : evPool);
      config.seed = globals.seed.value_or(0);
      if (isFindK) {
        config.grid = parse_grid(fkGrid);
        if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("--threshold must be in (0, 1]");
        config.threshold = threshold;
        try {
          config.mode = selection_mode_from_string(fkMode);
        } catch (const Error&) {
          throw UsageError("--mode must be threshold or best");
        }
      }
      if (evK && *evK < 0) throw UsageError("--k must be >= 0");
      const BayesianNetwork bn = load_network(isFindK ? fkNet : evNet);
      const Dataset test = read_csv(isFindK ? fkTest : evTest, bn.schema(), true);
      const std::string outPath = isFindK ? fkOut : evOut;
      Json doc;
      std::string table;
      if (isFindK) {
        const FindKReport report = find_k(bn, test, config);
        doc = report_to_json(report);
        table = render_table(report);
      } else {
        const int k = evK ? *evK
                          : static_cast<int>(config.questionPool.empty() ? bn.schema().asked_questions().size()
                                                                         : config.questionPool.size());
        const EvaluationReport report = evaluate_with_k(bn, test, k, config);
        doc = report_to_json(report);
        doc["k"] = k;
        table = render_table(report, "Accuracy metrics for k=" + std::to_string(k));
      }
      if (outPath.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        write_json_file(doc, outPath);
        out << table;
      }
      return kOk;
    }

    if (predictCmd->parsed()) {
      const Engine engine = parse_engine(prEngine);
      if (prSamples < 1) throw UsageError("--samples must be >= 1");
      const BayesianNetwork bn = load_network(prNet);
      const Json evDoc = read_json_file(prEvidence);
      if (!evDoc.is_object()) throw Error(Errc::MalformedDocument, prEvidence + ": evidence must be a JSON object");
      Evidence evidence;
      for (const auto& [name, value] : evDoc.items())
        evidence.assignments.emplace(name, value.is_string() ? value.get<std::string>() : value.dump());
      const QueryOptions options{engine, prSamples, globals.seed.value_or(0)};
      const Posterior post = query(bn, bn.schema().label_var(), evidence, options);
      out << post.levels[static_cast<std::size_t>(post.argmax())] << '\n';
      if (!globals.quiet) err << posterior_to_json(post).dump() << '\n';
      return kOk;
    }

    if (serve->parsed()) {
      if (svPort < 0 || svPort > 65535) throw UsageError("--port must be in [0, 65535]");
      if (svK < 1) throw UsageError("--k must be >= 1");
      if (!(ttlHours > 0.0)) throw UsageError("--ttl-hours must be > 0");
      if (svSamples < 1) throw UsageError("--samples must be >= 1");
      ServiceOptions options;
      options.engine = parse_engine(svEngine);
      options.nSamples = svSamples;
      options.ttl = std::chrono::seconds(static_cast<long long>(ttlHours * 3600.0));
      options.defaultK = svK;
      auto bn = std::make_shared<const BayesianNetwork>(load_network(svNet));
      if (static_cast<std::size_t>(svK) > bn->schema().asked_questions().size())
        throw UsageError("--k exceeds the number of askable questions");
      SessionStore store(bn, options);
      HttpService http(store);
      const int port = http.bind(svHost, svPort);
      if (port < 0) throw Error(Errc::Io, "cannot bind " + svHost + ":" + std::to_string(svPort));
      note("serving on " + svHost + ":" + std::to_string(port));
      g_running_service = &http;
      std::signal(SIGINT, handle_stop_signal);
      std::signal(SIGTERM, handle_stop_signal);
      const bool ok = http.listen();
      g_running_service = nullptr;
      return ok ? kOk : kDataError;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace askless::cli
