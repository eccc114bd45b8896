// Command-line entry point: the arena server, log replay, a mock backend
// server and the offline metrics/eval/data tools.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "racetrack/config.hpp"
#include "racetrack/databuilder.hpp"
#include "racetrack/evalkit.hpp"
#include "racetrack/events.hpp"
#include "racetrack/http_backends.hpp"
#include "racetrack/metrics.hpp"
#include "racetrack/serialization.hpp"
#include "racetrack/service.hpp"

using namespace racetrack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path);
  out << content;
}

/// A bot from the configuration, or the built-in "echo" bot when no
/// configuration is available.
TurnFn resolve_bot(const std::string& config_flag, const std::string& name, std::size_t pool_size) {
  std::string config_path;
  try {
    config_path = resolve_config_path(config_flag);
  } catch (const Error&) {
    if (name != "echo") throw;
  }
  auto clock = std::make_shared<SteadyClock>();
  if (config_path.empty()) {
    PipelineBackends b{std::make_shared<EchoGenerator>(), nullptr};
    return make_turn_fn(b, PipelineMode::NoKnowledge, clock);
  }
  const auto config = load_config(config_path);
  for (const auto& bot : config.bots) {
    if (bot.bot_id != name) continue;
    PipelineBackends b;
    b.generator = make_generator(config.generators.at(bot.generator));
    if (auto it = config.search.find(bot.search); it != config.search.end()) b.search = make_search(it->second);
    PipelineOptions options;
    options.pool_size = pool_size ? pool_size : config.pool_size;
    options.token_budget = config.token_budget;
    return make_turn_fn(b, bot.mode, clock, options);
  }
  throw Error(ErrorCode::ConfigError, "no bot named '" + name + "' in " + config_path);
}

std::shared_ptr<Embedder> resolve_embedder(const std::string& url) {
  if (url.empty()) return std::make_shared<HashedTrigramEmbedder>();
  return std::make_shared<HttpEmbedder>(HttpEndpoint{url});
}

ApiServer* g_api = nullptr;
BackendServer* g_backend = nullptr;

void on_signal(int) {
  if (g_api) g_api->stop();
  if (g_backend) g_backend->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arena-style implicit evaluation for knowledge-grounded dialogue bots"};
  app.require_subcommand(1);
  std::string config_flag;

  // serve
  auto* serve = app.add_subcommand("serve", "Run the arena HTTP service");
  serve->add_option("--config", config_flag, "Service configuration file");

  // replay
  std::string replay_log;
  auto* replay_cmd = app.add_subcommand("replay", "Rebuild arena state from an event log and print rankings");
  replay_cmd->add_option("--log", replay_log, "Event log (JSON Lines)")->required();

  // mock-backend
  std::string mock_host = "127.0.0.1";
  int mock_port = 9000;
  std::string mock_corpus;
  int mock_delay_ms = 0;
  auto* mock = app.add_subcommand("mock-backend", "Serve echo generation, corpus search and hashed embeddings");
  mock->add_option("--host", mock_host);
  mock->add_option("--port", mock_port);
  mock->add_option("--corpus", mock_corpus, "Snippet file, one per line");
  mock->add_option("--delay-ms", mock_delay_ms, "Latency added to every call");

  // metrics eval
  auto* metrics = app.add_subcommand("metrics", "Automatic metrics");
  metrics->require_subcommand(1);
  std::string cand_path, ref_path, report_path, idf_path, bp_name = "standard", embedder_url;
  auto* metrics_eval = metrics->add_subcommand("eval", "Score candidates against references, line by line");
  metrics_eval->add_option("--candidates", cand_path)->required();
  metrics_eval->add_option("--references", ref_path)->required();
  metrics_eval->add_option("--report", report_path)->required();
  metrics_eval->add_option("--idf", idf_path, "token<TAB>weight file for Bert-Score");
  metrics_eval->add_option("--bp", bp_name, "Brevity penalty: standard or verbatim")
      ->check(CLI::IsMember({"standard", "verbatim"}));
  metrics_eval->add_option("--embedder-url", embedder_url, "Remote token embedder (default: hashed trigrams)");

  // eval
  auto* eval = app.add_subcommand("eval", "Offline evaluation");
  eval->require_subcommand(1);
  std::string openings_path, bot_name, out_dir, dataset_path, annotations_path;
  std::size_t turns = 0, workers = 1, pool_size = 0;
  auto* selfchat = eval->add_subcommand("selfchat", "Let a bot talk to itself from each opening");
  selfchat->add_option("--openings", openings_path)->required();
  selfchat->add_option("--bot", bot_name)->required();
  selfchat->add_option("--turns", turns)->required()->check(CLI::PositiveNumber);
  selfchat->add_option("--out", out_dir)->required();
  selfchat->add_option("--config", config_flag);
  auto* bench = eval->add_subcommand("bench", "Run a bot on a benchmark and score it");
  bench->add_option("--dataset", dataset_path)->required();
  bench->add_option("--bot", bot_name)->required();
  bench->add_option("--report", report_path)->required();
  bench->add_option("--config", config_flag);
  bench->add_option("--workers", workers);
  bench->add_option("--pool-size", pool_size);
  bench->add_option("--embedder-url", embedder_url);
  auto* stats = eval->add_subcommand("stats", "Dataset statistics");
  stats->add_option("--dataset", dataset_path)->required();
  auto* annotations = eval->add_subcommand("annotations", "Aggregate human scores");
  annotations->add_option("--in", annotations_path)->required();

  // data build
  auto* data = app.add_subcommand("data", "Training data");
  data->require_subcommand(1);
  std::string in_path, mode_name, negatives_path, out_path;
  double tau = 0.5;
  auto* build = data->add_subcommand("build", "Build training instances");
  build->add_option("--in", in_path)->required();
  build->add_option("--mode", mode_name)->required()->check(CLI::IsMember({"kdialog", "qa", "service"}));
  build->add_option("--negatives", negatives_path, "JSON Lines of {index, candidates}");
  build->add_option("--tau", tau)->check(CLI::Range(0.0, 1.0));
  build->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto config = load_config(resolve_config_path(config_flag));
      auto service = Service::from_config(config);
      ApiServer api(*service);
      g_api = &api;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on " << config.host << ":" << config.port << "\n";
      api.listen(config.host, config.port);
    } else if (*replay_cmd) {
      std::ifstream in(replay_log);
      if (!in) throw Error(ErrorCode::NotFound, "cannot open " + replay_log);
      const auto events = read_events(in);
      const auto store = replay(events);
      json rows = json::array();
      for (const auto& e : ranking(store))
        rows.push_back({{"bot_id", e.bot_id}, {"selections", e.selections}, {"valid_sessions", e.valid_sessions}});
      std::cout << json{{"events", events.size()}, {"sessions", store.size()}, {"ranking", rows}}.dump(2) << "\n";
    } else if (*mock) {
      std::vector<KnowledgeSnippet> docs;
      if (!mock_corpus.empty())
        for (const auto& line : read_lines(mock_corpus))
          if (!trim(line).empty()) {
            KnowledgeSnippet s;
            s.text = trim(line);
            docs.push_back(std::move(s));
          }
      MockLatency latency;
      latency.delay = std::chrono::milliseconds(mock_delay_ms);
      BackendServer server(std::make_shared<EchoGenerator>(latency), std::make_shared<CorpusSearch>(docs, latency),
                           std::make_shared<HashedTrigramEmbedder>(kDefaultEmbeddingDimension, latency));
      g_backend = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "mock backend on " << mock_host << ":" << mock_port << "\n";
      server.listen(mock_host, mock_port);
    } else if (*metrics_eval) {
      const auto cands = read_lines(cand_path);
      const auto refs = read_lines(ref_path);
      if (cands.size() != refs.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(cands.size()) + " candidates for " +
                                                   std::to_string(refs.size()) + " references");
      MetricConfig config;
      config.bleu.bp_mode = bp_name == "verbatim" ? BrevityPenaltyMode::PaperVerbatim : BrevityPenaltyMode::Standard;
      if (!idf_path.empty()) config.idf = IdfTable::load(idf_path);
      auto embedder = resolve_embedder(embedder_url);
      std::vector<MetricReport> per_pair;
      for (std::size_t i = 0; i < cands.size(); ++i) per_pair.push_back(evaluate_pair(cands[i], refs[i], config, *embedder));
      json rows = json::array();
      for (const auto& r : per_pair) rows.push_back(to_json(r));
      const json report{{"pairs", per_pair.size()}, {"corpus", to_json(corpus_mean(per_pair))}, {"per_pair", rows}};
      write_file(report_path, report.dump(2) + "\n");
      std::cout << report["corpus"].dump(2) << "\n";
    } else if (*selfchat) {
      const auto pool = OpeningPool::load(openings_path);
      const auto bot = resolve_bot(config_flag, bot_name, 0);
      fs::create_directories(out_dir);
      for (const auto& o : pool.entries) {
        const auto dialogue = self_chat(o.text, bot, turns);
        const json doc{{"opening_id", o.id}, {"bot", bot_name}, {"utterances", to_json(dialogue)}};
        write_file((fs::path(out_dir) / (o.id + ".json")).string(), doc.dump(2) + "\n");
      }
      std::cout << "wrote " << pool.entries.size() << " dialogues to " << out_dir << "\n";
    } else if (*bench) {
      const auto examples = load_benchmark(dataset_path);
      const auto bot = resolve_bot(config_flag, bot_name, pool_size);
      auto embedder = resolve_embedder(embedder_url);
      const auto report = evaluate_benchmark(examples, bot, MetricConfig{}, *embedder, workers);
      json out{{"examples", examples.size()}, {"corpus", to_json(report.corpus)}};
      auto hist = [](const SimilarityHistogram& h) {
        return json{{"edges", h.edges}, {"counts", h.counts}, {"mean", h.mean}, {"scores", h.scores.size()}};
      };
      if (report.query_similarity) out["query_similarity"] = hist(*report.query_similarity);
      if (report.knowledge_similarity) out["knowledge_similarity"] = hist(*report.knowledge_similarity);
      write_file(report_path, out.dump(2) + "\n");
      std::cout << out["corpus"].dump(2) << "\n";
    } else if (*stats) {
      std::ifstream in(dataset_path);
      if (!in) throw Error(ErrorCode::NotFound, "cannot open " + dataset_path);
      std::cout << to_json(dataset_stats(in)).dump(2) << "\n";
    } else if (*annotations) {
      std::ifstream in(annotations_path);
      if (!in) throw Error(ErrorCode::NotFound, "cannot open " + annotations_path);
      std::cout << to_json(aggregate_annotations(parse_annotations(in))).dump(2) << "\n";
    } else if (*build) {
      auto instances = build_instances(read_jsonl(in_path), parse_build_mode(mode_name));
      if (!negatives_path.empty()) {
        for (const auto& row : read_jsonl(negatives_path)) {
          const auto index = row.at("index").get<std::size_t>();
          if (index >= instances.size())
            throw Error(ErrorCode::SchemaViolation, "negatives refer to missing instance " + std::to_string(index));
          instances[index] = inject_negatives(std::move(instances[index]), candidates_from_json(row.at("candidates")), tau);
        }
      }
      std::ofstream out(out_path);
      if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + out_path);
      for (const auto& inst : instances) out << to_json(inst).dump() << "\n";
      std::cout << "wrote " << instances.size() << " instances to " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
