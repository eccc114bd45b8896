#include "racetrack/databuilder.hpp"

#include <algorithm>
#include <cmath>

#include "racetrack/serialization.hpp"

namespace racetrack {

using nlohmann::json;

std::string_view instance_source_name(InstanceSource s) {
  switch (s) {
    case InstanceSource::KnowledgeDialogue: return "knowledge_dialogue";
    case InstanceSource::QA: return "qa";
    case InstanceSource::OnlineService: return "online_service";
  }
  return "knowledge_dialogue";
}

InstanceSource parse_instance_source(std::string_view name) {
  if (name == "knowledge_dialogue") return InstanceSource::KnowledgeDialogue;
  if (name == "qa") return InstanceSource::QA;
  if (name == "online_service") return InstanceSource::OnlineService;
  throw Error(ErrorCode::SchemaViolation, "unknown instance source '" + std::string(name) + "'");
}

BuildMode parse_build_mode(std::string_view name) {
  if (name == "kdialog") return BuildMode::KnowledgeDialogue;
  if (name == "qa") return BuildMode::QA;
  if (name == "service") return BuildMode::Service;
  throw Error(ErrorCode::InvalidArgument, "unknown build mode '" + std::string(name) + "'");
}

void TrainingInstance::validate() const {
  if (labels.size() != pool.size())
    throw Error(ErrorCode::SchemaViolation, "instance has " + std::to_string(pool.size()) + " snippets but " +
                                                std::to_string(labels.size()) + " labels");
  for (int l : labels)
    if (l != 0 && l != 1) throw Error(ErrorCode::SchemaViolation, "knowledge label must be 0 or 1");
  if (!history.ends_with_user())
    throw Error(ErrorCode::SchemaViolation, "instance history must end with a user utterance");
}

namespace {

KnowledgeSnippet positive(std::string text, KnowledgeSource source) {
  if (trim(text).empty()) throw Error(ErrorCode::SchemaViolation, "knowledge text is blank");
  KnowledgeSnippet s;
  s.text = std::move(text);
  s.source = source;
  s.label = 1;
  return s;
}

void add_positive(TrainingInstance& inst, KnowledgeSnippet s) {
  s.label = 1;
  inst.pool.snippets.push_back(std::move(s));
  inst.labels.push_back(1);
}

TrainingInstance build_one(const json& r, BuildMode mode) {
  TrainingInstance inst;
  switch (mode) {
    case BuildMode::KnowledgeDialogue: {
      inst.source = InstanceSource::KnowledgeDialogue;
      inst.history = history_from_json_lenient(r.at("history"));
      inst.response = Utterance::system(r.at("response").get<std::string>());
      const auto& k = r.at("knowledge");
      const json items = k.is_array() ? k : json::array({k});
      for (const auto& item : items) {
        if (item.is_string())
          add_positive(inst, positive(item.get<std::string>(), KnowledgeSource::Benchmark));
        else
          add_positive(inst, snippet_from_json(item));
      }
      break;
    }
    case BuildMode::QA: {
      inst.source = InstanceSource::QA;
      inst.history = DialogueHistory({Utterance::user(r.at("question").get<std::string>())});
      inst.response = Utterance::system(r.at("answer").get<std::string>());
      add_positive(inst, positive(r.at("document").get<std::string>(), KnowledgeSource::QADocument));
      break;
    }
    case BuildMode::Service: {
      inst.source = InstanceSource::OnlineService;
      inst.history = history_from_json_lenient(r.at("history"));
      inst.response = Utterance::system(r.at("response").get<std::string>());
      for (const auto& e : r.at("entities")) {
        auto s = positive(e.at("description").get<std::string>(), KnowledgeSource::EntityDescription);
        if (e.contains("surface")) s.provenance = "entity:" + e.at("surface").get<std::string>();
        add_positive(inst, std::move(s));
      }
      break;
    }
  }
  inst.validate();
  return inst;
}

}  // namespace

std::vector<TrainingInstance> build_instances(const std::vector<json>& records, BuildMode mode) {
  std::vector<TrainingInstance> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(build_one(records[i], mode));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

TrainingInstance inject_negatives(TrainingInstance instance, const std::vector<EntityCandidate>& candidates,
                                  double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must lie in [0,1]");
  for (const auto& c : candidates) {
    if (!(c.confidence < tau)) continue;
    KnowledgeSnippet s;
    s.text = c.description;
    s.source = KnowledgeSource::EntityDescription;
    s.label = 0;
    if (!c.surface.empty()) s.provenance = "entity:" + c.surface;
    instance.pool.snippets.push_back(std::move(s));
    instance.labels.push_back(0);
  }
  return instance;
}

std::string serialize_training_prompt(const TrainingInstance& instance, std::size_t token_budget) {
  return build_knowledge_prompt(instance.pool, instance.history, token_budget).rendered;
}

json to_json(const TrainingInstance& instance) {
  return json{{"history", to_json(instance.history)},
              {"response", instance.response.text()},
              {"pool", to_json(instance.pool)},
              {"labels", instance.labels},
              {"source", instance_source_name(instance.source)}};
}

TrainingInstance instance_from_json(const json& j) {
  try {
    TrainingInstance inst;
    inst.history = history_from_json_lenient(j.at("history"));
    inst.response = Utterance::system(j.at("response").get<std::string>());
    inst.pool = pool_from_json(j.at("pool"));
    inst.labels = j.at("labels").get<std::vector<int>>();
    inst.source = parse_instance_source(j.value("source", "knowledge_dialogue"));
    inst.validate();
    return inst;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaViolation) throw;
    throw Error(ErrorCode::SchemaViolation, e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
}

std::vector<EntityCandidate> candidates_from_json(const json& j) {
  try {
    std::vector<EntityCandidate> out;
    for (const auto& c : j) {
      EntityCandidate e;
      e.surface = c.value("surface", "");
      e.description = c.at("description").get<std::string>();
      e.confidence = c.at("confidence").get<double>();
      if (!(e.confidence >= 0.0 && e.confidence <= 1.0))
        throw Error(ErrorCode::SchemaViolation, "entity confidence must lie in [0,1]");
      if (trim(e.description).empty()) throw Error(ErrorCode::SchemaViolation, "entity description is blank");
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
}

double loss_main(std::span<const double> token_logprobs) {
  double loss = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    const double lp = token_logprobs[i];
    if (!(lp <= 0.0))
      throw Error(ErrorCode::PositiveLogProb, "log probability at position " + std::to_string(i) + " is " +
                                                  std::to_string(lp));
    loss -= lp;
  }
  return loss;
}

double loss_aux(std::span<const int> labels, std::span<const double> scores, AuxLossMode mode) {
  if (labels.size() != scores.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " +
                                               std::to_string(scores.size()) + " scores");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double s = scores[i];
    if (!(s > 0.0 && s < 1.0))
      throw Error(ErrorCode::DegenerateScore, "score at position " + std::to_string(i) + " is " +
                                                  std::to_string(s));
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    if (labels[i] == 1)
      loss -= std::log(s);
    else if (mode == AuxLossMode::FullBCE)
      loss -= std::log1p(-s);
  }
  return loss;
}

LossBreakdown loss_total(double main, double aux, double lambda) {
  if (!std::isfinite(main) || !std::isfinite(aux) || !std::isfinite(lambda))
    throw Error(ErrorCode::InvalidArgument, "loss terms must be finite");
  return {main, aux, lambda, main + lambda * aux};
}

std::vector<TurnTranscript> bootstrap_filter(const std::vector<TurnTranscript>& transcripts, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0,1]");
  std::vector<TurnTranscript> kept;
  for (const auto& t : transcripts) {
    if (!t.knowledge_scores || t.knowledge_scores->empty()) continue;
    if (*std::max_element(t.knowledge_scores->begin(), t.knowledge_scores->end()) >= threshold)
      kept.push_back(t);
  }
  return kept;
}

}  // namespace racetrack
