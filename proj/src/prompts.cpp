#include "racetrack/prompts.hpp"

namespace racetrack {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += kItemSeparator;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view text, std::string_view sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + sep.size();
  }
  return out;
}

void require_pipeline_input(const DialogueHistory& history) {
  if (history.empty()) throw Error(ErrorCode::EmptyHistory, "dialogue history is empty");
  if (!history.ends_with_user())
    throw Error(ErrorCode::InvalidHistory, "dialogue history must end with a user utterance");
}

std::string render(PromptKind kind, const std::vector<std::string>& background,
                   const DialogueHistory& history) {
  std::string out;
  if (kind == PromptKind::KnowledgeResponse) {
    out += kBackgroundLabel;
    out += join(background);
    out += kSegmentTerminator;
  }
  out += kDialogueLabel;
  out += join(history.texts());
  switch (kind) {
    case PromptKind::Query:
      out += kSegmentTerminator;
      out += kSearchCue;
      out += ' ';
      out += kMaskToken;
      break;
    case PromptKind::NeedKnowledge:
      out += kSegmentTerminator;
      out += kNeedKnowledgeCue;
      out += ' ';
      out += kMaskToken;
      break;
    case PromptKind::Response:
    case PromptKind::KnowledgeResponse:
      out += kItemSeparator;
      out += kMaskToken;
      break;
  }
  return out;
}

PromptTemplate build(PromptKind kind, const std::vector<std::string>& background,
                     const DialogueHistory& history, std::size_t token_budget) {
  require_pipeline_input(history);
  DialogueHistory fitted = history;
  std::string rendered = render(kind, background, fitted);
  while (token_budget > 0 && fitted.size() > 1 && prompt_token_count(rendered) > token_budget) {
    fitted = fitted.without_oldest(2);
    rendered = render(kind, background, fitted);
  }
  return {kind, std::move(rendered)};
}

}  // namespace

std::string_view prompt_kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::Query: return "query";
    case PromptKind::Response: return "response";
    case PromptKind::KnowledgeResponse: return "knowledge_response";
    case PromptKind::NeedKnowledge: return "need_knowledge";
  }
  return "response";
}

std::size_t prompt_token_count(std::string_view rendered) {
  return tokenize(rendered, TokenScheme::CharCJKWordLatin).size();
}

PromptTemplate build_query_prompt(const DialogueHistory& history, std::size_t token_budget) {
  return build(PromptKind::Query, {}, history, token_budget);
}

PromptTemplate build_response_prompt(const DialogueHistory& history, std::size_t token_budget) {
  return build(PromptKind::Response, {}, history, token_budget);
}

PromptTemplate build_knowledge_prompt(const KnowledgePool& pool, const DialogueHistory& history,
                                      std::size_t token_budget) {
  return build(PromptKind::KnowledgeResponse, pool.texts(), history, token_budget);
}

PromptTemplate build_need_knowledge_prompt(const DialogueHistory& history,
                                           std::size_t token_budget) {
  return build(PromptKind::NeedKnowledge, {}, history, token_budget);
}

DialogueHistory fit_history_to_budget(const DialogueHistory& history, std::size_t token_budget,
                                      const std::vector<std::string>& background) {
  require_pipeline_input(history);
  const auto kind = background.empty() ? PromptKind::Response : PromptKind::KnowledgeResponse;
  DialogueHistory fitted = history;
  while (token_budget > 0 && fitted.size() > 1 &&
         prompt_token_count(render(kind, background, fitted)) > token_budget)
    fitted = fitted.without_oldest(2);
  return fitted;
}

std::optional<ParsedKnowledgePrompt> parse_knowledge_prompt(std::string_view rendered) {
  if (!rendered.starts_with(kBackgroundLabel)) return std::nullopt;
  rendered.remove_prefix(kBackgroundLabel.size());

  std::string dialogue_marker(kSegmentTerminator);
  dialogue_marker += kDialogueLabel;
  const auto marker = rendered.find(dialogue_marker);
  if (marker == std::string_view::npos) return std::nullopt;

  std::string tail(kItemSeparator);
  tail += kMaskToken;
  std::string_view dialogue = rendered.substr(marker + dialogue_marker.size());
  if (!dialogue.ends_with(tail)) return std::nullopt;
  dialogue.remove_suffix(tail.size());

  ParsedKnowledgePrompt parsed;
  parsed.snippets = split(rendered.substr(0, marker), kItemSeparator);
  parsed.utterances = split(dialogue, kItemSeparator);
  return parsed;
}

std::optional<PromptKind> classify_prompt(std::string_view rendered) {
  if (rendered.starts_with(kBackgroundLabel)) return PromptKind::KnowledgeResponse;
  if (!rendered.starts_with(kDialogueLabel)) return std::nullopt;
  std::string query_tail(kSegmentTerminator);
  query_tail += kSearchCue;
  query_tail += ' ';
  query_tail += kMaskToken;
  if (rendered.ends_with(query_tail)) return PromptKind::Query;
  std::string need_tail(kSegmentTerminator);
  need_tail += kNeedKnowledgeCue;
  need_tail += ' ';
  need_tail += kMaskToken;
  if (rendered.ends_with(need_tail)) return PromptKind::NeedKnowledge;
  std::string response_tail(kItemSeparator);
  response_tail += kMaskToken;
  if (rendered.ends_with(response_tail)) return PromptKind::Response;
  return std::nullopt;
}

}  // namespace racetrack
