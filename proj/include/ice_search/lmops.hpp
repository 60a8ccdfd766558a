#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "errors.hpp"
#include "feature_set.hpp"
#include "random.hpp"

namespace ice_search {

inline const std::vector<std::string>& default_roles() {
  static const std::vector<std::string> roles{
      "Neurologist",
      "Cardiologist",
      "Radiologist",
      "Epidemiologist",
      "Public Health Professional",
      "Pharmacist",
      "Genetic Counselor",
      "Health Informatics Specialist",
      "Data Scientist",
      "Data Analyst",
      "Machine Learning Engineer",
      "Biostatistician",
      "AI/ML Researcher",
      "Data Engineer",
      "Ethical AI Advocate",
      "Nurse",
      "Emergency Medicine Physician",
  };
  return roles;
}

inline constexpr std::string_view kDefaultZeroShotRole = "medical doctor";

// Formats a fraction in [0,1] as a percentage rounded half-up to 3 decimals,
// e.g. 0.884 -> "88.400".
inline std::string format_percent(double fraction) {
  const auto thousandths = static_cast<long long>(std::floor(fraction * 100000.0 + 0.5));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", thousandths / 1000, thousandths % 1000);
  return buf;
}

// Percentage rounded half-up to 3 decimals, as a number.
inline double rounded_percent(double fraction) { return std::floor(fraction * 100000.0 + 0.5) / 1000.0; }

struct PoolEntry {
  std::vector<std::string> feature_names;
  double train_accuracy = 0.0;  // fraction in [0,1]
  double val_accuracy = 0.0;
};

struct PromptSpec {
  std::string task_description;
  std::vector<std::string> feature_universe;
  std::optional<std::vector<PoolEntry>> pool_snapshot;
  std::optional<std::string> role;
};

namespace detail {

inline std::string with_article(const std::string& noun) {
  if (noun.empty()) return noun;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(noun.front())));
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return (vowel ? "an " : "a ") + noun;
}

inline void check_universe(const PromptSpec& spec) {
  if (spec.feature_universe.empty()) throw ConfigError("prompt requires a non-empty feature universe");
}

}  // namespace detail

inline std::string build_zero_shot_prompt(const PromptSpec& spec) {
  detail::check_universe(spec);
  if (spec.pool_snapshot) throw ConfigError("zero-shot prompt takes no pool snapshot");
  const std::string role = spec.role.value_or(std::string(kDefaultZeroShotRole));
  std::ostringstream out;
  out << "Imagine you are " << detail::with_article(role)
      << ". I need you to recommend important features for accurately " << spec.task_description
      << ". Consider the following features: " << join(spec.feature_universe, ", ")
      << ". Think step by step. Selected features:";
  return out.str();
}

// One line per pool entry, best validation accuracy first.
inline std::string format_pool_list(std::vector<PoolEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const PoolEntry& a, const PoolEntry& b) { return a.val_accuracy > b.val_accuracy; });
  std::ostringstream out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << (i + 1) << ". Features: " << join(entries[i].feature_names, ", ")
        << " | Training accuracy: " << format_percent(entries[i].train_accuracy)
        << "% | Validation accuracy: " << format_percent(entries[i].val_accuracy) << "%\n";
  }
  return out.str();
}

inline std::string build_few_shot_prompt(const PromptSpec& spec) {
  detail::check_universe(spec);
  if (!spec.pool_snapshot || spec.pool_snapshot->empty()) throw ConfigError("few-shot prompt requires a non-empty pool");
  if (!spec.role) throw ConfigError("few-shot prompt requires a role");
  for (const auto& e : *spec.pool_snapshot)
    for (const auto& n : e.feature_names)
      if (std::find(spec.feature_universe.begin(), spec.feature_universe.end(), n) == spec.feature_universe.end())
        throw ConfigError("pool entry references unknown feature '" + n + "'");
  std::ostringstream out;
  out << "As " << detail::with_article(*spec.role) << ", recommend important features for " << spec.task_description
      << ". Consider the following features: " << join(spec.feature_universe, ", ")
      << ". Here are the selected features and their corresponding classification accuracy results:\n"
      << format_pool_list(*spec.pool_snapshot) << "Be innovative and think step by step. Features selected:";
  return out.str();
}

namespace detail {

// Lower-cases and maps '_' and '-' to spaces; length-preserving.
inline std::string normalize_for_matching(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '_' || c == '-')
      c = ' ';
    else
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

// Finds the universe's feature names in free text. Matching is
// case-insensitive, treats '_', '-' and ' ' alike, requires word boundaries,
// and consumes longer names first so a name that is part of a longer one is
// not matched inside it.
inline FeatureSet parse_feature_set(std::string_view response, std::span<const std::string> feature_universe) {
  std::string text = detail::normalize_for_matching(response);
  std::vector<std::size_t> order(feature_universe.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return feature_universe[a].size() > feature_universe[b].size();
  });
  std::vector<std::size_t> found;
  for (std::size_t idx : order) {
    const std::string needle = detail::normalize_for_matching(feature_universe[idx]);
    if (needle.empty()) continue;
    bool matched = false;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
      const bool left_ok = pos == 0 || !detail::is_word_char(text[pos - 1]);
      const std::size_t end = pos + needle.size();
      const bool right_ok = end == text.size() || !detail::is_word_char(text[end]);
      if (!left_ok || !right_ok) continue;
      matched = true;
      std::fill(text.begin() + static_cast<std::ptrdiff_t>(pos), text.begin() + static_cast<std::ptrdiff_t>(end), '\x01');
    }
    if (matched) found.push_back(idx);
  }
  if (found.empty()) throw UnparseableResponse("response names no known feature");
  return FeatureSet(std::move(found));
}

inline std::string render_feature_set(const FeatureSet& s, std::span<const std::string> universe) {
  return join(feature_names_of(s, universe), ", ");
}

inline FeatureSet scripted_next(std::span<const FeatureSet> script, std::size_t call_index) {
  if (script.empty()) throw ConfigError("scripted operator requires a non-empty script");
  return script[call_index % script.size()];
}

struct LmEndpoint {
  std::string base_url;
  std::string model_name;
  double temperature = 1.0;
  double top_p = 0.9;
  std::size_t max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds initial_backoff{500};
  std::string api_key_env = "ICE_SEARCH_API_KEY";

  void validate() const {
    if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (top_p < 0.0 || top_p > 1.0) throw ConfigError("top_p must lie in [0, 1]");
  }
};

// Raw bodies of one chat-completion exchange.
struct Exchange {
  std::string request_body;
  std::string response_body;
  int status = 0;
};

inline std::string chat_request_body(const LmEndpoint& endpoint, std::string_view prompt, std::uint64_t seed) {
  nlohmann::json body{{"model", endpoint.model_name},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", endpoint.temperature},
                      {"top_p", endpoint.top_p},
                      {"seed", seed}};
  return body.dump();
}

// Extracts choices[0].message.content; throws ProtocolError otherwise.
inline std::string parse_chat_response(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("chat response is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("chat response content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("chat response lacks choices[0].message.content: ") + e.what());
  }
}

// Posts a single-message chat completion and returns the first choice's
// content. Transport failures and non-2xx statuses are retried up to
// max_retries times with jittered exponential backoff derived from `seed`.
inline std::string complete(const LmEndpoint& endpoint, std::string_view prompt, std::uint64_t seed,
                            Exchange* exchange = nullptr) {
  endpoint.validate();
  std::string origin = endpoint.base_url, prefix;
  if (auto scheme = origin.find("://"); scheme != std::string::npos) {
    if (auto slash = origin.find('/', scheme + 3); slash != std::string::npos) {
      prefix = origin.substr(slash);
      origin.resize(slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const std::string path = prefix + "/chat/completions";
  const std::string body = chat_request_body(endpoint, prompt, seed);
  if (exchange) exchange->request_body = body;

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty())
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

  Rng rng(derive_seed(seed, {0xbac0ff}));
  std::string last_error = "no attempt made";
  for (std::size_t attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      const double scale = std::ldexp(1.0, static_cast<int>(attempt - 1)) * (1.0 + 0.25 * rng.uniform01());
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(endpoint.initial_backoff.count() * scale));
    }
    httplib::Client client(origin);
    const auto secs = endpoint.timeout.count() / 1000, usecs = (endpoint.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (exchange) {
      exchange->status = res->status;
      exchange->response_body = res->body;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    return parse_chat_response(res->body);
  }
  throw OperatorUnavailable("language model endpoint unavailable after " + std::to_string(endpoint.max_retries + 1) +
                            " attempts: " + last_error);
}

enum class CallKind { zero_shot, few_shot };

inline std::string to_string(CallKind k) { return k == CallKind::zero_shot ? "zero_shot" : "few_shot"; }

// Everything an operator needs to answer one prompt. For zero-shot calls
// epoch is 0 and role_index is the draw number.
struct OperatorCall {
  CallKind kind = CallKind::zero_shot;
  std::size_t epoch = 0;
  std::size_t role_index = 0;
  std::string role;
  std::size_t attempt = 0;
  std::uint64_t seed = 0;
  std::string prompt;
};

struct OperatorReply {
  std::string content;
  Exchange exchange;
};

// The crossover/mutation operator. Implementations throw
// OperatorUnavailable or ProtocolError on failure.
class Operator {
 public:
  virtual ~Operator() = default;
  virtual OperatorReply respond(const OperatorCall& call) = 0;
};

class EndpointOperator final : public Operator {
 public:
  explicit EndpointOperator(LmEndpoint endpoint) : endpoint_(std::move(endpoint)) { endpoint_.validate(); }

  OperatorReply respond(const OperatorCall& call) override {
    OperatorReply reply;
    reply.content = complete(endpoint_, call.prompt, call.seed, &reply.exchange);
    return reply;
  }

 private:
  LmEndpoint endpoint_;
};

// Offline stand-in: the i-th call answers with script[i mod len], rendered
// as comma-separated feature names.
class ScriptedOperator final : public Operator {
 public:
  ScriptedOperator(std::vector<FeatureSet> script, std::vector<std::string> universe)
      : script_(std::move(script)), universe_(std::move(universe)) {
    if (script_.empty()) throw ConfigError("scripted operator requires a non-empty script");
    for (const auto& s : script_)
      if (s.empty() || !s.within(universe_.size())) throw ConfigError("script entry outside the feature universe");
  }

  OperatorReply respond(const OperatorCall&) override {
    return {render_feature_set(scripted_next(script_, calls_++), universe_), {}};
  }

  std::size_t calls() const noexcept { return calls_; }

 private:
  std::vector<FeatureSet> script_;
  std::vector<std::string> universe_;
  std::size_t calls_ = 0;
};

// Script file: a JSON array of entries, each an array of feature names or
// indices, or an object {"sets": [...]}.
inline std::vector<FeatureSet> load_script(const std::string& path, std::span<const std::string> universe) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open script file '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("script file '" + path + "' is not valid JSON");
  if (j.is_object()) j = j.value("sets", nlohmann::json::array());
  if (!j.is_array() || j.empty()) throw ConfigError("script must be a non-empty array of feature sets");
  std::vector<FeatureSet> out;
  for (const auto& entry : j) {
    std::vector<std::size_t> members;
    for (const auto& item : entry) {
      if (item.is_number_unsigned()) {
        members.push_back(item.get<std::size_t>());
      } else if (item.is_string()) {
        auto it = std::find(universe.begin(), universe.end(), item.get<std::string>());
        if (it == universe.end()) throw ConfigError("script names unknown feature '" + item.get<std::string>() + "'");
        members.push_back(static_cast<std::size_t>(it - universe.begin()));
      } else {
        throw ConfigError("script entries must be feature names or indices");
      }
    }
    FeatureSet s(std::move(members));
    if (s.empty() || !s.within(universe.size())) throw ConfigError("script entry is empty or out of range");
    out.push_back(std::move(s));
  }
  return out;
}

// One transcript line per operator call.
struct TranscriptRecord {
  std::size_t index = 0;
  OperatorCall call;
  std::string status;  // "ok" | "unavailable" | "protocol_error"
  std::string content;
  std::string error;
  Exchange exchange;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["index"] = index;
    j["kind"] = to_string(call.kind);
    j["epoch"] = call.epoch;
    j["role_index"] = call.role_index;
    j["role"] = call.role;
    j["attempt"] = call.attempt;
    j["seed"] = call.seed;
    j["prompt"] = call.prompt;
    j["status"] = status;
    j["response"] = content;
    j["error"] = error;
    j["request_body"] = exchange.request_body;
    j["response_body"] = exchange.response_body;
    j["http_status"] = exchange.status;
    return j;
  }

  static TranscriptRecord from_json(const nlohmann::json& j) {
    TranscriptRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.call.kind = j.at("kind").get<std::string>() == "zero_shot" ? CallKind::zero_shot : CallKind::few_shot;
    r.call.epoch = j.at("epoch").get<std::size_t>();
    r.call.role_index = j.at("role_index").get<std::size_t>();
    r.call.role = j.at("role").get<std::string>();
    r.call.attempt = j.at("attempt").get<std::size_t>();
    r.call.seed = j.at("seed").get<std::uint64_t>();
    r.call.prompt = j.at("prompt").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.content = j.at("response").get<std::string>();
    r.error = j.value("error", std::string());
    r.exchange.request_body = j.value("request_body", std::string());
    r.exchange.response_body = j.value("response_body", std::string());
    r.exchange.status = j.value("http_status", 0);
    return r;
  }
};

// Forwards to another operator and appends every call, including failures,
// to a JSON-lines transcript.
class TranscriptRecorder final : public Operator {
 public:
  TranscriptRecorder(Operator& inner, std::ostream& out) : inner_(inner), out_(out) {}

  OperatorReply respond(const OperatorCall& call) override {
    TranscriptRecord rec;
    rec.index = count_++;
    rec.call = call;
    try {
      OperatorReply reply = inner_.respond(call);
      rec.status = "ok";
      rec.content = reply.content;
      rec.exchange = reply.exchange;
      write(rec);
      return reply;
    } catch (const OperatorUnavailable& e) {
      rec.status = "unavailable";
      rec.error = e.what();
      write(rec);
      throw;
    } catch (const ProtocolError& e) {
      rec.status = "protocol_error";
      rec.error = e.what();
      write(rec);
      throw;
    }
  }

 private:
  void write(const TranscriptRecord& rec) { out_ << rec.to_json().dump() << '\n' << std::flush; }

  Operator& inner_;
  std::ostream& out_;
  std::size_t count_ = 0;
};

// Answers calls from a recorded transcript, in order. Each call must match
// the recorded call's position (kind, epoch, role, attempt) and prompt.
class ReplayOperator final : public Operator {
 public:
  explicit ReplayOperator(std::vector<TranscriptRecord> records) : records_(std::move(records)) {}

  static ReplayOperator from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open transcript '" + path + "'");
    std::vector<TranscriptRecord> records;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ConfigError("transcript '" + path + "' has a malformed line");
      records.push_back(TranscriptRecord::from_json(j));
    }
    return ReplayOperator(std::move(records));
  }

  OperatorReply respond(const OperatorCall& call) override {
    if (next_ >= records_.size()) throw ConfigError("transcript exhausted at call " + std::to_string(next_));
    const TranscriptRecord& rec = records_[next_++];
    if (rec.call.kind != call.kind || rec.call.epoch != call.epoch || rec.call.role_index != call.role_index ||
        rec.call.attempt != call.attempt || rec.call.prompt != call.prompt)
      throw ConfigError("transcript diverges from the run at call " + std::to_string(rec.index));
    if (rec.status == "unavailable") throw OperatorUnavailable(rec.error);
    if (rec.status == "protocol_error") throw ProtocolError(rec.error);
    return {rec.content, rec.exchange};
  }

  std::size_t remaining() const noexcept { return records_.size() - next_; }

 private:
  std::vector<TranscriptRecord> records_;
  std::size_t next_ = 0;
};

}  // namespace ice_search
