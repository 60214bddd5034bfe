#include "omni/prompt.hpp"

#include "omni/config.hpp"
#include "omni/error.hpp"
#include "omni/geometry.hpp"
#include "omni/text.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

namespace omni {
namespace {

const std::map<std::string, std::string>& builtin_files() {
  static const std::map<std::string, std::string> files{
      {"task_binary.txt",
       "You will be shown descriptions of two geographic places, A and B. Decide whether A and B refer to the "
       "same real-world place. Answer with \"Yes\" or \"No\" only.\n"},
      {"task_multiclass.txt",
       "You will be shown descriptions of two geographic places, A and B. Decide how A relates to B. Answer with "
       "exactly one label: same_as (A and B are the same place), part_of (A is part of B), serves (A provides a "
       "service to B) or unknown (none of these).\n"},
      {"pair_simple.txt", "Place A: {{entity_a}}\nPlace B: {{entity_b}}\n"},
      {"pair_attribute-value.txt", "Place A: {{entity_a}}\nPlace B: {{entity_b}}\n"},
      {"pair_plm-serialization.txt", "Input: {{serialized}}\n"},
      {"pair_attribute-value-distance.txt",
       "Place A: {{entity_a}}\nPlace B: {{entity_b}}\nDistance between A and B: {{distance}} km\n"},
      {"demonstrations.txt", "Here are some labelled examples.\n\n{{demos}}Now the question.\n\n"},
      {"demo.txt", "{{pair}}Answer: {{answer}}\n\n"},
      {"prompt.txt", "{{task}}\n{{demonstrations}}{{query}}Answer:"},
  };
  return files;
}

std::string join_values(const EntityRecord& e, bool with_names) {
  std::string out;
  for (const auto& [name, value] : e.attrs) {
    if (value.empty()) continue;
    if (!out.empty()) out += ", ";
    out += with_names ? name + ": " + value : value;
  }
  return out;
}

std::string render_pair(const PromptTemplate& t, const LabeledPair& p, std::optional<double> distance_km) {
  if (needs_distance(t.style) != distance_km.has_value()) {
    throw TemplateError(needs_distance(t.style) ? "style attribute-value-distance needs a distance"
                                                : "a distance is only bound for attribute-value-distance");
  }
  std::map<std::string, std::string> b;
  switch (t.style) {
    case SerializationStyle::Simple:
      b["entity_a"] = join_values(p.a, false);
      b["entity_b"] = join_values(p.b, false);
      break;
    case SerializationStyle::AttributeValue:
    case SerializationStyle::AttributeValueDistance:
      b["entity_a"] = join_values(p.a, true);
      b["entity_b"] = join_values(p.b, true);
      break;
    case SerializationStyle::PlmSerialization:
      b["serialized"] = serialize_pair(p.a, p.b);
      break;
  }
  if (distance_km) b["distance"] = format_distance(*distance_km);
  return render(t.templates.get("pair_" + to_string(t.style) + ".txt"), b);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

struct Keyword {
  std::string text;
  int label;
};

std::vector<Keyword> keywords(int n_classes) {
  if (n_classes == 2) return {{"yes", 1}, {"no", 0}};
  std::vector<Keyword> out;
  const auto& names = class_names(n_classes);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.push_back({names[i], static_cast<int>(i)});
    std::string spaced = names[i];
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    if (spaced != names[i]) out.push_back({spaced, static_cast<int>(i)});
  }
  return out;
}

struct ParsedUrl {
  std::string origin;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("endpoint must be an http(s) URL: '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool transient(int status) { return status == 429 || status >= 500; }

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace

std::string to_string(SerializationStyle s) {
  switch (s) {
    case SerializationStyle::Simple: return "simple";
    case SerializationStyle::AttributeValue: return "attribute-value";
    case SerializationStyle::PlmSerialization: return "plm-serialization";
    case SerializationStyle::AttributeValueDistance: return "attribute-value-distance";
  }
  return "?";
}

SerializationStyle parse_style(const std::string& s) {
  for (auto style : {SerializationStyle::Simple, SerializationStyle::AttributeValue,
                     SerializationStyle::PlmSerialization, SerializationStyle::AttributeValueDistance}) {
    if (to_string(style) == s) return style;
  }
  throw ConfigError("unknown prompt style '" + s + "'");
}

std::string to_string(DemoStrategy s) { return s == DemoStrategy::Random ? "random" : "class_balanced"; }

DemoStrategy parse_strategy(const std::string& s) {
  if (s == "random") return DemoStrategy::Random;
  if (s == "class_balanced") return DemoStrategy::ClassBalanced;
  throw ConfigError("unknown few-shot strategy '" + s + "'");
}

std::string render(std::string_view text, const std::map<std::string, std::string>& bindings) {
  std::string out;
  std::size_t at = 0;
  while (true) {
    const std::size_t open = text.find("{{", at);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder in template");
    const std::string key(text.substr(open + 2, close - open - 2));
    const auto it = bindings.find(key);
    if (it == bindings.end()) throw TemplateError("no binding for placeholder {{" + key + "}}");
    out.append(text.substr(at, open - at));
    out += it->second;
    at = close + 2;
  }
  out.append(text.substr(at));
  return out;
}

TemplateSet TemplateSet::builtin() { return {builtin_files()}; }

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("template directory not found: " + dir.string());
  TemplateSet set = builtin();
  for (auto& [name, text] : set.files) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return set;
}

const std::string& TemplateSet::get(const std::string& name) const {
  const auto it = files.find(name);
  if (it == files.end()) throw TemplateError("missing template file " + name);
  return it->second;
}

std::uint64_t TemplateSet::hash() const {
  std::string all;
  for (const auto& [name, text] : files) all += name + '\0' + text + '\0';
  return fnv1a(all);
}

double prompt_distance_km(const LabeledPair& pair) { return haversine_centroid_km(pair.a.geometry, pair.b.geometry); }

std::string format_distance(double km) { return fmt::format("{:.2f}", km); }

std::string answer_text(int label, int n_classes) {
  if (n_classes == 2) return label == 1 ? "Yes" : "No";
  return class_names(n_classes).at(static_cast<std::size_t>(label));
}

std::string build_prompt(const PromptTemplate& t, const LabeledPair& pair, std::optional<double> distance_km,
                         std::span<const Demo> demos) {
  std::string demo_text;
  for (const auto& d : demos) {
    demo_text += render(t.templates.get("demo.txt"),
                        {{"pair", render_pair(t, d.pair, d.distance_km)}, {"answer", answer_text(d.pair.label, t.n_classes)}});
  }
  const std::string demonstrations =
      demos.empty() ? std::string() : render(t.templates.get("demonstrations.txt"), {{"demos", demo_text}});
  const std::string& task = t.templates.get(t.n_classes == 2 ? "task_binary.txt" : "task_multiclass.txt");
  return render(t.templates.get("prompt.txt"),
                {{"task", task}, {"demonstrations", demonstrations}, {"query", render_pair(t, pair, distance_km)}});
}

std::vector<LabeledPair> sample_demos(std::span<const LabeledPair> train, const FewShotConfig& cfg, int n_classes) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<LabeledPair> out;
  if (cfg.strategy == DemoStrategy::Random) {
    if (train.size() < cfg.n_random) {
      throw SamplingError(fmt::format("need {} demonstrations but the training split has {}", cfg.n_random, train.size()));
    }
    std::vector<std::size_t> idx(train.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < cfg.n_random; ++i) out.push_back(train[idx[i]]);
    return out;
  }
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train[i].label == c) members.push_back(i);
    }
    if (members.size() < cfg.n_per_class) {
      throw SamplingError(fmt::format("class '{}' has {} training pairs, {} needed", class_names(n_classes)[c],
                                      members.size(), cfg.n_per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < cfg.n_per_class; ++i) out.push_back(train[members[i]]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::optional<int> match_answer(std::string_view raw, int n_classes) {
  std::string lower(raw);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto words = keywords(n_classes);
  for (std::size_t at = 0; at < lower.size(); ++at) {
    if (at > 0 && is_word_char(lower[at - 1])) continue;
    for (const auto& k : words) {
      if (lower.compare(at, k.text.size(), k.text) != 0) continue;
      const std::size_t end = at + k.text.size();
      if (end < lower.size() && is_word_char(lower[end])) continue;
      return k.label;
    }
  }
  return std::nullopt;
}

int parse_answer(std::string_view raw, int n_classes, std::size_t& unparseable) {
  if (const auto label = match_answer(raw, n_classes)) return *label;
  ++unparseable;
  return fallback_class(n_classes);
}

std::string chat_complete(const EndpointConfig& endpoint, const std::string& prompt) {
  const ParsedUrl url = parse_url(endpoint.url);
  nlohmann::ordered_json body;
  body["model"] = endpoint.model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = endpoint.temperature;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);

  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(endpoint.backoff * (1 << (attempt - 1)));
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    spdlog::debug("POST {} ({} bytes, attempt {})", endpoint.url, payload.size(), attempt + 1);
    const auto res = cli.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_status = 0;
      last_error = "request to " + endpoint.url + " failed: " + httplib::to_string(res.error());
      spdlog::warn("{}", last_error);
      continue;
    }
    spdlog::debug("status {} ({} bytes)", res->status, res->body.size());
    if (res->status == 200) {
      try {
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw HttpError(std::string("malformed chat-completion response: ") + e.what(), res->status);
      }
    }
    last_status = res->status;
    last_error = fmt::format("endpoint returned HTTP {}: {}", res->status, res->body.substr(0, 200));
    if (!transient(res->status)) throw HttpError(last_error, res->status);
    spdlog::warn("{} (will retry)", last_error);
  }
  throw HttpError(last_error + fmt::format(" (gave up after {} attempts)", endpoint.max_retries + 1), last_status);
}

PromptRunResult prompt_run(const PromptRunOptions& opt, std::span<const LabeledPair> test,
                           std::span<const LabeledPair> train) {
  const PromptTemplate& t = opt.prompt;
  if (test.empty()) throw ConfigError("prompt run has no test pairs");
  std::vector<Demo> demos;
  if (opt.few_shot) {
    for (auto& p : sample_demos(train, *opt.few_shot, t.n_classes)) {
      Demo d{std::move(p), std::nullopt};
      if (needs_distance(t.style)) d.distance_km = prompt_distance_km(d.pair);
      demos.push_back(std::move(d));
    }
  }

  KeyValues settings;
  settings.set("style", to_string(t.style));
  settings.set("classes", std::to_string(t.n_classes));
  settings.set("template_hash", hex64(t.templates.hash()));
  settings.set("few_shot", opt.few_shot ? to_string(opt.few_shot->strategy) : "none");
  if (opt.few_shot) settings.set("few_shot_seed", std::to_string(opt.few_shot->seed));
  settings.set("endpoint", opt.endpoint.url);
  settings.set("model", opt.endpoint.model);
  settings.set("temperature", fmt::format("{}", opt.endpoint.temperature));
  settings.set("parallelism", std::to_string(opt.parallelism));
  const std::string config_text = settings.to_text();

  std::vector<std::string> prompts;
  prompts.reserve(test.size());
  for (const auto& p : test) {
    prompts.push_back(build_prompt(t, p, needs_distance(t.style) ? std::optional(prompt_distance_km(p)) : std::nullopt, demos));
  }

  std::vector<std::string> raw(test.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= test.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        raw[i] = chat_complete(opt.endpoint, prompts[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(opt.parallelism, 1, test.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  PromptRunResult result;
  for (std::size_t i = 0; i < test.size(); ++i) {
    PromptRecord r;
    r.pair_id = test[i].pair_id();
    r.prompt_hash = hex64(fnv1a(prompts[i]));
    r.raw = raw[i];
    r.parsed = parse_answer(raw[i], t.n_classes, result.unparseable);
    r.gold = test[i].label;
    result.records.push_back(std::move(r));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const PromptRecord& x, const PromptRecord& y) { return x.pair_id < y.pair_id; });
  std::vector<int> gold, parsed;
  for (const auto& r : result.records) {
    gold.push_back(r.gold);
    parsed.push_back(r.parsed);
  }
  result.metrics = compute_metrics(gold, parsed, t.n_classes);

  const std::string base = utc_stamp() + "-" + hex64(fnv1a(config_text)).substr(0, 8);
  std::filesystem::path dir = opt.out_root / base;
  for (int k = 2; std::filesystem::exists(dir); ++k) dir = opt.out_root / (base + "-" + std::to_string(k));
  std::filesystem::create_directories(dir);
  result.dir = dir;

  const auto& names = class_names(t.n_classes);
  std::ofstream pred(dir / "predictions.jsonl", std::ios::binary);
  for (const auto& r : result.records) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.pair_id;
    j["prompt_hash"] = r.prompt_hash;
    j["raw"] = r.raw;
    j["parsed"] = names[static_cast<std::size_t>(r.parsed)];
    j["gold"] = names[static_cast<std::size_t>(r.gold)];
    pred << j.dump() << '\n';
  }
  nlohmann::ordered_json m = to_json(result.metrics);
  m["unparseable"] = result.unparseable;
  m["style"] = to_string(t.style);
  m["few_shot"] = settings.get_string("few_shot", "none");
  m["template_hash"] = hex64(t.templates.hash());
  std::ofstream(dir / "metrics.json", std::ios::binary) << m.dump(2) << '\n';
  std::ofstream(dir / "config.txt", std::ios::binary) << config_text;
  if (!pred) throw IoError("failed writing " + (dir / "predictions.jsonl").string());
  spdlog::info("prompt run: {} pairs, F1 {:.4f}, {} unparseable -> {}", test.size(), result.metrics.f1,
               result.unparseable, dir.string());
  return result;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

}  // namespace omni
