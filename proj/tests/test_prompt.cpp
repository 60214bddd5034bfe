#include "omni/error.hpp"
#include "omni/prompt.hpp"
#include "prompt_fixtures.hpp"

#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

using namespace omni;
using namespace omni::test;
namespace fs = std::filesystem;

namespace {

const fs::path kTestDir = OMNI_TEST_DATA;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Compares against tests/golden/<name>; OMNI_UPDATE_GOLDEN=1 rewrites it.
void check_golden(const std::string& name, const std::string& text) {
  const fs::path path = kTestDir / "golden" / name;
  if (const char* update = std::getenv("OMNI_UPDATE_GOLDEN"); update != nullptr && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << text;
  }
  REQUIRE(fs::exists(path));
  CHECK(read_file(path) == text);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("omni_prompt_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_SUITE("promptharness") {

TEST_CASE("placeholders render and unbound ones are errors") {
  CHECK(render("{{a}} and {{b}}", {{"a", "x"}, {"b", "y"}}) == "x and y");
  CHECK(render("no placeholders", {}) == "no placeholders");
  CHECK_THROWS_AS(render("{{missing}}", {}), TemplateError);
  CHECK_THROWS_AS(render("{{open", {{"open", "x"}}), TemplateError);
}

TEST_CASE("shipped template files match the built-in set") {
  const TemplateSet shipped = TemplateSet::load(kTestDir / ".." / "templates");
  CHECK(shipped.files == TemplateSet::builtin().files);
  CHECK(shipped.hash() == TemplateSet::builtin().hash());
}

TEST_CASE("template directories override by file name") {
  const fs::path dir = fresh_dir("templates");
  fs::create_directories(dir);
  std::ofstream(dir / "task_binary.txt") << "Same place?";
  std::ofstream(dir / "prompt.txt") << "{{task}} {{query}} {{unused}}";
  const TemplateSet t = TemplateSet::load(dir);
  CHECK(t.get("task_binary.txt") == "Same place?");
  CHECK(t.get("demo.txt") == TemplateSet::builtin().get("demo.txt"));
  CHECK(t.hash() != TemplateSet::builtin().hash());
  CHECK_THROWS_AS(t.get("nope.txt"), TemplateError);
  PromptTemplate pt;
  pt.templates = t;
  CHECK_THROWS_AS(build_prompt(pt, fixture_pair(), std::nullopt), TemplateError);
  CHECK_THROWS_AS(TemplateSet::load(dir / "absent"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("zero-shot prompts match the golden files") {
  const LabeledPair p = fixture_pair();
  for (SerializationStyle s : {SerializationStyle::Simple, SerializationStyle::AttributeValue,
                               SerializationStyle::PlmSerialization, SerializationStyle::AttributeValueDistance}) {
    CAPTURE(to_string(s));
    PromptTemplate t;
    t.style = s;
    const auto distance = needs_distance(s) ? std::optional<double>(prompt_distance_km(p)) : std::nullopt;
    check_golden("zero_shot_" + to_string(s) + ".txt", build_prompt(t, p, distance));
    CHECK(parse_style(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_style("json"), ConfigError);
}

TEST_CASE("distance is bound only for the distance style") {
  PromptTemplate t;
  t.style = SerializationStyle::AttributeValueDistance;
  CHECK_THROWS_AS(build_prompt(t, fixture_pair(), std::nullopt), TemplateError);
  t.style = SerializationStyle::Simple;
  CHECK_THROWS_AS(build_prompt(t, fixture_pair(), 1.0), TemplateError);
  CHECK(format_distance(0.0874) == "0.09");
  CHECK(prompt_distance_km(fixture_pair()) == doctest::Approx(0.0802).epsilon(1e-3));
}

TEST_CASE("few-shot prompts match the golden files") {
  const auto train = train_split(2);
  for (DemoStrategy strategy : {DemoStrategy::Random, DemoStrategy::ClassBalanced}) {
    CAPTURE(to_string(strategy));
    FewShotConfig fs;
    fs.strategy = strategy;
    fs.seed = 3;
    std::vector<Demo> demos;
    for (auto& d : sample_demos(train, fs, 2)) demos.push_back({d, std::nullopt});
    CHECK(demos.size() == 4);
    PromptTemplate t;
    check_golden("few_shot_" + to_string(strategy) + ".txt", build_prompt(t, fixture_pair(), std::nullopt, demos));
    CHECK(parse_strategy(to_string(strategy)) == strategy);
  }
}

TEST_CASE("demonstration sampling") {
  FewShotConfig fs;
  fs.strategy = DemoStrategy::ClassBalanced;
  fs.seed = 8;
  const auto four = train_split(4);
  const auto demos = sample_demos(four, fs, 4);
  REQUIRE(demos.size() == 8);
  std::vector<int> per_class(4, 0);
  for (const auto& d : demos) ++per_class[static_cast<std::size_t>(d.label)];
  CHECK(per_class == std::vector<int>{2, 2, 2, 2});
  CHECK(sample_demos(four, fs, 4)[0].pair_id() == demos[0].pair_id());

  fs.strategy = DemoStrategy::Random;
  const auto r = sample_demos(four, fs, 4);
  CHECK(r.size() == 4);
  std::set<std::string> ids;
  for (const auto& d : r) ids.insert(d.pair_id());
  CHECK(ids.size() == 4);

  const std::vector<LabeledPair> short_split(four.begin(), four.begin() + 3);
  CHECK_THROWS_AS(sample_demos(short_split, fs, 4), SamplingError);
  fs.strategy = DemoStrategy::ClassBalanced;
  CHECK_THROWS_AS(sample_demos(short_split, fs, 4), SamplingError);
}

TEST_CASE("answers parse case-insensitively on whole words") {
  std::size_t bad = 0;
  CHECK(parse_answer("Yes.", 2, bad) == 1);
  CHECK(parse_answer("no, they differ", 2, bad) == 0);
  CHECK(parse_answer("  YES", 2, bad) == 1);
  CHECK(parse_answer("The answer is No", 2, bad) == 0);
  CHECK(parse_answer("No. Well, yes.", 2, bad) == 0);
  CHECK(bad == 0);
  CHECK(parse_answer("Yesterday", 2, bad) == 0);
  CHECK(parse_answer("", 2, bad) == 0);
  CHECK(bad == 2);

  bad = 0;
  CHECK(parse_answer("part_of", 4, bad) == 1);
  CHECK(parse_answer("Serves", 4, bad) == 2);
  CHECK(parse_answer("They are the same as each other: same_as", 4, bad) == 0);
  CHECK(parse_answer("unknown", 4, bad) == 3);
  CHECK(bad == 0);
  CHECK(parse_answer("banana", 4, bad) == 3);
  CHECK(bad == 1);
  CHECK_FALSE(match_answer("maybe", 2).has_value());
  CHECK(answer_text(1, 2) == "Yes");
  CHECK(answer_text(2, 4) == "serves");
}

TEST_CASE("the client sends one user message and reads the first choice") {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const bool ok = body.at("model") == "test-model" && body.at("temperature") == 0.0 &&
                    body.at("messages").size() == 1 && body.at("messages")[0].at("role") == "user" &&
                    req.get_header_value("Authorization") == "Bearer sekrit";
    reply(res, ok ? "Yes" : "bad request shape");
  });
  ::setenv("OMNI_PROMPT_TEST_KEY", "sekrit", 1);
  EndpointConfig e = server.endpoint();
  e.model = "test-model";
  e.api_key_env = "OMNI_PROMPT_TEST_KEY";
  CHECK(chat_complete(e, "hello") == "Yes");
  ::unsetenv("OMNI_PROMPT_TEST_KEY");
  CHECK(server.calls == 1);
}

TEST_CASE("rate limits are retried and client errors are not") {
  std::atomic<int> mode{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    static std::atomic<int> seen{0};
    if (mode == 0 && seen++ == 0) {
      res.status = 429;
      return;
    }
    if (mode == 1) {
      res.status = 400;
      return;
    }
    if (mode == 2) {
      res.status = 503;
      return;
    }
    if (mode == 3) {
      res.set_content("{\"choices\": []}", "application/json");
      return;
    }
    reply(res, "No");
  });
  const EndpointConfig e = server.endpoint();
  CHECK(chat_complete(e, "q") == "No");
  CHECK(server.calls == 2);

  mode = 1;
  server.calls = 0;
  try {
    chat_complete(e, "q");
    FAIL("expected HttpError");
  } catch (const HttpError& err) {
    CHECK(err.status() == 400);
  }
  CHECK(server.calls == 1);

  mode = 2;
  server.calls = 0;
  CHECK_THROWS_AS(chat_complete(e, "q"), HttpError);
  CHECK(server.calls == e.max_retries + 1);

  mode = 3;
  CHECK_THROWS_AS(chat_complete(e, "q"), HttpError);
}

TEST_CASE("an unreachable endpoint fails the run without writing predictions") {
  PromptRunOptions opt;
  opt.endpoint.url = "http://127.0.0.1:1/v1/chat/completions";
  opt.endpoint.max_retries = 1;
  opt.endpoint.backoff = std::chrono::milliseconds(1);
  opt.endpoint.timeout = std::chrono::milliseconds(500);
  opt.out_root = fresh_dir("unreachable");
  const std::vector<LabeledPair> test{numbered_pair(1, 1), numbered_pair(2, 0)};
  CHECK_THROWS_AS(prompt_run(opt, test), HttpError);
  CHECK_FALSE(fs::exists(opt.out_root));
}

TEST_CASE("a hundred-pair run writes sorted predictions and counts unparseable replies") {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    std::smatch m;
    const std::string content = user_content(req);
    REQUIRE(std::regex_search(content, m, std::regex("alpha-(\\d+)")));
    const int i = std::stoi(m[1]);
    if (i % 10 == 0) {
      reply(res, "I cannot tell.");
    } else {
      reply(res, i % 3 == 0 ? "Yes" : "No");
    }
  });
  std::vector<LabeledPair> test;
  for (int i = 0; i < 100; ++i) test.push_back(numbered_pair(i, i % 3 == 0 ? 1 : 0));
  PromptRunOptions opt;
  opt.endpoint = server.endpoint();
  opt.parallelism = 4;
  opt.out_root = fresh_dir("hundred");
  opt.prompt.style = SerializationStyle::AttributeValue;
  const PromptRunResult r = prompt_run(opt, test);

  CHECK(server.calls == 100);
  CHECK(r.unparseable == 10);
  REQUIRE(r.records.size() == 100);
  CHECK(std::is_sorted(r.records.begin(), r.records.end(),
                       [](const PromptRecord& a, const PromptRecord& b) { return a.pair_id < b.pair_id; }));
  // Multiples of 30 are positives that fell back to the negative class.
  CHECK(r.metrics.recall == doctest::Approx(30.0 / 34.0));
  CHECK(r.metrics.precision == doctest::Approx(1.0));

  std::ifstream preds(r.dir / "predictions.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(preds, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("pair_id") == r.records[lines].pair_id);
    CHECK(j.at("prompt_hash").get<std::string>().size() == 16);
    ++lines;
  }
  CHECK(lines == 100);
  const auto metrics = nlohmann::json::parse(read_file(r.dir / "metrics.json"));
  CHECK(metrics.at("unparseable") == 10);
  CHECK(metrics.at("style") == "attribute-value");
  CHECK(fs::exists(r.dir / "config.txt"));
  CHECK(r.dir.parent_path() == opt.out_root);

  const PromptRunResult again = prompt_run(opt, test);
  CHECK(again.dir != r.dir);
  for (std::size_t i = 0; i < 100; ++i) CHECK(again.records[i].prompt_hash == r.records[i].prompt_hash);
  fs::remove_all(opt.out_root);
}

}  // TEST_SUITE
