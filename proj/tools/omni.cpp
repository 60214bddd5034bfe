#include "omni/error.hpp"
#include "omni/workflow.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<long> seed;
  std::string out;
  std::vector<std::string> ablate;
  std::string affinity;
  std::optional<int> classes;
  std::vector<int> p;
  std::string endpoint;
  std::string template_dir;
  std::string checkpoint;
  bool verbose = false;
  bool quiet = false;
};

omni::KeyValues collect(const Flags& f, const std::string& command) {
  omni::KeyValues kv;
  if (!f.config.empty()) {
    if (!std::filesystem::exists(f.config)) throw omni::ConfigError("config file not found: " + f.config);
    kv = omni::KeyValues::load(f.config);
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw omni::ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed) kv.set("seed", std::to_string(*f.seed));
  if (!f.out.empty()) kv.set("out", f.out);
  if (!f.ablate.empty()) {
    std::string joined;
    for (const auto& a : f.ablate) joined += (joined.empty() ? "" : ",") + a;
    kv.set("ablate", joined);
  }
  if (!f.affinity.empty()) kv.set("affinity", f.affinity);
  if (f.classes) kv.set("classes", std::to_string(*f.classes));
  if (!f.p.empty()) {
    if (command == "sweep-p") {
      std::string joined;
      for (int v : f.p) joined += (joined.empty() ? "" : ",") + std::to_string(v);
      kv.set("p_values", joined);
    } else if (f.p.size() == 1) {
      kv.set("P", std::to_string(f.p.front()));
    } else {
      throw omni::ConfigError("--p takes a single value except for sweep-p");
    }
  }
  if (!f.endpoint.empty()) kv.set("endpoint", f.endpoint);
  if (!f.template_dir.empty()) kv.set("template_dir", f.template_dir);
  if (!f.checkpoint.empty()) kv.set("checkpoint", f.checkpoint);
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geospatial entity resolution: preprocessing, training, probing and prompt runs."};
  app.footer(
      "Settings come from, in increasing precedence: built-in defaults, the --config file, --set key=value,\n"
      "then the dedicated flags (--seed, --out, --ablate, --affinity, --classes, --p, --endpoint,\n"
      "--template-dir, --checkpoint). Every command writes the resolved configuration to <out>/config.txt.\n"
      "Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.\n"
      "The API key for prompt-run is read from $OMNI_API_KEY.");
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "key = value configuration file");
  app.add_option("--set", f.sets, "override one configuration key (key=value); repeatable");
  app.add_option("--seed", f.seed, "random seed");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--ablate", f.ablate, "ablation flags: no_lang, no_geoenc, no_att_aff, no_dist")->delimiter(',');
  app.add_option("--affinity", f.affinity, "attribute affinity variant")->check(CLI::IsMember({"default", "pooled_cosine"}));
  app.add_option("--classes", f.classes, "2 (match / non-match) or 4 (same_as, part_of, serves, unknown)")
      ->check(CLI::IsMember({2, 4}));
  app.add_option("--p", f.p, "vertex budget P; a comma list for sweep-p")->delimiter(',');
  app.add_option("--endpoint", f.endpoint, "chat-completion URL for prompt-run");
  app.add_option("--template-dir", f.template_dir, "directory of prompt template files");
  app.add_option("--checkpoint", f.checkpoint, "model checkpoint for evaluate, probe and bench");
  app.add_flag("-v,--verbose", f.verbose, "debug logging");
  app.add_flag("-q,--quiet", f.quiet, "warnings and errors only");

  std::string input;
  auto* preprocess = app.add_subcommand("preprocess", "resample geometries from a WKT/GeoJSON-per-line file to P vertices");
  preprocess->add_option("input", input, "input file")->required();
  std::string variant, n, neg_ratio;
  auto* synth = app.add_subcommand("synth", "write a synthetic train/valid/test split");
  synth->add_option("--variant", variant, "standard, geometry_only or points_only");
  synth->add_option("--n", n, "number of pairs");
  synth->add_option("--neg-ratio", neg_ratio, "negatives per positive");
  app.add_subcommand("train", "train a model and report test metrics");
  app.add_subcommand("evaluate", "score a checkpoint on the test split");
  app.add_subcommand("ablate", "train the full model and each ablation");
  app.add_subcommand("sweep-p", "train one model per vertex budget (--p 50,100,300)");
  std::vector<std::string> relations;
  auto* probe = app.add_subcommand("probe", "spatial-relation probe on a frozen geometry encoder");
  probe->add_option("--relation", relations, "contain, touch, overlap")->delimiter(',');
  std::string style, few_shot;
  auto* prompt = app.add_subcommand("prompt-run", "zero- or few-shot prompting against a chat-completion endpoint");
  prompt->add_option("--style", style, "simple, attribute-value, plm-serialization, attribute-value-distance");
  prompt->add_option("--few-shot", few_shot, "none, random or class_balanced");
  app.add_subcommand("bench", "inference time per 1000 samples and parameter counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  spdlog::set_level(f.verbose ? spdlog::level::debug : f.quiet ? spdlog::level::warn : spdlog::level::info);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    omni::KeyValues kv = collect(f, command);
    if (!input.empty()) kv.set("input", input);
    if (!variant.empty()) kv.set("synth_variant", variant);
    if (!n.empty()) kv.set("synth_n", n);
    if (!neg_ratio.empty()) kv.set("synth_neg_ratio", neg_ratio);
    if (!relations.empty()) {
      std::string joined;
      for (const auto& r : relations) joined += (joined.empty() ? "" : ",") + r;
      kv.set("relations", joined);
    }
    if (!style.empty()) kv.set("style", style);
    if (!few_shot.empty()) kv.set("few_shot", few_shot);
    std::vector<std::string> ablations;
    if (command == "ablate") {
      ablations = kv.get_list("ablate", {});
      kv.set("ablate", "none");
    }
    const omni::RunConfig run = omni::RunConfig::resolve(kv);

    if (command == "preprocess") {
      omni::cmd_preprocess(run);
    } else if (command == "synth") {
      omni::cmd_synth(run);
    } else if (command == "train") {
      omni::cmd_train(run);
    } else if (command == "evaluate") {
      omni::cmd_evaluate(run);
    } else if (command == "ablate") {
      omni::cmd_ablate(run, ablations);
    } else if (command == "sweep-p") {
      std::vector<int> ps;
      for (const auto& v : run.kv.get_list("p_values", {})) {
        omni::KeyValues one;
        one.set("v", v);
        ps.push_back(static_cast<int>(one.get_int("v", 0)));
      }
      omni::cmd_sweep_p(run, ps);
    } else if (command == "probe") {
      omni::cmd_probe(run);
    } else if (command == "prompt-run") {
      omni::cmd_prompt_run(run);
    } else if (command == "bench") {
      omni::cmd_bench(run);
    }
  } catch (const omni::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
