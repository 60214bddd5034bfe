#include "omni/workflow.hpp"

#include "omni/error.hpp"
#include "omni/geometry.hpp"
#include "omni/kdelta.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace omni {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

struct Prepared {
  std::vector<PairFeatures> train, valid, test;
};

Prepared prepare(const RunConfig& run, const OmniConfig& cfg) {
  const int n = cfg.n_classes;
  const auto train_pairs = load_dataset(run.require_path("train"), n);
  const auto valid_pairs = load_dataset(run.require_path("valid"), n);
  const auto test_pairs = load_dataset(run.require_path("test"), n);
  const auto encoder = make_text_encoder(run);
  Prepared p;
  p.train = make_features(train_pairs, *encoder, cfg);
  p.valid = make_features(valid_pairs, *encoder, cfg);
  p.test = make_features(test_pairs, *encoder, cfg);
  return p;
}

/// Checkpoint metadata: the model configuration plus what is needed to
/// rebuild the text features. Paths and output locations stay out so that
/// identical runs produce identical files.
KeyValues checkpoint_metadata(const RunConfig& run) {
  KeyValues meta;
  meta.set("seed", std::to_string(run.seed));
  if (const auto e = run.kv.find("embeddings")) meta.set("embeddings", *e);
  return meta;
}

TrainOutcome train_into(const RunConfig& run, const OmniConfig& cfg, const Prepared& data,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RunConfig resolved = run;
  resolved.model = cfg;
  cfg.store(resolved.kv);
  resolved.kv.set("out", dir.string());
  resolved.write_resolved(dir);

  const auto t0 = Clock::now();
  Model model(cfg);
  model.init(run.seed);
  spdlog::info("training {} pairs (ablation {}, affinity {}, P {})", data.train.size(), cfg.ablation.label(),
               to_string(cfg.affinity), cfg.P);
  TrainOutcome out;
  out.result = train(model, data.train, data.valid, run.seed);
  out.test = evaluate(model, data.test);
  out.seconds = seconds_since(t0);
  out.dir = dir;

  save_model(dir / "model.ckpt", model, checkpoint_metadata(resolved));

  const auto params = model.parameters();
  nlohmann::ordered_json m;
  m["ablation"] = cfg.ablation.label();
  m["affinity"] = to_string(cfg.affinity);
  m["classes"] = cfg.n_classes;
  m["P"] = cfg.P;
  m["seed"] = run.seed;
  m["best_epoch"] = out.result.best_epoch;
  m["best_valid_f1"] = out.result.best_valid_f1;
  m["steps"] = out.result.steps;
  m["params_total"] = nn::count_parameters(params, false);
  m["params_trainable"] = nn::count_parameters(params, true);
  m["parameter_hash"] = hex64(parameter_hash(params));
  m["test"] = to_json(out.test);
  write_text(dir / "metrics.json", m.dump(2) + "\n");

  std::string csv = "epoch,train_loss,valid_f1,lr\n";
  for (const auto& e : out.result.history) {
    csv += fmt::format("{},{},{},{}\n", e.epoch, num(e.train_loss), num(e.valid_f1), num(e.lr));
  }
  write_text(dir / "history.csv", csv);

  nlohmann::ordered_json r;
  r["seconds_train"] = out.seconds;
  r["train_pairs"] = data.train.size();
  write_text(dir / "run.json", r.dump(2) + "\n");
  spdlog::info("test F1 {:.4f} (best epoch {}, {:.1f}s) -> {}", out.test.f1, out.result.best_epoch, out.seconds,
               dir.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& RunConfig::run_keys() {
  static const std::vector<std::string> keys{
      "seed",        "out",         "train",     "valid",      "test",        "embeddings",  "checkpoint",
      "input",       "synth_n",     "synth_variant", "synth_neg_ratio", "relations", "probe_n", "probe_epochs",
      "probe_lr",    "style",       "few_shot",  "endpoint",   "llm_model",   "temperature", "timeout_s",
      "max_retries", "parallelism", "template_dir", "bench_reps", "bench_n",  "p_values"};
  return keys;
}

RunConfig RunConfig::resolve(const KeyValues& kv) {
  for (const auto& [key, value] : kv.values()) {
    const auto& mk = model_config_keys();
    const auto& rk = run_keys();
    if (std::find(mk.begin(), mk.end(), key) == mk.end() && std::find(rk.begin(), rk.end(), key) == rk.end()) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  RunConfig run;
  run.kv = kv;
  run.model = OmniConfig::from(kv);
  const long seed = kv.get_int("seed", 1);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  run.seed = static_cast<std::uint64_t>(seed);
  run.out = kv.get_string("out", "out");
  run.model.store(run.kv);
  run.kv.set("seed", std::to_string(run.seed));
  run.kv.set("out", run.out.string());
  return run;
}

std::optional<std::filesystem::path> RunConfig::path(const std::string& key) const {
  const auto v = kv.find(key);
  if (!v || v->empty()) return std::nullopt;
  return std::filesystem::path(*v);
}

std::filesystem::path RunConfig::require_path(const std::string& key) const {
  const auto p = path(key);
  if (!p) throw ConfigError("missing '" + key + "' path (set it in the config file or with --set " + key + "=...)");
  if (!std::filesystem::exists(*p)) throw ConfigError("'" + key + "' path does not exist: " + p->string());
  return *p;
}

void RunConfig::write_resolved(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", kv.to_text());
}

std::unique_ptr<TextEncoder> make_text_encoder(const RunConfig& run) {
  if (const auto emb = run.path("embeddings")) {
    auto enc = std::make_unique<PrecomputedEncoder>(load_precomputed(*emb));
    if (enc->dim() != run.model.text_dim) {
      throw ConfigError(fmt::format("embedding file has d={} but text_dim={}", enc->dim(), run.model.text_dim));
    }
    return enc;
  }
  return std::make_unique<TrigramEncoder>(run.model.affinity_attrs, run.model.text_dim);
}

TrainOutcome cmd_train(const RunConfig& run) {
  const Prepared data = prepare(run, run.model);
  return train_into(run, run.model, data, run.out);
}

Metrics cmd_evaluate(const RunConfig& run) {
  KeyValues meta;
  auto model = load_model(run.require_path("checkpoint"), &meta);
  RunConfig eval = run;
  eval.model = model->config();
  const auto pairs = load_dataset(eval.require_path("test"), eval.model.n_classes);
  const auto encoder = make_text_encoder(eval);
  const Metrics m = evaluate(*model, make_features(pairs, *encoder, eval.model));
  std::filesystem::create_directories(run.out);
  run.write_resolved(run.out);
  nlohmann::ordered_json j;
  j["checkpoint"] = eval.require_path("checkpoint").string();
  j["ablation"] = eval.model.ablation.label();
  j["test"] = to_json(m);
  write_text(run.out / "metrics.json", j.dump(2) + "\n");
  spdlog::info("F1 {:.4f}  P {:.4f}  R {:.4f}  on {} pairs", m.f1, m.precision, m.recall, m.n);
  return m;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& run, const std::vector<std::string>& flags) {
  std::vector<std::string> labels{"none"};
  for (const auto& f : flags.empty() ? std::vector<std::string>{"no_lang", "no_geoenc", "no_att_aff", "no_dist"} : flags) {
    Ablation probe;
    probe.enable(f);
    if (f != "none") labels.push_back(f);
  }
  OmniConfig base = run.model;
  base.ablation = {};
  const Prepared data = prepare(run, base);
  std::vector<AblationRow> rows;
  std::string csv = "ablation,best_valid_f1,test_f1\n";
  for (const auto& label : labels) {
    OmniConfig cfg = base;
    cfg.ablation.enable(label);
    const TrainOutcome o = train_into(run, cfg, data, run.out / "ablate" / label);
    rows.push_back({label, o.result.best_valid_f1, o.test.f1});
    csv += fmt::format("{},{},{}\n", label, num(o.result.best_valid_f1), num(o.test.f1));
  }
  write_text(run.out / "ablation.csv", csv);
  return rows;
}

std::vector<SweepRow> cmd_sweep_p(const RunConfig& run, const std::vector<int>& p_values) {
  if (p_values.size() < 2) throw ConfigError("sweep-p needs at least two P values");
  std::vector<SweepRow> rows;
  std::string csv = "P,best_valid_f1,test_f1\n";
  for (int P : p_values) {
    OmniConfig cfg = run.model;
    cfg.P = P;
    cfg.validate();
    const Prepared data = prepare(run, cfg);
    const TrainOutcome o = train_into(run, cfg, data, run.out / "sweep_p" / ("P" + std::to_string(P)));
    rows.push_back({P, o.result.best_valid_f1, o.test.f1});
    csv += fmt::format("{},{},{}\n", P, num(o.result.best_valid_f1), num(o.test.f1));
  }
  write_text(run.out / "sweep_p.csv", csv);
  return rows;
}

std::vector<ProbeReport> cmd_probe(const RunConfig& run) {
  std::unique_ptr<Model> model;
  if (const auto ckpt = run.path("checkpoint")) {
    model = load_model(run.require_path("checkpoint"));
  } else {
    spdlog::warn("no checkpoint given; probing a randomly initialized encoder");
    model = std::make_unique<Model>(run.model);
    model->init(run.seed);
  }
  const OmniConfig& cfg = model->config();
  ProbeOptions opt;
  opt.seed = run.seed;
  opt.epochs = static_cast<int>(run.kv.get_int("probe_epochs", opt.epochs));
  opt.lr = run.kv.get_double("probe_lr", opt.lr);
  const auto n = run.kv.get_int("probe_n", 1000);
  if (n < 100) throw ConfigError("probe_n must be at least 100");
  std::filesystem::create_directories(run.out);
  run.write_resolved(run.out);
  std::vector<ProbeReport> reports;
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto& name : run.kv.get_list("relations", {"contain", "touch", "overlap"})) {
    const Relation rel = parse_relation(name);
    const auto data = gen_relation_dataset(rel, static_cast<std::size_t>(n), run.seed);
    reports.push_back(probe_train_eval(model->encoder(), cfg, data, opt));
    write_text(run.out / ("probe_" + name + ".json"), probe_report_json(reports.back()));
    all.push_back(nlohmann::ordered_json::parse(probe_report_json(reports.back())));
  }
  write_text(run.out / "probe.json", all.dump(2) + "\n");
  return reports;
}

PromptRunResult cmd_prompt_run(const RunConfig& run) {
  PromptRunOptions opt;
  if (const auto dir = run.path("template_dir")) opt.prompt.templates = TemplateSet::load(*dir);
  opt.prompt.style = parse_style(run.kv.get_string("style", "simple"));
  opt.prompt.n_classes = run.model.n_classes;
  const std::string few = run.kv.get_string("few_shot", "none");
  if (few != "none") {
    FewShotConfig fs;
    fs.strategy = parse_strategy(few);
    fs.seed = run.seed;
    opt.few_shot = fs;
  }
  const auto endpoint = run.kv.find("endpoint");
  if (!endpoint || endpoint->empty()) throw ConfigError("prompt-run needs an endpoint URL (--endpoint)");
  opt.endpoint.url = *endpoint;
  opt.endpoint.model = run.kv.get_string("llm_model", opt.endpoint.model);
  opt.endpoint.temperature = run.kv.get_double("temperature", 0.0);
  opt.endpoint.timeout = std::chrono::milliseconds(static_cast<long>(run.kv.get_double("timeout_s", 60.0) * 1000));
  opt.endpoint.max_retries = static_cast<int>(run.kv.get_int("max_retries", 3));
  const long par = run.kv.get_int("parallelism", 4);
  if (par < 1) throw ConfigError("parallelism must be at least 1");
  opt.parallelism = static_cast<std::size_t>(par);
  opt.out_root = run.out;

  const auto test = load_dataset(run.require_path("test"), run.model.n_classes);
  std::vector<LabeledPair> train;
  if (opt.few_shot) train = load_dataset(run.require_path("train"), run.model.n_classes);
  return prompt_run(opt, test, train);
}

BenchReport cmd_bench(const RunConfig& run) {
  auto model = load_model(run.require_path("checkpoint"));
  RunConfig bench = run;
  bench.model = model->config();
  std::vector<LabeledPair> pairs;
  if (bench.path("test")) {
    pairs = load_dataset(bench.require_path("test"), bench.model.n_classes);
  } else {
    if (bench.model.n_classes != 2) throw ConfigError("bench without a test file needs a binary model");
    SynthOptions so;
    so.n = static_cast<std::size_t>(bench.kv.get_int("bench_n", 1000));
    so.seed = bench.seed;
    so.P = bench.model.P;
    pairs = synth_er_pairs(so);
  }
  if (pairs.empty()) throw ConfigError("bench needs at least one pair");
  const int reps = static_cast<int>(bench.kv.get_int("bench_reps", 3));
  if (reps < 3) throw ConfigError("bench_reps must be at least 3");
  const auto encoder = make_text_encoder(bench);

  BenchReport r;
  const auto params = model->parameters();
  r.params_total = nn::count_parameters(params, false);
  r.params_trainable = nn::count_parameters(params, true);
  r.params_analytic_total = analytic_parameter_count(bench.model, false);
  r.params_analytic_trainable = analytic_parameter_count(bench.model, true);
  r.samples = pairs.size();
  r.repetitions = reps;
  const double per_1000 = 1000.0 / static_cast<double>(pairs.size());
  double model_total = 0.0;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    const auto feats = make_features(pairs, *encoder, bench.model);
    const auto t1 = Clock::now();
    const auto pred = predict(*model, feats);
    const double rep = seconds_since(t0);
    model_total += seconds_since(t1);
    r.rep_seconds.push_back(rep);
    if (pred.size() != pairs.size()) throw ContractViolation("prediction count mismatch");
  }
  double sum = 0.0;
  for (double s : r.rep_seconds) sum += s;
  r.s_per_1000 = sum / reps * per_1000;
  r.s_per_1000_model = model_total / reps * per_1000;
  std::filesystem::create_directories(run.out);
  run.write_resolved(run.out);
  write_text(run.out / "bench.json", bench_report_json(r));
  spdlog::info("{:.3f} s per 1000 samples ({:.3f} s model only), {} parameters ({} trainable)", r.s_per_1000,
               r.s_per_1000_model, r.params_total, r.params_trainable);
  return r;
}

std::string bench_report_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["params_total"] = r.params_total;
  j["params_trainable"] = r.params_trainable;
  j["params_analytic_total"] = r.params_analytic_total;
  j["params_analytic_trainable"] = r.params_analytic_trainable;
  j["samples"] = r.samples;
  j["repetitions"] = r.repetitions;
  j["s_per_1000"] = r.s_per_1000;
  j["s_per_1000_model"] = r.s_per_1000_model;
  j["rep_seconds"] = r.rep_seconds;
  return j.dump(2) + "\n";
}

std::size_t cmd_preprocess(const RunConfig& run) {
  const auto input = run.require_path("input");
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot read " + input.string());
  std::filesystem::create_directories(run.out);
  run.write_resolved(run.out);
  auto out = open_out(run.out / "processed.jsonl");
  const int P = run.model.P;
  std::string line;
  std::size_t n = 0;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Geometry g;
    try {
      g = parse_geometry(line);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), 0);
    }
    const GeometryPair p = process_pair(g, g, P);
    const KDeltaMatrix kd = kdelta_encode(p.a, run.model.k);
    nlohmann::ordered_json j;
    j["line"] = lineno;
    j["type"] = std::string(geometry_type_name(g));
    j["class"] = p.a.cls == GeometryClass::Polygonal ? "polygonal" : "linear";
    j["provenance"] = p.a.provenance == Provenance::Original ? "original" : "disk_augmented";
    j["input_vertices"] = vertex_count(g);
    j["vertices"] = p.a.size();
    j["parts"] = p.a.part_count();
    j["kdelta_rows"] = kd.rows();
    j["kdelta_cols"] = kd.cols();
    j["min_x"] = p.a.vertices.row(0).minCoeff();
    j["max_x"] = p.a.vertices.row(0).maxCoeff();
    j["min_y"] = p.a.vertices.row(1).minCoeff();
    j["max_y"] = p.a.vertices.row(1).maxCoeff();
    out << j.dump() << '\n';
    ++n;
  }
  if (!out) throw IoError("failed writing processed.jsonl");
  spdlog::info("processed {} geometries to {} vertices", n, P);
  return n;
}

Splits cmd_synth(const RunConfig& run) {
  SynthOptions so;
  so.n = static_cast<std::size_t>(run.kv.get_int("synth_n", static_cast<long>(so.n)));
  so.neg_ratio = run.kv.get_double("synth_neg_ratio", so.neg_ratio);
  so.variant = parse_synth_variant(run.kv.get_string("synth_variant", "standard"));
  so.seed = run.seed;
  so.P = run.model.P;
  if (run.model.n_classes != 2) throw ConfigError("the synthetic task is binary; use classes = 2");
  const Splits s = synth_er_dataset(so);
  std::filesystem::create_directories(run.out);
  save_dataset(run.out / "train.jsonl", s.train, 2);
  save_dataset(run.out / "valid.jsonl", s.valid, 2);
  save_dataset(run.out / "test.jsonl", s.test, 2);
  KeyValues kv = run.kv;
  kv.set("train", (run.out / "train.jsonl").string());
  kv.set("valid", (run.out / "valid.jsonl").string());
  kv.set("test", (run.out / "test.jsonl").string());
  write_text(run.out / "config.txt", kv.to_text());
  spdlog::info("wrote {} / {} / {} pairs ({}) to {}", s.train.size(), s.valid.size(), s.test.size(),
               to_string(so.variant), run.out.string());
  return s;
}

}  // namespace omni
