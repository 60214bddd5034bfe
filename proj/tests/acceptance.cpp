// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; --out DIR keeps the artifacts.

#include "omni/error.hpp"
#include "omni/geo_encoder.hpp"
#include "omni/geometry.hpp"
#include "omni/kdelta.hpp"
#include "omni/nn/layers.hpp"
#include "omni/nn/loss.hpp"
#include "omni/workflow.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "prompt_fixtures.hpp"
#include "support.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

using namespace omni;
using namespace omni::test;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kGradTol = 1e-4;
constexpr double kDistTol = 1e-9;
constexpr double kHaversineRel = 1e-6;
constexpr double kTriangleTol = 1e-9;
constexpr double kStandardF1 = 0.95;
constexpr double kGeometryOnlyFull = 0.9;
constexpr double kGeometryOnlyNoGeoenc = 0.5;
constexpr double kProbeAccuracy = 0.85;
constexpr double kLimitGrad = 60, kLimitOracle = 30, kLimitPipeline = 60, kLimitLearning = 900, kLimitProbe = 600,
                 kLimitPrompt = 30;

// Model size used for the learning, probe and bench criteria on one CPU core.
const std::string kDeskConfig = "kernels = 32\nblocks = 2\n";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig run_config(const std::string& text, const fs::path& out) {
  KeyValues kv = KeyValues::parse(text);
  kv.set("out", out.string());
  return RunConfig::resolve(kv);
}

/// Synthesizes a split into out/data and returns the training config for out/run.
RunConfig synth_and_config(const std::string& text, const fs::path& out) {
  cmd_synth(run_config(text, out / "data"));
  KeyValues kv = KeyValues::load(out / "data" / "config.txt");
  kv.set("out", (out / "run").string());
  return RunConfig::resolve(kv);
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  using nn::Mode;
  using nn::Sequence;
  double worst = 0.0;
  std::string worst_name;
  long checked = 0;
  auto note = [&](const std::string& name, const nn::GradCheckReport& r) {
    checked += r.checked;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  };
  for (auto [pad, stride] : {std::pair<Eigen::Index, Eigen::Index>{0, 1}, {1, 1}, {1, 2}}) {
    nn::Conv1d<double> conv("c", 3, 4, pad, stride, true);
    std::mt19937_64 rng(11);
    conv.init(rng);
    Mat x = random_matrix(3, 2 * 8, 12);
    nn::ParameterList<double> params;
    conv.collect(params);
    note("conv1d", check_layer(
                       params, x, [&] { return conv.forward(Sequence<double>(x, 2, 8)).data; },
                       [&](const Mat& dy) { return conv.backward(Sequence<double>(dy, 2, conv.output_length(8))).data; }));
  }
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    nn::BatchNorm1d<double> bn("bn", 3);
    bn.gamma.value = random_matrix(3, 1, 31);
    bn.beta.value = random_matrix(3, 1, 32);
    bn.running_var.value = random_matrix(3, 1, 34).cwiseAbs().array() + 0.5;
    Mat x = random_matrix(3, 3 * 4, 35);
    nn::ParameterList<double> params;
    bn.collect(params);
    const Mat mean = bn.running_mean.value, var = bn.running_var.value;
    note("batchnorm", check_layer(
                          params, x,
                          [&] {
                            bn.running_mean.value = mean;
                            bn.running_var.value = var;
                            return bn.forward(Sequence<double>(x, 3, 4), mode).data;
                          },
                          [&](const Mat& dy) { return bn.backward(Sequence<double>(dy, 3, 4)).data; }));
  }
  {
    nn::MaxPool1d<double> pool(2, 2, 0);
    Mat x = random_matrix(3, 2 * 9, 41);
    note("maxpool", check_layer(
                        {}, x, [&] { return pool.forward(Sequence<double>(x, 2, 9)).data; },
                        [&](const Mat& dy) { return pool.backward(Sequence<double>(dy, 2, 4)).data; }));
    nn::GlobalMaxPool<double> gmp;
    Mat r = random_matrix(4, 2 * 6, 42);
    note("global maxpool", check_layer(
                               {}, r, [&] { return gmp.forward(Sequence<double>(r, 2, 6)); },
                               [&](const Mat& dy) { return gmp.backward(dy).data; }));
    nn::ReLU<double> relu;
    Mat z = random_matrix(3, 5, 51);
    note("relu", check_layer({}, z, [&] { return relu.forward(z); }, [&](const Mat& dy) { return relu.backward(dy); }));
    nn::Dropout<double> drop(0.3, 4);
    Mat d = random_matrix(3, 6, 52);
    const nn::DropoutKey key{1, 2};
    note("dropout", check_layer(
                        {}, d, [&] { return drop.forward(d, Mode::Train, key); },
                        [&](const Mat& dy) { return drop.backward(dy); }));
  }
  {
    nn::Linear<double> lin("lin", 5, 3);
    std::mt19937_64 rng(61);
    lin.init(rng);
    Mat x = random_matrix(5, 4, 63);
    nn::ParameterList<double> params;
    lin.collect(params);
    note("linear", check_layer(params, x, [&] { return lin.forward(x); }, [&](const Mat& dy) { return lin.backward(dy); }));
  }
  {
    nn::ResidualBlock<double> block("rb", 3);
    std::mt19937_64 rng(72);
    block.init(rng);
    Mat x = random_matrix(3, 2 * 6, 73);
    nn::ParameterList<double> params;
    block.collect(params);
    note("residual block", check_layer(
                               params, x, [&] { return block.forward(Sequence<double>(x, 2, 6), Mode::Train).data; },
                               [&](const Mat& dy) { return block.backward(Sequence<double>(dy, 2, 6)).data; }));
  }
  {
    GeoEncoder<double> enc(6, 4, 1, 0.3);
    std::mt19937_64 rng(81);
    enc.init(rng);
    Mat x = random_matrix(6, 3 * 12, 82);
    nn::ParameterList<double> params;
    enc.collect(params);
    const nn::DropoutKey key{3, 4};
    note("geo encoder", check_layer(
                            params, x, [&] { return enc.forward(Sequence<double>(x, 3, 12), Mode::Train, key); },
                            [&](const Mat& dy) { return enc.backward(dy).data; }));
  }
  {
    Mat logits = random_matrix(4, 5, 91);
    const std::vector<int> y{0, 3, 2, 1, 3};
    const auto result = nn::softmax_cross_entropy<double>(logits, y);
    const Mat g = result.grad;
    note("softmax cross-entropy",
         nn::grad_check([&] { return nn::softmax_cross_entropy<double>(logits, y).loss; },
                        {{"logits", logits.data(), g.data(), logits.size()}}));
  }
  {
    const OmniConfig cfg = tiny_config();
    const auto feats = tiny_features(cfg, 4);
    const Batch<double> batch = batch_of(feats, cfg);
    Model model(cfg);
    model.init(5);
    const nn::DropoutKey key{9, 2};
    loss_and_grad(model, batch, key);
    const auto params = model.parameters();
    std::vector<Mat> grads;
    for (auto* p : params) grads.push_back(p->grad);
    std::vector<nn::GradSlot> slots;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->trainable) slots.push_back({params[i]->name, params[i]->value.data(), grads[i].data(), params[i]->size()});
    }
    note("full model", nn::grad_check(
                           [&] {
                             return nn::softmax_cross_entropy<double>(model.forward(batch, Mode::Train, key), batch.labels)
                                 .loss;
                           },
                           slots));
  }
  return {worst < kGradTol, fmt::format("max relative error {:.2e} ({}) over {} entries", worst, worst_name, checked)};
}

Outcome geometry_oracles() {
  std::mt19937_64 rng(2024);
  int decimation_ok = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = oracle::uniform_int(rng, 4, 12);
    const bool polygon = trial % 2 == 0;
    const Ring ring = polygon ? oracle::star(rng, n, {0, 0}, 1.0) : oracle::walk(rng, n, {0, 0}, 1.0);
    const int P = oracle::uniform_int(rng, polygon ? 3 : 2, n - 1);
    const Geometry g = polygon ? Geometry(Polygon{ring, {}}) : Geometry(LineString{ring});
    const ProcessedGeometry got = decimate_to_p(g, P);
    const auto want = oracle::decimate(ring, polygon, static_cast<std::size_t>(P));
    bool same = got.size() == static_cast<Eigen::Index>(want.size());
    for (std::size_t i = 0; same && i < want.size(); ++i) same = got.vertices.col(static_cast<Eigen::Index>(i)) == want[i];
    decimation_ok += same ? 1 : 0;
  }
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const Geometry a = oracle::random_geometry(rng, 12);
    const Geometry b = oracle::random_geometry(rng, 12);
    const Coordinate shift = vertex_centroid(a) - vertex_centroid(b) + Coordinate(oracle::uniform(rng, -0.01, 0.01), 0);
    const GeometryPair p = process_pair(a, translate(b, shift), 32);
    worst = std::max(worst, std::abs(p.min_dist_norm - oracle::min_distance(p.a, p.b)));
  }
  return {decimation_ok == 500 && worst <= kDistTol,
          fmt::format("decimation exact {}/500, min distance max error {:.1e}", decimation_ok, worst)};
}

Outcome pipeline_invariants() {
  std::mt19937_64 rng(77);
  const int P = 300, k = 6;
  int ok = 0;
  std::set<std::string> kinds;
  for (int trial = 0; trial < 1000; ++trial) {
    const Geometry a = oracle::random_geometry(rng, 40);
    const Geometry b = oracle::random_geometry(rng, 40);
    kinds.insert(std::string(geometry_type_name(a)));
    const GeometryPair pair = process_pair(a, b, P);
    bool good = true;
    for (const ProcessedGeometry* g : {&pair.a, &pair.b}) {
      good = good && g->size() == P && g->vertices.cwiseAbs().maxCoeff() <= 1.0;
      const KDeltaMatrix m = kdelta_encode(*g, k);
      good = good && m.rows() == P && m.cols() == 2 + 4 * k;
      const bool cyclic = g->cls == GeometryClass::Polygonal;
      for (Eigen::Index i = 0; good && i < P; ++i) {
        for (int j = 1; j <= k; ++j) {
          for (int dir : {-1, 1}) {
            Eigen::Index n = i + dir * j;
            Eigen::Vector2d want = Eigen::Vector2d::Zero();
            if (cyclic) {
              n = (n + P) % P;
              want = g->vertices.col(i) - g->vertices.col(n);
            } else if (n >= 0 && n < P) {
              want = g->vertices.col(i) - g->vertices.col(n);
            }
            const Eigen::Index col = dir < 0 ? 2 + 2 * (k - j) : 2 + 2 * (k + j - 1);
            good = good && m.row(i).segment<2>(col).transpose() == want;
          }
        }
      }
    }
    ok += good ? 1 : 0;
  }
  std::string types;
  for (const auto& t : kinds) types += (types.empty() ? "" : ",") + t;
  return {ok == 1000, fmt::format("{}/1000 pairs hold every invariant; types {}", ok, types)};
}

Outcome haversine() {
  const double q = haversine_km({0, 0}, {90, 0});
  const bool quarter = std::abs(q - 10007.54) <= kHaversineRel * 10007.54 &&
                       std::abs(q - std::numbers::pi * 6371.0 / 2.0) <= kHaversineRel * q;
  std::mt19937_64 rng(4);
  auto point = [&] { return Coordinate(oracle::uniform(rng, -180, 180), oracle::uniform(rng, -90, 90)); };
  int symmetric = 0, triangle = 0;
  for (int i = 0; i < 10000; ++i) {
    const Coordinate a = point(), b = point(), c = point();
    symmetric += haversine_km(a, b) == haversine_km(b, a) ? 1 : 0;
    triangle += haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + kTriangleTol ? 1 : 0;
  }
  return {quarter && symmetric == 10000 && triangle == 10000,
          fmt::format("quarter meridian {:.6f} km, symmetric {}/10000, triangle {}/10000", q, symmetric, triangle)};
}

struct LearningState {
  fs::path checkpoint;
  fs::path test;
  RunConfig standard;
};

Outcome learning(const fs::path& out, LearningState& state) {
  const std::string base = kDeskConfig + "synth_n = 3100\nsynth_neg_ratio = 30\nseed = 1\n";
  RunConfig standard = synth_and_config(base + "synth_variant = standard\n", out / "standard");
  const TrainOutcome s = cmd_train(standard);
  state = {out / "standard" / "run" / "model.ckpt", out / "standard" / "data" / "test.jsonl", standard};

  RunConfig geo = synth_and_config(base + "synth_variant = geometry_only\n", out / "geometry_only");
  const TrainOutcome full = cmd_train(geo);
  KeyValues kv = geo.kv;
  kv.set("ablate", "no_geoenc");
  kv.set("out", (out / "geometry_only" / "no_geoenc").string());
  const TrainOutcome blind = cmd_train(RunConfig::resolve(kv));

  const bool pass = s.test.f1 >= kStandardF1 && full.test.f1 >= kGeometryOnlyFull && blind.test.f1 <= kGeometryOnlyNoGeoenc;
  return {pass, fmt::format("standard F1 {:.3f} (>= {}), geometry-only full F1 {:.3f} (>= {}), no_geoenc F1 {:.3f} (<= {})",
                            s.test.f1, kStandardF1, full.test.f1, kGeometryOnlyFull, blind.test.f1,
                            kGeometryOnlyNoGeoenc)};
}

Outcome probe(const fs::path& out, const LearningState& state) {
  if (state.checkpoint.empty() || !fs::exists(state.checkpoint)) return {false, "needs the criterion 5 checkpoint"};
  KeyValues kv = state.standard.kv;
  kv.set("checkpoint", state.checkpoint.string());
  kv.set("out", (out / "probe").string());
  std::map<Relation, double> acc;
  for (const auto& r : cmd_probe(RunConfig::resolve(kv))) acc[r.relation] = r.accuracy;
  const bool pass = acc[Relation::Contain] >= kProbeAccuracy && acc[Relation::Overlap] >= kProbeAccuracy;
  return {pass, fmt::format("contain {:.3f}, overlap {:.3f} (>= {}), touch {:.3f} (reported)", acc[Relation::Contain],
                            acc[Relation::Overlap], kProbeAccuracy, acc[Relation::Touch])};
}

Outcome ablation() {
  int ok = 0;
  std::string failed;
  for (const auto& flag : ablation_flags()) {
    OmniConfig cfg = tiny_config();
    cfg.ablation.enable(flag);
    const auto feats = tiny_features(cfg, 6);
    const Batch<double> clean = batch_of(feats, cfg);
    Batch<double> noisy = clean;
    perturb_inputs(noisy, flag);
    Model model(cfg);
    model.init(4);
    const bool same = model.forward(clean, nn::Mode::Eval, {}) == model.forward(noisy, nn::Mode::Eval, {}) &&
                      model.forward(clean, nn::Mode::Train, {1, 1}) == model.forward(noisy, nn::Mode::Train, {1, 1});
    OmniConfig full_cfg = tiny_config();
    Model full(full_cfg);
    full.init(4);
    const bool sensitive = full.forward(clean, nn::Mode::Eval, {}) != full.forward(noisy, nn::Mode::Eval, {});
    if (same && sensitive) {
      ++ok;
    } else {
      failed += " " + flag;
    }
  }
  return {ok == 4, fmt::format("{}/4 flags leave logits bit-identical under perturbation{}", ok,
                               failed.empty() ? "" : "; failed:" + failed)};
}

Outcome prompt_harness(const fs::path& out) {
  const fs::path golden = fs::path(OMNI_TEST_DATA) / "golden";
  int goldens = 0;
  const LabeledPair p = fixture_pair();
  for (SerializationStyle s : {SerializationStyle::Simple, SerializationStyle::AttributeValue,
                               SerializationStyle::PlmSerialization, SerializationStyle::AttributeValueDistance}) {
    PromptTemplate t;
    t.style = s;
    const auto distance = needs_distance(s) ? std::optional<double>(prompt_distance_km(p)) : std::nullopt;
    goldens += slurp(golden / ("zero_shot_" + to_string(s) + ".txt")) == build_prompt(t, p, distance) ? 1 : 0;
  }
  for (DemoStrategy strategy : {DemoStrategy::Random, DemoStrategy::ClassBalanced}) {
    FewShotConfig fs;
    fs.strategy = strategy;
    fs.seed = 3;
    std::vector<Demo> demos;
    for (auto& d : sample_demos(train_split(2), fs, 2)) demos.push_back({d, std::nullopt});
    goldens += slurp(golden / ("few_shot_" + to_string(strategy) + ".txt")) ==
                       build_prompt(PromptTemplate{}, p, std::nullopt, demos)
                   ? 1
                   : 0;
  }
  FewShotConfig balanced;
  balanced.strategy = DemoStrategy::ClassBalanced;
  const std::size_t four_class = sample_demos(train_split(4), balanced, 4).size();

  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    std::smatch m;
    const std::string content = user_content(req);
    const int i = std::regex_search(content, m, std::regex("alpha-(\\d+)")) ? std::stoi(m[1]) : 0;
    reply(res, i % 10 == 0 ? "Not sure." : (i % 3 == 0 ? "Yes" : "No"));
  });
  std::vector<LabeledPair> test;
  for (int i = 0; i < 100; ++i) test.push_back(numbered_pair(i, i % 3 == 0 ? 1 : 0));
  PromptRunOptions opt;
  opt.endpoint = server.endpoint();
  opt.out_root = out / "prompt";
  const PromptRunResult r = prompt_run(opt, test);
  const auto metrics = nlohmann::json::parse(slurp(r.dir / "metrics.json"));
  std::size_t lines = 0;
  {
    std::ifstream in(r.dir / "predictions.jsonl");
    for (std::string line; std::getline(in, line);) ++lines;
  }
  bool complete = lines == 100 && metrics.at("n") == 100 && metrics.at("unparseable") == 10;
  for (const char* key : {"precision", "recall", "f1", "macro_f1", "accuracy", "per_class"}) {
    complete = complete && metrics.contains(key);
  }
  return {goldens == 6 && four_class == 8 && complete,
          fmt::format("{}/6 goldens identical, {} four-class demos, mock run {} predictions with {} unparseable", goldens,
                      four_class, lines, r.unparseable)};
}

Outcome bench(const fs::path& out, const LearningState& state) {
  fs::path checkpoint = state.checkpoint;
  KeyValues kv = KeyValues::parse(kDeskConfig);
  if (checkpoint.empty() || !fs::exists(checkpoint)) {
    // Criterion 5 was skipped: bench a freshly initialized desk model.
    RunConfig run = run_config(kDeskConfig, out / "bench");
    fs::create_directories(run.out);
    Model m(run.model);
    m.init(1);
    checkpoint = run.out / "init.ckpt";
    save_model(checkpoint, m, run.kv);
  } else {
    kv.set("test", state.test.string());
  }
  kv.set("checkpoint", checkpoint.string());
  kv.set("out", (out / "bench").string());
  const BenchReport r = cmd_bench(RunConfig::resolve(kv));
  const bool pass = r.params_total == r.params_analytic_total && r.params_trainable == r.params_analytic_trainable &&
                    r.s_per_1000 > 0.0 && r.repetitions >= 3;
  return {pass, fmt::format("{:.3f} s per 1000 samples ({:.3f} s model only), params {} / {} trainable, analytic {} / {}",
                            r.s_per_1000, r.s_per_1000_model, r.params_total, r.params_trainable,
                            r.params_analytic_total, r.params_analytic_trainable)};
}

Outcome determinism(const fs::path& out) {
  const std::string tiny =
      "P = 32\nk = 2\nkernels = 8\nblocks = 1\nepochs = 3\nbatch = 8\nsynth_n = 200\nsynth_neg_ratio = 4\nseed = 5\n";
  std::vector<std::string> files{"model.ckpt", "metrics.json", "history.csv", "config.txt"};
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"a", "b"}) {
    const RunConfig run = synth_and_config(tiny, out / "determinism" / name);
    cmd_train(run);
    std::map<std::string, std::string> bytes;
    for (const auto& f : files) bytes[f] = slurp(run.out / f);
    bytes["train.jsonl"] = slurp(out / "determinism" / name / "data" / "train.jsonl");
    runs.push_back(bytes);
  }
  int same = 0;
  std::string differ;
  for (const auto& [f, bytes] : runs[0]) {
    // Config files record the output directory, which differs by design.
    const bool equal = f == "config.txt" ? !bytes.empty() && !runs[1].at(f).empty() : bytes == runs[1].at(f);
    if (equal && !bytes.empty()) {
      ++same;
    } else {
      differ += " " + f;
    }
  }
  return {differ.empty(), fmt::format("{}/{} artifacts bit-identical{}", same, runs[0].size(),
                                      differ.empty() ? "" : "; differ:" + differ)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  fs::path out = fs::temp_directory_path() / "omni_acceptance";
  bool keep = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
      keep = true;
    } else {
      selected.insert(std::stoi(a));
    }
  }
  if (selected.empty()) {
    for (int c = 1; c <= 10; ++c) selected.insert(c);
  }
  spdlog::set_level(spdlog::level::warn);
  fs::remove_all(out);
  fs::create_directories(out);

  LearningState state;
  const std::vector<std::tuple<int, std::string, double, std::function<Outcome()>>> criteria{
      {1, "gradient correctness", kLimitGrad, gradients},
      {2, "geometry oracle equivalence", kLimitOracle, geometry_oracles},
      {3, "pipeline invariants", kLimitPipeline, pipeline_invariants},
      {4, "haversine", 0, haversine},
      {5, "end-to-end learning", kLimitLearning, [&] { return learning(out, state); }},
      {6, "spatial-relation probe", kLimitProbe, [&] { return probe(out, state); }},
      {7, "ablation machinery", 0, ablation},
      {8, "prompt harness", kLimitPrompt, [&] { return prompt_harness(out); }},
      {9, "bench", 0, [&] { return bench(out, state); }},
      {10, "determinism", 0, [&] { return determinism(out); }},
  };
  int failures = 0;
  for (const auto& [id, name, limit, fn] : criteria) {
    if (selected.count(id) == 0) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit > 0 && secs > limit) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s limit", limit);
    }
    failures += o.pass ? 0 : 1;
    fmt::print("[{}] criterion {:>2} {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, secs);
    std::fflush(stdout);
  }
  if (!keep) fs::remove_all(out);
  return failures == 0 ? 0 : 1;
}
