#include "omni/error.hpp"
#include "omni/nn/loss.hpp"
#include "model_fixtures.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace omni;
using namespace omni::test;

TEST_SUITE("model") {

TEST_CASE("full model gradients match finite differences") {
  const OmniConfig cfg = tiny_config();
  const auto feats = tiny_features(cfg, 4);
  const Batch<double> batch = batch_of(feats, cfg);
  Model model(cfg);
  model.init(5);
  const nn::DropoutKey key{9, 2};
  loss_and_grad(model, batch, key);
  const auto params = model.parameters();
  std::vector<Eigen::MatrixXd> grads;
  std::vector<nn::GradSlot> slots;
  for (auto* p : params) grads.push_back(p->grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->trainable) slots.push_back({params[i]->name, params[i]->value.data(), grads[i].data(), params[i]->size()});
  }
  const auto report = nn::grad_check(
      [&] {
        const Eigen::MatrixXd logits = model.forward(batch, nn::Mode::Train, key);
        return nn::softmax_cross_entropy<double>(logits, batch.labels).loss;
      },
      slots);
  INFO("worst: " << report.worst);
  CHECK(report.max_relative_error < 1e-4);
  CHECK(report.checked > 200);
}

TEST_CASE("each ablation flag makes its inputs irrelevant") {
  for (const auto& flag : ablation_flags()) {
    CAPTURE(flag);
    OmniConfig cfg = tiny_config();
    const auto feats = tiny_features(cfg, 6);
    const Batch<double> clean = batch_of(feats, cfg);
    Batch<double> noisy = clean;
    perturb_inputs(noisy, flag);

    Model full(cfg);
    full.init(4);
    CHECK(full.forward(clean, nn::Mode::Eval, {}) != full.forward(noisy, nn::Mode::Eval, {}));

    cfg.ablation.enable(flag);
    Model ablated(cfg);
    ablated.init(4);
    const Eigen::MatrixXd a = ablated.forward(clean, nn::Mode::Eval, {});
    const Eigen::MatrixXd b = ablated.forward(noisy, nn::Mode::Eval, {});
    CHECK(a == b);
  }
}

TEST_CASE("ablation keeps the parameter count") {
  OmniConfig cfg = tiny_config();
  Model full(cfg);
  cfg.ablation.enable("no_geoenc");
  Model ablated(cfg);
  CHECK(nn::count_parameters(full.parameters(), false) == nn::count_parameters(ablated.parameters(), false));
}

TEST_CASE("all four ablations together are rejected") {
  OmniConfig cfg = tiny_config();
  for (const auto& flag : ablation_flags()) cfg.ablation.enable(flag);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(Model{cfg}, ConfigError);
}

TEST_CASE("zero-initialized head predicts the uniform distribution") {
  OmniConfig cfg = tiny_config();
  cfg.zero_init_head = true;
  cfg.n_classes = 4;
  Model model(cfg);
  model.init(1);
  const auto feats = tiny_features(cfg, 5);
  const Eigen::MatrixXd p = nn::softmax<double>(model.forward(batch_of(feats, cfg), nn::Mode::Eval, {}));
  CHECK((p.array() - 0.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("parameter count matches the closed form") {
  for (int blocks : {1, 2, 3}) {
    for (Eigen::Index l : {4, 8}) {
      OmniConfig cfg = tiny_config();
      cfg.blocks = blocks;
      cfg.kernels = l;
      cfg.affinity = blocks == 2 ? AffinityVariant::PooledCosine : AffinityVariant::Default;
      Model m(cfg);
      // conv-BN-ReLU stem, R blocks of two conv+BN, geo FC, MLP, text head, distance embeddings.
      const Eigen::Index C = kdelta_channels(cfg.k);
      const Eigen::Index d = cfg.text_dim;
      const Eigen::Index A = affinity_dim(d, cfg.affinity_attrs.size(), cfg.affinity);
      const Eigen::Index F = d + A + 2 * cfg.d_dist + cfg.geom_embed;
      const Eigen::Index trainable = (d * d + d) + 4 * cfg.d_dist + (3 * C * l + 2 * l) +
                                     blocks * (2 * (3 * l * l) + 2 * (2 * l)) + (2 * l * cfg.geom_embed + cfg.geom_embed) +
                                     (F * cfg.mlp_hidden + cfg.mlp_hidden) + (cfg.mlp_hidden * cfg.n_classes + cfg.n_classes);
      const Eigen::Index running = 2 * l + blocks * 2 * (2 * l);
      CHECK(nn::count_parameters(m.parameters(), true) == trainable);
      CHECK(nn::count_parameters(m.parameters(), false) == trainable + running);
      CHECK(analytic_parameter_count(cfg, true) == trainable);
      CHECK(analytic_parameter_count(cfg, false) == trainable + running);
    }
  }
}

TEST_CASE("checkpoints reload bit-exactly") {
  const OmniConfig cfg = tiny_config();
  const auto feats = tiny_features(cfg, 12);
  Model model(cfg);
  model.init(3);
  std::vector<PairFeatures> tr(feats.begin(), feats.begin() + 8), va(feats.begin() + 8, feats.end());
  train(model, tr, va, 3);
  const auto path = std::filesystem::temp_directory_path() / "omni_model_roundtrip.ckpt";
  KeyValues meta;
  meta.set("seed", "3");
  save_model(path, model, meta);
  KeyValues got_meta;
  auto loaded = load_model(path, &got_meta);
  CHECK(got_meta.get_string("seed", "") == "3");
  CHECK(loaded->config().kernels == cfg.kernels);
  CHECK(parameter_hash(loaded->parameters()) == parameter_hash(model.parameters()));
  const Batch<double> b = batch_of(feats, cfg);
  CHECK(loaded->forward(b, nn::Mode::Eval, {}) == model.forward(b, nn::Mode::Eval, {}));
  std::filesystem::remove(path);
}

TEST_CASE("training is deterministic and restores the best epoch") {
  OmniConfig cfg = tiny_config();
  cfg.epochs = 3;
  const auto feats = tiny_features(cfg, 12);
  std::vector<PairFeatures> tr(feats.begin(), feats.begin() + 8), va(feats.begin() + 8, feats.end());
  Model a(cfg), b(cfg);
  a.init(8);
  b.init(8);
  const TrainResult ra = train(a, tr, va, 8);
  const TrainResult rb = train(b, tr, va, 8);
  CHECK(parameter_hash(a.parameters()) == parameter_hash(b.parameters()));
  REQUIRE(ra.history.size() == 3);
  CHECK(ra.history[2].train_loss == rb.history[2].train_loss);
  CHECK(ra.best_epoch >= 1);
  CHECK(ra.best_valid_f1 == selection_score(evaluate(a, va)));
}

TEST_CASE("epoch batches cover every index and merge a trailing single") {
  const auto batches = epoch_batches(9, 4, 1, 1);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 5);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 9);
  CHECK(epoch_batches(9, 4, 1, 1) == batches);
  CHECK(epoch_batches(9, 4, 1, 2) != batches);
}

TEST_CASE("binary metrics") {
  const Metrics m = compute_metrics({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1}, 2);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.accuracy == doctest::Approx(0.6));
  CHECK(m.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0));
  const Metrics none = compute_metrics({0, 0}, {0, 0}, 2);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("four-class metrics leave out unknown from the macro") {
  // same_as perfect, part_of half recall, serves never predicted.
  const Metrics m = compute_metrics({0, 0, 1, 1, 2, 3}, {0, 0, 1, 3, 3, 3}, 4);
  CHECK(m.per_class[0].f1 == doctest::Approx(1.0));
  CHECK(m.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.per_class[2].f1 == 0.0);
  CHECK(m.f1 == doctest::Approx((1.0 + 2.0 / 3.0 + 0.0) / 3.0));
  CHECK_THROWS_AS(compute_metrics({0}, {4}, 4), InvalidParameter);
}

TEST_CASE("dataset lines parse and errors carry the line number") {
  const std::string good =
      R"J({"id_a":"a1","id_b":"b1","attrs_a":{"name":"Karaka Bay"},"attrs_b":{"name":"Karaka Bay Beach"},)J"
      R"J("geom_a":"POINT (174.8 -36.85)","geom_b":"POINT (174.8001 -36.85)","label":"match"})J";
  const auto pairs = parse_dataset(good + "\n", 2);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].pair_id() == "a1|b1");
  CHECK(pairs[0].label == 1);
  CHECK(pairs[0].a.value_of("name") == "Karaka Bay");
  CHECK(parse_dataset(dataset_line(pairs[0], 2) + "\n", 2)[0].pair_id() == "a1|b1");

  try {
    parse_dataset(good + "\n" + R"({"id_a":"x"})" + "\n", 2);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::string bad_label = good;
  bad_label.replace(bad_label.find("\"match\""), 7, "\"maybe\"");
  CHECK_THROWS_AS(parse_dataset(bad_label, 2), ConfigError);
  CHECK(parse_label("part_of", 4) == 1);
  CHECK(parse_label("true", 2) == 1);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.jsonl", 2), IoError);
}

TEST_CASE("key-value configuration parsing and validation") {
  const KeyValues kv = KeyValues::parse("# comment\nP = 50\nkernels=16\naffinity = pooled_cosine\nablate = no_dist\n");
  const OmniConfig cfg = OmniConfig::from(kv);
  CHECK(cfg.P == 50);
  CHECK(cfg.kernels == 16);
  CHECK(cfg.affinity == AffinityVariant::PooledCosine);
  CHECK(cfg.ablation.no_dist);
  CHECK(cfg.ablation.label() == "no_dist");
  KeyValues stored;
  cfg.store(stored);
  CHECK(OmniConfig::from(KeyValues::parse(stored.to_text())).kernels == 16);
  CHECK_THROWS_AS(OmniConfig::from(KeyValues::parse("P = lots\n")), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse("[section]\nP = 3\n"), ConfigError);
  CHECK_THROWS_AS(OmniConfig::from(KeyValues::parse("P = 10\nk = 6\n")), ConfigError);
  CHECK_THROWS_AS(OmniConfig::from(KeyValues::parse("classes = 3\n")), ConfigError);
  CHECK_THROWS_AS(OmniConfig::from(KeyValues::parse("ablate = no_everything\n")), ConfigError);
}

TEST_CASE("synthetic data is seed-deterministic and follows the label rule") {
  SynthOptions so;
  so.n = 120;
  so.neg_ratio = 5;
  so.seed = 21;
  so.P = 64;
  const auto a = synth_er_pairs(so);
  const auto b = synth_er_pairs(so);
  REQUIRE(a.size() == 120);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(dataset_line(a[i], 2) == dataset_line(b[i], 2));
    const double d = process_pair(a[i].a.geometry, a[i].b.geometry, so.P).min_dist_norm;
    const bool rule = d < kMatchMaxDistance && name_cosine(a[i]) > kMatchMinCosine;
    CHECK(rule == (a[i].label == 1));
    positives += static_cast<std::size_t>(a[i].label);
  }
  CHECK(positives == 20);
  const Splits s = stratified_split(a, 4);
  CHECK(s.train.size() == 72);
  CHECK(s.valid.size() == 24);
  CHECK(s.test.size() == 24);
}

TEST_CASE("feature extraction rejects mismatched text dimensions") {
  OmniConfig cfg = tiny_config();
  SynthOptions so;
  so.n = 100;
  so.neg_ratio = 4;
  so.P = cfg.P;
  auto pairs = synth_er_pairs(so);
  pairs.resize(6);
  const TrigramEncoder enc(cfg.affinity_attrs, cfg.text_dim + 1);
  auto feats = make_features(pairs, enc, cfg);
  Model m(cfg);
  m.init(1);
  CHECK_THROWS_AS(m.forward(batch_of(feats, cfg), nn::Mode::Eval, {}), ShapeError);
}

}  // TEST_SUITE
