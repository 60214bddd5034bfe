#include "omni/dataset.hpp"
#include "omni/error.hpp"
#include "omni/text.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace omni;

namespace {

EntityRecord entity(std::string id, std::string name, std::string type, std::string address) {
  return {std::move(id), {{"name", std::move(name)}, {"type", std::move(type)}, {"address", std::move(address)}},
          Point{{174.7, -36.8}}};
}

std::uint64_t fnv(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("omni_text_" + name);
}

}  // namespace

TEST_SUITE("textenc") {

TEST_CASE("entity and pair serialization") {
  const EntityRecord a = entity("1", "Auckland Museum", "museum", "");
  const EntityRecord b = entity("2", "Tamaki Paenga Hira", "museum", "The Domain, Parnell");
  CHECK(serialize_entity(a) == "[COL] name [VAL] Auckland Museum [COL] type [VAL] museum [COL] address [VAL]");
  CHECK(serialize_pair(a, b) ==
        "[CLS] [COL] name [VAL] Auckland Museum [COL] type [VAL] museum [COL] address [VAL] [SEP] "
        "[COL] name [VAL] Tamaki Paenga Hira [COL] type [VAL] museum [COL] address [VAL] The Domain, Parnell [SEP]");
}

TEST_CASE("trigram buckets follow the padded lower-case text") {
  const TrigramEncoder enc({"name"}, 64);
  const auto b = enc.buckets("Ab");
  REQUIRE(b.size() == 2);
  CHECK(b[0] == static_cast<Eigen::Index>(fnv("#ab") % 64));
  CHECK(b[1] == static_cast<Eigen::Index>(fnv("ab#") % 64));
  CHECK(enc.buckets("").empty());
  CHECK(enc.buckets("x").size() == 1);
}

TEST_CASE("embeddings are unit length or zero") {
  const TrigramEncoder enc({"name"}, 32);
  CHECK(enc.embed("Rangitoto Island").norm() == doctest::Approx(1.0));
  CHECK(enc.embed("").isZero(0));
  CHECK(enc.embed("KARAKA") == enc.embed("karaka"));
  CHECK(cosine_similarity(enc.embed("Karaka Bay"), enc.embed("Karaka Bay")) == doctest::Approx(1.0));
  CHECK(cosine_similarity(enc.embed(""), enc.embed("x")) == 0.0);
}

TEST_CASE("encode fills attribute vectors and the summary mean") {
  const TrigramEncoder enc({"name", "type"}, 16);
  const EntityRecord a = entity("1", "Mt Eden", "volcano", "Epsom");
  const EntityRecord b = entity("2", "Maungawhau", "peak", "");
  const TextEncoding t = enc.encode(a, b, "1|2");
  REQUIRE(t.attribute_count() == 2);
  CHECK(t.val_a[0] == enc.embed("Mt Eden"));
  CHECK(t.val_b[1] == enc.embed("peak"));
  CHECK(t.pooled_a[1] == t.val_a[1]);
  const Eigen::VectorXd mean_a = (enc.embed("Mt Eden") + enc.embed("volcano") + enc.embed("Epsom")) / 3.0;
  const Eigen::VectorXd mean_b = (enc.embed("Maungawhau") + enc.embed("peak") + enc.embed("")) / 3.0;
  CHECK((t.summary - (mean_a + mean_b) / 2.0).norm() < 1e-12);
}

TEST_CASE("affinity variants have the documented sizes") {
  const TrigramEncoder enc({"name", "type"}, 8);
  const TextEncoding t = enc.encode(entity("1", "a b", "c", ""), entity("2", "a c", "c", ""), "1|2");
  CHECK(affinity_features(t, AffinityVariant::Default).size() == 2 * 24);
  CHECK(affinity_features(t, AffinityVariant::PooledCosine).size() == 2);
  CHECK(affinity_dim(8, 2, AffinityVariant::Default) == 48);
  const Eigen::VectorXd d = affinity_default(t, 1);
  CHECK(d.tail(8) == t.val_a[1].cwiseProduct(t.val_b[1]));
  CHECK(affinity_cosine(t, 1) == doctest::Approx(1.0));
  CHECK(language_output(t, AffinityVariant::PooledCosine).size() == 8 + 2);
}

TEST_CASE("precomputed embeddings round trip through the binary file") {
  const TrigramEncoder enc({"name"}, 8);
  std::map<std::string, TextEncoding> table;
  table["a|b"] = enc.encode(entity("a", "One Tree Hill", "park", ""), entity("b", "Maungakiekie", "park", ""), "a|b");
  table["c|d"] = enc.encode(entity("c", "x", "y", "z"), entity("d", "", "", ""), "c|d");
  const auto path = temp_file("roundtrip.bin");
  write_precomputed(path, 8, 1, table);
  const PrecomputedEncoder loaded = load_precomputed(path);
  CHECK(loaded.dim() == 8);
  CHECK(loaded.attribute_count() == 1);
  const TextEncoding got = loaded.encode({}, {}, "a|b");
  CHECK((got.summary - table["a|b"].summary).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((got.val_b[0] - table["a|b"].val_b[0]).cwiseAbs().maxCoeff() < 1e-7);
  CHECK_THROWS_AS(loaded.encode({}, {}, "missing|pair"), MissingEmbedding);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_precomputed(path), IoError);
  std::ofstream(path, std::ios::binary) << "NOTEMBED" << bytes.substr(8);
  CHECK_THROWS_AS(load_precomputed(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_precomputed(path), IoError);
}

TEST_CASE("precomputed tables with the wrong shape are rejected") {
  TextEncoding t;
  t.summary = Eigen::VectorXd::Zero(4);
  t.val_a = t.val_b = t.pooled_a = t.pooled_b = {Eigen::VectorXd::Zero(5)};
  CHECK_THROWS_AS(PrecomputedEncoder(4, 1, {{"x", t}}), ShapeError);
}

}  // TEST_SUITE
