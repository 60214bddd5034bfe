#include "omni/text.hpp"

#include "omni/error.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

namespace omni {
namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fold_case(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Eigen::VectorXd mean_of(const std::vector<Eigen::VectorXd>& vs, Eigen::Index dim) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
  if (vs.empty()) return m;
  for (const auto& v : vs) m += v;
  return m / static_cast<double>(vs.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v(i))));
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  Eigen::VectorXd vector(Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      v(i) = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(uint(4))));
    }
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("embedding file is truncated or malformed");
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

constexpr char kEmbeddingMagic[8] = {'O', 'M', 'N', 'I', 'E', 'M', 'B', '1'};

}  // namespace

std::string EntityRecord::value_of(const std::string& name) const {
  for (const auto& [k, v] : attrs) {
    if (k == name) return v;
  }
  return {};
}

std::string serialize_entity(const EntityRecord& e) {
  std::string out;
  for (const auto& [name, value] : e.attrs) {
    if (!out.empty()) out += ' ';
    out += "[COL] " + name + " [VAL]";
    if (!value.empty()) out += ' ' + value;
  }
  return out;
}

std::string serialize_pair(const EntityRecord& a, const EntityRecord& b) {
  return "[CLS] " + serialize_entity(a) + " [SEP] " + serialize_entity(b) + " [SEP]";
}

// ---------------------------------------------------------------------------

TrigramEncoder::TrigramEncoder(std::vector<std::string> affinity_attrs, Eigen::Index dim)
    : attrs_(std::move(affinity_attrs)), dim_(dim) {
  if (dim < 1) throw InvalidParameter("encoder dimension must be positive");
}

std::vector<Eigen::Index> TrigramEncoder::buckets(const std::string& text) const {
  std::vector<Eigen::Index> out;
  if (text.empty()) return out;
  const std::string padded = "#" + fold_case(text) + "#";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.push_back(static_cast<Eigen::Index>(fnv1a(std::string_view(padded).substr(i, 3)) %
                                            static_cast<std::uint64_t>(dim_)));
  }
  return out;
}

Eigen::VectorXd TrigramEncoder::embed(const std::string& text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index b : buckets(text)) v(b) += 1.0;
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

TextEncoding TrigramEncoder::encode(const EntityRecord& a, const EntityRecord& b,
                                    const std::string&) const {
  TextEncoding enc;
  for (const auto& attr : attrs_) {
    enc.val_a.push_back(embed(a.value_of(attr)));
    enc.val_b.push_back(embed(b.value_of(attr)));
  }
  enc.pooled_a = enc.val_a;
  enc.pooled_b = enc.val_b;

  auto entity_mean = [&](const EntityRecord& e) {
    std::vector<Eigen::VectorXd> vs;
    for (const auto& [name, value] : e.attrs) vs.push_back(embed(value));
    return mean_of(vs, dim_);
  };
  // The val and pooled roles coincide here, so their entity means do too.
  const Eigen::VectorXd mean_a = entity_mean(a);
  const Eigen::VectorXd mean_b = entity_mean(b);
  enc.summary = (mean_a + mean_b + mean_a + mean_b) / 4.0;
  return enc;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------

PrecomputedEncoder::PrecomputedEncoder(Eigen::Index dim, std::size_t attribute_count,
                                       std::map<std::string, TextEncoding> table)
    : dim_(dim), attrs_(attribute_count), table_(std::move(table)) {
  for (const auto& [id, enc] : table_) {
    auto check = [&](const Eigen::VectorXd& v) {
      if (v.size() != dim_) throw ShapeError("embedding for '" + id + "' has the wrong dimension");
    };
    check(enc.summary);
    for (const auto* group : {&enc.val_a, &enc.val_b, &enc.pooled_a, &enc.pooled_b}) {
      if (group->size() != attrs_) throw ShapeError("embedding for '" + id + "' has the wrong attribute count");
      for (const auto& v : *group) check(v);
    }
  }
}

TextEncoding PrecomputedEncoder::encode(const EntityRecord&, const EntityRecord&,
                                        const std::string& pair_id) const {
  auto it = table_.find(pair_id);
  if (it == table_.end()) throw MissingEmbedding("no precomputed embedding for pair '" + pair_id + "'");
  return it->second;
}

void write_precomputed(const std::filesystem::path& path, Eigen::Index dim, std::size_t attribute_count,
                       const std::map<std::string, TextEncoding>& table) {
  // Validates shapes before anything is written.
  const PrecomputedEncoder checked(dim, attribute_count, table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
  put_u32(out, PrecomputedEncoder::kVersion);
  put_u32(out, static_cast<std::uint32_t>(dim));
  put_u32(out, static_cast<std::uint32_t>(attribute_count));
  put_u64(out, table.size());
  for (const auto& [id, enc] : table) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    put_vector(out, enc.summary);
    for (const auto* group : {&enc.val_a, &enc.val_b, &enc.pooled_a, &enc.pooled_b}) {
      for (const auto& v : *group) put_vector(out, v);
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

PrecomputedEncoder load_precomputed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  ByteReader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  if (r.raw(sizeof kEmbeddingMagic) != std::string(kEmbeddingMagic, sizeof kEmbeddingMagic)) {
    throw IoError("not an embedding file (bad magic)");
  }
  const auto version = r.uint(4);
  if (version != PrecomputedEncoder::kVersion) {
    throw IoError("unsupported embedding file version " + std::to_string(version));
  }
  const auto dim = static_cast<Eigen::Index>(r.uint(4));
  const auto attrs = static_cast<std::size_t>(r.uint(4));
  const auto count = r.uint(8);
  if (dim < 1) throw IoError("embedding dimension must be positive");
  std::map<std::string, TextEncoding> table;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = static_cast<std::size_t>(r.uint(4));
    std::string id = r.raw(len);
    TextEncoding enc;
    enc.summary = r.vector(dim);
    for (auto* group : {&enc.val_a, &enc.val_b, &enc.pooled_a, &enc.pooled_b}) {
      for (std::size_t h = 0; h < attrs; ++h) group->push_back(r.vector(dim));
    }
    table.emplace(std::move(id), std::move(enc));
  }
  if (!r.done()) throw IoError("trailing bytes in embedding file");
  return PrecomputedEncoder(dim, attrs, std::move(table));
}

}  // namespace omni
