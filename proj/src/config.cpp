#include "omni/config.hpp"

#include "omni/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <sstream>

namespace omni {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KeyValues from_tree(const boost::property_tree::ptree& tree) {
  KeyValues kv;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw ConfigError("configuration sections are not supported ('" + key + "')");
    kv.set(key, trim(node.data()));
  }
  return kv;
}

}  // namespace

KeyValues KeyValues::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("configuration file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("bad configuration file: ") + e.what());
  }
  return from_tree(tree);
}

KeyValues KeyValues::parse(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("bad configuration text: ") + e.what());
  }
  return from_tree(tree);
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

long KeyValues::get_int(const std::string& key, long fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  long out = 0;
  const auto* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "' must be an integer, got '" + *v + "'");
  return out;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  double out = 0;
  const auto* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "' must be a number, got '" + *v + "'");
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("'" + key + "' must be true or false, got '" + *v + "'");
}

std::vector<std::string> KeyValues::get_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  return split_list(*v);
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string Ablation::label() const {
  std::vector<std::string> on;
  if (no_lang) on.emplace_back("no_lang");
  if (no_geoenc) on.emplace_back("no_geoenc");
  if (no_att_aff) on.emplace_back("no_att_aff");
  if (no_dist) on.emplace_back("no_dist");
  if (on.empty()) return "none";
  std::string out = on[0];
  for (std::size_t i = 1; i < on.size(); ++i) out += "," + on[i];
  return out;
}

void Ablation::enable(const std::string& flag) {
  if (flag == "no_lang") no_lang = true;
  else if (flag == "no_geoenc") no_geoenc = true;
  else if (flag == "no_att_aff") no_att_aff = true;
  else if (flag == "no_dist") no_dist = true;
  else if (flag != "none") throw ConfigError("unknown ablation flag '" + flag + "'");
}

std::string to_string(AffinityVariant v) {
  return v == AffinityVariant::Default ? "default" : "pooled_cosine";
}

AffinityVariant parse_affinity(const std::string& s) {
  if (s == "default") return AffinityVariant::Default;
  if (s == "pooled_cosine") return AffinityVariant::PooledCosine;
  throw ConfigError("affinity must be 'default' or 'pooled_cosine', got '" + s + "'");
}

void OmniConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (P <= 2 * k) throw ConfigError("P must exceed 2k");
  if (P < 4) throw ConfigError("P must be at least 4");
  if (kernels < 1 || blocks < 0 || d_dist < 1 || geom_embed < 1 || mlp_hidden < 1 || text_dim < 1) {
    throw ConfigError("all dimensions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch < 2) throw ConfigError("batch must be at least 2 (batch normalization)");
  if (n_classes != 2 && n_classes != 4) throw ConfigError("classes must be 2 or 4");
  if (d_cap_km <= 0.0) throw ConfigError("d_cap_km must be positive");
  if (pos_weight <= 0.0) throw ConfigError("pos_weight must be positive");
  if (ablation.all()) throw ConfigError("all four ablation flags leave an empty feature vector");
}

OmniConfig OmniConfig::from(const KeyValues& kv) {
  OmniConfig c;
  c.P = static_cast<int>(kv.get_int("P", c.P));
  c.k = static_cast<int>(kv.get_int("k", c.k));
  c.kernels = kv.get_int("kernels", c.kernels);
  c.blocks = static_cast<int>(kv.get_int("blocks", c.blocks));
  c.dropout = kv.get_double("dropout", c.dropout);
  c.lr = kv.get_double("lr", c.lr);
  c.warmup = kv.get_int("warmup", c.warmup);
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.batch = static_cast<int>(kv.get_int("batch", c.batch));
  c.affinity = parse_affinity(kv.get_string("affinity", to_string(c.affinity)));
  c.n_classes = static_cast<int>(kv.get_int("classes", c.n_classes));
  for (const auto& flag : kv.get_list("ablate", {})) c.ablation.enable(flag);
  c.d_dist = kv.get_int("d_dist", c.d_dist);
  c.geom_embed = kv.get_int("geom_embed", c.geom_embed);
  c.mlp_hidden = kv.get_int("mlp_hidden", c.mlp_hidden);
  c.d_cap_km = kv.get_double("d_cap_km", c.d_cap_km);
  c.affinity_attrs = kv.get_list("affinity_attrs", c.affinity_attrs);
  c.text_dim = kv.get_int("text_dim", c.text_dim);
  c.pos_weight = kv.get_double("pos_weight", c.pos_weight);
  c.zero_init_head = kv.get_bool("zero_init_head", c.zero_init_head);
  c.validate();
  return c;
}

void OmniConfig::store(KeyValues& kv) const {
  auto num = [](auto v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  kv.set("P", std::to_string(P));
  kv.set("k", std::to_string(k));
  kv.set("kernels", std::to_string(kernels));
  kv.set("blocks", std::to_string(blocks));
  kv.set("dropout", num(dropout));
  kv.set("lr", num(lr));
  kv.set("warmup", std::to_string(warmup));
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch", std::to_string(batch));
  kv.set("affinity", to_string(affinity));
  kv.set("classes", std::to_string(n_classes));
  kv.set("ablate", ablation.label());
  kv.set("d_dist", std::to_string(d_dist));
  kv.set("geom_embed", std::to_string(geom_embed));
  kv.set("mlp_hidden", std::to_string(mlp_hidden));
  kv.set("d_cap_km", num(d_cap_km));
  std::string attrs;
  for (const auto& a : affinity_attrs) attrs += (attrs.empty() ? "" : ",") + a;
  kv.set("affinity_attrs", attrs);
  kv.set("text_dim", std::to_string(text_dim));
  kv.set("pos_weight", num(pos_weight));
  kv.set("zero_init_head", zero_init_head ? "true" : "false");
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys{
      "P",        "k",          "kernels",    "blocks",   "dropout",        "lr",       "warmup",
      "epochs",   "batch",      "affinity",   "classes",  "ablate",         "d_dist",   "geom_embed",
      "mlp_hidden", "d_cap_km", "affinity_attrs", "text_dim", "pos_weight", "zero_init_head"};
  return keys;
}

}  // namespace omni
