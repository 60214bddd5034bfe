#include "omni/metrics.hpp"

#include "omni/dataset.hpp"
#include "omni/error.hpp"

namespace omni {

Metrics compute_metrics(const std::vector<int>& gold, const std::vector<int>& predicted, int n_classes) {
  if (gold.size() != predicted.size()) throw ShapeError("gold and predicted label counts differ");
  const auto& names = class_names(n_classes);
  std::vector<long> tp(names.size(), 0), fp(names.size(), 0), fn(names.size(), 0);
  long correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = predicted[i];
    if (g < 0 || g >= n_classes || p < 0 || p >= n_classes) throw InvalidParameter("label outside the class set");
    if (g == p) {
      ++tp[static_cast<std::size_t>(g)];
      ++correct;
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }

  Metrics m;
  m.n_classes = n_classes;
  m.n = static_cast<long>(gold.size());
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    ClassScore s;
    s.name = names[c];
    s.support = tp[c] + fn[c];
    const long pred_pos = tp[c] + fp[c];
    s.precision = pred_pos > 0 ? static_cast<double>(tp[c]) / static_cast<double>(pred_pos) : 0.0;
    s.recall = s.support > 0 ? static_cast<double>(tp[c]) / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.per_class.push_back(s);
  }

  if (n_classes == 2) {
    const ClassScore& pos = m.per_class[1];
    m.precision = pos.precision;
    m.recall = pos.recall;
    m.f1 = pos.f1;
    m.macro_f1 = (m.per_class[0].f1 + m.per_class[1].f1) / 2.0;
  } else {
    const std::size_t scored = names.size() - 1;  // "unknown" is last
    for (std::size_t c = 0; c < scored; ++c) {
      m.precision += m.per_class[c].precision;
      m.recall += m.per_class[c].recall;
      m.macro_f1 += m.per_class[c].f1;
    }
    m.precision /= static_cast<double>(scored);
    m.recall /= static_cast<double>(scored);
    m.macro_f1 /= static_cast<double>(scored);
    m.f1 = m.macro_f1;
  }
  return m;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["n_classes"] = m.n_classes;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["macro_f1"] = m.macro_f1;
  j["accuracy"] = m.accuracy;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& c : m.per_class) {
    per.push_back({{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  }
  j["per_class"] = per;
  return j;
}

}  // namespace omni
