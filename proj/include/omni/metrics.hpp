#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace omni {

struct ClassScore {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

/// Binary mode: `precision`/`recall`/`f1` are for the positive class.
/// Four-class mode: they are macro averages over every class but "unknown".
struct Metrics {
  int n_classes = 2;
  std::vector<ClassScore> per_class;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  long n = 0;
};

/// F1 is 0 when precision and recall are both 0.
Metrics compute_metrics(const std::vector<int>& gold, const std::vector<int>& predicted, int n_classes);

/// The score used for model selection: positive-class F1 or macro F1.
inline double selection_score(const Metrics& m) { return m.f1; }

/// Headline scores first, then one object per class.
nlohmann::ordered_json to_json(const Metrics& m);

}  // namespace omni
