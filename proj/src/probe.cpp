#include "omni/probe.hpp"

#include "omni/dataset.hpp"
#include "omni/error.hpp"
#include "omni/nn/loss.hpp"
#include "omni/nn/optim.hpp"
#include "omni/nn/random.hpp"
#include "omni/synth.hpp"
#include "omni/train.hpp"

#include <Eigen/Geometry>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace omni {
namespace {

double orient(const Coordinate& a, const Coordinate& b, const Coordinate& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

Ring ccw(Ring r) {
  if (ring_signed_area(r) < 0) std::reverse(r.begin(), r.end());
  return r;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Stretched and rotated regular n-gon centred at `c`.
Ring convex_polygon(std::mt19937_64& rng, double r, const Coordinate& c) {
  const Ring base = synth::regular_ring(uniform_int(rng, 3, 10), r, uniform(rng, 0.0, 2.0 * std::numbers::pi));
  const double sx = uniform(rng, 0.6, 1.4);
  const double rot = uniform(rng, 0.0, std::numbers::pi);
  const Eigen::Matrix2d m = Eigen::Rotation2Dd(rot).toRotationMatrix() * Eigen::Vector2d(sx, 1.0 / sx).asDiagonal();
  Ring out;
  out.reserve(base.size());
  for (const auto& v : base) out.push_back(c + m * v);
  return ccw(std::move(out));
}

Coordinate mean_vertex(const Ring& r) {
  Coordinate c = Coordinate::Zero();
  for (const auto& v : r) c += v;
  return c / static_cast<double>(r.size());
}

Ring shrunk_inside(std::mt19937_64& rng, const Ring& a) {
  const Coordinate c = mean_vertex(a);
  const double s = uniform(rng, 0.3, 0.7);
  Ring b;
  for (const auto& v : a) b.push_back(c + s * (v - c));
  return b;
}

/// Mirrors `a` across one of its edges and stretches the mirror image away
/// from that edge. The two edge endpoints are copied exactly.
Ring touching(std::mt19937_64& rng, const Ring& a) {
  const auto n = a.size();
  const std::size_t i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1));
  const Coordinate e0 = a[i];
  const Coordinate e1 = a[(i + 1) % n];
  const Coordinate dir = (e1 - e0).normalized();
  const Coordinate nrm(-dir.y(), dir.x());
  const double stretch = uniform(rng, 0.5, 1.5);
  const double shear = uniform(rng, -0.5, 0.5);
  Ring b{e1, e0};
  for (std::size_t s = 2; s < n; ++s) {
    const Coordinate v = a[(i + s) % n] - e0;
    const double along = v.dot(dir);
    const double across = -v.dot(nrm) * stretch;
    b.push_back(e0 + (along + shear * across) * dir + across * nrm);
  }
  return b;
}

Ring overlapping(std::mt19937_64& rng, const Ring& a, double r) {
  const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Coordinate c = mean_vertex(a) + uniform(rng, 0.3, 0.9) * r * Coordinate(std::cos(ang), std::sin(ang));
  return convex_polygon(rng, r * uniform(rng, 0.7, 1.3), c);
}

Ring disjoint(std::mt19937_64& rng, const Ring& a, double r) {
  const double rb = r * uniform(rng, 0.3, 1.5);
  const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gap = (r * 1.5 + rb * 1.5) * uniform(rng, 1.1, 3.0);
  return convex_polygon(rng, rb, mean_vertex(a) + gap * Coordinate(std::cos(ang), std::sin(ang)));
}

enum class Build { Contain, Touch, Overlap, Disjoint };

Build as_build(Relation r) {
  switch (r) {
    case Relation::Contain: return Build::Contain;
    case Relation::Touch: return Build::Touch;
    case Relation::Overlap: return Build::Overlap;
  }
  return Build::Disjoint;
}

Ring outer_ring(const Geometry& g) {
  if (const auto* p = std::get_if<Polygon>(&g)) return p->outer;
  throw InvalidParameter("relation samples must be polygons");
}

}  // namespace

std::string to_string(Relation r) {
  switch (r) {
    case Relation::Contain: return "contain";
    case Relation::Touch: return "touch";
    case Relation::Overlap: return "overlap";
  }
  return "?";
}

Relation parse_relation(const std::string& s) {
  if (s == "contain") return Relation::Contain;
  if (s == "touch") return Relation::Touch;
  if (s == "overlap") return Relation::Overlap;
  throw ConfigError("unknown relation '" + s + "' (expected contain, touch or overlap)");
}

namespace predicate {

bool contains(const Ring& outer, const Ring& inner) {
  const Ring o = ccw(outer);
  for (const auto& p : inner) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (orient(o[i], o[(i + 1) % o.size()], p) < 0) return false;
    }
  }
  return true;
}

bool interiors_intersect(const Ring& p, const Ring& q) {
  // Convex interiors are disjoint iff some edge line of either polygon has
  // the other polygon entirely on its closed outer side.
  auto separated_by_edge_of = [](const Ring& s, const Ring& t) {
    const Ring c = ccw(s);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const bool all_out = std::all_of(t.begin(), t.end(), [&](const Coordinate& v) {
        return orient(c[i], c[(i + 1) % c.size()], v) <= 0;
      });
      if (all_out) return true;
    }
    return false;
  };
  return !separated_by_edge_of(p, q) && !separated_by_edge_of(q, p);
}

bool boundaries_intersect(const Ring& p, const Ring& q) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (segments_intersect(p[i], p[(i + 1) % p.size()], q[j], q[(j + 1) % q.size()])) return true;
    }
  }
  return false;
}

bool touches(const Ring& p, const Ring& q) { return boundaries_intersect(p, q) && !interiors_intersect(p, q); }

bool overlaps(const Ring& p, const Ring& q) {
  return interiors_intersect(p, q) && !contains(p, q) && !contains(q, p);
}

bool holds(Relation r, const Ring& a, const Ring& b) {
  switch (r) {
    case Relation::Contain: return contains(a, b);
    case Relation::Touch: return touches(a, b);
    case Relation::Overlap: return overlaps(a, b);
  }
  return false;
}

}  // namespace predicate

bool verify_sample(const RelationSample& s) {
  const auto [pa, pb] = project_pair(s.a, s.b);
  return predicate::holds(s.relation, outer_ring(pa), outer_ring(pb)) == s.target;
}

std::vector<RelationSample> gen_relation_dataset(Relation relation, std::size_t n, std::uint64_t seed) {
  if (n < 100) throw InvalidParameter("relation datasets need at least 100 samples");
  std::mt19937_64 rng(nn::splitmix64(seed ^ (0x9b0be0ULL + static_cast<std::uint64_t>(relation))));
  std::vector<Build> negatives;
  for (Build b : {Build::Contain, Build::Touch, Build::Overlap, Build::Disjoint}) {
    if (b != as_build(relation)) negatives.push_back(b);
  }

  std::vector<RelationSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    const Build build = positive ? as_build(relation) : negatives[(i / 2) % negatives.size()];
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      const double r = std::exp(uniform(rng, std::log(50.0), std::log(2000.0)));
      const Ring a = convex_polygon(rng, r, Coordinate::Zero());
      Ring b;
      switch (build) {
        case Build::Contain: b = shrunk_inside(rng, a); break;
        case Build::Touch: b = touching(rng, a); break;
        case Build::Overlap: b = overlapping(rng, a, r); break;
        case Build::Disjoint: b = disjoint(rng, a, r); break;
      }
      const double lon0 = uniform(rng, 166.5, 178.0);
      const double lat0 = uniform(rng, -46.5, -34.5);
      RelationSample s{synth::to_lonlat(Polygon{a, {}}, lon0, lat0), synth::to_lonlat(Polygon{b, {}}, lon0, lat0),
                       relation, positive};
      if (!verify_sample(s)) continue;
      out.push_back(std::move(s));
      done = true;
    }
    if (!done) throw SamplingError("could not construct a " + to_string(relation) + " sample");
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Concatenated eval-mode embeddings, 2l x N.
Eigen::MatrixXd embed_pairs(GeoEncoder<double>& encoder, const OmniConfig& cfg,
                            const std::vector<RelationSample>& data) {
  const Eigen::Index l = encoder.out_features();
  Eigen::MatrixXd out(2 * l, static_cast<Eigen::Index>(data.size()));
  constexpr std::size_t chunk = 64;
  for (std::size_t at = 0; at < data.size(); at += chunk) {
    const std::size_t end = std::min(data.size(), at + chunk);
    const auto B = static_cast<Eigen::Index>(end - at);
    nn::Sequence<double> seq;
    for (std::size_t i = at; i < end; ++i) {
      const GeometryPair g = process_pair(data[i].a, data[i].b, cfg.P);
      const Eigen::MatrixXd sa = encode_geometry(g.a, cfg.k);
      const Eigen::MatrixXd sb = encode_geometry(g.b, cfg.k);
      if (i == at) seq = nn::Sequence<double>(sa.rows(), 2 * B, sa.cols());
      const auto j = static_cast<Eigen::Index>(i - at);
      seq.sample(j) = sa;
      seq.sample(B + j) = sb;
    }
    const Eigen::MatrixXd z = encoder.forward(seq, nn::Mode::Eval, {});
    const auto col = static_cast<Eigen::Index>(at);
    out.block(0, col, l, B) = z.leftCols(B);
    out.block(l, col, l, B) = z.rightCols(B);
  }
  return out;
}

double accuracy(nn::Linear<double>& head, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  const Eigen::MatrixXd logits = head.forward(x);
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int pred = logits(1, j) > logits(0, j) ? 1 : 0;
    if (pred == y[static_cast<std::size_t>(j)]) ++hits;
  }
  return y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

ProbeReport probe_train_eval(GeoEncoder<double>& encoder, const OmniConfig& cfg,
                             const std::vector<RelationSample>& data, const ProbeOptions& opt) {
  if (data.size() < 10) throw InvalidParameter("probe dataset is too small");
  if (opt.train_fraction <= 0.0 || opt.train_fraction >= 1.0) throw InvalidParameter("train fraction must be in (0,1)");
  nn::ParameterList<double> frozen;
  encoder.collect(frozen);
  const std::uint64_t before = parameter_hash(frozen);

  const Eigen::MatrixXd x = embed_pairs(encoder, cfg, data);
  std::vector<int> y;
  for (const auto& s : data) y.push_back(s.target ? 1 : 0);
  const auto n_train = static_cast<Eigen::Index>(std::floor(opt.train_fraction * static_cast<double>(data.size())));
  const Eigen::Index n_test = x.cols() - n_train;

  const Eigen::VectorXd mean = x.leftCols(n_train).rowwise().mean();
  Eigen::VectorXd sd = ((x.leftCols(n_train).colwise() - mean).array().square().rowwise().sum() /
                        static_cast<double>(n_train)).sqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    if (!(sd(i) > 1e-12)) sd(i) = 1.0;
  }
  const Eigen::MatrixXd z = (x.colwise() - mean).array().colwise() / sd.array();
  const Eigen::MatrixXd z_train = z.leftCols(n_train);
  const Eigen::MatrixXd z_test = z.rightCols(n_test);
  const std::vector<int> y_train(y.begin(), y.begin() + n_train);
  const std::vector<int> y_test(y.begin() + n_train, y.end());

  nn::Linear<double> head("probe.head", x.rows(), 2);
  std::mt19937_64 rng(opt.seed);
  head.init(rng);
  nn::ParameterList<double> params;
  head.collect(params);
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(static_cast<std::size_t>(n_train), opt.batch, opt.seed, epoch)) {
      Eigen::MatrixXd xb(z.rows(), static_cast<Eigen::Index>(idx.size()));
      std::vector<int> yb;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = z_train.col(static_cast<Eigen::Index>(idx[j]));
        yb.push_back(y_train[idx[j]]);
      }
      nn::zero_grad(params);
      const auto loss = nn::softmax_cross_entropy<double>(head.forward(xb), yb);
      head.backward(loss.grad);
      nn::adam_step(params, opt.lr);
    }
  }

  ProbeReport report;
  report.relation = data.front().relation;
  report.n = data.size();
  report.n_test = static_cast<std::size_t>(n_test);
  report.train_accuracy = accuracy(head, z_train, y_train);
  report.accuracy = accuracy(head, z_test, y_test);
  report.encoder_hash = parameter_hash(frozen);
  if (report.encoder_hash != before) throw ContractViolation("encoder parameters changed while training the probe head");
  spdlog::info("probe {}: train acc {:.4f}, test acc {:.4f} (n={})", to_string(report.relation),
               report.train_accuracy, report.accuracy, report.n);
  return report;
}

std::string probe_report_json(const ProbeReport& r) {
  nlohmann::ordered_json j;
  j["relation"] = to_string(r.relation);
  j["accuracy"] = r.accuracy;
  j["n"] = r.n;
  j["n_test"] = r.n_test;
  j["train_accuracy"] = r.train_accuracy;
  return j.dump(2) + "\n";
}

}  // namespace omni
