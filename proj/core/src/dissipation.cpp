#include "dhamsim/dissipation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dhamsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected >= 0 && expected != got) {
    throw InvalidDimension(what, static_cast<std::size_t>(expected),
                           static_cast<std::size_t>(got));
  }
}

void require_positive(const Vector& v, const char* what) {
  if (v.size() == 0 || !v.allFinite() || (v.array() <= 0.0).any()) {
    throw DomainError(std::string(what) + " must be a nonempty positive sequence");
  }
}

bool in_box(const Vector& d) {
  return ((d.array() >= -kBoxSlack) && (d.array() <= 1.0 + kBoxSlack)).all();
}

double shrink(double w, double threshold) {
  if (w > threshold) return w - threshold;
  if (w < -threshold) return w + threshold;
  return 0.0;
}

}  // namespace

DissipationSpec DissipationSpec::MakeRayleigh(Vector weights) {
  require_positive(weights, "Rayleigh weights");
  return DissipationSpec(Rayleigh{std::move(weights)});
}

DissipationSpec DissipationSpec::MakeWeightedNorm(Vector beta) {
  require_positive(beta, "WeightedNorm beta");
  return DissipationSpec(WeightedNorm{std::move(beta)});
}

DissipationSpec DissipationSpec::MakeDamage(double beta, Vector cell_weights) {
  if (!std::isfinite(beta) || beta < 0.0) {
    throw DomainError("DamageDissipation beta must be nonnegative");
  }
  require_positive(cell_weights, "DamageDissipation cell weights");
  return DissipationSpec(DamageDissipation{beta, std::move(cell_weights)});
}

int DissipationSpec::homogeneity() const {
  return std::holds_alternative<Rayleigh>(kind_) ? 2 : 1;
}

Eigen::Index DissipationSpec::dim() const {
  return std::visit(overloaded{
                        [](const Zero&) -> Eigen::Index { return -1; },
                        [](const Rayleigh& r) { return r.weights.size(); },
                        [](const WeightedNorm& r) { return r.beta.size(); },
                        [](const DamageDissipation& r) { return r.cell_weights.size(); },
                    },
                    kind_);
}

const char* DissipationSpec::name() const {
  return std::visit(overloaded{
                        [](const Zero&) { return "Zero"; },
                        [](const Rayleigh&) { return "Rayleigh"; },
                        [](const WeightedNorm&) { return "WeightedNorm"; },
                        [](const DamageDissipation&) { return "DamageDissipation"; },
                    },
                    kind_);
}

double eval(const DissipationSpec& spec, const Vector& state,
            const Vector& rate) {
  require_dim(spec.dim(), rate.size(), "eval rate");
  if (rate.size() > 0 && (rate.array() == 0.0).all()) return 0.0;
  return std::visit(
      overloaded{
          [](const DissipationSpec::Zero&) { return 0.0; },
          [&](const DissipationSpec::Rayleigh& r) {
            return 0.5 * (r.weights.array() * rate.array().square()).sum();
          },
          [&](const DissipationSpec::WeightedNorm& r) {
            return (r.beta.array() * rate.array().abs()).sum();
          },
          [&](const DissipationSpec::DamageDissipation& r) {
            require_dim(rate.size(), state.size(), "eval damage state");
            if (!in_box(state) || (rate.array() < -kBoxSlack).any()) {
              return kInfinity;
            }
            return r.beta * (r.cell_weights.array() * rate.array().max(0.0)).sum();
          },
      },
      spec.kind());
}

Vector prox(const DissipationSpec& spec, const Vector& w, double tau) {
  return prox(spec, w, Vector::Constant(w.size(), tau));
}

Vector prox(const DissipationSpec& spec, const Vector& w, const Vector& tau) {
  require_dim(spec.dim(), w.size(), "prox");
  require_dim(w.size(), tau.size(), "prox step sizes");
  if (!tau.allFinite() || (tau.array() <= 0.0).any()) {
    throw DomainError("prox: step size must be positive");
  }
  Vector out(w.size());
  std::visit(overloaded{
                 [&](const DissipationSpec::Zero&) { out = w; },
                 [&](const DissipationSpec::Rayleigh& r) {
                   out = w.array() / (1.0 + tau.array() * r.weights.array());
                 },
                 [&](const DissipationSpec::WeightedNorm& r) {
                   for (Eigen::Index i = 0; i < w.size(); ++i) {
                     out(i) = shrink(w(i), tau(i) * r.beta(i));
                   }
                 },
                 [&](const DissipationSpec::DamageDissipation& r) {
                   out = (w.array() - tau.array() * r.beta * r.cell_weights.array())
                             .max(0.0);
                 },
             },
             spec.kind());
  return out;
}

double subdiff_distance(const DissipationSpec& spec, const Vector& rate,
                        const Vector& xi) {
  require_dim(spec.dim(), rate.size(), "subdiff_distance rate");
  require_dim(rate.size(), xi.size(), "subdiff_distance xi");
  Vector dist(rate.size());
  std::visit(
      overloaded{
          [&](const DissipationSpec::Zero&) { dist = xi.cwiseAbs(); },
          [&](const DissipationSpec::Rayleigh& r) {
            dist = (xi.array() - r.weights.array() * rate.array()).abs();
          },
          [&](const DissipationSpec::WeightedNorm& r) {
            for (Eigen::Index i = 0; i < rate.size(); ++i) {
              if (rate(i) > 0.0) {
                dist(i) = std::abs(xi(i) - r.beta(i));
              } else if (rate(i) < 0.0) {
                dist(i) = std::abs(xi(i) + r.beta(i));
              } else {
                dist(i) = std::max(0.0, std::abs(xi(i)) - r.beta(i));
              }
            }
          },
          [&](const DissipationSpec::DamageDissipation& r) {
            for (Eigen::Index i = 0; i < rate.size(); ++i) {
              const double threshold = r.beta * r.cell_weights(i);
              if (rate(i) < 0.0) {
                throw DomainError("subdiff_distance: negative damage rate");
              }
              // S(v) = {threshold} for v > 0, (-inf, threshold] at v = 0.
              dist(i) = rate(i) > 0.0 ? std::abs(xi(i) - threshold)
                                      : std::max(0.0, xi(i) - threshold);
            }
          },
      },
      spec.kind());
  return dist.norm();
}

void CurvePolyline::validate() const {
  if (times.size() != points.size()) {
    throw InvalidDimension("CurvePolyline times vs points", times.size(),
                           points.size());
  }
  if (times.empty()) throw DomainError("CurvePolyline: empty curve");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw DomainError("CurvePolyline: times must be strictly increasing");
    }
    require_dim(points[0].size(), points[k].size(), "CurvePolyline point");
  }
}

Vector CurvePolyline::at(double t) const {
  if (t <= times.front()) return points.front();
  if (t >= times.back()) return points.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double s = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - s) * points[k - 1] + s * points[k];
}

double dissipation_length(const DissipationSpec& spec,
                          const CurvePolyline& curve) {
  curve.validate();
  if (spec.is_damage() && !in_box(curve.points.back())) return kInfinity;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
    const double dt = curve.times[k + 1] - curve.times[k];
    const Vector rate = (curve.points[k + 1] - curve.points[k]) / dt;
    const double r = eval(spec, curve.points[k], rate);
    if (std::isinf(r)) return kInfinity;
    total += r * dt;
  }
  return total;
}

double dissipation_distance(const DissipationSpec& spec, const Vector& z1,
                            const Vector& z2) {
  if (spec.homogeneity() != 1) {
    throw UnsupportedDissipation(std::string("dissipation_distance: ") +
                                 spec.name() + " is not 1-homogeneous");
  }
  require_dim(z1.size(), z2.size(), "dissipation_distance");
  require_dim(spec.dim(), z1.size(), "dissipation_distance");
  return std::visit(
      overloaded{
          [](const DissipationSpec::Zero&) { return 0.0; },
          [](const DissipationSpec::Rayleigh&) { return kInfinity; },
          [&](const DissipationSpec::WeightedNorm& r) {
            return (r.beta.array() * (z2 - z1).array().abs()).sum();
          },
          [&](const DissipationSpec::DamageDissipation& r) {
            const Vector delta = z2 - z1;
            if (!in_box(z1) || !in_box(z2) || (delta.array() < -kBoxSlack).any()) {
              return kInfinity;
            }
            return r.beta * (r.cell_weights.array() * delta.array().max(0.0)).sum();
          },
      },
      spec.kind());
}

double dissipation_variation(const DissipationSpec& spec,
                             const CurvePolyline& curve) {
  if (spec.homogeneity() != 1) {
    throw UnsupportedDissipation(std::string("dissipation_variation: ") +
                                 spec.name() + " is not 1-homogeneous");
  }
  curve.validate();
  std::vector<double> partition = curve.times;
  auto partition_sum = [&](const std::vector<double>& s) {
    double sum = 0.0;
    Vector prev = curve.at(s.front());
    for (std::size_t j = 1; j < s.size(); ++j) {
      Vector next = curve.at(s[j]);
      const double d = dissipation_distance(spec, prev, next);
      if (std::isinf(d)) return kInfinity;
      sum += d;
      prev = std::move(next);
    }
    return sum;
  };
  double best = partition_sum(partition);
  for (int depth = 0; depth < kVariationMaxDepth && std::isfinite(best); ++depth) {
    std::vector<double> refined;
    refined.reserve(2 * partition.size());
    for (std::size_t j = 0; j + 1 < partition.size(); ++j) {
      refined.push_back(partition[j]);
      refined.push_back(0.5 * (partition[j] + partition[j + 1]));
    }
    refined.push_back(partition.back());
    const double sum = partition_sum(refined);
    const double change = sum - best;
    best = std::max(best, sum);
    partition = std::move(refined);
    if (std::abs(change) < kVariationTolerance) break;
  }
  return best;
}

}  // namespace dhamsim
