#pragma once

// Jump mechanisms (rate, kernel) as values, plus the algebra acting on them:
// total (superposed) and minimal mechanisms, thinning to a constant rate,
// phantom-rate augmentation, rate truncation and the smoothed bounce rate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/state_space.hpp"

namespace pdmp {

using RateFn = std::function<double(const PhaseState&)>;
using WeightFn = std::function<double(const PhaseState&)>;
using StateMap = std::function<PhaseState(const PhaseState&)>;

// A deterministic post-jump map. `key` names the map so two kernels can
// recognise a shared atom (needed by the maximal kernel coupling).
struct DeterministicMap {
  std::string key;
  StateMap map;
};

// Resample the velocity from the space's law, keeping x. With
// `exclude_current` the draw is conditioned on differing from the current
// velocity (only meaningful for finite-support laws).
struct Refreshment {
  VelocitySpace space;
  bool exclude_current = false;
};

struct Identity {};

using KernelAction = std::variant<DeterministicMap, Refreshment, Identity>;

struct KernelComponent {
  WeightFn weight;  // empty means constant weight 1
  KernelAction action;

  double weight_at(const PhaseState& s) const { return weight ? weight(s) : 1.0; }
};

inline std::string alignment_key(const KernelAction& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, DeterministicMap>) {
          return "map:" + a.key;
        } else if constexpr (std::is_same_v<T, Refreshment>) {
          return std::string(a.exclude_current ? "refresh_excl:" : "refresh:") + a.space.key();
        } else {
          return "identity";
        }
      },
      action);
}

inline PhaseState apply_action(const KernelAction& action, const PhaseState& s, Rng& rng) {
  return std::visit(
      [&](const auto& a) -> PhaseState {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, DeterministicMap>) {
          return a.map(s);
        } else if constexpr (std::is_same_v<T, Refreshment>) {
          if (!a.exclude_current) return {s.x, a.space.sample(rng)};
          if (!a.space.is_finite_support())
            return {s.x, a.space.sample(rng)};  // diffuse law: the exclusion is a null event
          for (;;) {
            Vec w = a.space.sample(rng);
            if ((w - s.y).norm() >= kStateTolerance) return {s.x, w};
          }
        } else {
          return s;
        }
      },
      action);
}

// Finite mixture of deterministic maps, refreshments and the identity.
// Weights are normalised at sample time; zero total weight means identity.
class KernelSpec {
 public:
  KernelSpec() = default;
  explicit KernelSpec(std::vector<KernelComponent> components)
      : components_(std::move(components)) {}

  static KernelSpec identity() { return KernelSpec({KernelComponent{{}, Identity{}}}); }
  static KernelSpec deterministic(std::string key, StateMap map) {
    return KernelSpec({KernelComponent{{}, DeterministicMap{std::move(key), std::move(map)}}});
  }
  static KernelSpec refreshment(const VelocitySpace& space) {
    return KernelSpec({KernelComponent{{}, Refreshment{space}}});
  }

  const std::vector<KernelComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  // Raw (unnormalised) weights at s.
  std::vector<double> weights(const PhaseState& s) const {
    std::vector<double> w(components_.size());
    for (std::size_t c = 0; c < components_.size(); ++c) {
      w[c] = std::max(0.0, components_[c].weight_at(s));
    }
    return w;
  }

  double total_weight(const PhaseState& s) const {
    double total = 0.0;
    for (const auto& c : components_) total += std::max(0.0, c.weight_at(s));
    return total;
  }

  PhaseState sample(const PhaseState& s, Rng& rng) const {
    if (components_.size() == 1) {
      if (components_[0].weight_at(s) <= 0.0) return s;
      return apply_action(components_[0].action, s, rng);
    }
    double local[8];
    std::vector<double> heap;
    double* w = local;
    if (components_.size() > 8) {
      heap.resize(components_.size());
      w = heap.data();
    }
    double total = 0.0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      w[c] = std::max(0.0, components_[c].weight_at(s));
      total += w[c];
    }
    if (!(total > 0.0)) return s;
    double u = rng.uniform() * total;
    std::size_t chosen = components_.size() - 1;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      if (w[c] <= 0.0) continue;
      if (u < w[c]) {
        chosen = c;
        break;
      }
      u -= w[c];
      chosen = c;
    }
    return apply_action(components_[chosen].action, s, rng);
  }

  // Q(s, {s}): probability the kernel leaves s unchanged.
  double staying_mass(const PhaseState& s) const {
    const auto w = weights(s);
    double total = 0.0;
    double stay = 0.0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      total += w[c];
      if (w[c] > 0.0) stay += w[c] * component_staying_mass(components_[c].action, s);
    }
    return total > 0.0 ? stay / total : 1.0;
  }

  static double component_staying_mass(const KernelAction& action, const PhaseState& s) {
    return std::visit(
        [&](const auto& a) -> double {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, DeterministicMap>) {
            return same_state(a.map(s), s) ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, Refreshment>) {
            if (a.exclude_current) return 0.0;
            return a.space.contains(s.y) ? a.space.atom_mass() : 0.0;
          } else {
            return 1.0;
          }
        },
        action);
  }

 private:
  std::vector<KernelComponent> components_;
};

// Event-time sampling capability along the free-transport flow.
struct AnalyticAffine {
  // Returns (a, b) with lambda(phi_t(s)) = (a + b t)_+ for t >= 0.
  std::function<std::pair<double, double>(const PhaseState&)> coefficients;
};
struct BoundedBy {
  double bound;
};
struct Numeric {};

using EventTimeCapability = std::variant<AnalyticAffine, BoundedBy, Numeric>;

struct JumpMechanism {
  std::string name;
  RateFn rate;
  KernelSpec kernel;
  EventTimeCapability capability = Numeric{};
};

inline JumpMechanism constant_rate_mechanism(std::string name, double rate, KernelSpec kernel) {
  const double r = std::max(0.0, rate);
  return {std::move(name), [r](const PhaseState&) { return r; }, std::move(kernel),
          AnalyticAffine{[r](const PhaseState&) { return std::pair{r, 0.0}; }}};
}

namespace detail {

// Component c of `kernel`, reweighted to scale(s) * w_c(s) / W(s).
inline KernelComponent rescaled_component(const KernelSpec& kernel, std::size_t c,
                                          std::function<double(const PhaseState&)> scale) {
  auto shared = std::make_shared<KernelSpec>(kernel);
  return KernelComponent{
      [shared, c, scale = std::move(scale)](const PhaseState& s) {
        const double total = shared->total_weight(s);
        if (!(total > 0.0)) return 0.0;
        return scale(s) * std::max(0.0, shared->components()[c].weight_at(s)) / total;
      },
      kernel.components()[c].action};
}

}  // namespace detail

// Superposition: rate sum_i lambda_i, kernel the rate-weighted mixture.
inline JumpMechanism total_mechanism(const std::vector<JumpMechanism>& ms) {
  if (ms.empty()) throw Error("total_mechanism needs at least one mechanism");
  if (ms.size() == 1) return ms.front();

  std::vector<RateFn> rates;
  std::vector<KernelComponent> components;
  bool all_bounded = true;
  double bound_sum = 0.0;
  std::string name = "total(";
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto& m = ms[i];
    rates.push_back(m.rate);
    name += (i ? "," : "") + m.name;
    if (const auto* b = std::get_if<BoundedBy>(&m.capability)) {
      bound_sum += b->bound;
    } else {
      all_bounded = false;
    }
    for (std::size_t c = 0; c < m.kernel.size(); ++c) {
      components.push_back(detail::rescaled_component(m.kernel, c, m.rate));
    }
  }
  name += ")";

  RateFn rate = [rates](const PhaseState& s) {
    double total = 0.0;
    for (const auto& r : rates) total += r(s);
    return total;
  };
  EventTimeCapability cap = Numeric{};
  if (all_bounded) cap = BoundedBy{bound_sum};
  return {name, rate, KernelSpec(std::move(components)), cap};
}

// Removes the staying mass: lambda_m = sum_i lambda_i Q_i(x, M \ {x}).
inline JumpMechanism minimal_mechanism(const std::vector<JumpMechanism>& ms) {
  if (ms.empty()) throw Error("minimal_mechanism needs at least one mechanism");
  auto parts = std::make_shared<std::vector<JumpMechanism>>(ms);

  RateFn rate = [parts](const PhaseState& s) {
    double total = 0.0;
    for (const auto& m : *parts) {
      const double r = m.rate(s);
      if (r > 0.0) total += r * (1.0 - m.kernel.staying_mass(s));
    }
    return std::max(0.0, total);
  };

  std::vector<KernelComponent> components;
  std::string name = "minimal(";
  for (std::size_t i = 0; i < parts->size(); ++i) {
    const auto& m = (*parts)[i];
    name += (i ? "," : "") + m.name;
    for (std::size_t c = 0; c < m.kernel.size(); ++c) {
      const auto& action = m.kernel.components()[c].action;
      if (std::holds_alternative<Identity>(action)) continue;
      KernelAction moved = action;
      if (auto* r = std::get_if<Refreshment>(&moved)) r->exclude_current = true;
      auto kernel = std::make_shared<KernelSpec>(m.kernel);
      RateFn mrate = m.rate;
      components.push_back(KernelComponent{
          [kernel, c, mrate, action](const PhaseState& s) {
            const double total = kernel->total_weight(s);
            if (!(total > 0.0)) return 0.0;
            const double w = std::max(0.0, kernel->components()[c].weight_at(s)) / total;
            const double moving = 1.0 - KernelSpec::component_staying_mass(action, s);
            return mrate(s) * w * moving;
          },
          std::move(moved)});
    }
  }
  name += ")";
  if (components.empty()) components.push_back(KernelComponent{{}, Identity{}});
  return {name, rate, KernelSpec(std::move(components)), Numeric{}};
}

// Constant rate lambda_star; the original kernel fires with probability
// lambda(x)/lambda_star and the remainder is a phantom jump.
inline JumpMechanism thin_to_constant(const JumpMechanism& m, double lambda_star) {
  if (!(lambda_star > 0.0)) throw Error("thinning bound must be positive");
  RateFn base_rate = m.rate;
  auto acceptance = [base_rate, lambda_star](const PhaseState& s) {
    const double r = base_rate(s);
    if (r > lambda_star * (1.0 + 1e-12)) throw RateBoundViolated(r, lambda_star);
    return r / lambda_star;
  };
  std::vector<KernelComponent> components;
  for (std::size_t c = 0; c < m.kernel.size(); ++c) {
    components.push_back(detail::rescaled_component(m.kernel, c, acceptance));
  }
  components.push_back(KernelComponent{
      [acceptance](const PhaseState& s) { return std::max(0.0, 1.0 - acceptance(s)); },
      Identity{}});
  JumpMechanism thinned = constant_rate_mechanism("thinned(" + m.name + ")", lambda_star,
                                                  KernelSpec(std::move(components)));
  return thinned;
}

// Phantom augmentation: [m, (lambda', Id)] has the same law as m alone.
inline std::vector<JumpMechanism> add_phantom_rate(const JumpMechanism& m, RateFn phantom_rate,
                                                   EventTimeCapability cap = Numeric{}) {
  return {m, JumpMechanism{"phantom", std::move(phantom_rate), KernelSpec::identity(),
                           std::move(cap)}};
}

// min(lambda, M) with the kernel unchanged.
inline JumpMechanism truncate_rate(const JumpMechanism& m, double cap) {
  if (std::isinf(cap) && cap > 0.0) return m;
  JumpMechanism out = m;
  out.name = "truncated(" + m.name + ")";
  if (!(cap > 0.0)) {
    out.rate = [](const PhaseState&) { return 0.0; };
    out.capability = AnalyticAffine{[](const PhaseState&) { return std::pair{0.0, 0.0}; }};
    return out;
  }
  RateFn base = m.rate;
  out.rate = [base, cap](const PhaseState& s) { return std::min(base(s), cap); };
  out.capability = BoundedBy{cap};
  return out;
}

// (t - eps)_+^2 / (eps + (t - eps)_+) for t = <y, grad U(x)>.
inline double smoothed_positive_part(double t, double eps) {
  const double r = std::max(0.0, t - eps);
  return r * r / (eps + r);
}

inline RateFn smoothed_bps_rate(const Potential& u, double eps) {
  if (!(eps > 0.0)) throw Error("smoothing parameter must be positive");
  auto grad = u.gradient;
  return [grad, eps](const PhaseState& s) { return smoothed_positive_part(s.y.dot(grad(s.x)), eps); };
}

}  // namespace pdmp
