#pragma once

// Phase-space geometry for velocity-jump PDMPs on R^d x V: states, velocity
// spaces with their refreshment laws, potentials and the free-transport flow.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "pdmp/errors.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

inline constexpr int kMaxDim = 16;

// Dense vector with inline storage; no heap traffic in the event loop.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kStateTolerance = 1e-12;
inline constexpr double kZeroDirection = 1e-14;

inline Vec zeros(int d) { return Vec::Zero(d); }

inline Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double value : values) v[i++] = value;
  return v;
}

struct PhaseState {
  Vec x;
  Vec y;

  int dim() const { return static_cast<int>(x.size()); }
};

inline double distance(const PhaseState& a, const PhaseState& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.y - b.y).squaredNorm());
}

inline bool same_state(const PhaseState& a, const PhaseState& b, double tol = kStateTolerance) {
  return distance(a, b) < tol;
}

class VelocitySpace {
 public:
  enum class Kind { UnitSphere, StdGaussian, SignedHypercube, Ball };

  static VelocitySpace unit_sphere(int d) { return {Kind::UnitSphere, d, 1.0}; }
  static VelocitySpace std_gaussian(int d) { return {Kind::StdGaussian, d, 0.0}; }
  static VelocitySpace signed_hypercube(int d) { return {Kind::SignedHypercube, d, 1.0}; }
  static VelocitySpace ball(int d, double radius) {
    if (!(radius > 0.0)) throw Error("ball velocity space needs a positive radius");
    return {Kind::Ball, d, radius};
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }

  std::string key() const {
    switch (kind_) {
      case Kind::UnitSphere:
        return "unit_sphere(" + std::to_string(dim_) + ")";
      case Kind::StdGaussian:
        return "std_gaussian(" + std::to_string(dim_) + ")";
      case Kind::SignedHypercube:
        return "signed_hypercube(" + std::to_string(dim_) + ")";
      case Kind::Ball:
        return "ball(" + std::to_string(dim_) + "," + std::to_string(radius_) + ")";
    }
    return {};
  }

  bool contains(const Vec& y, double tol = kStateTolerance) const {
    if (y.size() != dim_) return false;
    switch (kind_) {
      case Kind::UnitSphere:
        return std::abs(y.norm() - 1.0) <= tol;
      case Kind::StdGaussian:
        return y.allFinite();
      case Kind::SignedHypercube:
        for (Eigen::Index i = 0; i < y.size(); ++i)
          if (std::abs(std::abs(y[i]) - 1.0) > tol) return false;
        return true;
      case Kind::Ball:
        return y.norm() <= radius_ + tol;
    }
    return false;
  }

  // Draw from the canonical refreshment law.
  Vec sample(Rng& rng) const {
    Vec y(dim_);
    switch (kind_) {
      case Kind::StdGaussian:
        for (int i = 0; i < dim_; ++i) y[i] = rng.normal();
        return y;
      case Kind::SignedHypercube:
        for (int i = 0; i < dim_; ++i) y[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return y;
      case Kind::UnitSphere:
        if (dim_ == 1) {
          y[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
          return y;
        }
        return unit_direction(rng);
      case Kind::Ball: {
        const double r = radius_ * std::pow(rng.uniform(), 1.0 / dim_);
        return r * unit_direction(rng);
      }
    }
    return y;
  }

  // Keeps sphere velocities on the sphere after floating-point drift.
  Vec project(Vec y) const {
    if (kind_ == Kind::UnitSphere) {
      const double n = y.norm();
      if (n > 0.0) y /= n;
    }
    return y;
  }

  // E[w_i^2] under the refreshment law (all laws are centred).
  double second_moment() const {
    switch (kind_) {
      case Kind::UnitSphere:
        return 1.0 / dim_;
      case Kind::StdGaussian:
      case Kind::SignedHypercube:
        return 1.0;
      case Kind::Ball:
        return radius_ * radius_ / (dim_ + 2.0);
    }
    return 0.0;
  }

  // Mass of the atom at a member point; zero for diffuse laws.
  double atom_mass() const {
    if (kind_ == Kind::SignedHypercube) return std::ldexp(1.0, -dim_);
    if (kind_ == Kind::UnitSphere && dim_ == 1) return 0.5;
    return 0.0;
  }

  bool is_finite_support() const { return atom_mass() > 0.0; }

  // Support points of a finite-support law, each with mass atom_mass().
  std::vector<Vec> support() const {
    std::vector<Vec> points;
    if (!is_finite_support()) return points;
    const std::size_t n = std::size_t{1} << dim_;
    points.reserve(n);
    for (std::size_t mask = 0; mask < n; ++mask) {
      Vec y(dim_);
      for (int i = 0; i < dim_; ++i) y[i] = (mask >> i) & 1U ? 1.0 : -1.0;
      points.push_back(y);
    }
    return points;
  }

  friend bool operator==(const VelocitySpace& a, const VelocitySpace& b) {
    return a.kind_ == b.kind_ && a.dim_ == b.dim_ && a.radius_ == b.radius_;
  }

 private:
  VelocitySpace(Kind kind, int d, double radius) : kind_(kind), dim_(d), radius_(radius) {
    if (d < 1 || d > kMaxDim)
      throw Error("velocity space dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  }

  Vec unit_direction(Rng& rng) const {
    Vec y(dim_);
    double n2 = 0.0;
    do {
      for (int i = 0; i < dim_; ++i) y[i] = rng.normal();
      n2 = y.squaredNorm();
    } while (n2 == 0.0);
    return y / std::sqrt(n2);
  }

  Kind kind_;
  int dim_;
  double radius_;
};

struct Potential {
  std::string name;
  int dim = 1;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&, const Vec&)> hessian_action;
  // Set for U(x) = <x, A x>/2; enables closed-form event times.
  std::optional<Eigen::MatrixXd> precision;
};

inline Potential gaussian_potential(const Eigen::MatrixXd& precision, std::string name) {
  if (precision.rows() != precision.cols() || precision.rows() < 1 || precision.rows() > kMaxDim)
    throw Error("precision matrix must be square with dimension in [1, 16]");
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw Error("precision matrix must be symmetric");
  Potential u;
  u.name = std::move(name);
  u.dim = static_cast<int>(precision.rows());
  u.precision = precision;
  u.value = [precision](const Vec& x) { return 0.5 * x.dot(precision * x); };
  u.gradient = [precision](const Vec& x) -> Vec { return precision * x; };
  u.hessian_action = [precision](const Vec&, const Vec& v) -> Vec { return precision * v; };
  return u;
}

inline Potential gaussian_iso(int d) {
  Potential u = gaussian_potential(Eigen::MatrixXd::Identity(d, d), "gaussian_iso");
  u.value = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  u.gradient = [](const Vec& x) -> Vec { return x; };
  u.hessian_action = [](const Vec&, const Vec& v) -> Vec { return v; };
  return u;
}

inline Potential gaussian_aniso(const Eigen::MatrixXd& precision) {
  return gaussian_potential(precision, "gaussian_aniso");
}

// U(x) = h (x^2 - 1)^2 in one dimension.
inline Potential double_well(double height = 1.0) {
  Potential u;
  u.name = "double_well";
  u.dim = 1;
  u.value = [height](const Vec& x) {
    const double s = x[0] * x[0] - 1.0;
    return height * s * s;
  };
  u.gradient = [height](const Vec& x) -> Vec {
    Vec g(1);
    g[0] = 4.0 * height * x[0] * (x[0] * x[0] - 1.0);
    return g;
  };
  u.hessian_action = [height](const Vec& x, const Vec& v) -> Vec {
    Vec h(1);
    h[0] = height * (12.0 * x[0] * x[0] - 4.0) * v[0];
    return h;
  };
  return u;
}

inline PhaseState free_transport_advance(const PhaseState& s, double h) {
  return {s.x + h * s.y, s.y};
}

struct Flow {
  std::string name;
  std::function<PhaseState(const PhaseState&, double)> advance;
  bool free_transport = false;

  PhaseState operator()(const PhaseState& s, double h) const {
    if (free_transport) return free_transport_advance(s, h);
    return advance(s, h);
  }
};

inline Flow free_transport() {
  return {"free_transport", free_transport_advance, true};
}

// Orthogonal reflection of y against the hyperplane normal to g; identity
// when g vanishes.
inline PhaseState reflect(const PhaseState& s, const Vec& g) {
  const double g2 = g.squaredNorm();
  if (std::sqrt(g2) < kZeroDirection) return s;
  return {s.x, s.y - (2.0 * g.dot(s.y) / g2) * g};
}

inline Vec refresh_sample(const VelocitySpace& space, Rng& rng) { return space.sample(rng); }

}  // namespace pdmp
