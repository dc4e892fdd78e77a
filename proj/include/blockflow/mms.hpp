#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "blockflow/core.hpp"
#include "blockflow/physics.hpp"

namespace blockflow {

// Forward-mode dual number with N derivative directions over scalar type T.
template <typename T, int N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(double c) : v(c) {}  // NOLINT: implicit constant promotion
  Dual(T val, std::array<T, N> der) : v(val), d(der) {}

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r{a.v + b.v, {}};
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r{a.v - b.v, {}};
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a) { return Dual(0.0) - a; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r{a.v * b.v, {}};
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const T inv = T(1.0) / b.v;
    Dual r{a.v * inv, {}};
    for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
  Dual& operator+=(const Dual& b) { return *this = *this + b; }
};

template <typename T, int N>
Dual<T, N> sin(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  Dual<T, N> r{sin(a.v), {}};
  const T c = cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> cos(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  Dual<T, N> r{cos(a.v), {}};
  const T s = -sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> pow(const Dual<T, N>& a, double e) {
  using std::pow;
  Dual<T, N> r{pow(a.v, e), {}};
  const T s = e * pow(a.v, e - 1.0);
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <typename T, int N>
T value_of(const Dual<T, N>& a) {
  return a.v;
}

// Sinusoidal manufactured field phi0 + phix*f(ax*pi*x/L) + phiy*g(ay*pi*y/L),
// with f, g chosen per variable.
struct MmsTerm {
  double phi0 = 0.0;
  double phix = 0.0;
  double phiy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  bool x_sin = true;
  bool y_sin = false;
};

struct ManufacturedSolution {
  std::string id;
  std::array<MmsTerm, 4> terms;  // rho, u, v, p
  double L = 1.0;
  bool viscous = false;
  GasModel gas;

  template <typename S>
  S eval(int q, const S& x, const S& y) const {
    using std::cos;
    using std::sin;
    const MmsTerm& t = terms[q];
    const double pi = std::acos(-1.0);
    const S sx = S(t.ax * pi / L) * x;
    const S sy = S(t.ay * pi / L) * y;
    return S(t.phi0) + S(t.phix) * (t.x_sin ? sin(sx) : cos(sx)) +
           S(t.phiy) * (t.y_sin ? sin(sy) : cos(sy));
  }

  Primitive exact(Vec3 p) const {
    Primitive r;
    r.rho = eval<double>(0, p.x, p.y);
    r.u = eval<double>(1, p.x, p.y);
    r.v = eval<double>(2, p.x, p.y);
    r.w = 0.0;
    r.p = eval<double>(3, p.x, p.y);
    return r;
  }

  // Source of the steady equations: divergence of (inviscid - viscous) flux.
  Flux source(Vec3 p) const {
    using D3 = Dual<double, 3>;
    using D = Dual<D3, 1>;
    Flux s{};
    for (int dir = 0; dir < 2; ++dir) {
      const D x{D3{p.x, {1.0, 0.0, 0.0}}, {D3{dir == 0 ? 1.0 : 0.0, {}}}};
      const D y{D3{p.y, {0.0, 1.0, 0.0}}, {D3{dir == 1 ? 1.0 : 0.0, {}}}};
      const D rho = eval<D>(0, x, y);
      const D u = eval<D>(1, x, y);
      const D v = eval<D>(2, x, y);
      const D pr = eval<D>(3, x, y);
      const double g = gas.gamma;
      const D vn = dir == 0 ? u : v;
      const D ht = D(g / (g - 1.0)) * pr / rho + D(0.5) * (u * u + v * v);
      std::array<D, 5> f;
      f[0] = rho * vn;
      f[1] = rho * u * vn + (dir == 0 ? pr : D(0.0));
      f[2] = rho * v * vn + (dir == 1 ? pr : D(0.0));
      f[3] = D(0.0);
      f[4] = rho * ht * vn;
      if (viscous) {
        const D T = pr / (rho * D(gas.R));
        const D mu = mu_of(T);
        const D k = mu * D(gas.cp() / gas.Pr);
        auto grad = [](const D& a, int j) { return D{a.v.d[j], {a.d[0].d[j]}}; };
        const D ux = grad(u, 0), uy = grad(u, 1), vx = grad(v, 0), vy = grad(v, 1);
        const D div = ux + vy;
        const D lam = D(-2.0 / 3.0) * mu;
        const D txx = D(2.0) * mu * ux + lam * div;
        const D tyy = D(2.0) * mu * vy + lam * div;
        const D txy = mu * (uy + vx);
        const D ti_x = dir == 0 ? txx : txy;
        const D ti_y = dir == 0 ? txy : tyy;
        f[1] = f[1] - ti_x;
        f[2] = f[2] - ti_y;
        f[4] = f[4] - (u * ti_x + v * ti_y + k * grad(T, dir));
      }
      for (int q = 0; q < 5; ++q) s[q] += f[q].d[0].v;
    }
    return s;
  }

 private:
  template <typename S>
  S mu_of(const S& T) const {
    using std::pow;
    if (gas.viscosity == ViscosityModel::constant) return S(gas.mu_const);
    return S(gas.mu_ref) * pow(T / S(gas.T_ref), 1.5) * S(gas.T_ref + gas.S) / (T + S(gas.S));
  }
};

inline ManufacturedSolution manufactured_solution(std::string_view id) {
  ManufacturedSolution m;
  m.id = std::string(id);
  if (id == "constant") {
    m.terms = {MmsTerm{1.0}, MmsTerm{300.0}, MmsTerm{100.0}, MmsTerm{1e5}};
  } else if (id == "euler_supersonic") {
    m.terms = {MmsTerm{1.0, 0.15, -0.1, 1.0, 0.5, true, false},
               MmsTerm{800.0, 50.0, -30.0, 1.5, 0.6, true, false},
               MmsTerm{800.0, -75.0, 40.0, 0.5, 2.0 / 3.0, false, true},
               MmsTerm{1e5, 0.2e5, 0.5e5, 2.0, 1.0, false, true}};
  } else if (id == "ns_subsonic") {
    m.terms = {MmsTerm{1.0, 0.1, 0.15, 0.75, 1.0, true, false},
               MmsTerm{70.0, 4.0, -12.0, 5.0 / 3.0, 1.5, true, false},
               MmsTerm{90.0, -20.0, 4.0, 1.5, 1.0, false, true},
               MmsTerm{1e5, -0.3e5, 0.2e5, 1.0, 1.25, false, true}};
    m.viscous = true;
    m.gas.viscosity = ViscosityModel::constant;
    m.gas.mu_const = 1.0;
  } else {
    throw PhysicsError("unknown manufactured solution '" + std::string(id) + "'");
  }
  return m;
}

}  // namespace blockflow
