#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "blockflow/core.hpp"

namespace blockflow {

using Flux = std::array<double, 5>;

enum class ViscosityModel { constant, sutherland };

struct GasModel {
  double gamma = 1.4;
  double R = 287.0;
  ViscosityModel viscosity = ViscosityModel::sutherland;
  double mu_const = 1.716e-5;
  double mu_ref = 1.716e-5;
  double T_ref = 273.15;
  double S = 110.4;
  double Pr = 0.72;

  double cp() const { return gamma * R / (gamma - 1.0); }
  double mu(double T) const {
    if (viscosity == ViscosityModel::constant) return mu_const;
    return mu_ref * std::pow(T / T_ref, 1.5) * (T_ref + S) / (T + S);
  }
  double conductivity(double T) const { return mu(T) * cp() / Pr; }
  void validate() const {
    if (!(gamma > 1.0)) throw PhysicsError("gamma must exceed 1");
    if (!(R > 0.0)) throw PhysicsError("gas constant must be positive");
    if (mu_const < 0.0 || mu_ref < 0.0) throw PhysicsError("viscosity must be non-negative");
  }
};

struct Primitive {
  double rho = 1.0;
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
  double p = 1.0;

  Vec3 vel() const { return {u, v, w}; }
  double T(const GasModel& g) const { return p / (rho * g.R); }
  double sound_speed(const GasModel& g) const { return std::sqrt(g.gamma * p / rho); }
  bool physical() const { return rho > 0.0 && p > 0.0 && std::isfinite(rho) && std::isfinite(p); }
  double operator[](int q) const { return q == 0 ? rho : q == 1 ? u : q == 2 ? v : q == 3 ? w : p; }
  double& operator[](int q) { return q == 0 ? rho : q == 1 ? u : q == 2 ? v : q == 3 ? w : p; }
  friend bool operator==(const Primitive&, const Primitive&) = default;
};

using Conserved = std::array<double, 5>;

inline Conserved to_conserved(const Primitive& q, const GasModel& g) {
  const double ke = 0.5 * (q.u * q.u + q.v * q.v + q.w * q.w);
  return {q.rho, q.rho * q.u, q.rho * q.v, q.rho * q.w, q.p / (g.gamma - 1.0) + q.rho * ke};
}

// Returns false for a non-physical decode (rho <= 0 or p <= 0).
inline bool to_primitive(const Conserved& c, const GasModel& g, Primitive& q) {
  q.rho = c[0];
  if (!(c[0] > 0.0)) return false;
  q.u = c[1] / c[0];
  q.v = c[2] / c[0];
  q.w = c[3] / c[0];
  q.p = (g.gamma - 1.0) * (c[4] - 0.5 * c[0] * (q.u * q.u + q.v * q.v + q.w * q.w));
  return q.physical();
}

inline double total_enthalpy(const Primitive& q, const GasModel& g) {
  return g.gamma / (g.gamma - 1.0) * q.p / q.rho + 0.5 * (q.u * q.u + q.v * q.v + q.w * q.w);
}

// Freestream at Mach M with flow angle alpha (degrees) towards `lift_axis`.
inline Primitive freestream(double mach, double p, double T, double alpha_deg, const GasModel& g,
                            int lift_axis = 1) {
  Primitive q;
  q.rho = p / (g.R * T);
  q.p = p;
  const double speed = mach * std::sqrt(g.gamma * g.R * T);
  const double a = alpha_deg * std::acos(-1.0) / 180.0;
  q.u = speed * std::cos(a);
  (lift_axis == 2 ? q.w : q.v) = speed * std::sin(a);
  return q;
}

inline Flux inviscid_normal_flux(const Primitive& q, Vec3 n, const GasModel& g) {
  const double vn = n.x * q.u + n.y * q.v + n.z * q.w;
  const double m = q.rho * vn;
  return {m, m * q.u + n.x * q.p, m * q.v + n.y * q.p, m * q.w + n.z * q.p, m * total_enthalpy(q, g)};
}

inline Flux roe_flux(const Primitive& L, const Primitive& R, Vec3 n, const GasModel& g,
                     double entropy_fix = 0.1) {
  const double sr = std::sqrt(R.rho / L.rho);
  const double wl = 1.0 / (1.0 + sr);
  const double wr = sr / (1.0 + sr);
  const double rho = sr * L.rho;
  const Vec3 V = wl * L.vel() + wr * R.vel();
  const double h = wl * total_enthalpy(L, g) + wr * total_enthalpy(R, g);
  const double ke = 0.5 * dot(V, V);
  const double a2 = (g.gamma - 1.0) * (h - ke);
  if (!(a2 > 0.0)) throw PhysicsError("non-physical Roe-averaged state");
  const double a = std::sqrt(a2);
  const double vn = dot(V, n);

  const double drho = R.rho - L.rho;
  const double dp = R.p - L.p;
  const Vec3 dV = R.vel() - L.vel();
  const double dvn = dot(dV, n);

  const double delta = entropy_fix * (std::abs(vn) + a);
  auto fix = [&](double lam) {
    const double al = std::abs(lam);
    return (al < delta && delta > 0.0) ? 0.5 * (lam * lam + delta * delta) / delta : al;
  };
  const double l1 = fix(vn - a);
  const double l2 = std::abs(vn);
  const double l3 = fix(vn + a);

  const double c1 = l1 * (dp - rho * a * dvn) / (2.0 * a2);
  const double c2 = l2 * (drho - dp / a2);
  const double c3 = l3 * (dp + rho * a * dvn) / (2.0 * a2);
  const Vec3 dVt = dV - dvn * n;

  Flux d;
  d[0] = c1 + c2 + c3;
  for (int q = 0; q < 3; ++q)
    d[1 + q] = c1 * (V[q] - a * n[q]) + c2 * V[q] + c3 * (V[q] + a * n[q]) + l2 * rho * dVt[q];
  d[4] = c1 * (h - a * vn) + c2 * ke + c3 * (h + a * vn) + l2 * rho * dot(V, dVt);

  const Flux fl = inviscid_normal_flux(L, n, g);
  const Flux fr = inviscid_normal_flux(R, n, g);
  Flux f;
  for (int q = 0; q < 5; ++q) f[q] = 0.5 * (fl[q] + fr[q]) - 0.5 * d[q];
  return f;
}

namespace detail {

inline Flux van_leer_split(const Primitive& q, Vec3 n, const GasModel& g, double sign) {
  const double a = q.sound_speed(g);
  const double vn = q.u * n.x + q.v * n.y + q.w * n.z;
  const double M = vn / a;
  if (M >= 1.0) return sign > 0 ? inviscid_normal_flux(q, n, g) : Flux{};
  if (M <= -1.0) return sign > 0 ? Flux{} : inviscid_normal_flux(q, n, g);
  const double gm = g.gamma;
  const double fm = sign * 0.25 * q.rho * a * (M + sign) * (M + sign);
  const double t = (-vn + sign * 2.0 * a) / gm;
  const double v2 = q.u * q.u + q.v * q.v + q.w * q.w;
  const double e = (gm - 1.0) * vn + sign * 2.0 * a;
  return {fm, fm * (q.u + n.x * t), fm * (q.v + n.y * t), fm * (q.w + n.z * t),
          fm * (0.5 * (v2 - vn * vn) + e * e / (2.0 * (gm * gm - 1.0)))};
}

}  // namespace detail

inline Flux van_leer_flux(const Primitive& L, const Primitive& R, Vec3 n, const GasModel& g) {
  const Flux p = detail::van_leer_split(L, n, g, 1.0);
  const Flux m = detail::van_leer_split(R, n, g, -1.0);
  Flux f;
  for (int q = 0; q < 5; ++q) f[q] = p[q] + m[q];
  return f;
}

// Gradients at a face: grad[0..2] velocity components, grad[3] temperature.
using FaceGradient = std::array<Vec3, 4>;

inline Flux viscous_normal_flux(const FaceGradient& grad, const Primitive& q, Vec3 n, const GasModel& g) {
  const double T = q.T(g);
  const double mu = g.mu(T);
  const double k = g.conductivity(T);
  const double div = grad[0].x + grad[1].y + grad[2].z;
  const double lambda = -2.0 / 3.0 * mu;
  double tau[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      tau[i][j] = mu * (grad[i][j] + grad[j][i]) + (i == j ? lambda * div : 0.0);
  const Vec3 V = q.vel();
  Flux f{};
  double energy = 0.0;
  for (int i = 0; i < 3; ++i) {
    double tn = 0.0;
    double theta = k * grad[3][i];
    for (int j = 0; j < 3; ++j) {
      tn += tau[i][j] * n[j];
      theta += V[j] * tau[i][j];
    }
    f[1 + i] = tn;
    energy += theta * n[i];
  }
  f[4] = energy;
  return f;
}

enum class FluxScheme { roe, van_leer };

inline std::string_view to_string(FluxScheme f) { return f == FluxScheme::roe ? "roe" : "van_leer"; }

inline Flux numerical_flux(FluxScheme s, const Primitive& L, const Primitive& R, Vec3 n,
                           const GasModel& g, double entropy_fix) {
  return s == FluxScheme::roe ? roe_flux(L, R, n, g, entropy_fix) : van_leer_flux(L, R, n, g);
}

}  // namespace blockflow
