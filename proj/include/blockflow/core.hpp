#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace blockflow {

// MUSCL needs Q_{i-1} .. Q_{i+2} around every face.
inline constexpr int kGhostDepth = 2;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class PhysicsError : public Error {
 public:
  using Error::Error;
};

class DecompError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  constexpr double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return {s * a.x, s * a.y, s * a.z}; }
  constexpr Vec3& operator+=(Vec3 b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

using Index3 = std::array<int, 3>;

// Inclusive index box.
struct Box {
  Index3 lo{1, 1, 1};
  Index3 hi{0, 0, 0};

  constexpr int extent(int a) const { return hi[a] - lo[a] + 1; }
  constexpr bool empty() const { return extent(0) <= 0 || extent(1) <= 0 || extent(2) <= 0; }
  constexpr std::size_t count() const {
    return empty() ? 0
                   : static_cast<std::size_t>(extent(0)) * static_cast<std::size_t>(extent(1)) *
                         static_cast<std::size_t>(extent(2));
  }
  constexpr bool contains(Index3 c) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] < lo[a] || c[a] > hi[a]) return false;
    return true;
  }
  friend constexpr bool operator==(const Box&, const Box&) = default;
};

constexpr Box intersect(const Box& a, const Box& b) {
  Box r;
  for (int d = 0; d < 3; ++d) {
    r.lo[d] = a.lo[d] > b.lo[d] ? a.lo[d] : b.lo[d];
    r.hi[d] = a.hi[d] < b.hi[d] ? a.hi[d] : b.hi[d];
  }
  return r;
}

enum class Face : int { i_min = 0, i_max, j_min, j_max, k_min, k_max };

constexpr int axis_of(Face f) { return static_cast<int>(f) / 2; }
constexpr bool is_max_face(Face f) { return static_cast<int>(f) % 2 == 1; }
constexpr Face make_face(int axis, bool max) { return static_cast<Face>(2 * axis + (max ? 1 : 0)); }

inline std::string_view to_string(Face f) {
  static constexpr std::array<std::string_view, 6> names{"i_min", "i_max", "j_min",
                                                         "j_max", "k_min", "k_max"};
  return names[static_cast<int>(f)];
}

inline Face face_from_string(std::string_view s) {
  for (int f = 0; f < 6; ++f)
    if (to_string(static_cast<Face>(f)) == s) return static_cast<Face>(f);
  throw Error("unknown face '" + std::string(s) + "'");
}

// Dense index over an inclusive box, first axis fastest.
struct Lattice {
  Index3 lo{0, 0, 0};
  Index3 n{0, 0, 0};

  Lattice() = default;
  Lattice(Index3 low, Index3 count) : lo(low), n(count) {}

  std::size_t size() const {
    return static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]) *
           static_cast<std::size_t>(n[2]);
  }
  std::size_t operator()(int i, int j, int k) const {
    return static_cast<std::size_t>(i - lo[0]) +
           static_cast<std::size_t>(n[0]) *
               (static_cast<std::size_t>(j - lo[1]) +
                static_cast<std::size_t>(n[1]) * static_cast<std::size_t>(k - lo[2]));
  }
  std::size_t operator()(Index3 c) const { return (*this)(c[0], c[1], c[2]); }
  std::ptrdiff_t stride(int a) const {
    return a == 0 ? 1 : (a == 1 ? n[0] : static_cast<std::ptrdiff_t>(n[0]) * n[1]);
  }
  bool contains(Index3 c) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] < lo[a] || c[a] >= lo[a] + n[a]) return false;
    return true;
  }
};

template <typename F>
void for_each_cell(const Box& b, F&& f) {
  for (int k = b.lo[2]; k <= b.hi[2]; ++k)
    for (int j = b.lo[1]; j <= b.hi[1]; ++j)
      for (int i = b.lo[0]; i <= b.hi[0]; ++i) f(i, j, k);
}

}  // namespace blockflow
