#ifndef ABP_GRID_HPP
#define ABP_GRID_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace abp {

// Points live in R^n with n ∈ {2,3}; the unused third coordinate is kept at 0.
using Vec = std::array<double, 3>;
using Idx = std::array<int, 3>;

inline double norm2(const Vec& x, int n) {
  double s = 0;
  for (int d = 0; d < n; ++d) s += x[d] * x[d];
  return std::sqrt(s);
}

inline double norm_inf(const Vec& x, int n) {
  double s = 0;
  for (int d = 0; d < n; ++d) s = std::max(s, std::abs(x[d]));
  return s;
}

inline Vec vadd(const Vec& a, const Vec& b, int n) {
  Vec r{0, 0, 0};
  for (int d = 0; d < n; ++d) r[d] = a[d] + b[d];
  return r;
}

inline Vec vsub(const Vec& a, const Vec& b, int n) {
  Vec r{0, 0, 0};
  for (int d = 0; d < n; ++d) r[d] = a[d] - b[d];
  return r;
}

// Uniform lattice over the box [-E, E]^n with mesh width h.
// Lattice points sit at integer multiples of h so that 0 is a node.
struct Domain {
  int n = 2;
  double h = 1.0 / 32;
  double half_extent = 8.0;  // E

  Domain() = default;
  Domain(int n_, double h_, double half_extent_ = 8.0)
      : n(n_), h(h_), half_extent(half_extent_) {
    if (n < 2 || n > 3) throw std::invalid_argument("Domain: n must be 2 or 3");
    if (h <= 0) throw std::invalid_argument("Domain: h must be positive");
    double cells = half_extent / h;
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw std::invalid_argument("Domain: E/h must be an integer");
    if (half_extent < 3.0 + 2.0 * std::sqrt(double(n)))
      throw std::invalid_argument("Domain: E must cover B_3 and B_{2 sqrt n}");
  }

  int radius_cells() const { return int(std::lround(half_extent / h)); }
  int per_axis() const { return 2 * radius_cells() + 1; }
  std::size_t total() const {
    std::size_t p = per_axis();
    std::size_t t = 1;
    for (int d = 0; d < n; ++d) t *= p;
    return t;
  }

  std::size_t flat(const Idx& i) const {
    int N = radius_cells();
    std::size_t p = per_axis(), f = 0;
    for (int d = 0; d < n; ++d) f = f * p + std::size_t(i[d] + N);
    return f;
  }
  Idx unflat(std::size_t f) const {
    int N = radius_cells();
    std::size_t p = per_axis();
    Idx i{0, 0, 0};
    for (int d = n - 1; d >= 0; --d) {
      i[d] = int(f % p) - N;
      f /= p;
    }
    return i;
  }
  Vec coords(const Idx& i) const {
    Vec x{0, 0, 0};
    for (int d = 0; d < n; ++d) x[d] = i[d] * h;
    return x;
  }
  bool in_box(const Idx& i) const {
    int N = radius_cells();
    for (int d = 0; d < n; ++d)
      if (i[d] < -N || i[d] > N) return false;
    return true;
  }
  bool in_box_point(const Vec& x) const {
    for (int d = 0; d < n; ++d)
      if (std::abs(x[d]) > half_extent) return false;
    return true;
  }

  template <class F>
  void for_each(F&& fn) const {
    int N = radius_cells();
    Idx i{0, 0, 0};
    if (n == 2) {
      for (i[0] = -N; i[0] <= N; ++i[0])
        for (i[1] = -N; i[1] <= N; ++i[1]) fn(i);
    } else {
      for (i[0] = -N; i[0] <= N; ++i[0])
        for (i[1] = -N; i[1] <= N; ++i[1])
          for (i[2] = -N; i[2] <= N; ++i[2]) fn(i);
    }
  }
};

// Total value model for |x|_inf beyond the box. The table variant carries an
// eventual constant so kernel tails stay analytic.
struct Exterior {
  enum class Kind { Constant, Table } kind = Kind::Constant;
  double value = 0.0;
  std::function<double(const Vec&)> table;
  double far_value = 0.0;  // table model beyond any bounded support

  static Exterior constant(double c) {
    Exterior e;
    e.kind = Kind::Constant;
    e.value = c;
    e.far_value = c;
    return e;
  }
  static Exterior table_fn(std::function<double(const Vec&)> f, double far = 0.0) {
    Exterior e;
    e.kind = Kind::Table;
    e.table = std::move(f);
    e.far_value = far;
    return e;
  }
  double at(const Vec& x) const {
    return kind == Kind::Constant ? value : table(x);
  }
};

struct GridFunction {
  Domain dom;
  std::vector<double> values;
  Exterior ext = Exterior::constant(0.0);

  GridFunction() = default;
  explicit GridFunction(const Domain& d, double fill = 0.0)
      : dom(d), values(d.total(), fill) {}

  double& at(const Idx& i) { return values[dom.flat(i)]; }
  double at(const Idx& i) const { return values[dom.flat(i)]; }

  // Value at an arbitrary point: lattice node, multilinear interpolation
  // inside the box, exterior model outside.
  double operator()(const Vec& x) const {
    if (!dom.in_box_point(x)) return ext.at(x);
    const double h = dom.h;
    const int n = dom.n;
    Idx base{0, 0, 0};
    double frac[3] = {0, 0, 0};
    bool on_node = true;
    const int N = dom.radius_cells();
    for (int d = 0; d < n; ++d) {
      double t = x[d] / h;
      double fl = std::floor(t + 1e-12);
      base[d] = int(fl);
      frac[d] = t - fl;
      if (frac[d] < 1e-10) frac[d] = 0;
      else if (frac[d] > 1 - 1e-10) { frac[d] = 0; base[d] += 1; }
      else on_node = false;
      if (base[d] > N) { base[d] = N; frac[d] = 0; }
      if (base[d] < -N) { base[d] = -N; frac[d] = 0; }
    }
    if (on_node) return at(base);
    double acc = 0;
    int corners = 1 << n;
    for (int c = 0; c < corners; ++c) {
      Idx p = base;
      double w = 1;
      for (int d = 0; d < n; ++d) {
        if (c & (1 << d)) {
          p[d] = std::min(base[d] + 1, N);
          w *= frac[d];
        } else {
          w *= 1 - frac[d];
        }
      }
      acc += w * at(p);
    }
    return acc;
  }

  template <class F>
  void fill(F&& fn) {
    dom.for_each([&](const Idx& i) { at(i) = fn(dom.coords(i)); });
  }
};

// Region predicates over points. Balls are open; cubes use the half-open
// convention [c - r/2, c + r/2) per axis so lattice measures are exact.
using Region = std::function<bool(const Vec&)>;

inline Region ball(double r, Vec center = {0, 0, 0}) {
  return [=](const Vec& x) {
    double s = 0;
    for (int d = 0; d < 3; ++d) {
      double t = x[d] - center[d];
      s += t * t;
    }
    return s < r * r;
  };
}

// Q_r(c): open cube of side length r centered at c (paper's convention).
inline Region cube(double side, Vec center = {0, 0, 0}) {
  return [=](const Vec& x) {
    for (int d = 0; d < 3; ++d) {
      double t = x[d] - center[d];
      if (t < -side / 2 || t >= side / 2) return false;
    }
    return true;
  };
}

inline Region everywhere() {
  return [](const Vec&) { return true; };
}

// Discrete L^n norm over a region; the exponent is the space dimension.
inline double ln_norm(const GridFunction& f, const Region& region) {
  const int n = f.dom.n;
  const double hn = std::pow(f.dom.h, n);
  double acc = 0;
  f.dom.for_each([&](const Idx& i) {
    Vec x = f.dom.coords(i);
    if (!region(x)) return;
    acc += std::pow(std::abs(f.at(i)), n) * hn;
  });
  return std::pow(acc, 1.0 / n);
}

inline double linf_norm(const GridFunction& f, const Region& region) {
  double m = 0;
  f.dom.for_each([&](const Idx& i) {
    if (region(f.dom.coords(i))) m = std::max(m, std::abs(f.at(i)));
  });
  return m;
}

struct EmptyRegion : std::runtime_error {
  EmptyRegion() : std::runtime_error("EmptyRegion") {}
};

inline double region_inf(const GridFunction& f, const Region& region) {
  double m = std::numeric_limits<double>::infinity();
  bool any = false;
  f.dom.for_each([&](const Idx& i) {
    if (region(f.dom.coords(i))) {
      any = true;
      m = std::min(m, f.at(i));
    }
  });
  if (!any) throw EmptyRegion();
  return m;
}

inline double region_measure(const Domain& dom, const Region& region) {
  const double hn = std::pow(dom.h, dom.n);
  double acc = 0;
  dom.for_each([&](const Idx& i) {
    if (region(dom.coords(i))) acc += hn;
  });
  return acc;
}

// h^n * #{x in region : f(x) > t}
inline double superlevel_measure(const GridFunction& f, double t, const Region& region) {
  const double hn = std::pow(f.dom.h, f.dom.n);
  double acc = 0;
  f.dom.for_each([&](const Idx& i) {
    if (region(f.dom.coords(i)) && f.at(i) > t) acc += hn;
  });
  return acc;
}

// The twin: counts f <= t, so the two measures split the region exactly.
inline double sublevel_measure(const GridFunction& f, double t, const Region& region) {
  const double hn = std::pow(f.dom.h, f.dom.n);
  double acc = 0;
  f.dom.for_each([&](const Idx& i) {
    if (region(f.dom.coords(i)) && f.at(i) <= t) acc += hn;
  });
  return acc;
}

// CSV layout: one header line `n,h,E,exterior` (exterior = constant value as
// hexfloat), then row-major hexfloat values. Round-trips bit-exactly.
inline void save_csv(const GridFunction& f, const std::string& path) {
  if (f.ext.kind != Exterior::Kind::Constant)
    throw std::runtime_error("save_csv: only constant exterior models serialize");
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("save_csv: cannot open " + path);
  std::fprintf(fp, "%d,%a,%a,%a\n", f.dom.n, f.dom.h, f.dom.half_extent, f.ext.value);
  for (std::size_t k = 0; k < f.values.size(); ++k)
    std::fprintf(fp, "%a\n", f.values[k]);
  std::fclose(fp);
}

inline GridFunction load_csv(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "r");
  if (!fp) throw std::runtime_error("load_csv: cannot open " + path);
  int n = 0;
  double h = 0, E = 0, c = 0;
  if (std::fscanf(fp, "%d,%la,%la,%la\n", &n, &h, &E, &c) != 4) {
    std::fclose(fp);
    throw std::runtime_error("load_csv: bad header");
  }
  GridFunction f(Domain(n, h, E));
  f.ext = Exterior::constant(c);
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    if (std::fscanf(fp, "%la\n", &f.values[k]) != 1) {
      std::fclose(fp);
      throw std::runtime_error("load_csv: truncated values");
    }
  }
  std::fclose(fp);
  return f;
}

}  // namespace abp

#endif
