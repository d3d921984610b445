#ifndef ABP_OPERATORS_HPP
#define ABP_OPERATORS_HPP

#include "abp/kernel.hpp"
#include "abp/moment_field.hpp"
#include "abp/special.hpp"

namespace abp {

inline double default_cutoff(const Domain& dom) { return 2 * dom.half_extent; }

// (2 - sigma) * extremal assignment over the eigenvalues of H(x).
inline double m_extremal(const GridFunction& u, const Idx& xi,
                         const PucciEllipticity& ell, ExtremalMode mode,
                         const MomentTable& table) {
  KernelMoment km = kernel_moment(u, xi, table);
  auto eigs = sym_eigenvalues(km.H, u.dom.n);
  return (2 - table.sigma) * pucci_extremal_eigs(eigs, ell, mode);
}

inline double m_extremal(const GridFunction& u, const Idx& xi,
                         const PucciEllipticity& ell, ExtremalMode mode) {
  MomentTable t = build_moment_table(u.dom.n, u.dom.h, ell.sigma, default_cutoff(u.dom));
  return m_extremal(u, xi, ell, mode, t);
}

// D^sigma v(x) = ((n+sigma-2)(n+sigma)/2) A(2-sigma) H(x)
inline double fractional_hessian_coef(int n, double sigma) {
  return (n + sigma - 2) * (n + sigma) / 2 * calA(2 - sigma, n);
}

inline std::array<double, 9> fractional_hessian(const GridFunction& v, const Idx& xi,
                                                const MomentTable& table) {
  KernelMoment km = kernel_moment(v, xi, table);
  double c = fractional_hessian_coef(v.dom.n, table.sigma);
  for (auto& e : km.H) e *= c;
  return km.H;
}

// E_sigma v(x): least eigenvalue of the fractional hessian (the infimum of
// its quadratic form over the unit sphere).
inline double first_eigenvalue(const GridFunction& v, const Idx& xi,
                               const MomentTable& table) {
  auto H = fractional_hessian(v, xi, table);
  return sym_eigenvalues(H, v.dom.n).front();
}

// Viscosity-mode evaluation: splice the test function phi over the ball
// U = B_{U_radius}(x) and evaluate the operator on the spliced function.
template <class Phi>
inline GridFunction splice_test(const GridFunction& u, Phi&& phi, const Idx& xi,
                                double U_radius) {
  GridFunction v = u;
  Vec x0 = u.dom.coords(xi);
  u.dom.for_each([&](const Idx& i) {
    Vec x = u.dom.coords(i);
    if (norm2(vsub(x, x0, u.dom.n), u.dom.n) < U_radius) v.at(i) = phi(x);
  });
  return v;
}

template <class Phi>
inline double evaluate_with_test(const GridFunction& u, Phi&& phi, const Idx& xi,
                                 double U_radius, const PucciEllipticity& ell,
                                 ExtremalMode mode, const MomentTable& table) {
  GridFunction v = splice_test(u, phi, xi, U_radius);
  return m_extremal(v, xi, ell, mode, table);
}

// Whole-window extremal operator values from a moment field.
inline std::vector<double> extremal_field(const MomentField& mf,
                                          const PucciEllipticity& ell,
                                          ExtremalMode mode) {
  std::vector<double> out(mf.points(), 0.0);
  mf.for_each([&](const Idx& x) {
    auto eigs = sym_eigenvalues(mf.H(x), mf.n);
    out[mf.flat(x)] = (2 - ell.sigma) * pucci_extremal_eigs(eigs, ell, mode);
  });
  return out;
}

inline std::vector<double> first_eigenvalue_field(const MomentField& mf, double sigma) {
  double c = fractional_hessian_coef(mf.n, sigma);
  std::vector<double> out(mf.points(), 0.0);
  mf.for_each([&](const Idx& x) {
    out[mf.flat(x)] = c * sym_eigenvalues(mf.H(x), mf.n).front();
  });
  return out;
}

}  // namespace abp

#endif
