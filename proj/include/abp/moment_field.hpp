#ifndef ABP_MOMENT_FIELD_HPP
#define ABP_MOMENT_FIELD_HPP

#include <complex>
#include <cstring>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "abp/kernel.hpp"

namespace abp {

// H over a window of lattice points, packed symmetric per component.
struct MomentField {
  int n = 2;
  double h = 0;
  int V = 0;  // eval points x with |x_d| <= V*h
  int ncomp = 3;
  std::vector<double> comp;  // ncomp * (2V+1)^n
  std::vector<double> tail;  // |tail| per point

  std::size_t per_axis() const { return std::size_t(2 * V + 1); }
  std::size_t points() const {
    std::size_t p = per_axis(), t = 1;
    for (int d = 0; d < n; ++d) t *= p;
    return t;
  }
  std::size_t flat(const Idx& i) const {
    std::size_t p = per_axis(), f = 0;
    for (int d = 0; d < n; ++d) f = f * p + std::size_t(i[d] + V);
    return f;
  }
  std::array<double, 9> H(const Idx& i) const {
    double c[6];
    std::size_t f = flat(i), s = points();
    for (int k = 0; k < ncomp; ++k) c[k] = comp[k * s + f];
    return unpack_sym(c, n);
  }
  template <class F>
  void for_each(F&& fn) const {
    Idx i{0, 0, 0};
    if (n == 2) {
      for (i[0] = -V; i[0] <= V; ++i[0])
        for (i[1] = -V; i[1] <= V; ++i[1]) fn(i);
    } else {
      for (i[0] = -V; i[0] <= V; ++i[0])
        for (i[1] = -V; i[1] <= V; ++i[1])
          for (i[2] = -V; i[2] <= V; ++i[2]) fn(i);
    }
  }
};

namespace detail {

inline int good_fft_size(int m) {
  // next size of the form 2^a 3^b 5^c
  for (int s = m;; ++s) {
    int t = s;
    for (int p : {2, 3, 5})
      while (t % p == 0) t /= p;
    if (t == 1) return s;
  }
}

struct FftwRealBuf {
  double* p = nullptr;
  explicit FftwRealBuf(std::size_t count) { p = fftw_alloc_real(count); }
  ~FftwRealBuf() { fftw_free(p); }
  FftwRealBuf(const FftwRealBuf&) = delete;
};

struct FftwCplxBuf {
  fftw_complex* p = nullptr;
  explicit FftwCplxBuf(std::size_t count) { p = fftw_alloc_complex(count); }
  ~FftwCplxBuf() { fftw_free(p); }
  FftwCplxBuf(const FftwCplxBuf&) = delete;
};

}  // namespace detail

// Reusable FFT plan for evaluating the moment matrix H at every lattice
// point of the window |x|_inf <= V*h against a fixed kernel table. The
// kernel transforms are cached; evaluate() costs one forward plus one
// inverse transform per component.
class MomentFieldPlan {
 public:
  MomentFieldPlan(int n, double h, double sigma, int eval_cells, double cutoff,
                  const QuadratureConfig& cfg = {})
      : n_(n), h_(h), sigma_(sigma), V_(eval_cells) {
    table_ = build_moment_table(n, h, sigma, cutoff, cfg);
    W_ = V_ + table_.K;  // window of u values entering the convolution
    int need = (2 * W_ + 1) + (2 * table_.K + 1);
    P_ = detail::good_fft_size(need);
    std::size_t real_total = 1, cplx_total = 1;
    for (int d = 0; d < n_; ++d) real_total *= P_;
    cplx_total = real_total / P_ * (P_ / 2 + 1);
    real_total_ = real_total;
    cplx_total_ = cplx_total;

    in_ = std::make_unique<detail::FftwRealBuf>(real_total_);
    out_ = std::make_unique<detail::FftwCplxBuf>(cplx_total_);
    if (n_ == 2) {
      fwd_ = fftw_plan_dft_r2c_2d(P_, P_, in_->p, out_->p, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_2d(P_, P_, out_->p, in_->p, FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_r2c_3d(P_, P_, P_, in_->p, out_->p, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_3d(P_, P_, P_, out_->p, in_->p, FFTW_ESTIMATE);
    }

    // cache kernel transforms
    khat_.resize(table_.ncomp);
    for (int c = 0; c < table_.ncomp; ++c) {
      std::memset(in_->p, 0, real_total_ * sizeof(double));
      Idx z{0, 0, 0};
      int lo2 = n_ == 3 ? -table_.K : 0, hi2 = n_ == 3 ? table_.K : 0;
      for (z[0] = -table_.K; z[0] <= table_.K; ++z[0])
        for (z[1] = -table_.K; z[1] <= table_.K; ++z[1])
          for (z[2] = lo2; z[2] <= hi2; ++z[2]) {
            double wv = table_.w[std::size_t(c) * table_.wstride_ + table_.offset_flat(z)];
            if (wv == 0) continue;
            in_->p[wrap_flat(z)] = wv;
          }
      fftw_execute(fwd_);
      khat_[c].assign(reinterpret_cast<std::complex<double>*>(out_->p),
                      reinterpret_cast<std::complex<double>*>(out_->p) + cplx_total_);
    }
  }

  ~MomentFieldPlan() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  MomentFieldPlan(const MomentFieldPlan&) = delete;

  const MomentTable& table() const { return table_; }
  int eval_cells() const { return V_; }
  double h() const { return h_; }
  double sigma() const { return sigma_; }
  int n() const { return n_; }

  MomentField evaluate(const GridFunction& u) const {
    MomentField mf;
    mf.n = n_;
    mf.h = h_;
    mf.V = V_;
    mf.ncomp = table_.ncomp;
    std::size_t pts = mf.points();
    mf.comp.assign(std::size_t(table_.ncomp) * pts, 0.0);
    mf.tail.assign(pts, 0.0);

    const double far = u.ext.far_value;

    // forward transform of the centered window of u - far
    std::memset(in_->p, 0, real_total_ * sizeof(double));
    Idx i{0, 0, 0};
    int lo2 = n_ == 3 ? -W_ : 0, hi2 = n_ == 3 ? W_ : 0;
    for (i[0] = -W_; i[0] <= W_; ++i[0])
      for (i[1] = -W_; i[1] <= W_; ++i[1])
        for (i[2] = lo2; i[2] <= hi2; ++i[2])
          in_->p[wrap_flat(i)] = window_value(u, i) - far;
    fftw_execute(fwd_);
    std::vector<std::complex<double>> uhat(
        reinterpret_cast<std::complex<double>*>(out_->p),
        reinterpret_cast<std::complex<double>*>(out_->p) + cplx_total_);

    std::vector<std::vector<double>> conv(table_.ncomp);
    const double scale = 1.0 / double(real_total_);
    for (int c = 0; c < table_.ncomp; ++c) {
      auto* oc = reinterpret_cast<std::complex<double>*>(out_->p);
      for (std::size_t k = 0; k < cplx_total_; ++k) oc[k] = uhat[k] * khat_[c][k];
      fftw_execute(inv_);
      conv[c].resize(pts);
      mf.for_each([&](const Idx& x) {
        conv[c][mf.flat(x)] = in_->p[wrap_flat(x)] * scale;
      });
    }

    auto pairs = sym_pairs(n_);
    mf.for_each([&](const Idx& x) {
      std::size_t f = mf.flat(x);
      double D[6];
      fd_hessian(u, x, D);
      double trD = 0;
      for (int c = 0; c < table_.ncomp; ++c) {
        auto [a, b] = pairs[c];
        if (a == b) trD += D[c];
      }
      double ux = u.at(x) - far;
      double tail = -2 * ux * table_.tail_scalar;
      mf.tail[f] = std::abs(tail);
      for (int c = 0; c < table_.ncomp; ++c) {
        auto [a, b] = pairs[c];
        double acc = 2 * conv[c][f] - 2 * ux * table_.wsum[c];
        double g = table_.om4 * ((a == b ? trD : 0.0) + 2 * D[c]) * table_.chi_radial;
        double corr = 0;
        for (int c2 = 0; c2 < table_.ncomp; ++c2) corr += table_.model[c][c2] * D[c2];
        mf.comp[std::size_t(c) * pts + f] = g + acc - corr + (a == b ? tail : 0.0);
      }
    });
    return mf;
  }

  // Sensitivity of H's diagonal components to the center value u(x); used as
  // the relaxation scale in fixed-point sweeps.
  double diag_coefficient() const {
    double tr_w = 0, tr_model = 0;
    auto pairs = sym_pairs(n_);
    for (int c = 0; c < table_.ncomp; ++c) {
      auto [a, b] = pairs[c];
      if (a != b) continue;
      tr_w += table_.wsum[c];
      double m = 0;
      for (int c2 = 0; c2 < table_.ncomp; ++c2) {
        auto [k, l] = pairs[c2];
        if (k == l) m += table_.model[c][c2];
      }
      tr_model += m;
    }
    double g_part = (n_ + 2.0) * table_.om4 * table_.chi_radial * 2.0 / (h_ * h_);
    // per-component average of |dH_aa/du(x)|
    return 2 * tr_w / n_ + 2 * table_.tail_scalar + g_part -
           2 * tr_model / (n_ * h_ * h_);
  }

 private:
  double window_value(const GridFunction& u, const Idx& i) const {
    if (u.dom.in_box(i)) return u.at(i);
    Vec x{i[0] * h_, i[1] * h_, n_ == 3 ? i[2] * h_ : 0.0};
    return u.ext.at(x);
  }

  std::size_t wrap_flat(const Idx& i) const {
    std::size_t f = 0;
    for (int d = 0; d < n_; ++d) {
      int m = i[d] % P_;
      if (m < 0) m += P_;
      f = f * P_ + std::size_t(m);
    }
    return f;
  }

  int n_, V_, W_ = 0, P_ = 0;
  double h_, sigma_;
  MomentTable table_;
  std::size_t real_total_ = 0, cplx_total_ = 0;
  std::unique_ptr<detail::FftwRealBuf> in_;
  std::unique_ptr<detail::FftwCplxBuf> out_;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
  std::vector<std::vector<std::complex<double>>> khat_;
};

}  // namespace abp

#endif
