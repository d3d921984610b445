#ifndef ABP_DYADIC_HPP
#define ABP_DYADIC_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace abp {

struct DensityHypothesisFail : std::runtime_error {
  DensityHypothesisFail() : std::runtime_error("DensityHypothesisFail") {}
};

struct NotNested : std::runtime_error {
  NotNested() : std::runtime_error("NotNested") {}
};

// Dyadic cube of Q_1: generation m splits Q_1 into 2^{nm} cubes of side
// 2^{-m}, indexed by integer coordinates in [0, 2^m)^n.
struct DyadicCube {
  int m = 0;
  std::array<int, 3> idx{0, 0, 0};

  double side() const { return std::pow(0.5, m); }

  DyadicCube predecessor() const {
    if (m < 1) throw std::logic_error("Q_1 has no predecessor");
    // integer halving: each level merges 2^n siblings
    return {m - 1, {idx[0] >> 1, idx[1] >> 1, idx[2] >> 1}};
  }

  bool operator==(const DyadicCube& o) const {
    return m == o.m && idx == o.idx;
  }
};

// A subset of Q_1 stored as a bitmap at generation `gen` resolution;
// lattice measure is cell counting: each cell has measure 2^{-n gen}.
struct DyadicSet {
  int n = 2;
  int gen = 0;
  std::vector<std::uint8_t> bits;

  DyadicSet(int n_, int gen_) : n(n_), gen(gen_) {
    bits.assign(std::size_t(1) << (n * gen), 0);
  }

  int per_axis() const { return 1 << gen; }

  std::size_t flat(int i, int j, int k = 0) const {
    std::size_t f = std::size_t(i) * per_axis() + j;
    if (n == 3) f = f * per_axis() + k;
    return f;
  }

  bool get(int i, int j, int k = 0) const { return bits[flat(i, j, k)] != 0; }
  void set(int i, int j, int k = 0) { bits[flat(i, j, k)] = 1; }

  double cell_measure() const { return std::pow(0.5, n * gen); }

  double measure() const {
    std::size_t c = 0;
    for (auto b : bits) c += b;
    return double(c) * cell_measure();
  }

  bool subset_of(const DyadicSet& other) const {
    if (n != other.n || gen != other.gen)
      throw std::invalid_argument("DyadicSet: resolution mismatch");
    for (std::size_t f = 0; f < bits.size(); ++f)
      if (bits[f] && !other.bits[f]) return false;
    return true;
  }

  // number of set cells inside a generation-q cube, q <= gen
  std::size_t count_in(const DyadicCube& q) const {
    if (q.m > gen)
      throw std::invalid_argument("DyadicSet: cube finer than the bitmap");
    int span = 1 << (gen - q.m);
    std::size_t c = 0;
    int klo = n == 3 ? q.idx[2] * span : 0;
    int khi = n == 3 ? klo + span : 1;
    for (int i = q.idx[0] * span; i < (q.idx[0] + 1) * span; ++i)
      for (int j = q.idx[1] * span; j < (q.idx[1] + 1) * span; ++j)
        for (int k = klo; k < khi; ++k)
          c += get(i, j, n == 3 ? k : 0);
    return c;
  }

  double measure_in(const DyadicCube& q) const {
    return double(count_in(q)) * cell_measure();
  }

  double density_in(const DyadicCube& q) const {
    double vol = std::pow(q.side(), n);
    return measure_in(q) / vol;
  }

  // the cube lies entirely inside the set
  bool cube_subset(const DyadicCube& q) const {
    int span = 1 << (gen - q.m);
    std::size_t want = 1;
    for (int d = 0; d < n; ++d) want *= std::size_t(span);
    return count_in(q) == want;
  }
};

namespace detail {

inline void decompose_rec(const DyadicSet& A, double delta, int max_gen,
                          const DyadicCube& q, std::vector<DyadicCube>& out) {
  // stopping time: the parent had density <= delta; emit the first cube
  // whose density exceeds delta, otherwise keep splitting
  if (A.density_in(q) > delta) {
    out.push_back(q);
    return;
  }
  if (q.m >= max_gen) return;
  int kids = A.n == 3 ? 2 : 1;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < kids; ++c) {
        DyadicCube child{q.m + 1,
                         {2 * q.idx[0] + a, 2 * q.idx[1] + b,
                          A.n == 3 ? 2 * q.idx[2] + c : 0}};
        decompose_rec(A, delta, max_gen, child, out);
      }
}

}  // namespace detail

// Maximal dyadic cubes with |A cap Q| > delta |Q| whose predecessors all
// have density <= delta. Hypothesis (a) |A| <= delta is enforced with the
// boundary |A| = delta accepted (the lemma's inequality is non-strict).
inline std::vector<DyadicCube> dyadic_decompose(const DyadicSet& A,
                                                double delta, int max_gen) {
  if (!(delta > 0 && delta < 1))
    throw std::invalid_argument("dyadic_decompose: delta must be in (0,1)");
  if (max_gen > A.gen)
    throw std::invalid_argument("dyadic_decompose: max_gen finer than bitmap");
  if (A.measure() > delta) throw DensityHypothesisFail();
  std::vector<DyadicCube> out;
  detail::decompose_rec(A, delta, max_gen, DyadicCube{0, {0, 0, 0}}, out);
  return out;
}

struct CzReport {
  bool hypothesis_a = false;  // |A| <= delta
  bool hypothesis_b = false;  // every dense cube's predecessor lies in B
  bool conclusion = false;    // |A| <= delta |B|
  double measure_A = 0;
  double measure_B = 0;
  std::vector<DyadicCube> witnesses;  // dense cubes violating (b)
};

// Exhaustive Lemma-1 checker: scans every dyadic cube of generation
// 1..max_gen (strict density > delta exactly as the lemma is displayed) and
// requires the predecessor to be contained in B.
inline CzReport cz_verify(const DyadicSet& A, const DyadicSet& B, double delta,
                          int max_gen) {
  if (!A.subset_of(B)) throw NotNested();
  CzReport rep;
  rep.measure_A = A.measure();
  rep.measure_B = B.measure();
  rep.hypothesis_a = rep.measure_A <= delta;
  rep.hypothesis_b = true;
  for (int m = 1; m <= max_gen; ++m) {
    int per = 1 << m;
    int kmax = A.n == 3 ? per : 1;
    for (int i = 0; i < per; ++i)
      for (int j = 0; j < per; ++j)
        for (int k = 0; k < kmax; ++k) {
          DyadicCube q{m, {i, j, A.n == 3 ? k : 0}};
          if (A.density_in(q) > delta && !B.cube_subset(q.predecessor())) {
            rep.hypothesis_b = false;
            rep.witnesses.push_back(q);
          }
        }
  }
  rep.conclusion = rep.measure_A <= delta * rep.measure_B;
  return rep;
}

// Smallest superset of A satisfying hypothesis (b): the predecessor of every
// cube where A has density > delta (strict, matching cz_verify) is added to
// B. A itself is included so the nesting precondition holds.
inline DyadicSet cz_b_closure(const DyadicSet& A, double delta, int max_gen) {
  DyadicSet B = A;
  for (int m = 1; m <= max_gen; ++m) {
    int per = 1 << m;
    int kmax = A.n == 3 ? per : 1;
    for (int i = 0; i < per; ++i)
      for (int j = 0; j < per; ++j)
        for (int k = 0; k < kmax; ++k) {
          DyadicCube q{m, {i, j, A.n == 3 ? k : 0}};
          if (A.density_in(q) > delta && !B.cube_subset(q.predecessor())) {
            DyadicCube pre = q.predecessor();
            int span = 1 << (B.gen - pre.m);
            int k2max = A.n == 3 ? span : 1;
            for (int a = pre.idx[0] * span; a < (pre.idx[0] + 1) * span; ++a)
              for (int b = pre.idx[1] * span; b < (pre.idx[1] + 1) * span; ++b)
                for (int c = pre.idx[2] * span; c < pre.idx[2] * span + k2max; ++c)
                  B.set(a, b, A.n == 3 ? c : 0);
          }
        }
  }
  return B;
}

}  // namespace abp

#endif
