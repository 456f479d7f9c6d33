#include <algorithm>
#include <cmath>

#include "egat/kernels.hpp"

namespace egat::kernels::omp {

namespace {

inline long as_long(std::size_t v) { return static_cast<long>(v); }

bool by_distance(const Neighbor& x, const Neighbor& y) {
  return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
}

}  // namespace

// The row loops below keep the per-element summation order of the serial
// reference (ascending inner index), which is what makes them bit-identical.

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (long ii = 0; ii < as_long(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (long ii = 0; ii < as_long(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double sum = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
      c[i * n + j] = sum;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (long ii = 0; ii < as_long(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void segment_weighted_sum(std::span<const double> weights, std::size_t heads,
                          std::span<const double> values, std::size_t head_dim,
                          const SegmentSpec& spec, std::span<double> out, bool accumulate) {
  const std::size_t width = heads * head_dim;
  const std::size_t n_seg = spec.seg_ptr.size() - 1;
#pragma omp parallel for schedule(dynamic, 64) if (n_seg > 256)
  for (long ss = 0; ss < as_long(n_seg); ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    double* orow = out.data() + s * width;
    if (!accumulate) std::fill(orow, orow + width, 0.0);
    for (std::size_t t = spec.seg_ptr[s]; t < spec.seg_ptr[s + 1]; ++t) {
      const std::size_t e = spec.order.empty() ? t : spec.order[t];
      const double* vrow = values.data() + spec.value_row[e] * width;
      const double* w = weights.data() + e * heads;
      for (std::size_t h = 0; h < heads; ++h) {
        const double wh = w[h];
        for (std::size_t d = h * head_dim; d < (h + 1) * head_dim; ++d) orow[d] += wh * vrow[d];
      }
    }
  }
}

KnnResult batch_knn(const BatchKnnInput& in) {
  KnnResult result(in.n);
#pragma omp parallel
  {
    std::vector<Neighbor> cand;
#pragma omp for schedule(dynamic, 16)
    for (long ii = 0; ii < as_long(in.n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const double* xi = in.coords.data() + i * in.dims;
      for (const auto& members : in.batch_members) {
        cand.clear();
        for (std::size_t j : members) {
          if (j == i) continue;
          const double* xj = in.coords.data() + j * in.dims;
          double sq = 0.0;
          for (std::size_t d = 0; d < in.dims; ++d) {
            const double diff = xi[d] - xj[d];
            sq += diff * diff;
          }
          cand.push_back({std::sqrt(sq), j});
        }
        const std::size_t take = std::min(in.k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                          by_distance);
        result[i].insert(result[i].end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
      }
    }
  }
  return result;
}

// Uses per-node sums of 1/sqrt(w) so each edge costs O(1); agrees with the
// serial direct evaluation to rounding, and exactly on unit weights.
std::vector<double> forman_curvature(const CurvatureInput& in) {
  const std::size_t n = in.row_ptr.size() - 1;
  std::vector<double> inv_sqrt_sum(n, 0.0);
#pragma omp parallel for schedule(static)
  for (long uu = 0; uu < as_long(n); ++uu) {
    const auto u = static_cast<std::size_t>(uu);
    double s = 0.0;
    for (std::size_t f = in.row_ptr[u]; f < in.row_ptr[u + 1]; ++f) s += 1.0 / std::sqrt(in.weight[f]);
    inv_sqrt_sum[u] = s;
  }
  std::vector<double> out(in.col_idx.size());
#pragma omp parallel for schedule(static)
  for (long uu = 0; uu < as_long(n); ++uu) {
    const auto u = static_cast<std::size_t>(uu);
    for (std::size_t e = in.row_ptr[u]; e < in.row_ptr[u + 1]; ++e) {
      const std::size_t v = in.col_idx[e];
      const double we = in.weight[e];
      const double own = 1.0 / std::sqrt(we);
      // the reverse edge (v,u) carries the same weight after symmetrization
      const double others = (inv_sqrt_sum[u] - own) + (inv_sqrt_sum[v] - own);
      out[e] = we * (2.0 / we - others / std::sqrt(we));
    }
  }
  return out;
}

}  // namespace egat::kernels::omp
