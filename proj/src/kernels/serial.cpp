// Straightforward reference loops. Kept deliberately plain: these are the
// oracles the parallel kernels are tested and benchmarked against.

#include <algorithm>
#include <cmath>

#include "egat/kernels.hpp"

namespace egat::kernels::serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] = sum;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

void segment_weighted_sum(std::span<const double> weights, std::size_t heads,
                          std::span<const double> values, std::size_t head_dim,
                          const SegmentSpec& spec, std::span<double> out, bool accumulate) {
  const std::size_t width = heads * head_dim;
  const std::size_t n_seg = spec.seg_ptr.size() - 1;
  for (std::size_t s = 0; s < n_seg; ++s) {
    for (std::size_t col = 0; col < width; ++col) {
      const std::size_t h = col / head_dim;
      double sum = accumulate ? out[s * width + col] : 0.0;
      for (std::size_t t = spec.seg_ptr[s]; t < spec.seg_ptr[s + 1]; ++t) {
        const std::size_t e = spec.order.empty() ? t : spec.order[t];
        sum += weights[e * heads + h] * values[spec.value_row[e] * width + col];
      }
      out[s * width + col] = sum;
    }
  }
}

KnnResult batch_knn(const BatchKnnInput& in) {
  KnnResult result(in.n);
  for (std::size_t i = 0; i < in.n; ++i) {
    for (const auto& members : in.batch_members) {
      std::vector<Neighbor> cand;
      for (std::size_t j : members) {
        if (j == i) continue;
        double sq = 0.0;
        for (std::size_t d = 0; d < in.dims; ++d) {
          const double diff = in.coords[i * in.dims + d] - in.coords[j * in.dims + d];
          sq += diff * diff;
        }
        cand.push_back({std::sqrt(sq), j});
      }
      std::sort(cand.begin(), cand.end(), [](const Neighbor& x, const Neighbor& y) {
        return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
      });
      const std::size_t take = std::min(in.k, cand.size());
      result[i].insert(result[i].end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }
  return result;
}

std::vector<double> forman_curvature(const CurvatureInput& in) {
  const std::size_t n = in.row_ptr.size() - 1;
  std::vector<double> out(in.col_idx.size());
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t e = in.row_ptr[u]; e < in.row_ptr[u + 1]; ++e) {
      const std::size_t v = in.col_idx[e];
      const double we = in.weight[e];
      double sum = 0.0;
      for (std::size_t f = in.row_ptr[u]; f < in.row_ptr[u + 1]; ++f) {
        if (in.col_idx[f] == v) continue;
        sum += 1.0 / std::sqrt(we * in.weight[f]);
      }
      for (std::size_t f = in.row_ptr[v]; f < in.row_ptr[v + 1]; ++f) {
        if (in.col_idx[f] == u) continue;
        sum += 1.0 / std::sqrt(we * in.weight[f]);
      }
      out[e] = we * (1.0 / we + 1.0 / we - sum);
    }
  }
  return out;
}

}  // namespace egat::kernels::serial
