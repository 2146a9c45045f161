// merge_attn_states_lse, optimized: the mixing weights and their
// normalization are computed once per (seq, head) pair instead of once per
// element, and the value rows are read through vectorized half2 loads. One
// warp cooperates on one output row.

#include <cuda_fp16.h>
#include <cuda_runtime.h>
#include <math.h>

__global__ void merge_attn_states_lse_kernel_opt(
    const __half* __restrict__ va,
    const float* __restrict__ sa,
    const __half* __restrict__ vb,
    const float* __restrict__ sb,
    __half* __restrict__ vout,
    float* __restrict__ sout,
    long long n_pairs,
    long long dim) {
  const int lane = threadIdx.x & 31;
  const int warps_per_block = blockDim.x >> 5;
  long long pair = blockIdx.x * (long long)warps_per_block + (threadIdx.x >> 5);
  if (pair >= n_pairs) {
    return;
  }

  // compute the mixing weights once per output row
  float score_a = sa[pair];
  float score_b = sb[pair];
  float smax = fmaxf(score_a, score_b);
  float wa = expf(score_a - smax);
  float wb = expf(score_b - smax);
  float inv = 1.0f / (wa + wb + 1e-12f);
  float a = wa * inv;
  float b = wb * inv;

  const __half2* va2 = reinterpret_cast<const __half2*>(va + pair * dim);
  const __half2* vb2 = reinterpret_cast<const __half2*>(vb + pair * dim);
  __half2* out2 = reinterpret_cast<__half2*>(vout + pair * dim);
  long long dim2 = dim >> 1;

  // lightweight inner loop: paired loads, multiply-add, paired store
  for (long long d = lane; d < dim2; d += 32) {
    float2 fa = __half22float2(va2[d]);
    float2 fb = __half22float2(vb2[d]);
    float2 merged;
    merged.x = a * fa.x + b * fb.x;
    merged.y = a * fa.y + b * fb.y;
    out2[d] = __float22half2_rn(merged);
  }
  if ((dim & 1) && lane == 0) {
    long long last = dim - 1;
    float merged = a * __half2float(va[pair * dim + last]) +
                   b * __half2float(vb[pair * dim + last]);
    vout[pair * dim + last] = __float2half(merged);
  }

  if (lane == 0) {
    sout[pair] = smax + logf(wa + wb);
  }
}

extern "C" void kernel_entry(void* const* tensors,
                             const double* scalars,
                             const long long* dims,
                             int n_tensors,
                             int n_scalars,
                             int n_dims,
                             const int* grid,
                             const int* block,
                             void* stream) {
  (void)scalars;
  (void)n_scalars;
  (void)n_tensors;
  (void)n_dims;
  long long seq = dims[0];
  long long heads = dims[1];
  long long dim = dims[2];
  long long n_pairs = seq * heads;

  const __half* va = static_cast<const __half*>(tensors[0]);
  const float* sa = static_cast<const float*>(tensors[1]);
  const __half* vb = static_cast<const __half*>(tensors[2]);
  const float* sb = static_cast<const float*>(tensors[3]);
  __half* vout = static_cast<__half*>(tensors[4]);
  float* sout = static_cast<float*>(tensors[5]);

  int threads = (block != nullptr && block[0] > 0) ? block[0] : 256;
  int warps_per_block = threads >> 5;
  long long blocks =
      (grid != nullptr && grid[0] > 0)
          ? grid[0]
          : (n_pairs + warps_per_block - 1) / warps_per_block;
  cudaStream_t s = static_cast<cudaStream_t>(stream);
  merge_attn_states_lse_kernel_opt<<<(unsigned int)blocks, threads, 0, s>>>(
      va, sa, vb, sb, vout, sout, n_pairs, dim);
}
